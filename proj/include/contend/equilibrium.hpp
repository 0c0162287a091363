#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "contend/core.hpp"
#include "contend/equilibrium_table.hpp"
#include "contend/protocols.hpp"
#include "contend/rational.hpp"

namespace contend {

// ---- ternary feedback, two channels --------------------------------------

// One round with m pending players. The m-1 opponents each play
// (1-2p, p, p). Superscripts name the next pending count; "x" is the
// focal player's own success.
struct TernaryKernels {
    long double q_success = 0, q_one = 0, q_none = 0;            // focal player transmits
    long double s_one = 0, s_two = 0, s_none = 0;                // focal player silent
    long double p_success = 0, p_one = 0, p_two = 0, p_none = 0;  // focal player mixes like the others
};

TernaryKernels ternary_kernels(int m, long double p);

struct OneStepValues {
    long double transmit = 0;
    long double silent = 0;
};

// 1 + Q^m F_m + Q^{m-1} F_{m-1} versus 1 + S^m F_m + S^{m-1} F_{m-1} + S^{m-2} F_{m-2}
OneStepValues one_step_values(int m, long double p, long double F_m, long double F_m1, long double F_m2);

// Cross-multiplied transmit-minus-silent gap with F_m eliminated; the
// equilibrium p_m is its root (or 1/2 when transmitting dominates).
long double indifference_gap(int m, long double p, long double F_m1, long double F_m2);

// F_m from the kernels at m-1 (with p_prev) and at m (with p).
long double future_latency_from_kernels(int m, long double p_prev, long double p);

// h(p) = (1 - Q_m^m) F_m - 1 - Q_m^{m-1} F_{m-1}, F_m from the kernels.
long double equilibrium_residual(int m, long double p_candidate, const EquilibriumTable& table);

struct SolverOptions {
    long double tol = 1e-12L;
    int grid_points = 10000;
    long double scan_lo = 1e-6L;
};

EquilibriumTable solve_equilibrium_table(int max_m, long double tol = 1e-12L);
EquilibriumTable solve_equilibrium_table(int max_m, const SolverOptions& options);

void write_table_csv(std::ostream& os, const EquilibriumTable& table, bool bound_columns);
nlohmann::ordered_json table_to_json(const EquilibriumTable& table);

// ---- three players, two channels, advantageous deviator -------------------

struct MdpPolicy {
    double q1 = 1, z1 = 0.5;
    double q2 = 1, z2 = 0.5;
    double q3 = 1, z3 = 0.5;

    void validate() const;
};

struct MdpCosts {
    double c1 = 0, c2 = 0, c3 = 0;
};

MdpCosts mdp_cost(const MdpPolicy& policy);
// Generic transition enumeration plus back substitution.
MdpCosts mdp_policy_evaluation(const MdpPolicy& policy);

struct ValueIterationResult {
    std::array<double, 3> cost{};
    std::array<bool, 3> transmit_optimal{};
    std::array<bool, 3> silent_optimal{};
    int iterations = 0;
};

ValueIterationResult mdp_value_iteration(double threshold = 1e-12);

struct MdpOptimum {
    MdpCosts optimal;         // componentwise minima
    MdpPolicy witness;        // attains optimal.c3
    std::string witness_set;
    double grid_min_c3 = 0;
    double boundary_min_c3 = 0;
    int grid = 0;
};

MdpOptimum mdp_minimize(int grid = 50);

// ---- acknowledgement-based deviation harness -----------------------------

enum class Verdict { EquilibriumConsistent, Violated, Inconclusive };

std::string_view to_string(Verdict v);

struct DeviationOutcome {
    std::string name;
    bool consistent = false;     // realizable under f^k
    bool exact = false;
    Rational exact_latency;      // when exact
    double latency = 0;
    double std_error = 0;        // 0 when exact
    double improvement = 0;      // base minus deviation
    std::int64_t trials = 0;
    Verdict verdict = Verdict::EquilibriumConsistent;
};

struct AckCheckReport {
    int n = 0;
    int k = 0;
    int horizon = 0;
    Rational base_latency;
    std::vector<DeviationOutcome> deviations;
    Verdict verdict = Verdict::EquilibriumConsistent;
    std::optional<std::size_t> witness;  // first improving deviation
    std::optional<std::size_t> best;     // largest improvement
    std::optional<std::int64_t> required_trials;
};

struct AckCheckOptions {
    bool monte_carlo = true;
    std::int64_t trials = 200000;
    std::int64_t cutoff = 0;  // 0 = simulator default
    std::uint64_t seed = 1;
    int workers = 0;
};

// Every prefix of length 1..horizon over {0..k}, shortest first, then lexicographic.
std::vector<std::vector<Action>> enumerate_prefixes(int k, int horizon);

// Deviator plays prefix, then f^k; everyone else plays f^k throughout.
Rational prefix_deviation_latency(int n, int k, std::span<const Action> prefix);

// Empty deviations: all prefixes up to horizon with an f^k tail.
AckCheckReport check_ack_equilibrium(int n, int k, int horizon, std::span<const Protocol> deviations,
                                     const AckCheckOptions& options = {});

nlohmann::ordered_json report_to_json(const AckCheckReport& report);

}  // namespace contend
