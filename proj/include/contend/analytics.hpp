#pragma once

#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "contend/rational.hpp"

namespace contend {

struct SuccessPmf {
    std::vector<double> probs;  // probs[x] = Pr(exactly x successes)

    double mean() const;
    double total() const;
};

// z n (1 - z/k)^(n-1), 0^0 = 1
double expected_successes(int n, int k, double z);

// Inclusion-exclusion over occupied singleton channels. Exact rationals
// for n <= 64, log-space terms with compensated summation beyond.
SuccessPmf success_count_pmf(int n, int k, double z);
std::vector<Rational> success_count_pmf_exact(int n, int k, const Rational& z);

double optimal_transmission_mass(int n, int k);

// One round of f^k seen from a tagged pending player among m.
struct FkTransition {
    Rational success;          // tagged player succeeds
    std::vector<Rational> fail;  // fail[x]: tagged fails and x others succeed
};

FkTransition fk_transition(int m, int k);

// Pending-count chain for the tagged player; index m in [1, n].
struct MarkovLatencyModel {
    int n = 0;
    int k = 0;
    std::vector<FkTransition> rows;
    std::vector<Rational> hitting;

    Rational max_row_defect() const;  // |1 - outgoing mass|, exact
    double max_residual() const;      // hitting-time equations
};

inline constexpr int kDefaultExactCap = 24;

MarkovLatencyModel build_fk_chain(int n, int k, int max_exact_n = kDefaultExactCap);
Rational fk_expected_latency(int n, int k, int max_exact_n = kDefaultExactCap);

Rational f2_closed_form_latency(int n);
Rational f2_deviation_latency(int n);
// Silent for one round among m pending f^2 players, f^2 afterwards.
Rational no_transmit_round_value(int m, int k = 2);

double finishing_bound_constant();
double sop_finishing_bound(int n, int k);
double small_regime_finishing_bound(int n, int k);
double deadline_tail_bound(int n, int k);

nlohmann::ordered_json analytic_record(std::string_view operation, nlohmann::ordered_json inputs,
                                       const Rational& value);
nlohmann::ordered_json analytic_record(std::string_view operation, nlohmann::ordered_json inputs, double value);

}  // namespace contend
