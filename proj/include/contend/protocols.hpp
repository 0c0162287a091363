#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "contend/core.hpp"
#include "contend/equilibrium_table.hpp"

namespace contend {

enum class ProtocolKind {
    UniformFk,
    Sop,
    DeadlineAckG1,
    DeadlineTernaryR,
    TernaryEquilibrium,
    DelayedStartDeviation,
    FixedHistoryDeviation,
};

// How r is read from "the unique integer in [-log_b n/2 - 1, -log_b n/2]".
enum class RoundsRule { LogOfHalfN, HalfOfLogN };

// Per-channel mass in interval j: 1/max{n_j, k} (Literal) or 1/max{k n_j, k}.
enum class G1Mass { Literal, PendingEstimate };

std::string_view to_string(RoundsRule r);
std::string_view to_string(G1Mass m);

struct DeadlineSchedule {
    int n = 0;
    int k = 0;
    double beta = 0.5;
    RoundsRule rounds_rule = RoundsRule::LogOfHalfN;
    G1Mass mass = G1Mass::Literal;
    int r = 0;
    std::vector<double> pending_scale;             // n_j, j = 1..r+1
    std::vector<std::int64_t> interval_lengths;    // l_j
    std::vector<std::int64_t> interval_starts;     // first round of I_j
    std::vector<double> mass_denominator;          // per interval
    std::int64_t t0 = 1;

    // 0-based interval index of round t, or -1 when t >= t0.
    int interval_of(std::int64_t t) const;
};

DeadlineSchedule build_deadline_schedule(int n, int k, double beta,
                                         RoundsRule rounds = RoundsRule::LogOfHalfN,
                                         G1Mass mass = G1Mass::Literal);

std::int64_t ternary_deadline(int n, int k);

class Protocol {
public:
    ProtocolKind kind() const;
    int channels() const;
    std::string name() const;

    DecisionRule decision_rule(const FeedbackView& view) const;

    // Rule depends on the pending count and k only.
    bool is_memoryless() const;
    bool requires_pending_count() const;
    // Rule at this round and every later round is the same point mass.
    bool is_locked(const FeedbackView& view) const;
    std::optional<std::int64_t> deadline() const;
    const DeadlineSchedule* schedule() const;
    const EquilibriumTable* table() const;
    // Forced actions before the protocol behaves as f^k, when it has that
    // shape (empty for f^k itself).
    std::optional<std::vector<Action>> uniform_prefix(int k) const;

    friend Protocol uniform_protocol(int k);
    friend Protocol sop_protocol(int k);
    friend Protocol deadline_ack_protocol(int n, int k, double beta, RoundsRule rounds, G1Mass mass);
    friend Protocol deadline_ternary_protocol(int n, int k);
    friend Protocol ternary_equilibrium_protocol(std::shared_ptr<const EquilibriumTable> table);
    friend Protocol delayed_start_deviation(int k);
    friend Protocol fixed_history_deviation(std::vector<Action> prefix, Protocol tail);

private:
    struct Uniform { int k; };
    struct Sop { int k; };
    struct G1 { std::shared_ptr<const DeadlineSchedule> schedule; };
    struct R { int n; int k; std::int64_t t0; };
    struct TernaryEq { std::shared_ptr<const EquilibriumTable> table; };
    struct Delay { int k; };
    struct Prefix { std::vector<Action> prefix; std::shared_ptr<const Protocol> tail; };
    using Impl = std::variant<Uniform, Sop, G1, R, TernaryEq, Delay, Prefix>;

    explicit Protocol(Impl impl) : impl_(std::move(impl)) {}

    Impl impl_;
};

Protocol uniform_protocol(int k);
Protocol sop_protocol(int k);
Protocol deadline_ack_protocol(int n, int k, double beta,
                               RoundsRule rounds = RoundsRule::LogOfHalfN,
                               G1Mass mass = G1Mass::Literal);
Protocol deadline_ternary_protocol(int n, int k);
Protocol ternary_equilibrium_protocol(std::shared_ptr<const EquilibriumTable> table);
Protocol delayed_start_deviation(int k);
Protocol fixed_history_deviation(std::vector<Action> prefix, Protocol tail);

// A prefix is consistent with f^k iff it never stays silent.
bool is_consistent_with_uniform(std::span<const Action> prefix);

// name[:key=value[;key=value]*]; see README for the list.
Protocol parse_protocol(std::string_view spec, const GameConfig& config);

}  // namespace contend
