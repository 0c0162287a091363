#pragma once

#include <cstdint>
#include <initializer_list>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <boost/container/small_vector.hpp>

namespace contend {

// Raised when an operation is called outside its domain.
class PreconditionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Raised when a numerical procedure cannot produce an answer.
class SolverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Feedback { AcknowledgementBased, Ternary };

std::string_view to_string(Feedback f);
std::optional<Feedback> parse_feedback(std::string_view s);

struct GameConfig {
    int n = 1;
    int k = 1;
    Feedback feedback = Feedback::AcknowledgementBased;

    void validate() const;
    static GameConfig make(int n, int k, Feedback feedback);
};

// 0 = silent, a in [1, k] = transmit on channel a.
struct Action {
    int value = 0;

    constexpr bool transmits() const { return value != 0; }
    friend constexpr bool operator==(Action, Action) = default;
    friend constexpr auto operator<=>(Action, Action) = default;
};

inline constexpr Action kSilent{0};

inline constexpr double kRuleTolerance = 1e-12;

class DecisionRule {
public:
    using Storage = boost::container::small_vector<double, 8>;

    explicit DecisionRule(std::span<const double> probs);
    DecisionRule(std::initializer_list<double> probs);

    static DecisionRule point_mass(int k, Action a);
    // per_channel on each of the k channels, the rest on action 0.
    static DecisionRule symmetric(int k, double per_channel);

    int channels() const { return static_cast<int>(probs_.size()) - 1; }
    double operator[](Action a) const { return probs_.at(static_cast<std::size_t>(a.value)); }
    std::span<const double> probs() const { return {probs_.data(), probs_.size()}; }
    double transmit_mass() const;
    std::optional<Action> point() const;

private:
    DecisionRule() = default;
    void validate() const;

    Storage probs_;
};

using PersonalHistory = std::vector<Action>;

struct RoundOutcome {
    std::vector<Action> attempted;
    std::vector<int> successes;          // ascending player indices
    std::vector<int> per_channel_count;  // entry a-1 is the occupancy of channel a
};

struct FeedbackView {
    std::span<const Action> own_history;
    std::optional<int> pending_count;
    std::int64_t round = 1;
};

RoundOutcome resolve_round(std::span<const Action> actions, int k);

// Same as resolve_round but reuses the buffers in out.
void resolve_round_into(std::span<const Action> actions, int k, RoundOutcome& out);

// One independent stream per (seed, stream index).
class RandomStream {
public:
    RandomStream(std::uint64_t seed, std::uint64_t stream);

    std::uint64_t next() { return engine_(); }
    // 53-bit uniform in [0, 1)
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

private:
    std::mt19937_64 engine_;
};

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

// One uniform draw per call.
Action sample_action(const DecisionRule& rule, RandomStream& rng);

}  // namespace contend
