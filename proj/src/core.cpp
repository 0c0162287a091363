#include "contend/core.hpp"

#include <algorithm>
#include <cmath>

namespace contend {

std::string_view to_string(Feedback f) {
    return f == Feedback::Ternary ? "ternary" : "ack";
}

std::optional<Feedback> parse_feedback(std::string_view s) {
    if (s == "ack" || s == "acknowledgement") return Feedback::AcknowledgementBased;
    if (s == "ternary") return Feedback::Ternary;
    return std::nullopt;
}

void GameConfig::validate() const {
    if (n < 1) throw PreconditionError("n must be >= 1 (got " + std::to_string(n) + ")");
    if (k < 1) throw PreconditionError("k must be >= 1 (got " + std::to_string(k) + ")");
}

GameConfig GameConfig::make(int n, int k, Feedback feedback) {
    GameConfig c{n, k, feedback};
    c.validate();
    return c;
}

DecisionRule::DecisionRule(std::span<const double> probs) : probs_(probs.begin(), probs.end()) {
    validate();
}

DecisionRule::DecisionRule(std::initializer_list<double> probs) : probs_(probs.begin(), probs.end()) {
    validate();
}

void DecisionRule::validate() const {
    if (probs_.size() < 2) throw PreconditionError("decision rule needs at least actions {0, 1}");
    double sum = 0.0;
    for (double p : probs_) {
        if (!(p >= 0.0 && p <= 1.0)) throw PreconditionError("decision rule entry outside [0, 1]");
        sum += p;
    }
    if (std::abs(sum - 1.0) > kRuleTolerance)
        throw PreconditionError("decision rule does not sum to 1");
}

DecisionRule DecisionRule::point_mass(int k, Action a) {
    if (k < 1 || a.value < 0 || a.value > k) throw PreconditionError("point mass action outside [0, k]");
    DecisionRule r;
    r.probs_.assign(static_cast<std::size_t>(k) + 1, 0.0);
    r.probs_[static_cast<std::size_t>(a.value)] = 1.0;
    return r;
}

DecisionRule DecisionRule::symmetric(int k, double per_channel) {
    if (k < 1) throw PreconditionError("k must be >= 1");
    DecisionRule r;
    r.probs_.assign(static_cast<std::size_t>(k) + 1, per_channel);
    // k * (1/k) can land one ulp above 1
    r.probs_[0] = std::max(0.0, 1.0 - k * per_channel);
    r.validate();
    return r;
}

double DecisionRule::transmit_mass() const {
    double s = 0.0;
    for (std::size_t a = 1; a < probs_.size(); ++a) s += probs_[a];
    return s;
}

std::optional<Action> DecisionRule::point() const {
    for (std::size_t a = 0; a < probs_.size(); ++a)
        if (probs_[a] == 1.0) return Action{static_cast<int>(a)};
    return std::nullopt;
}

void resolve_round_into(std::span<const Action> actions, int k, RoundOutcome& out) {
    if (k < 1) throw PreconditionError("k must be >= 1");
    out.attempted.assign(actions.begin(), actions.end());
    out.per_channel_count.assign(static_cast<std::size_t>(k), 0);
    out.successes.clear();
    for (Action a : actions) {
        if (a.value < 0 || a.value > k)
            throw PreconditionError("action " + std::to_string(a.value) + " outside [0, " +
                                    std::to_string(k) + "]");
        if (a.transmits()) ++out.per_channel_count[static_cast<std::size_t>(a.value - 1)];
    }
    for (std::size_t i = 0; i < actions.size(); ++i) {
        Action a = actions[i];
        if (a.transmits() && out.per_channel_count[static_cast<std::size_t>(a.value - 1)] == 1)
            out.successes.push_back(static_cast<int>(i));
    }
}

RoundOutcome resolve_round(std::span<const Action> actions, int k) {
    RoundOutcome out;
    resolve_round_into(actions, k, out);
    return out;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    // splitmix64 finalizer over both words
    auto fmix = [](std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    };
    return fmix(fmix(seed) ^ stream);
}

RandomStream::RandomStream(std::uint64_t seed, std::uint64_t stream) : engine_(mix_seed(seed, stream)) {}

Action sample_action(const DecisionRule& rule, RandomStream& rng) {
    auto probs = rule.probs();
    double u = rng.uniform();
    double acc = 0.0;
    int last_positive = 0;
    for (std::size_t a = 0; a < probs.size(); ++a) {
        if (probs[a] <= 0.0) continue;
        acc += probs[a];
        last_positive = static_cast<int>(a);
        if (u < acc) return Action{last_positive};
    }
    // rounding left u above the cumulative sum
    return Action{last_positive};
}

}  // namespace contend
