#include "contend/protocols.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "contend/equilibrium.hpp"

namespace contend {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

int pending_or_throw(const FeedbackView& view, std::string_view who) {
    if (!view.pending_count)
        throw PreconditionError(std::string(who) + " needs ternary feedback (pending count missing)");
    if (*view.pending_count < 1) throw PreconditionError("pending count must be >= 1");
    return *view.pending_count;
}

DecisionRule sop_rule(int m, int k) {
    return DecisionRule::symmetric(k, 1.0 / static_cast<double>(std::max(m, k)));
}

// Shared by g1 and r: uniform channel draw at t0, then the drawn channel forever.
DecisionRule lock_rule(const FeedbackView& view, int k, std::int64_t t0) {
    if (view.round == t0) return DecisionRule::symmetric(k, 1.0 / k);
    auto idx = static_cast<std::size_t>(t0 - 1);
    if (view.own_history.size() <= idx)
        throw PreconditionError("deadline protocol queried past t0 without the round-t0 action in history");
    Action locked = view.own_history[idx];
    if (!locked.transmits()) throw PreconditionError("round-t0 action of a deadline protocol was silent");
    return DecisionRule::point_mass(k, locked);
}

}  // namespace

std::string_view to_string(RoundsRule r) {
    return r == RoundsRule::LogOfHalfN ? "log-half-n" : "half-log-n";
}

std::string_view to_string(G1Mass m) {
    return m == G1Mass::Literal ? "literal" : "estimate";
}

int DeadlineSchedule::interval_of(std::int64_t t) const {
    if (t < 1) throw PreconditionError("round must be >= 1");
    if (t >= t0) return -1;
    auto it = std::upper_bound(interval_starts.begin(), interval_starts.end(), t);
    return static_cast<int>(it - interval_starts.begin()) - 1;
}

DeadlineSchedule build_deadline_schedule(int n, int k, double beta, RoundsRule rounds, G1Mass mass) {
    if (k < 1) throw PreconditionError("k must be >= 1");
    if (n < 2 * k + 1)
        throw PreconditionError("deadline schedule needs n >= 2k+1 (n=" + std::to_string(n) +
                                ", k=" + std::to_string(k) + ")");
    if (!(beta > 0.0 && beta < 1.0)) throw PreconditionError("beta must lie in (0, 1)");

    DeadlineSchedule s;
    s.n = n;
    s.k = k;
    s.beta = beta;
    s.rounds_rule = rounds;
    s.mass = mass;

    double x = rounds == RoundsRule::LogOfHalfN ? -std::log(n / 2.0) / std::log(beta)
                                                : -std::log(static_cast<double>(n)) / std::log(beta) / 2.0;
    s.r = std::max(0, static_cast<int>(std::floor(x)));

    std::int64_t start = 1;
    for (int j = 1; j <= s.r + 1; ++j) {
        double nj = std::pow(beta, j) * n / k;
        std::int64_t len;
        if (j <= s.r)
            len = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::floor(std::numbers::e / beta * nj)));
        else
            len = (n + k - 1) / k;
        s.pending_scale.push_back(nj);
        s.interval_lengths.push_back(len);
        s.interval_starts.push_back(start);
        double est = mass == G1Mass::Literal ? nj : k * nj;
        s.mass_denominator.push_back(std::max(est, static_cast<double>(k)));
        start += len;
    }
    s.t0 = start;
    return s;
}

std::int64_t ternary_deadline(int n, int k) {
    if (k < 1) throw PreconditionError("k must be >= 1");
    if (n < 2 * k + 1)
        throw PreconditionError("protocol r needs n >= 2k+1 (n=" + std::to_string(n) + ", k=" +
                                std::to_string(k) + ")");
    return static_cast<std::int64_t>(std::ceil(4.0 * std::numbers::e * (n - k) / k));
}

ProtocolKind Protocol::kind() const {
    return std::visit(overloaded{
                          [](const Uniform&) { return ProtocolKind::UniformFk; },
                          [](const Sop&) { return ProtocolKind::Sop; },
                          [](const G1&) { return ProtocolKind::DeadlineAckG1; },
                          [](const R&) { return ProtocolKind::DeadlineTernaryR; },
                          [](const TernaryEq&) { return ProtocolKind::TernaryEquilibrium; },
                          [](const Delay&) { return ProtocolKind::DelayedStartDeviation; },
                          [](const Prefix&) { return ProtocolKind::FixedHistoryDeviation; },
                      },
                      impl_);
}

int Protocol::channels() const {
    return std::visit(overloaded{
                          [](const Uniform& u) { return u.k; },
                          [](const Sop& s) { return s.k; },
                          [](const G1& g) { return g.schedule->k; },
                          [](const R& r) { return r.k; },
                          [](const TernaryEq&) { return 2; },
                          [](const Delay& d) { return d.k; },
                          [](const Prefix& p) { return p.tail->channels(); },
                      },
                      impl_);
}

std::string Protocol::name() const {
    return std::visit(
        overloaded{
            [](const Uniform& u) { return "uniform:k=" + std::to_string(u.k); },
            [](const Sop&) { return std::string("sop"); },
            [](const G1& g) {
                char buf[32];
                std::snprintf(buf, sizeof buf, "%g", g.schedule->beta);
                return "g1:beta=" + std::string(buf) + ";mass=" + std::string(to_string(g.schedule->mass)) +
                       ";rounds=" + std::string(to_string(g.schedule->rounds_rule));
            },
            [](const R&) { return std::string("deadline-r"); },
            [](const TernaryEq&) { return std::string("ternary-eq"); },
            [](const Delay&) { return std::string("delay1"); },
            [](const Prefix& p) {
                std::string s = "prefix:";
                for (std::size_t i = 0; i < p.prefix.size(); ++i) {
                    if (i) s += ',';
                    s += std::to_string(p.prefix[i].value);
                }
                return s + ";tail=" + p.tail->name();
            },
        },
        impl_);
}

DecisionRule Protocol::decision_rule(const FeedbackView& view) const {
    if (view.round < 1) throw PreconditionError("round must be >= 1");
    return std::visit(
        overloaded{
            [&](const Uniform& u) { return DecisionRule::symmetric(u.k, 1.0 / u.k); },
            [&](const Sop& s) { return sop_rule(pending_or_throw(view, "sop"), s.k); },
            [&](const G1& g) {
                const DeadlineSchedule& sch = *g.schedule;
                int j = sch.interval_of(view.round);
                if (j >= 0)
                    return DecisionRule::symmetric(sch.k, 1.0 / sch.mass_denominator[static_cast<std::size_t>(j)]);
                return lock_rule(view, sch.k, sch.t0);
            },
            [&](const R& r) {
                if (view.round < r.t0) return sop_rule(pending_or_throw(view, "deadline-r"), r.k);
                return lock_rule(view, r.k, r.t0);
            },
            [&](const TernaryEq& e) {
                int m = pending_or_throw(view, "ternary-eq");
                if (!e.table->covers(m))
                    throw PreconditionError("pending count " + std::to_string(m) +
                                            " exceeds equilibrium table (max_m=" +
                                            std::to_string(e.table->max_m) + ")");
                if (m == 1) return DecisionRule{0.0, 0.5, 0.5};
                return DecisionRule::symmetric(2, static_cast<double>(e.table->p[static_cast<std::size_t>(m)]));
            },
            [&](const Delay& d) {
                if (view.round == 1) return DecisionRule::point_mass(d.k, kSilent);
                return DecisionRule::symmetric(d.k, 1.0 / d.k);
            },
            [&](const Prefix& p) {
                if (view.round <= static_cast<std::int64_t>(p.prefix.size()))
                    return DecisionRule::point_mass(p.tail->channels(),
                                                    p.prefix[static_cast<std::size_t>(view.round - 1)]);
                return p.tail->decision_rule(view);
            },
        },
        impl_);
}

bool Protocol::is_memoryless() const {
    return std::holds_alternative<Uniform>(impl_) || std::holds_alternative<Sop>(impl_);
}

bool Protocol::requires_pending_count() const {
    return std::visit(overloaded{
                          [](const Sop&) { return true; },
                          [](const R&) { return true; },
                          [](const TernaryEq&) { return true; },
                          [](const Prefix& p) { return p.tail->requires_pending_count(); },
                          [](const auto&) { return false; },
                      },
                      impl_);
}

bool Protocol::is_locked(const FeedbackView& view) const {
    return std::visit(overloaded{
                          [](const Uniform& u) { return u.k == 1; },
                          [&](const G1& g) { return view.round > g.schedule->t0; },
                          [&](const R& r) { return view.round > r.t0; },
                          [&](const Delay& d) { return d.k == 1 && view.round > 1; },
                          [&](const Prefix& p) {
                              return view.round > static_cast<std::int64_t>(p.prefix.size()) &&
                                     p.tail->is_locked(view);
                          },
                          [](const auto&) { return false; },
                      },
                      impl_);
}

std::optional<std::int64_t> Protocol::deadline() const {
    if (auto* g = std::get_if<G1>(&impl_)) return g->schedule->t0;
    if (auto* r = std::get_if<R>(&impl_)) return r->t0;
    if (auto* p = std::get_if<Prefix>(&impl_)) return p->tail->deadline();
    return std::nullopt;
}

const DeadlineSchedule* Protocol::schedule() const {
    if (auto* g = std::get_if<G1>(&impl_)) return g->schedule.get();
    return nullptr;
}

const EquilibriumTable* Protocol::table() const {
    if (auto* e = std::get_if<TernaryEq>(&impl_)) return e->table.get();
    return nullptr;
}

std::optional<std::vector<Action>> Protocol::uniform_prefix(int k) const {
    using Seq = std::optional<std::vector<Action>>;
    return std::visit(overloaded{
                          [&](const Uniform& u) -> Seq {
                              if (u.k != k) return std::nullopt;
                              return std::vector<Action>{};
                          },
                          [&](const Delay& d) -> Seq {
                              if (d.k != k) return std::nullopt;
                              return std::vector<Action>{kSilent};
                          },
                          [&](const Prefix& p) -> Seq {
                              auto tail = p.tail->uniform_prefix(k);
                              if (!tail) return std::nullopt;
                              // the tail sees global rounds, so its first |prefix| rounds never play
                              std::vector<Action> seq = p.prefix;
                              for (std::size_t i = p.prefix.size(); i < tail->size(); ++i) seq.push_back((*tail)[i]);
                              return seq;
                          },
                          [](const auto&) -> Seq { return std::nullopt; },
                      },
                      impl_);
}

Protocol uniform_protocol(int k) {
    if (k < 1) throw PreconditionError("k must be >= 1");
    return Protocol(Protocol::Uniform{k});
}

Protocol sop_protocol(int k) {
    if (k < 1) throw PreconditionError("k must be >= 1");
    return Protocol(Protocol::Sop{k});
}

Protocol deadline_ack_protocol(int n, int k, double beta, RoundsRule rounds, G1Mass mass) {
    return Protocol(Protocol::G1{std::make_shared<const DeadlineSchedule>(build_deadline_schedule(n, k, beta, rounds, mass))});
}

Protocol deadline_ternary_protocol(int n, int k) {
    return Protocol(Protocol::R{n, k, ternary_deadline(n, k)});
}

Protocol ternary_equilibrium_protocol(std::shared_ptr<const EquilibriumTable> table) {
    if (!table || table->max_m < 2) throw PreconditionError("equilibrium table must cover m >= 2");
    return Protocol(Protocol::TernaryEq{std::move(table)});
}

Protocol delayed_start_deviation(int k) {
    if (k < 1) throw PreconditionError("k must be >= 1");
    return Protocol(Protocol::Delay{k});
}

Protocol fixed_history_deviation(std::vector<Action> prefix, Protocol tail) {
    if (prefix.empty()) throw PreconditionError("prefix must be non-empty");
    int k = tail.channels();
    for (Action a : prefix)
        if (a.value < 0 || a.value > k)
            throw PreconditionError("prefix action " + std::to_string(a.value) + " outside [0, " +
                                    std::to_string(k) + "]");
    return Protocol(Protocol::Prefix{std::move(prefix), std::make_shared<const Protocol>(std::move(tail))});
}

bool is_consistent_with_uniform(std::span<const Action> prefix) {
    return std::none_of(prefix.begin(), prefix.end(), [](Action a) { return !a.transmits(); });
}

// ---- spec parsing --------------------------------------------------------

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    return s;
}

int parse_int(std::string_view s, std::string_view what) {
    s = trim(s);
    int v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        throw PreconditionError("invalid integer for " + std::string(what) + ": '" + std::string(s) + "'");
    return v;
}

double parse_real(std::string_view s, std::string_view what) {
    std::string str(trim(s));
    std::size_t pos = 0;
    double v = 0;
    try {
        v = std::stod(str, &pos);
    } catch (const std::exception&) {
        pos = std::string::npos;
    }
    if (pos != str.size())
        throw PreconditionError("invalid number for " + std::string(what) + ": '" + str + "'");
    return v;
}

struct KeyValue {
    std::string_view key;
    std::string_view value;
};

std::vector<KeyValue> split_params(std::string_view params) {
    std::vector<KeyValue> out;
    while (!params.empty()) {
        auto semi = params.find(';');
        std::string_view item = params.substr(0, semi);
        params = semi == std::string_view::npos ? std::string_view{} : params.substr(semi + 1);
        item = trim(item);
        if (item.empty()) continue;
        auto eq = item.find('=');
        if (eq == std::string_view::npos)
            out.push_back({{}, item});
        else
            out.push_back({trim(item.substr(0, eq)), trim(item.substr(eq + 1))});
    }
    return out;
}

[[noreturn]] void unknown_key(std::string_view name, std::string_view key) {
    throw PreconditionError("unknown parameter '" + std::string(key) + "' for protocol '" + std::string(name) + "'");
}

void check_channels(const Protocol& p, const GameConfig& config) {
    if (p.channels() > config.k)
        throw PreconditionError("protocol '" + p.name() + "' uses " + std::to_string(p.channels()) +
                                " channels but the game has k=" + std::to_string(config.k));
}

}  // namespace

Protocol parse_protocol(std::string_view spec, const GameConfig& config) {
    config.validate();
    spec = trim(spec);
    auto colon = spec.find(':');
    std::string_view name = trim(spec.substr(0, colon));
    std::string_view params = colon == std::string_view::npos ? std::string_view{} : spec.substr(colon + 1);

    if (name == "prefix") {
        // the tail spec may contain ':' and ';', so it runs to the end
        auto tail_pos = params.find("tail=");
        if (tail_pos == std::string_view::npos) throw PreconditionError("prefix protocol needs tail=<protocol>");
        std::string_view tail_spec = params.substr(tail_pos + 5);
        std::string_view head = params.substr(0, tail_pos);
        std::string_view actions;
        for (auto& kv : split_params(head)) {
            if (kv.key.empty() || kv.key == "actions")
                actions = kv.value;
            else
                unknown_key(name, kv.key);
        }
        std::vector<Action> prefix;
        while (!actions.empty()) {
            auto comma = actions.find(',');
            prefix.push_back(Action{parse_int(actions.substr(0, comma), "prefix action")});
            actions = comma == std::string_view::npos ? std::string_view{} : actions.substr(comma + 1);
        }
        Protocol p = fixed_history_deviation(std::move(prefix), parse_protocol(tail_spec, config));
        check_channels(p, config);
        return p;
    }

    auto kvs = split_params(params);
    auto positional_check = [&] {
        for (auto& kv : kvs)
            if (kv.key.empty()) throw PreconditionError("expected key=value in protocol spec '" + std::string(spec) + "'");
    };
    positional_check();

    std::optional<Protocol> out;
    if (name == "uniform" || name == "fk") {
        int k = config.k;
        for (auto& kv : kvs) {
            if (kv.key == "k")
                k = parse_int(kv.value, "k");
            else
                unknown_key(name, kv.key);
        }
        out = uniform_protocol(k);
    } else if (name == "sop") {
        for (auto& kv : kvs) unknown_key(name, kv.key);
        out = sop_protocol(config.k);
    } else if (name == "g1") {
        double beta = 0.5;
        G1Mass mass = G1Mass::Literal;
        RoundsRule rounds = RoundsRule::LogOfHalfN;
        for (auto& kv : kvs) {
            if (kv.key == "beta") {
                beta = parse_real(kv.value, "beta");
            } else if (kv.key == "mass") {
                if (kv.value == "literal")
                    mass = G1Mass::Literal;
                else if (kv.value == "estimate")
                    mass = G1Mass::PendingEstimate;
                else
                    throw PreconditionError("mass must be literal or estimate");
            } else if (kv.key == "rounds") {
                if (kv.value == "log-half-n")
                    rounds = RoundsRule::LogOfHalfN;
                else if (kv.value == "half-log-n")
                    rounds = RoundsRule::HalfOfLogN;
                else
                    throw PreconditionError("rounds must be log-half-n or half-log-n");
            } else {
                unknown_key(name, kv.key);
            }
        }
        out = deadline_ack_protocol(config.n, config.k, beta, rounds, mass);
    } else if (name == "deadline-r" || name == "r") {
        for (auto& kv : kvs) unknown_key(name, kv.key);
        out = deadline_ternary_protocol(config.n, config.k);
    } else if (name == "ternary-eq") {
        int max_m = config.n;
        for (auto& kv : kvs) {
            if (kv.key == "max_m")
                max_m = parse_int(kv.value, "max_m");
            else
                unknown_key(name, kv.key);
        }
        if (config.k != 2) throw PreconditionError("ternary-eq is defined for k=2 only");
        if (max_m < std::max(config.n, 2)) throw PreconditionError("ternary-eq max_m must cover n");
        out = ternary_equilibrium_protocol(
            std::make_shared<const EquilibriumTable>(solve_equilibrium_table(max_m, 1e-12L)));
    } else if (name == "delay1") {
        int k = config.k;
        for (auto& kv : kvs) {
            if (kv.key == "k")
                k = parse_int(kv.value, "k");
            else
                unknown_key(name, kv.key);
        }
        out = delayed_start_deviation(k);
    } else {
        throw PreconditionError("unknown protocol '" + std::string(name) +
                                "' (expected uniform, sop, g1, deadline-r, ternary-eq, delay1, prefix)");
    }
    check_channels(*out, config);
    return *out;
}

}  // namespace contend
