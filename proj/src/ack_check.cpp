#include <algorithm>
#include <cmath>

#include "contend/analytics.hpp"
#include "contend/equilibrium.hpp"
#include "contend/sim.hpp"

namespace contend {

namespace {

constexpr double kViolationSe = 4.0;
constexpr double kConsistentSe = 2.0;
constexpr std::int64_t kMaxPrefixes = 1000000;

Rational prefix_latency(const MarkovLatencyModel& chain, std::span<const Action> prefix) {
    const int n = chain.n, k = chain.k;
    std::vector<Rational> dist(static_cast<std::size_t>(n) + 1, Rational(0));
    dist[static_cast<std::size_t>(n)] = 1;
    Rational expected(0);
    for (Action a : prefix) {
        if (a.value < 0 || a.value > k) throw PreconditionError("prefix action outside [0, k]");
        std::vector<Rational> next(dist.size(), Rational(0));
        for (int m = 1; m <= n; ++m) {
            const Rational& w = dist[static_cast<std::size_t>(m)];
            if (w == 0) continue;
            expected += w;
            if (a.transmits()) {
                const auto& fail = chain.rows[static_cast<std::size_t>(m)].fail;
                for (std::size_t x = 0; x < fail.size(); ++x)
                    if (fail[x] != 0) next[static_cast<std::size_t>(m) - x] += w * fail[x];
            } else if (m == 1) {
                next[1] += w;
            } else {
                auto others = success_count_pmf_exact(m - 1, k, Rational(1));
                for (std::size_t x = 0; x < others.size(); ++x)
                    if (others[x] != 0) next[static_cast<std::size_t>(m) - x] += w * others[x];
            }
        }
        dist = std::move(next);
    }
    for (int m = 1; m <= n; ++m) expected += dist[static_cast<std::size_t>(m)] * chain.hitting[static_cast<std::size_t>(m)];
    return expected;
}

std::string prefix_name(std::span<const Action> prefix, int k) {
    if (prefix.size() == 1 && !prefix[0].transmits()) return "delay1";
    std::string s = "prefix:";
    for (std::size_t i = 0; i < prefix.size(); ++i) {
        if (i) s += ',';
        s += std::to_string(prefix[i].value);
    }
    return s + ";tail=uniform:k=" + std::to_string(k);
}

}  // namespace

std::string_view to_string(Verdict v) {
    switch (v) {
        case Verdict::EquilibriumConsistent: return "EQUILIBRIUM-CONSISTENT";
        case Verdict::Violated: return "VIOLATED";
        case Verdict::Inconclusive: return "INCONCLUSIVE";
    }
    return "?";
}

std::vector<std::vector<Action>> enumerate_prefixes(int k, int horizon) {
    if (k < 1) throw PreconditionError("k must be >= 1");
    if (horizon < 0) throw PreconditionError("horizon must be >= 0");
    std::int64_t total = 0, layer = 1;
    for (int len = 1; len <= horizon; ++len) {
        layer *= k + 1;
        total += layer;
        if (total > kMaxPrefixes)
            throw PreconditionError("horizon " + std::to_string(horizon) + " enumerates more than " +
                                    std::to_string(kMaxPrefixes) + " prefixes");
    }
    std::vector<std::vector<Action>> out;
    out.reserve(static_cast<std::size_t>(total));
    for (int len = 1; len <= horizon; ++len) {
        std::vector<Action> cur(static_cast<std::size_t>(len), kSilent);
        while (true) {
            out.push_back(cur);
            int pos = len - 1;
            while (pos >= 0 && cur[static_cast<std::size_t>(pos)].value == k) cur[static_cast<std::size_t>(pos--)] = kSilent;
            if (pos < 0) break;
            ++cur[static_cast<std::size_t>(pos)].value;
        }
    }
    return out;
}

Rational prefix_deviation_latency(int n, int k, std::span<const Action> prefix) {
    return prefix_latency(build_fk_chain(n, k), prefix);
}

AckCheckReport check_ack_equilibrium(int n, int k, int horizon, std::span<const Protocol> deviations,
                                     const AckCheckOptions& options) {
    GameConfig::make(n, k, Feedback::AcknowledgementBased);
    if (horizon < 0) throw PreconditionError("horizon must be >= 0");

    AckCheckReport rep;
    rep.n = n;
    rep.k = k;
    rep.horizon = horizon;

    std::vector<Protocol> generated;
    if (deviations.empty()) {
        for (auto& p : enumerate_prefixes(k, horizon)) {
            if (p.size() == 1 && !p[0].transmits())
                generated.push_back(delayed_start_deviation(k));
            else
                generated.push_back(fixed_history_deviation(std::move(p), uniform_protocol(k)));
        }
        deviations = generated;
    }

    std::optional<MarkovLatencyModel> chain;
    if (n <= kDefaultExactCap) chain = build_fk_chain(n, k);  // throws for an infinite base latency
    if (chain) rep.base_latency = chain->hitting[static_cast<std::size_t>(n)];

    const Protocol base = uniform_protocol(k);
    const GameConfig config{n, k, Feedback::AcknowledgementBased};
    double best_improvement = 0;

    for (const Protocol& dev : deviations) {
        if (dev.channels() > k) throw PreconditionError("deviation '" + dev.name() + "' uses more than k channels");
        DeviationOutcome out;
        auto seq = dev.uniform_prefix(k);
        out.name = seq && !seq->empty() ? prefix_name(*seq, k) : dev.name();
        out.consistent = seq ? is_consistent_with_uniform(*seq) : false;

        if (seq && chain) {
            out.exact = true;
            out.exact_latency = prefix_latency(*chain, *seq);
            out.latency = to_double(out.exact_latency);
            Rational gain = rep.base_latency - out.exact_latency;
            out.improvement = to_double(gain);
            out.verdict = gain > 0 ? Verdict::Violated : Verdict::EquilibriumConsistent;
        } else {
            if (!options.monte_carlo)
                throw PreconditionError("deviation '" + dev.name() + "' needs Monte Carlo evaluation (disabled)");
            std::vector<Protocol> profile(static_cast<std::size_t>(n), base);
            profile[0] = dev;
            std::int64_t cutoff = options.cutoff > 0 ? options.cutoff : default_cutoff(profile, config);
            auto d = deviation_experiment(base, dev, config, options.trials, cutoff, options.seed, options.workers);
            out.latency = d.deviator.mean;
            out.std_error = d.difference_std_error;
            out.improvement = -d.difference;
            out.trials = options.trials;
            double se = d.difference_std_error;
            if (out.improvement > kViolationSe * se) {
                out.verdict = Verdict::Violated;
            } else if (out.improvement <= kConsistentSe * se) {
                out.verdict = Verdict::EquilibriumConsistent;
            } else {
                out.verdict = Verdict::Inconclusive;
                // se scales like 1/sqrt(trials)
                double factor = kViolationSe * se / out.improvement;
                auto need = static_cast<std::int64_t>(std::ceil(static_cast<double>(options.trials) * factor * factor));
                rep.required_trials = std::max(rep.required_trials.value_or(0), need);
            }
        }

        std::size_t idx = rep.deviations.size();
        if (out.verdict == Verdict::Violated && !rep.witness) rep.witness = idx;
        if (out.verdict == Verdict::Violated && out.improvement > best_improvement) {
            best_improvement = out.improvement;
            rep.best = idx;
        }
        rep.deviations.push_back(std::move(out));
    }

    if (rep.witness)
        rep.verdict = Verdict::Violated;
    else if (rep.required_trials)
        rep.verdict = Verdict::Inconclusive;
    else
        rep.verdict = Verdict::EquilibriumConsistent;
    return rep;
}

nlohmann::ordered_json report_to_json(const AckCheckReport& rep) {
    nlohmann::ordered_json j;
    j["n"] = rep.n;
    j["k"] = rep.k;
    j["horizon"] = rep.horizon;
    j["base_latency"] = {{"exact", to_string(rep.base_latency)}, {"approx", to_double(rep.base_latency)}};
    j["verdict"] = to_string(rep.verdict);
    j["witness"] = rep.witness ? nlohmann::ordered_json(rep.deviations[*rep.witness].name) : nlohmann::ordered_json();
    j["best"] = rep.best ? nlohmann::ordered_json(rep.deviations[*rep.best].name) : nlohmann::ordered_json();
    j["required_trials"] = rep.required_trials ? nlohmann::ordered_json(*rep.required_trials) : nlohmann::ordered_json();
    auto devs = nlohmann::ordered_json::array();
    for (const auto& d : rep.deviations) {
        nlohmann::ordered_json e;
        e["name"] = d.name;
        e["consistent"] = d.consistent;
        e["method"] = d.exact ? "exact" : "monte-carlo";
        e["latency"] = d.latency;
        if (d.exact)
            e["latency_exact"] = to_string(d.exact_latency);
        else
            e["stderr"] = d.std_error;
        e["improvement"] = d.improvement;
        e["verdict"] = to_string(d.verdict);
        devs.push_back(std::move(e));
    }
    j["deviations"] = std::move(devs);
    return j;
}

}  // namespace contend
