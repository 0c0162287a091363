#include "contend/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <thread>

#include "contend/analytics.hpp"

namespace contend {

namespace {

void check_profile(std::span<const Protocol> profile, const GameConfig& config) {
    config.validate();
    if (profile.size() != static_cast<std::size_t>(config.n))
        throw PreconditionError("profile has " + std::to_string(profile.size()) + " protocols but n=" +
                                std::to_string(config.n));
    for (const auto& p : profile) {
        if (p.channels() > config.k)
            throw PreconditionError("protocol '" + p.name() + "' uses more channels than k=" + std::to_string(config.k));
        if (p.requires_pending_count() && config.feedback != Feedback::Ternary)
            throw PreconditionError("protocol '" + p.name() + "' needs ternary feedback");
    }
}

// Scratch buffers reused across traces on one worker.
class TraceRunner {
public:
    TraceRunner(std::span<const Protocol> profile, const GameConfig& config)
        : profile_(profile), config_(config), history_(static_cast<std::size_t>(config.n)) {}

    void run(std::int64_t cutoff, RandomStream& rng, std::int64_t* latencies, std::uint8_t* player_censored,
             std::int64_t& finishing, bool& censored, std::int64_t& rounds) {
        const int n = config_.n;
        const int k = config_.k;
        const bool ternary = config_.feedback == Feedback::Ternary;
        pending_.resize(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            pending_[static_cast<std::size_t>(i)] = i;
            history_[static_cast<std::size_t>(i)].clear();
            player_censored[i] = 0;
        }
        finishing = 0;
        censored = false;
        rounds = 0;

        for (std::int64_t t = 1; t <= cutoff; ++t) {
            rounds = t;
            const int m = static_cast<int>(pending_.size());
            actions_.resize(pending_.size());
            for (std::size_t j = 0; j < pending_.size(); ++j) {
                int i = pending_[j];
                auto& h = history_[static_cast<std::size_t>(i)];
                FeedbackView view{h, ternary ? std::optional<int>(m) : std::nullopt, t};
                Action a = sample_action(profile_[static_cast<std::size_t>(i)].decision_rule(view), rng);
                if (a.value > k) throw PreconditionError("protocol produced an action outside [0, k]");
                actions_[j] = a;
            }
            resolve_round_into(actions_, k, outcome_);
            for (std::size_t j = 0; j < pending_.size(); ++j)
                history_[static_cast<std::size_t>(pending_[j])].push_back(actions_[j]);

            if (!outcome_.successes.empty()) {
                std::size_t w = 0, s = 0;
                for (std::size_t j = 0; j < pending_.size(); ++j) {
                    if (s < outcome_.successes.size() && static_cast<std::size_t>(outcome_.successes[s]) == j) {
                        latencies[pending_[j]] = t;
                        ++s;
                    } else {
                        pending_[w++] = pending_[j];
                    }
                }
                pending_.resize(w);
                if (pending_.empty()) {
                    finishing = t;
                    return;
                }
            } else if (all_locked(t, m, ternary)) {
                // every pending player repeats this round's collision forever
                break;
            }
        }
        censored = true;
        finishing = cutoff;
        for (int i : pending_) {
            latencies[i] = cutoff;
            player_censored[i] = 1;
        }
    }

private:
    bool all_locked(std::int64_t t, int m, bool ternary) const {
        for (int i : pending_) {
            const auto& h = history_[static_cast<std::size_t>(i)];
            // actions through round t are in the history, so view round t+1
            FeedbackView view{h, ternary ? std::optional<int>(m) : std::nullopt, t + 1};
            if (!profile_[static_cast<std::size_t>(i)].is_locked(view)) return false;
        }
        return true;
    }

    std::span<const Protocol> profile_;
    GameConfig config_;
    std::vector<std::vector<Action>> history_;
    std::vector<int> pending_;
    std::vector<Action> actions_;
    RoundOutcome outcome_;
};

int resolve_workers(int workers, std::int64_t trials) {
    int w = workers > 0 ? workers : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    return static_cast<int>(std::min<std::int64_t>(w, std::max<std::int64_t>(1, trials)));
}

}  // namespace

TraceStats run_trace(std::span<const Protocol> profile, const GameConfig& config, std::int64_t cutoff,
                     std::uint64_t seed, std::uint64_t stream) {
    check_profile(profile, config);
    if (cutoff < 1) throw PreconditionError("cutoff must be >= 1");
    TraceStats s;
    s.latencies.assign(static_cast<std::size_t>(config.n), 0);
    s.player_censored.assign(static_cast<std::size_t>(config.n), 0);
    RandomStream rng(seed, stream);
    TraceRunner runner(profile, config);
    runner.run(cutoff, rng, s.latencies.data(), s.player_censored.data(), s.finishing_time, s.censored,
               s.rounds_executed);
    return s;
}

TrialBatch run_trials(std::span<const Protocol> profile, const GameConfig& config, std::int64_t trials,
                      std::int64_t cutoff, std::uint64_t seed, int workers, std::int64_t first_trial) {
    check_profile(profile, config);
    if (trials < 1) throw PreconditionError("trials must be >= 1");
    if (cutoff < 1) throw PreconditionError("cutoff must be >= 1");
    if (first_trial < 0) throw PreconditionError("first_trial must be >= 0");

    TrialBatch b;
    b.n = config.n;
    b.trials = trials;
    b.first_trial = first_trial;
    b.cutoff = cutoff;
    b.seed = seed;
    const auto n = static_cast<std::size_t>(config.n);
    const auto T = static_cast<std::size_t>(trials);
    b.latencies.assign(T * n, 0);
    b.latency_censored.assign(T * n, 0);
    b.finishing_time.assign(T, 0);
    b.censored.assign(T, 0);

    const int w = resolve_workers(workers, trials);
    auto work = [&](std::int64_t begin, std::int64_t end) {
        TraceRunner runner(profile, config);
        for (std::int64_t t = begin; t < end; ++t) {
            RandomStream rng(seed, static_cast<std::uint64_t>(first_trial + t));
            bool cens = false;
            std::int64_t rounds = 0;
            auto row = static_cast<std::size_t>(t) * n;
            runner.run(cutoff, rng, b.latencies.data() + row, b.latency_censored.data() + row,
                       b.finishing_time[static_cast<std::size_t>(t)], cens, rounds);
            b.censored[static_cast<std::size_t>(t)] = cens ? 1 : 0;
        }
    };
    if (w == 1) {
        work(0, trials);
        return b;
    }
    std::vector<std::thread> threads;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(w));
    for (int i = 0; i < w; ++i) {
        std::int64_t begin = trials * i / w, end = trials * (i + 1) / w;
        threads.emplace_back([&, i, begin, end] {
            try {
                work(begin, end);
            } catch (...) {
                errors[static_cast<std::size_t>(i)] = std::current_exception();
            }
        });
    }
    for (auto& th : threads) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return b;
}

EstimateReport Moments::report(std::uint64_t seed, double scale) const {
    EstimateReport r;
    r.trials = count;
    r.seed = seed;
    if (count == 0) return r;
    auto c = static_cast<long double>(count);
    r.mean = static_cast<double>(static_cast<long double>(sum) / c / scale);
    r.censored_fraction = static_cast<double>(censored) / static_cast<double>(count);
    if (count > 1) {
        __int128 num = static_cast<__int128>(count) * sum_sq - sum * sum;
        long double var = static_cast<long double>(num) / (c * (c - 1)) / (static_cast<long double>(scale) * scale);
        r.std_error = static_cast<double>(std::sqrt(std::max(0.0L, var) / c));
    }
    return r;
}

LatencyReport summarize_latency(const TrialBatch& b) {
    LatencyReport out;
    std::vector<Moments> per(static_cast<std::size_t>(b.n));
    Moments pooled;
    for (std::int64_t t = 0; t < b.trials; ++t) {
        std::int64_t total = 0;
        bool any = false;
        for (int i = 0; i < b.n; ++i) {
            auto idx = static_cast<std::size_t>(t * b.n + i);
            per[static_cast<std::size_t>(i)].add(b.latencies[idx], b.latency_censored[idx] != 0);
            total += b.latencies[idx];
            any = any || b.latency_censored[idx] != 0;
        }
        pooled.add(total, any);
    }
    for (const auto& m : per) out.per_player.push_back(m.report(b.seed));
    out.pooled = pooled.report(b.seed, static_cast<double>(b.n));
    return out;
}

EstimateReport summarize_finishing(const TrialBatch& b) {
    Moments m;
    for (std::int64_t t = 0; t < b.trials; ++t)
        m.add(b.finishing_time[static_cast<std::size_t>(t)], b.censored[static_cast<std::size_t>(t)] != 0);
    return m.report(b.seed);
}

LatencyReport estimate_latency(std::span<const Protocol> profile, const GameConfig& config, std::int64_t trials,
                               std::int64_t cutoff, std::uint64_t seed, int workers) {
    return summarize_latency(run_trials(profile, config, trials, cutoff, seed, workers));
}

EstimateReport estimate_finishing_time(std::span<const Protocol> profile, const GameConfig& config,
                                       std::int64_t trials, std::int64_t cutoff, std::uint64_t seed, int workers) {
    return summarize_finishing(run_trials(profile, config, trials, cutoff, seed, workers));
}

WilsonInterval wilson_interval(std::int64_t successes, std::int64_t trials, double z) {
    if (trials < 1) throw PreconditionError("trials must be >= 1");
    if (successes < 0 || successes > trials) throw PreconditionError("successes must lie in [0, trials]");
    double nn = static_cast<double>(trials);
    double p = static_cast<double>(successes) / nn;
    double z2 = z * z;
    double denom = 1.0 + z2 / nn;
    double centre = (p + z2 / (2 * nn)) / denom;
    double half = z * std::sqrt(p * (1 - p) / nn + z2 / (4 * nn * nn)) / denom;
    double lo = successes == 0 ? 0.0 : std::max(0.0, centre - half);
    double hi = successes == trials ? 1.0 : std::min(1.0, centre + half);
    return {lo, hi};
}

TailReport tail_probability_experiment(std::span<const Protocol> profile, const GameConfig& config,
                                       std::int64_t t_cut, std::int64_t trials, std::uint64_t seed, int workers,
                                       TrialBatch* batch_out) {
    if (t_cut < 1) throw PreconditionError("t_cut must be >= 1");
    TrialBatch b = run_trials(profile, config, trials, t_cut, seed, workers);
    TailReport r;
    r.t_cut = t_cut;
    r.trials = trials;
    r.seed = seed;
    for (auto c : b.censored) r.exceed += c ? 1 : 0;
    r.estimate = static_cast<double>(r.exceed) / static_cast<double>(trials);
    r.ci = wilson_interval(r.exceed, trials);
    if (batch_out) *batch_out = std::move(b);
    return r;
}

DeviationReport deviation_experiment(const Protocol& base, const Protocol& deviator, const GameConfig& config,
                                     std::int64_t trials, std::int64_t cutoff, std::uint64_t seed, int workers,
                                     TrialBatch* base_out, TrialBatch* deviator_out) {
    if (config.n < 2) throw PreconditionError("deviation experiment needs n >= 2");
    std::vector<Protocol> all_base(static_cast<std::size_t>(config.n), base);
    std::vector<Protocol> with_dev = all_base;
    with_dev[0] = deviator;

    DeviationReport r;
    r.common_random_numbers = base.is_memoryless() && deviator.is_memoryless();
    r.base_seed = seed;
    r.deviator_seed = r.common_random_numbers ? seed : mix_seed(seed, 0x6465766961746f72ULL);

    TrialBatch bb = run_trials(all_base, config, trials, cutoff, r.base_seed, workers);
    TrialBatch db = run_trials(with_dev, config, trials, cutoff, r.deviator_seed, workers);

    Moments mb, md, diff;
    for (std::int64_t t = 0; t < trials; ++t) {
        auto idx = static_cast<std::size_t>(t * config.n);
        mb.add(bb.latencies[idx], bb.latency_censored[idx] != 0);
        md.add(db.latencies[idx], db.latency_censored[idx] != 0);
        diff.add(db.latencies[idx] - bb.latencies[idx], bb.latency_censored[idx] || db.latency_censored[idx]);
    }
    r.base = mb.report(r.base_seed);
    r.deviator = md.report(r.deviator_seed);
    r.difference = r.deviator.mean - r.base.mean;
    r.difference_std_error = r.common_random_numbers
                                 ? diff.report(seed).std_error
                                 : std::sqrt(r.base.std_error * r.base.std_error +
                                             r.deviator.std_error * r.deviator.std_error);
    if (base_out) *base_out = std::move(bb);
    if (deviator_out) *deviator_out = std::move(db);
    return r;
}

std::int64_t default_cutoff(std::span<const Protocol> profile, const GameConfig& config) {
    config.validate();
    double bound = 0;
    for (const auto& p : profile) {
        if (auto d = p.deadline()) bound = std::max(bound, static_cast<double>(*d));
        if (p.kind() == ProtocolKind::Sop && config.n > config.k && config.k >= 2)
            bound = std::max(bound, sop_finishing_bound(config.n, config.k));
    }
    double v = 100.0 * std::max(bound, std::ldexp(1.0, std::min(config.n, 60)));
    return static_cast<std::int64_t>(std::min(v, 1e7));
}

void write_trials_csv(std::ostream& os, const TrialBatch& b) {
    os << "trial,seed";
    for (int i = 0; i < b.n; ++i) os << ",latency_" << i;
    os << ",finishing_time,censored\n";
    for (std::int64_t t = 0; t < b.trials; ++t) {
        std::int64_t trial = b.first_trial + t;
        os << trial << ',' << mix_seed(b.seed, static_cast<std::uint64_t>(trial));
        for (int i = 0; i < b.n; ++i) os << ',' << b.latency(t, i);
        os << ',' << b.finishing_time[static_cast<std::size_t>(t)] << ','
           << static_cast<int>(b.censored[static_cast<std::size_t>(t)]) << '\n';
    }
}

nlohmann::ordered_json to_json(const EstimateReport& r) {
    return {{"label", r.label()},
            {"mean", r.mean},
            {"stderr", r.std_error},
            {"trials", r.trials},
            {"censored_fraction", r.censored_fraction},
            {"seed", r.seed}};
}

nlohmann::ordered_json to_json(const LatencyReport& r) {
    auto per = nlohmann::ordered_json::array();
    for (const auto& p : r.per_player) per.push_back(to_json(p));
    return {{"pooled", to_json(r.pooled)}, {"per_player", std::move(per)}};
}

nlohmann::ordered_json to_json(const TailReport& r) {
    return {{"t_cut", r.t_cut},
            {"exceed", r.exceed},
            {"trials", r.trials},
            {"estimate", r.estimate},
            {"wilson95", {{"lo", r.ci.lo}, {"hi", r.ci.hi}}},
            {"seed", r.seed}};
}

nlohmann::ordered_json to_json(const DeviationReport& r) {
    return {{"deviator", to_json(r.deviator)},
            {"base", to_json(r.base)},
            {"difference", r.difference},
            {"difference_stderr", r.difference_std_error},
            {"pairing", r.common_random_numbers ? "common random numbers" : "independent streams"},
            {"base_seed", r.base_seed},
            {"deviator_seed", r.deviator_seed}};
}

}  // namespace contend
