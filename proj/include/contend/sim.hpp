#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "contend/core.hpp"
#include "contend/protocols.hpp"

namespace contend {

struct TraceStats {
    std::vector<std::int64_t> latencies;  // cutoff for censored players
    std::vector<std::uint8_t> player_censored;
    std::int64_t finishing_time = 0;      // cutoff when censored
    bool censored = false;
    std::int64_t rounds_executed = 0;
};

// Runs one game. Stream index selects the independent random stream for
// this trace; trials use their index.
TraceStats run_trace(std::span<const Protocol> profile, const GameConfig& config, std::int64_t cutoff,
                     std::uint64_t seed, std::uint64_t stream = 0);

// Flat per-trial results; trial t uses stream first_trial + t.
struct TrialBatch {
    int n = 0;
    std::int64_t trials = 0;
    std::int64_t first_trial = 0;
    std::int64_t cutoff = 0;
    std::uint64_t seed = 0;
    std::vector<std::int64_t> latencies;  // trials * n, row-major
    std::vector<std::uint8_t> latency_censored;
    std::vector<std::int64_t> finishing_time;
    std::vector<std::uint8_t> censored;

    std::int64_t latency(std::int64_t trial, int player) const {
        return latencies[static_cast<std::size_t>(trial * n + player)];
    }
};

// workers <= 0 uses hardware concurrency. Results do not depend on workers.
TrialBatch run_trials(std::span<const Protocol> profile, const GameConfig& config, std::int64_t trials,
                      std::int64_t cutoff, std::uint64_t seed, int workers = 0, std::int64_t first_trial = 0);

struct EstimateReport {
    double mean = 0;
    double std_error = 0;
    std::int64_t trials = 0;
    double censored_fraction = 0;
    std::uint64_t seed = 0;

    bool censored_mean() const { return censored_fraction > 0; }
    std::string label() const { return censored_mean() ? "censored mean" : "mean"; }
};

// Exact integer moments; merging is order independent.
struct Moments {
    std::int64_t count = 0;
    __int128 sum = 0;
    __int128 sum_sq = 0;
    std::int64_t censored = 0;

    void add(std::int64_t x, bool is_censored) {
        ++count;
        sum += x;
        sum_sq += static_cast<__int128>(x) * x;
        censored += is_censored ? 1 : 0;
    }
    void merge(const Moments& o) {
        count += o.count;
        sum += o.sum;
        sum_sq += o.sum_sq;
        censored += o.censored;
    }
    // scale divides every sample (pooled per-trial averages)
    EstimateReport report(std::uint64_t seed, double scale = 1.0) const;
};

struct LatencyReport {
    std::vector<EstimateReport> per_player;
    EstimateReport pooled;  // per-trial average over players
};

LatencyReport summarize_latency(const TrialBatch& batch);
EstimateReport summarize_finishing(const TrialBatch& batch);

LatencyReport estimate_latency(std::span<const Protocol> profile, const GameConfig& config, std::int64_t trials,
                               std::int64_t cutoff, std::uint64_t seed, int workers = 0);
EstimateReport estimate_finishing_time(std::span<const Protocol> profile, const GameConfig& config,
                                       std::int64_t trials, std::int64_t cutoff, std::uint64_t seed,
                                       int workers = 0);

struct WilsonInterval {
    double lo = 0;
    double hi = 0;
};

inline constexpr double kWilsonZ95 = 1.959963984540054;

WilsonInterval wilson_interval(std::int64_t successes, std::int64_t trials, double z = kWilsonZ95);

struct TailReport {
    std::int64_t t_cut = 0;
    std::int64_t exceed = 0;  // trials with T > t_cut
    std::int64_t trials = 0;
    double estimate = 0;
    WilsonInterval ci;
    std::uint64_t seed = 0;
};

// Pr(T > t_cut); each trace stops at t_cut.
TailReport tail_probability_experiment(std::span<const Protocol> profile, const GameConfig& config,
                                       std::int64_t t_cut, std::int64_t trials, std::uint64_t seed,
                                       int workers = 0, TrialBatch* batch_out = nullptr);

struct DeviationReport {
    EstimateReport deviator;  // player 0 with the deviating protocol
    EstimateReport base;      // player 0 in the all-base profile
    double difference = 0;    // deviator minus base
    double difference_std_error = 0;
    bool common_random_numbers = false;
    std::uint64_t base_seed = 0;
    std::uint64_t deviator_seed = 0;
};

// Player 0 deviates, the other n-1 play base.
DeviationReport deviation_experiment(const Protocol& base, const Protocol& deviator, const GameConfig& config,
                                     std::int64_t trials, std::int64_t cutoff, std::uint64_t seed,
                                     int workers = 0, TrialBatch* base_out = nullptr,
                                     TrialBatch* deviator_out = nullptr);

// 100 * max(analytic bound, 2^n), capped at 10^7.
std::int64_t default_cutoff(std::span<const Protocol> profile, const GameConfig& config);

void write_trials_csv(std::ostream& os, const TrialBatch& batch);

nlohmann::ordered_json to_json(const EstimateReport& r);
nlohmann::ordered_json to_json(const LatencyReport& r);
nlohmann::ordered_json to_json(const TailReport& r);
nlohmann::ordered_json to_json(const DeviationReport& r);

}  // namespace contend
