#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <vector>

#include "contend/analytics.hpp"
#include "contend/sim.hpp"
#include "oracles.hpp"

using namespace contend;

namespace {

std::vector<Protocol> all(int n, const Protocol& p) { return std::vector<Protocol>(static_cast<std::size_t>(n), p); }

GameConfig ack(int n, int k) { return GameConfig{n, k, Feedback::AcknowledgementBased}; }
GameConfig ter(int n, int k) { return GameConfig{n, k, Feedback::Ternary}; }

bool within(double est, double se, double target, double z = 3.0) { return std::abs(est - target) <= z * se; }

}  // namespace

TEST_CASE("single player finishes in round 1") {
    auto prof = all(1, uniform_protocol(1));
    auto t = run_trace(prof, ack(1, 1), 10, 1);
    CHECK(t.latencies == std::vector<std::int64_t>{1});
    CHECK(t.finishing_time == 1);
    CHECK_FALSE(t.censored);
}

TEST_CASE("per-round successes never exceed k") {
    for (int k : {1, 2, 3}) {
        auto prof = all(9, sop_protocol(k));
        auto b = run_trials(prof, ter(9, k), 2000, 10000, 5, 1);
        for (std::int64_t t = 0; t < b.trials; ++t) {
            std::map<std::int64_t, int> per_round;
            for (int i = 0; i < 9; ++i) ++per_round[b.latency(t, i)];
            for (auto [round, count] : per_round) CHECK(count <= k);
            CHECK(b.finishing_time[static_cast<std::size_t>(t)] ==
                  *std::max_element(b.latencies.begin() + t * 9, b.latencies.begin() + t * 9 + 9));
        }
    }
}

TEST_CASE("f^k latency means match the exact chain") {
    struct Case {
        int n, k;
        double target;
    };
    for (auto c : {Case{2, 2, 2.0}, Case{4, 3, 189.0 / 80.0}, Case{6, 2, 64.0 / 6.0}}) {
        auto rep = estimate_latency(all(c.n, uniform_protocol(c.k)), ack(c.n, c.k), 200000, 100000, 17);
        INFO("n=" << c.n << " k=" << c.k << " mean=" << rep.pooled.mean << " se=" << rep.pooled.std_error);
        CHECK(within(rep.pooled.mean, rep.pooled.std_error, c.target));
        CHECK(rep.pooled.censored_fraction == 0.0);
        CHECK(rep.per_player.size() == static_cast<std::size_t>(c.n));
    }
}

TEST_CASE("f^2 latency grows with the load") {
    double prev = 0;
    for (int n = 2; n <= 8; ++n) {
        auto rep = estimate_latency(all(n, uniform_protocol(2)), ack(n, 2), 50000, 100000, 3);
        CHECK(rep.pooled.mean > prev);
        prev = rep.pooled.mean;
    }
}

TEST_CASE("finishing times against exact chains") {
    auto f2 = estimate_finishing_time(all(2, uniform_protocol(2)), ack(2, 2), 200000, 10000, 9);
    CHECK(within(f2.mean, f2.std_error, oracle::uniform_finishing_time(2, 2)));
    CHECK(oracle::uniform_finishing_time(2, 2) == doctest::Approx(2.0));

    auto s = estimate_finishing_time(all(6, sop_protocol(3)), ter(6, 3), 200000, 100000, 9);
    double target = oracle::sop_finishing_time(6, 3);
    INFO("sop(6,3) mean=" << s.mean << " target=" << target);
    CHECK(within(s.mean, s.std_error, target));
    CHECK(s.mean <= sop_finishing_bound(6, 3));

    auto u = estimate_finishing_time(all(5, uniform_protocol(5)), ack(5, 5), 200000, 10000, 9);
    CHECK(within(u.mean, u.std_error, oracle::uniform_finishing_time(5, 5)));
    CHECK(u.mean <= small_regime_finishing_bound(5, 5));
}

TEST_CASE("locked collisions are fast-forwarded and censored") {
    // both players always on channel 1 of 2
    auto prof = all(2, uniform_protocol(1));
    auto t = run_trace(prof, ack(2, 2), 1000000, 4);
    CHECK(t.censored);
    CHECK(t.rounds_executed == 1);
    CHECK(t.latencies == std::vector<std::int64_t>{1000000, 1000000});
    CHECK(t.finishing_time == 1000000);

    auto rep = estimate_latency(prof, ack(2, 2), 1000, 500, 4);
    CHECK(rep.pooled.censored_fraction == 1.0);
    CHECK(rep.pooled.label() == "censored mean");
    CHECK(rep.pooled.mean == 500.0);
}

TEST_CASE("deadline protocols lock into permanent collisions") {
    // small cutoff beyond t0: unfinished traces stop at the first all-locked collision
    auto prof = all(9, deadline_ternary_protocol(9, 2));
    auto b = run_trials(prof, ter(9, 2), 3000, 1000000, 2, 1);
    for (std::int64_t t = 0; t < b.trials; ++t) {
        auto ft = b.finishing_time[static_cast<std::size_t>(t)];
        if (b.censored[static_cast<std::size_t>(t)])
            CHECK(ft == 1000000);
        else
            CHECK(ft <= 39);
    }
}

TEST_CASE("determinism: seeds, workers and trial splitting") {
    auto prof = all(5, uniform_protocol(2));
    auto cfg = ack(5, 2);
    auto a = run_trials(prof, cfg, 4000, 100000, 42, 1);
    auto b = run_trials(prof, cfg, 4000, 100000, 42, 3);
    CHECK(a.latencies == b.latencies);
    CHECK(a.finishing_time == b.finishing_time);

    auto first = run_trials(prof, cfg, 1500, 100000, 42, 2, 0);
    auto second = run_trials(prof, cfg, 2500, 100000, 42, 2, 1500);
    std::vector<std::int64_t> joined = first.latencies;
    joined.insert(joined.end(), second.latencies.begin(), second.latencies.end());
    CHECK(joined == a.latencies);

    auto other = run_trials(prof, cfg, 4000, 100000, 43, 1);
    CHECK(other.latencies != a.latencies);

    auto t7 = run_trace(prof, cfg, 100000, 42, 7);
    for (int i = 0; i < 5; ++i) CHECK(t7.latencies[static_cast<std::size_t>(i)] == a.latency(7, i));
}

TEST_CASE("moments are exact and order independent") {
    Moments x, y, z;
    for (int i = 1; i <= 10; ++i) (i % 2 ? x : y).add(i, false);
    for (int i = 1; i <= 10; ++i) z.add(11 - i, i == 3);
    Moments xy = x;
    xy.merge(y);
    CHECK(xy.sum == z.sum);
    CHECK(xy.sum_sq == z.sum_sq);
    auto r = xy.report(1);
    CHECK(r.mean == 5.5);
    // sample variance of 1..10 is 55/6
    CHECK(r.std_error == doctest::Approx(std::sqrt(55.0 / 6.0 / 10.0)));
    CHECK(z.report(1).censored_fraction == doctest::Approx(0.1));
}

TEST_CASE("Wilson interval") {
    auto w = wilson_interval(0, 100);
    CHECK(w.lo == 0.0);
    double z2 = kWilsonZ95 * kWilsonZ95;
    CHECK(w.hi == doctest::Approx(z2 / (100 + z2)).epsilon(1e-12));
    auto h = wilson_interval(50, 100);
    CHECK(h.lo + h.hi == doctest::Approx(1.0));
    CHECK(h.lo == doctest::Approx(0.40383153).epsilon(1e-7));
    CHECK_THROWS_AS(wilson_interval(5, 0), PreconditionError);
    CHECK_THROWS_AS(wilson_interval(5, 4), PreconditionError);
}

TEST_CASE("tail experiment") {
    auto prof = all(4, uniform_protocol(2));
    auto r = tail_probability_experiment(prof, ack(4, 2), 1, 20000, 8);
    // T > 1 unless all four succeed at once, impossible with two channels
    CHECK(r.exceed == 20000);
    CHECK(r.estimate == 1.0);
    CHECK_THROWS_AS(tail_probability_experiment(prof, ack(4, 2), 0, 10, 8), PreconditionError);

    auto two = all(2, uniform_protocol(2));
    auto q = tail_probability_experiment(two, ack(2, 2), 3, 100000, 8);
    // Pr(T > 3) = 1/8
    CHECK(q.ci.lo <= 0.125);
    CHECK(q.ci.hi >= 0.125);
}

TEST_CASE("g1 tails shrink with n under the pending-estimate mass") {
    std::vector<double> tails;
    for (int n : {33, 65, 129}) {
        auto g = deadline_ack_protocol(n, 2, 0.5, RoundsRule::LogOfHalfN, G1Mass::PendingEstimate);
        auto r = tail_probability_experiment(all(n, g), ack(n, 2), *g.deadline() - 1, 4000, 12);
        tails.push_back(r.estimate);
    }
    INFO(tails[0] << " " << tails[1] << " " << tails[2]);
    CHECK(tails[0] >= tails[1]);
    CHECK(tails[1] >= tails[2]);

    auto lit = deadline_ack_protocol(33, 2, 0.5);
    auto r = tail_probability_experiment(all(33, lit), ack(33, 2), lit.deadline().value() - 1, 4000, 12);
    CHECK(r.estimate > 0.5);
}

TEST_CASE("deviation experiments") {
    auto f2 = uniform_protocol(2);
    auto same = deviation_experiment(f2, f2, ack(4, 2), 20000, 100000, 5);
    CHECK(same.common_random_numbers);
    CHECK(same.difference == 0.0);
    CHECK(same.difference_std_error == 0.0);

    auto d = deviation_experiment(f2, delayed_start_deviation(2), ack(5, 2), 200000, 100000, 5);
    CHECK_FALSE(d.common_random_numbers);
    CHECK(d.deviator_seed != d.base_seed);
    INFO("diff=" << d.difference << " se=" << d.difference_std_error);
    CHECK(within(d.difference, d.difference_std_error, -0.2));

    auto consistent = fixed_history_deviation({Action{1}, Action{2}}, f2);
    auto c = deviation_experiment(f2, consistent, ack(3, 2), 200000, 100000, 5);
    CHECK(within(c.difference, c.difference_std_error, 0.0));

    CHECK_THROWS_AS(deviation_experiment(f2, f2, ack(1, 2), 10, 10, 1), PreconditionError);
}

TEST_CASE("profile checks") {
    CHECK_THROWS_AS(run_trace(all(3, uniform_protocol(2)), ack(4, 2), 10, 1), PreconditionError);
    CHECK_THROWS_AS(run_trace(all(3, uniform_protocol(3)), ack(3, 2), 10, 1), PreconditionError);
    CHECK_THROWS_AS(run_trace(all(3, sop_protocol(2)), ack(3, 2), 10, 1), PreconditionError);
    CHECK_THROWS_AS(run_trace(all(3, sop_protocol(2)), ter(3, 2), 0, 1), PreconditionError);
    CHECK_THROWS_AS(run_trials(all(3, sop_protocol(2)), ter(3, 2), 0, 10, 1), PreconditionError);
}

TEST_CASE("default cutoff") {
    CHECK(default_cutoff(all(4, uniform_protocol(2)), ack(4, 2)) == 1600);
    CHECK(default_cutoff(all(30, uniform_protocol(2)), ack(30, 2)) == 10000000);
    auto r = deadline_ternary_protocol(9, 2);
    CHECK(default_cutoff(all(9, r), ter(9, 2)) == 100 * 512);
}

TEST_CASE("trial CSV layout") {
    auto b = run_trials(all(2, uniform_protocol(2)), ack(2, 2), 3, 100, 77, 1, 10);
    std::ostringstream os;
    write_trials_csv(os, b);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    CHECK(line == "trial,seed,latency_0,latency_1,finishing_time,censored");
    std::getline(is, line);
    CHECK(line.rfind("10," + std::to_string(mix_seed(77, 10)) + ",", 0) == 0);
    int rows = 1;
    while (std::getline(is, line)) ++rows;
    CHECK(rows == 3);
}
