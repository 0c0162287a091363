#include <doctest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "contend/analytics.hpp"
#include "contend/equilibrium.hpp"
#include "contend/protocols.hpp"
#include "oracles.hpp"

using namespace contend;

namespace {

const EquilibriumTable& table100() {
    static const EquilibriumTable t = solve_equilibrium_table(100, 1e-12L);
    return t;
}

double d(long double x) { return static_cast<double>(x); }

}  // namespace

// ---- kernels ---------------------------------------------------------------

TEST_CASE("kernels match enumeration of opponent outcomes") {
    for (int m = 2; m <= 8; ++m)
        for (double p : {0.0, 0.1, 0.3, 0.45, 0.5}) {
            auto k = ternary_kernels(m, p);
            auto o = oracle::brute_kernels(m, p);
            INFO("m=" << m << " p=" << p);
            CHECK(std::abs(d(k.q_success) - o.q_success) <= 1e-12);
            CHECK(std::abs(d(k.q_one) - o.q_one) <= 1e-12);
            CHECK(std::abs(d(k.q_none) - o.q_none) <= 1e-12);
            CHECK(std::abs(d(k.s_one) - o.s_one) <= 1e-12);
            CHECK(std::abs(d(k.s_two) - o.s_two) <= 1e-12);
            CHECK(std::abs(d(k.s_none) - o.s_none) <= 1e-12);
            CHECK(std::abs(d(k.p_success) - o.p_success) <= 1e-12);
            CHECK(std::abs(d(k.p_one) - o.p_one) <= 1e-12);
            CHECK(std::abs(d(k.p_two) - o.p_two) <= 1e-12);
            CHECK(std::abs(d(k.p_none) - o.p_none) <= 1e-12);
        }
}

TEST_CASE("kernels: base pair and mixing identity") {
    auto k = ternary_kernels(2, 0.5L);
    CHECK(k.q_success == 0.5L);
    CHECK(k.s_one == 1.0L);
    for (int m = 2; m <= 100; m += 7)
        for (long double p : {0.01L, 0.1L, 0.25L, 0.5L}) {
            auto t = ternary_kernels(m, p);
            for (long double v : {t.q_success, t.q_one, t.q_none, t.s_one, t.s_two, t.s_none, t.p_success, t.p_one,
                                  t.p_two, t.p_none}) {
                CHECK(v >= -1e-15L);
                CHECK(v <= 1.0L + 1e-15L);
            }
            // focal mixes (1-2p, p, p) over its own pure kernels
            CHECK(std::fabs(t.p_success - 2 * p * t.q_success) <= 1e-15L);
            CHECK(std::fabs(t.p_one - (2 * p * t.q_one + (1 - 2 * p) * t.s_one)) <= 1e-14L);
            CHECK(std::fabs(t.p_two - (1 - 2 * p) * t.s_two) <= 1e-14L);
        }
    CHECK_THROWS_AS(ternary_kernels(1, 0.2L), PreconditionError);
    CHECK_THROWS_AS(ternary_kernels(5, 0.6L), PreconditionError);
}

// ---- table -----------------------------------------------------------------

TEST_CASE("table: base rows") {
    const auto& t = table100();
    CHECK(t.p[2] == 0.5L);
    CHECK(t.F[2] == 2.0L);
    CHECK(t.p[1] == 0.5L);
    CHECK(t.F[1] == 1.0L);
}

TEST_CASE("table: small rows") {
    const auto& t = table100();
    CHECK(t.p[3] == 0.5L);
    CHECK(t.corner[3]);
    CHECK(std::fabs(t.F[3] - 8.0L / 3.0L) <= 1e-15L);
    CHECK(std::fabs(t.indifference_gap[3] + 1.0L / 6.0L) <= 1e-15L);
    CHECK(t.p[4] == 0.5L);
    CHECK(std::fabs(t.F[4] - 4.0L) <= 1e-14L);
    // 50-digit evaluation of the same recurrence
    CHECK(std::fabs(d(t.p[5]) - 0.4566598969420711) <= 1e-12);
    CHECK(std::fabs(d(t.F[5]) - 5.718852129025493) <= 1e-11);
}

TEST_CASE("table: rows lie between the envelope bounds") {
    const auto& t = table100();
    for (int m = 2; m <= 100; ++m) {
        double s = std::sqrt(m - 1.0);
        INFO("m=" << m);
        CHECK(d(t.p[static_cast<std::size_t>(m)]) >= 1.0 / (2.0 * s));
        CHECK(d(t.p[static_cast<std::size_t>(m)]) <= 2.0 / s);
    }
}

TEST_CASE("table: recurrence and indifference residuals") {
    const auto& t = table100();
    for (int m = 2; m <= 100; ++m) {
        auto i = static_cast<std::size_t>(m);
        INFO("m=" << m);
        CHECK(t.recurrence_residual[i] < 1e-9L);
        if (m != 3) CHECK(std::fabs(t.indifference_gap[i]) < 1e-9L);
    }
}

TEST_CASE("table: F grows like exp(sqrt m)") {
    const auto& t = table100();
    for (int m = 20; m <= 100; ++m) {
        double r = std::log(d(t.F[static_cast<std::size_t>(m)])) / std::sqrt(static_cast<double>(m));
        INFO("m=" << m << " ratio=" << r);
        CHECK(r >= 1.12);
        CHECK(r <= 1.29);
    }
    for (int m = 3; m <= 100; ++m) CHECK(t.F[static_cast<std::size_t>(m)] > t.F[static_cast<std::size_t>(m - 1)]);
}

TEST_CASE("table: deterministic") {
    auto a = solve_equilibrium_table(40);
    auto b = solve_equilibrium_table(40);
    CHECK(a.p == b.p);
    CHECK(a.F == b.F);
    const auto& t = table100();
    for (int m = 2; m <= 40; ++m) CHECK(a.p[static_cast<std::size_t>(m)] == t.p[static_cast<std::size_t>(m)]);
}

TEST_CASE("table: F from kernels agrees with the recurrence") {
    const auto& t = table100();
    for (int m = 5; m <= 100; ++m) {
        auto i = static_cast<std::size_t>(m);
        auto k = ternary_kernels(m, t.p[i]);
        long double from_rec = (1.0L + k.q_one * t.F[i - 1]) / (k.q_success + k.q_one);
        CHECK(std::fabs(from_rec - t.F[i]) / t.F[i] < 1e-10L);
    }
}

TEST_CASE("residual: root at the table value, sign change for m >= 5") {
    const auto& t = table100();
    CHECK(equilibrium_residual(2, 0.5L, t) == doctest::Approx(0.0));
    CHECK(std::fabs(equilibrium_residual(4, 0.5L, t)) < 1e-12L);
    for (int m = 5; m <= 100; ++m) {
        auto i = static_cast<std::size_t>(m);
        long double p = t.p[i];
        INFO("m=" << m);
        CHECK(std::fabs(equilibrium_residual(m, p, t)) / t.F[i] < 1e-9L);
        long double lo = equilibrium_residual(m, p * 0.9L, t);
        long double hi = equilibrium_residual(m, std::min(0.5L, p * 1.1L), t);
        CHECK((lo < 0) != (hi < 0));
    }
}

TEST_CASE("solver options and failures") {
    CHECK_THROWS_AS(solve_equilibrium_table(1), PreconditionError);
    CHECK_THROWS_AS(solve_equilibrium_table(10, 0.0L), PreconditionError);
    SolverOptions bad;
    bad.grid_points = 1;
    CHECK_THROWS_AS(solve_equilibrium_table(10, bad), PreconditionError);
    // tolerance below long double resolution cannot be met
    CHECK_THROWS_AS(solve_equilibrium_table(6, 1e-30L), SolverError);
    SolverOptions coarse;
    coarse.grid_points = 50;
    auto c = solve_equilibrium_table(30, coarse);
    const auto& t = table100();
    for (int m = 2; m <= 30; ++m) CHECK(std::fabs(c.p[static_cast<std::size_t>(m)] - t.p[static_cast<std::size_t>(m)]) < 1e-12L);
}

TEST_CASE("table serialization") {
    auto t = solve_equilibrium_table(6);
    std::ostringstream os;
    write_table_csv(os, t, false);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    CHECK(line == "m,p_m,F_m");
    std::getline(is, line);
    CHECK(line == "2,0.5,2");
    int rows = 1;
    while (std::getline(is, line)) ++rows;
    CHECK(rows == 5);

    std::ostringstream ob;
    write_table_csv(ob, t, true);
    CHECK(ob.str().rfind("m,p_m,F_m,lower,upper\n2,0.5,2,0.5,2\n", 0) == 0);

    auto j = table_to_json(t);
    CHECK(j["max_m"] == 6);
    CHECK(j["rows"].size() == 5);
    CHECK(j["rows"][1]["corner"] == true);
}

// ---- MDP -------------------------------------------------------------------

TEST_CASE("MDP closed forms") {
    MdpPolicy all;
    auto c = mdp_cost(all);
    CHECK(c.c1 == 1.0);
    CHECK(c.c2 == doctest::Approx(2.0));
    CHECK(c.c3 == doctest::Approx(8.0 / 3.0));

    MdpPolicy half;
    half.q1 = 0.5;
    CHECK(mdp_cost(half).c1 == 2.0);

    MdpPolicy witness;
    witness.q2 = 0.0;
    CHECK(mdp_cost(witness).c3 == doctest::Approx(8.0 / 3.0));

    MdpPolicy never;
    never.q1 = 0.0;
    CHECK(std::isinf(mdp_cost(never).c1));

    MdpPolicy bad;
    bad.z2 = 1.5;
    CHECK_THROWS_AS(mdp_cost(bad), PreconditionError);
}

TEST_CASE("MDP policy evaluation equals the closed forms") {
    RandomStream rng(11, 0);
    for (int i = 0; i < 200; ++i) {
        MdpPolicy p;
        p.q1 = 0.05 + 0.95 * rng.uniform();
        p.q2 = rng.uniform();
        p.q3 = rng.uniform();
        p.z1 = rng.uniform();
        p.z2 = rng.uniform();
        p.z3 = rng.uniform();
        auto a = mdp_cost(p);
        auto b = mdp_policy_evaluation(p);
        CHECK(a.c1 == doctest::Approx(b.c1).epsilon(1e-12));
        CHECK(a.c2 == doctest::Approx(b.c2).epsilon(1e-12));
        CHECK(a.c3 == doctest::Approx(b.c3).epsilon(1e-12));
    }
}

TEST_CASE("MDP value iteration") {
    auto vi = mdp_value_iteration();
    CHECK(std::abs(vi.cost[0] - 1.0) <= 1e-9);
    CHECK(std::abs(vi.cost[1] - 2.0) <= 1e-9);
    CHECK(std::abs(vi.cost[2] - 8.0 / 3.0) <= 1e-9);
    CHECK(vi.transmit_optimal[0]);
    CHECK(vi.transmit_optimal[2]);
    CHECK_FALSE(vi.silent_optimal[0]);
    CHECK_FALSE(vi.silent_optimal[2]);
    // with 2 pending, silence and transmission tie
    CHECK(vi.silent_optimal[1]);
    CHECK(vi.transmit_optimal[1]);
}

TEST_CASE("MDP minimization") {
    auto opt = mdp_minimize(50);
    CHECK(std::abs(opt.optimal.c3 - 8.0 / 3.0) <= 1e-9);
    CHECK(std::abs(opt.optimal.c2 - 2.0) <= 1e-9);
    CHECK(std::abs(opt.optimal.c1 - 1.0) <= 1e-12);
    CHECK(opt.witness.q1 == 1.0);
    CHECK(opt.witness.q3 == 1.0);
    CHECK(std::abs(opt.grid_min_c3 - opt.boundary_min_c3) <= 1e-9);
    CHECK(opt.witness_set == "q1=1, q2 arbitrary, q3=1, z1 z2 z3 arbitrary");
    CHECK_THROWS_AS(mdp_minimize(0), PreconditionError);
}

// ---- acknowledgement-based harness -----------------------------------------

TEST_CASE("prefix enumeration") {
    auto p = enumerate_prefixes(2, 2);
    CHECK(p.size() == 12);
    CHECK(p[0] == std::vector<Action>{kSilent});
    CHECK(p[2] == std::vector<Action>{Action{2}});
    CHECK(p[3] == std::vector<Action>{kSilent, kSilent});
    CHECK(p[11] == std::vector<Action>{Action{2}, Action{2}});
    CHECK(enumerate_prefixes(3, 3).size() == 4 + 16 + 64);
    CHECK_THROWS_AS(enumerate_prefixes(2, 20), PreconditionError);
}

TEST_CASE("prefix latency matches round-by-round enumeration") {
    for (int n = 2; n <= 6; ++n)
        for (const auto& pre : enumerate_prefixes(2, 3)) {
            std::vector<int> raw;
            for (Action a : pre) raw.push_back(a.value);
            double lib = to_double(prefix_deviation_latency(n, 2, pre));
            INFO("n=" << n << " prefix size=" << pre.size());
            CHECK(std::abs(lib - oracle::f2_prefix_latency(n, raw)) <= 1e-9);
        }
}

TEST_CASE("consistent prefixes leave the latency unchanged") {
    for (int k = 2; k <= 3; ++k)
        for (int n = 2; n <= 5; ++n) {
            Rational base = fk_expected_latency(n, k);
            for (const auto& pre : enumerate_prefixes(k, 2))
                if (is_consistent_with_uniform(pre)) CHECK(prefix_deviation_latency(n, k, pre) == base);
        }
}

TEST_CASE("check: small cases") {
    auto r4 = check_ack_equilibrium(4, 2, 2, {});
    CHECK(r4.verdict == Verdict::EquilibriumConsistent);
    CHECK(r4.base_latency == 4);
    CHECK(r4.deviations[0].name == "delay1");
    CHECK(r4.deviations[0].exact_latency == 4);

    auto r5 = check_ack_equilibrium(5, 2, 1, {});
    CHECK(r5.verdict == Verdict::Violated);
    REQUIRE(r5.witness.has_value());
    CHECK(r5.deviations[*r5.witness].name == "delay1");
    CHECK(r5.deviations[*r5.witness].exact_latency == Rational(31, 5));
    CHECK(r5.deviations[*r5.witness].improvement == doctest::Approx(0.2));

    auto j = report_to_json(r5);
    CHECK(j["verdict"] == "VIOLATED");
    CHECK(j["witness"] == "delay1");
    CHECK(j["base_latency"]["exact"] == "32/5");
}

TEST_CASE("check: Monte Carlo fallback") {
    std::vector<Protocol> devs{uniform_protocol(1)};
    AckCheckOptions opt;
    opt.trials = 20000;
    opt.seed = 3;
    auto r = check_ack_equilibrium(2, 2, 0, devs, opt);
    REQUIRE(r.deviations.size() == 1);
    CHECK_FALSE(r.deviations[0].exact);
    CHECK(r.deviations[0].trials == 20000);
    CHECK(r.deviations[0].verdict != Verdict::Violated);

    opt.monte_carlo = false;
    CHECK_THROWS_AS(check_ack_equilibrium(2, 2, 0, devs, opt), PreconditionError);
    CHECK_THROWS_AS(check_ack_equilibrium(3, 1, 1, {}), PreconditionError);
}
