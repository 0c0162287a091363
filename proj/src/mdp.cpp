#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "contend/equilibrium.hpp"

namespace contend {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// next[0] is the absorbing "deviator done" state, next[s] for s = 1..3
using Transition = std::array<double, 4>;

// Deviator plays a pure action in state s (pending players including the
// deviator); the other s-1 players play f^2.
Transition enumerate_transition(int s, Action deviator) {
    Transition out{};
    int others = s - 1;
    double weight = std::ldexp(1.0, -others);
    std::vector<Action> profile(static_cast<std::size_t>(s));
    for (int mask = 0; mask < (1 << others); ++mask) {
        profile[0] = deviator;
        for (int j = 0; j < others; ++j) profile[static_cast<std::size_t>(j) + 1] = Action{((mask >> j) & 1) + 1};
        auto outcome = resolve_round(profile, 2);
        bool done = !outcome.successes.empty() && outcome.successes.front() == 0;
        if (done)
            out[0] += weight;
        else
            out[static_cast<std::size_t>(s) - outcome.successes.size()] += weight;
    }
    return out;
}

Transition policy_transition(int s, double q, double z) {
    Transition silent = enumerate_transition(s, Action{0});
    Transition ch1 = enumerate_transition(s, Action{1});
    Transition ch2 = enumerate_transition(s, Action{2});
    Transition out{};
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = (1 - q) * silent[i] + q * z * ch1[i] + q * (1 - z) * ch2[i];
    return out;
}

double safe_div(double num, double den) {
    return den == 0.0 ? kInf : num / den;
}

}  // namespace

void MdpPolicy::validate() const {
    for (double v : {q1, z1, q2, z2, q3, z3})
        if (!(v >= 0.0 && v <= 1.0)) throw PreconditionError("MDP policy entries must lie in [0, 1]");
}

MdpCosts mdp_cost(const MdpPolicy& pol) {
    pol.validate();
    double q1 = pol.q1, q2 = pol.q2, q3 = pol.q3;
    MdpCosts c;
    c.c1 = safe_div(1.0, q1);
    c.c2 = safe_div(2 + 2 * q1 - 2 * q2, 2 * q1 - q1 * q2);
    double den3 = 4 * q1 - 2 * q1 * q2 + 2 * q1 * q3 - q1 * q2 * q3;
    c.c3 = den3 == 0.0 ? kInf : 2 + (4 - 2 * q2 - 2 * q2 * q3 + 2 * q1 * q2 * q3) / den3;
    return c;
}

MdpCosts mdp_policy_evaluation(const MdpPolicy& pol) {
    pol.validate();
    const double q[4] = {0, pol.q1, pol.q2, pol.q3};
    const double z[4] = {0, pol.z1, pol.z2, pol.z3};
    double c[4] = {0, 0, 0, 0};
    // lower states never lead upward, so solve from s = 1 up
    for (int s = 1; s <= 3; ++s) {
        Transition t = policy_transition(s, q[s], z[s]);
        double stay = t[static_cast<std::size_t>(s)];
        if (stay >= 1.0) {
            c[s] = kInf;
            continue;
        }
        double acc = 1.0;
        for (int lower = 1; lower < s; ++lower) {
            double pr = t[static_cast<std::size_t>(lower)];
            if (pr > 0) acc += pr * c[lower];
        }
        c[s] = acc / (1.0 - stay);
    }
    return {c[1], c[2], c[3]};
}

ValueIterationResult mdp_value_iteration(double threshold) {
    if (!(threshold > 0)) throw PreconditionError("threshold must be > 0");
    std::array<std::array<Transition, 3>, 4> trans{};
    for (int s = 1; s <= 3; ++s)
        for (int a = 0; a <= 2; ++a) trans[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)] = enumerate_transition(s, Action{a});

    std::array<double, 4> V{};
    auto q_value = [&](int s, int a, const std::array<double, 4>& v) {
        const auto& t = trans[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)];
        double acc = 1.0;
        for (int nxt = 1; nxt <= 3; ++nxt) acc += t[static_cast<std::size_t>(nxt)] * v[static_cast<std::size_t>(nxt)];
        return acc;
    };

    ValueIterationResult r;
    for (r.iterations = 1; r.iterations <= 1000000; ++r.iterations) {
        std::array<double, 4> next{};
        double delta = 0;
        for (int s = 1; s <= 3; ++s) {
            double best = kInf;
            for (int a = 0; a <= 2; ++a) best = std::min(best, q_value(s, a, V));
            next[static_cast<std::size_t>(s)] = best;
            delta = std::max(delta, std::fabs(best - V[static_cast<std::size_t>(s)]));
        }
        V = next;
        if (delta < threshold) break;
    }
    if (r.iterations > 1000000) throw SolverError("value iteration did not converge");

    for (int s = 1; s <= 3; ++s) {
        auto i = static_cast<std::size_t>(s - 1);
        r.cost[i] = V[static_cast<std::size_t>(s)];
        double best = V[static_cast<std::size_t>(s)];
        double tx = std::min(q_value(s, 1, V), q_value(s, 2, V));
        r.transmit_optimal[i] = std::fabs(tx - best) < 1e-9;
        r.silent_optimal[i] = std::fabs(q_value(s, 0, V) - best) < 1e-9;
    }
    return r;
}

MdpOptimum mdp_minimize(int grid) {
    if (grid < 1) throw PreconditionError("grid must be >= 1");
    MdpOptimum out;
    out.grid = grid;
    out.optimal = {kInf, kInf, kInf};
    out.grid_min_c3 = kInf;
    out.boundary_min_c3 = kInf;

    auto consider = [&](double q1, double q2, double q3, double& search_min) {
        MdpPolicy pol;
        pol.q1 = q1;
        pol.q2 = q2;
        pol.q3 = q3;
        MdpCosts c = mdp_cost(pol);
        out.optimal.c1 = std::min(out.optimal.c1, c.c1);
        out.optimal.c2 = std::min(out.optimal.c2, c.c2);
        search_min = std::min(search_min, c.c3);
        if (c.c3 < out.optimal.c3) {
            out.optimal.c3 = c.c3;
            out.witness = pol;
        }
    };

    for (int i = 0; i <= grid; ++i)
        for (int j = 0; j <= grid; ++j)
            for (int l = 0; l <= grid; ++l)
                consider(static_cast<double>(i) / grid, static_cast<double>(j) / grid, static_cast<double>(l) / grid,
                         out.grid_min_c3);
    for (int mask = 0; mask < 8; ++mask)
        consider(mask & 1, (mask >> 1) & 1, (mask >> 2) & 1, out.boundary_min_c3);

    // ties are common (c3 is flat in q1 when q2 = q3 = 1): prefer a pure
    // minimizer with the fewest transmitting states
    int best_count = 4;
    for (int mask = 0; mask < 8; ++mask) {
        MdpPolicy p;
        p.q1 = mask & 1;
        p.q2 = (mask >> 1) & 1;
        p.q3 = (mask >> 2) & 1;
        int count = (mask & 1) + ((mask >> 1) & 1) + ((mask >> 2) & 1);
        if (std::fabs(mdp_cost(p).c3 - out.optimal.c3) <= 1e-12 && count < best_count) {
            best_count = count;
            out.witness = p;
        }
    }

    // describe the optimal set: which coordinates can move without raising c3
    const MdpPolicy& w = out.witness;
    auto flat_in = [&](auto setter) {
        for (int i = 0; i <= grid; ++i) {
            MdpPolicy p = w;
            setter(p, static_cast<double>(i) / grid);
            if (std::fabs(mdp_cost(p).c3 - out.optimal.c3) > 1e-12) return false;
        }
        return true;
    };
    bool q1_free = flat_in([](MdpPolicy& p, double v) { p.q1 = v; });
    bool q2_free = flat_in([](MdpPolicy& p, double v) { p.q2 = v; });
    bool q3_free = flat_in([](MdpPolicy& p, double v) { p.q3 = v; });
    auto fmt = [](const char* name, bool free, double v) {
        char buf[48];
        std::snprintf(buf, sizeof buf, "%s=%g", name, v);
        return free ? std::string(name) + " arbitrary" : std::string(buf);
    };
    out.witness_set = fmt("q1", q1_free, w.q1) + ", " + fmt("q2", q2_free, w.q2) + ", " + fmt("q3", q3_free, w.q3) +
                      ", z1 z2 z3 arbitrary";
    return out;
}

}  // namespace contend
