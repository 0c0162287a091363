#include "contend/equilibrium.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

namespace contend {

namespace {

long double ipow(long double b, int e) {
    // 0^0 = 1
    return e <= 0 ? 1.0L : std::pow(b, static_cast<long double>(e));
}

void check_kernel_args(int m, long double p) {
    if (m < 2) throw PreconditionError("kernels need m >= 2");
    if (!(p >= 0.0L && p <= 0.5L)) throw PreconditionError("p must lie in [0, 1/2]");
}

constexpr long double kDenominatorGuard = 1e-14L;

}  // namespace

TernaryKernels ternary_kernels(int m, long double p) {
    check_kernel_args(m, p);
    TernaryKernels t;
    long double a = 1.0L - p;
    long double b = 1.0L - 2.0L * p;

    t.q_success = ipow(a, m - 1);
    t.q_one = m == 2 ? 0.0L : (m - 1) * p * (ipow(a, m - 2) - ipow(b, m - 2));
    t.q_none = 1.0L - t.q_success - t.q_one;

    if (m == 2) {
        t.s_one = 2.0L * p;
        t.s_two = 0.0L;
    } else {
        t.s_one = 2.0L * (m - 1) * p * (ipow(a, m - 2) - (m - 2) * p * ipow(b, m - 3));
        t.s_two = static_cast<long double>(m - 1) * (m - 2) * p * p * ipow(b, m - 3);
    }
    t.s_none = 1.0L - t.s_one - t.s_two;

    t.p_success = 2.0L * p * ipow(a, m - 1);
    t.p_one = 2.0L * (m - 1) * p * (ipow(a, m - 1) - (m - 1) * p * ipow(b, m - 2));
    t.p_two = static_cast<long double>(m - 1) * (m - 2) * p * p * ipow(b, m - 2);
    t.p_none = 1.0L - t.p_success - t.p_one - t.p_two;
    return t;
}

OneStepValues one_step_values(int m, long double p, long double F_m, long double F_m1, long double F_m2) {
    auto t = ternary_kernels(m, p);
    OneStepValues v;
    v.transmit = 1.0L + t.q_none * F_m + t.q_one * F_m1;
    v.silent = 1.0L + t.s_none * F_m + t.s_one * F_m1 + t.s_two * F_m2;
    return v;
}

long double indifference_gap(int m, long double p, long double F_m1, long double F_m2) {
    auto t = ternary_kernels(m, p);
    // leave-state masses as sums; 1 - q_none cancels badly for large m
    long double q_leave = t.q_success + t.q_one;
    long double s_leave = t.s_one + t.s_two;
    return s_leave * (1.0L + t.q_one * F_m1) - q_leave * (1.0L + t.s_one * F_m1 + t.s_two * F_m2);
}

long double future_latency_from_kernels(int m, long double p_prev, long double p) {
    if (m < 3) throw PreconditionError("future_latency_from_kernels needs m >= 3");
    auto prev = ternary_kernels(m - 1, p_prev);
    auto cur = ternary_kernels(m, p);
    long double A = prev.q_one * cur.s_one + cur.s_two * (prev.q_success + prev.q_one);
    long double num = A - cur.q_one * (prev.q_one - cur.s_two);
    long double lhs = (cur.q_success + cur.q_one) * A;
    long double rhs = prev.q_one * cur.q_one * (cur.s_one + cur.s_two);
    long double den = lhs - rhs;
    // both terms shrink geometrically in m, so the guard is on relative cancellation
    if (std::fabs(den) < kDenominatorGuard * std::max(std::fabs(lhs), std::fabs(rhs))) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "degenerate denominator %.3Lg (terms %.3Lg) in F_m at m=%d, p=%.17Lg", den, lhs, m, p);
        throw SolverError(buf);
    }
    return num / den;
}

long double equilibrium_residual(int m, long double p_candidate, const EquilibriumTable& table) {
    if (m < 2) throw PreconditionError("equilibrium_residual needs m >= 2");
    if (!table.covers(m - 1)) throw PreconditionError("table does not hold row m-1");
    if (!(p_candidate > 0.0L && p_candidate <= 0.5L)) throw PreconditionError("p_candidate must lie in (0, 1/2]");
    auto cur = ternary_kernels(m, p_candidate);
    long double F_m1 = table.F[static_cast<std::size_t>(m - 1)];
    long double F_m;
    if (m == 2)
        F_m = 2.0L;  // base pair
    else
        F_m = future_latency_from_kernels(m, table.p[static_cast<std::size_t>(m - 1)], p_candidate);
    return (cur.q_success + cur.q_one) * F_m - 1.0L - cur.q_one * F_m1;
}

EquilibriumTable solve_equilibrium_table(int max_m, long double tol) {
    SolverOptions o;
    o.tol = tol;
    return solve_equilibrium_table(max_m, o);
}

EquilibriumTable solve_equilibrium_table(int max_m, const SolverOptions& options) {
    if (max_m < 2) throw PreconditionError("max_m must be >= 2");
    if (!(options.tol > 0)) throw PreconditionError("tol must be > 0");
    if (options.grid_points < 2) throw PreconditionError("grid_points must be >= 2");
    if (!(options.scan_lo > 0 && options.scan_lo < 0.5L)) throw PreconditionError("scan_lo must lie in (0, 1/2)");

    const auto size = static_cast<std::size_t>(max_m) + 1;
    EquilibriumTable t;
    t.max_m = max_m;
    t.tol = options.tol;
    t.grid_points = options.grid_points;
    t.scan_lo = options.scan_lo;
    t.p.assign(size, 0.0L);
    t.F.assign(size, 0.0L);
    t.recurrence_residual.assign(size, 0.0L);
    t.indifference_gap.assign(size, 0.0L);
    t.bracket_width.assign(size, 0.0L);
    t.corner.assign(size, false);

    t.p[1] = 0.5L;
    t.F[1] = 1.0L;
    t.p[2] = 0.5L;
    t.F[2] = 2.0L;

    auto diagnose = [&](int m) {
        auto i = static_cast<std::size_t>(m);
        auto k = ternary_kernels(m, t.p[i]);
        t.recurrence_residual[i] = std::fabs((k.q_success + k.q_one) * t.F[i] - 1.0L - k.q_one * t.F[i - 1]);
        auto v = one_step_values(m, t.p[i], t.F[i], t.F[i - 1], t.F[i - 2]);
        t.indifference_gap[i] = v.transmit - v.silent;
    };
    diagnose(2);

    const long double hi_end = 0.5L;
    for (int m = 3; m <= max_m; ++m) {
        auto i = static_cast<std::size_t>(m);
        long double F1 = t.F[i - 1], F2 = t.F[i - 2];
        auto g = [&](long double p) { return indifference_gap(m, p, F1, F2); };

        long double lo = 0, hi = 0, glo = 0;
        bool bracketed = false;
        long double prev_p = options.scan_lo;
        long double prev_g = g(prev_p);
        for (int s = 1; s <= options.grid_points; ++s) {
            long double p = s == options.grid_points
                                ? hi_end
                                : options.scan_lo + (hi_end - options.scan_lo) * s / options.grid_points;
            long double gp = g(p);
            if ((prev_g < 0) != (gp < 0) || gp == 0) {
                lo = gp == 0 ? p : prev_p;
                hi = p;
                glo = prev_g;
                bracketed = true;
                break;
            }
            prev_p = p;
            prev_g = gp;
        }

        long double root;
        if (bracketed) {
            // bisect to floating resolution, then enforce tol on the bracket
            for (int it = 0; it < 256; ++it) {
                long double mid = lo + (hi - lo) / 2;
                if (mid <= lo || mid >= hi) break;
                long double gm = g(mid);
                if (gm == 0) {
                    lo = hi = mid;
                    break;
                }
                if ((gm < 0) == (glo < 0)) {
                    lo = mid;
                    glo = gm;
                } else {
                    hi = mid;
                }
            }
            if (hi - lo > options.tol) {
                char buf[160];
                std::snprintf(buf, sizeof buf, "bisection at m=%d stalled with bracket width %.3Lg > tol %.3Lg", m,
                              hi - lo, options.tol);
                throw SolverError(buf);
            }
            root = std::fabs(g(lo)) <= std::fabs(g(hi)) ? lo : hi;
            t.bracket_width[i] = hi - lo;
        } else if (prev_g < 0) {
            // transmitting beats silence on the whole interval: the rule sits at its maximum
            root = hi_end;
            t.corner[i] = true;
        } else {
            char buf[200];
            std::snprintf(buf, sizeof buf,
                          "no sign change of the indifference gap at m=%d on %d grid points over [%.3Lg, 1/2]", m,
                          options.grid_points, options.scan_lo);
            throw SolverError(buf);
        }

        t.p[i] = root;
        t.F[i] = future_latency_from_kernels(m, t.p[i - 1], root);
        diagnose(m);
    }
    return t;
}

void write_table_csv(std::ostream& os, const EquilibriumTable& table, bool bound_columns) {
    os << "m,p_m,F_m";
    if (bound_columns) os << ",lower,upper";
    os << '\n';
    char buf[64];
    for (int m = 2; m <= table.max_m; ++m) {
        auto i = static_cast<std::size_t>(m);
        os << m;
        std::snprintf(buf, sizeof buf, ",%.17g", static_cast<double>(table.p[i]));
        os << buf;
        std::snprintf(buf, sizeof buf, ",%.17g", static_cast<double>(table.F[i]));
        os << buf;
        if (bound_columns) {
            double s = std::sqrt(static_cast<double>(m - 1));
            std::snprintf(buf, sizeof buf, ",%.17g,%.17g", 1.0 / (2.0 * s), 2.0 / s);
            os << buf;
        }
        os << '\n';
    }
}

nlohmann::ordered_json table_to_json(const EquilibriumTable& table) {
    nlohmann::ordered_json j;
    j["max_m"] = table.max_m;
    j["solver"] = {{"tol", static_cast<double>(table.tol)},
                   {"grid_points", table.grid_points},
                   {"scan_lo", static_cast<double>(table.scan_lo)}};
    auto rows = nlohmann::ordered_json::array();
    for (int m = 2; m <= table.max_m; ++m) {
        auto i = static_cast<std::size_t>(m);
        rows.push_back({{"m", m},
                        {"p_m", static_cast<double>(table.p[i])},
                        {"F_m", static_cast<double>(table.F[i])},
                        {"recurrence_residual", static_cast<double>(table.recurrence_residual[i])},
                        {"indifference_gap", static_cast<double>(table.indifference_gap[i])},
                        {"bracket_width", static_cast<double>(table.bracket_width[i])},
                        {"corner", static_cast<bool>(table.corner[i])}});
    }
    j["rows"] = std::move(rows);
    return j;
}

}  // namespace contend
