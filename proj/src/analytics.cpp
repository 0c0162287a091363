#include "contend/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "contend/core.hpp"

namespace contend {

Rational rational_from_double(double x) {
    if (!std::isfinite(x)) throw PreconditionError("cannot convert a non-finite value to a rational");
    if (x == 0.0) return Rational(0);
    int exp = 0;
    double mant = std::frexp(x, &exp);
    // mant * 2^53 is an exact integer
    auto m = static_cast<long long>(std::ldexp(mant, 53));
    exp -= 53;
    Rational r(m);
    if (exp > 0)
        r *= Rational(BigInt(1) << exp);
    else if (exp < 0)
        r /= Rational(BigInt(1) << -exp);
    return r;
}

Rational rational_pow(const Rational& base, int exp) {
    if (exp < 0) throw PreconditionError("negative exponent");
    Rational out(1);
    Rational b = base;
    while (exp) {
        if (exp & 1) out *= b;
        exp >>= 1;
        if (exp) b *= b;
    }
    return out;
}

BigInt binomial(int a, int b) {
    if (b < 0 || a < 0 || b > a) return 0;
    b = std::min(b, a - b);
    BigInt out = 1;
    for (int i = 1; i <= b; ++i) {
        out *= a - b + i;
        out /= i;
    }
    return out;
}

double SuccessPmf::mean() const {
    double m = 0.0;
    for (std::size_t x = 0; x < probs.size(); ++x) m += static_cast<double>(x) * probs[x];
    return m;
}

double SuccessPmf::total() const {
    double s = 0.0;
    for (double p : probs) s += p;
    return s;
}

namespace {

void check_mass(int n, int k, double z) {
    if (n < 0) throw PreconditionError("n must be >= 1");
    if (k < 0) throw PreconditionError("k must be >= 1");
    if (!(z >= 0.0 && z <= 1.0)) throw PreconditionError("z must lie in [0, 1]");
}

BigInt factorial(int r) {
    BigInt f = 1;
    for (int i = 2; i <= r; ++i) f *= i;
    return f;
}

std::vector<Rational> pmf_exact_unchecked(int n, int k, const Rational& z) {
    std::vector<Rational> probs(static_cast<std::size_t>(n) + 1, Rational(0));
    if (n == 0) {
        probs[0] = 1;
        return probs;
    }
    if (k == 0) {
        // nowhere to transmit
        probs[0] = 1;
        return probs;
    }
    int rmax = std::min(n, k);
    Rational zk = z / k;
    // S_r = C(k,r) C(n,r) r! (z/k)^r (1 - r z/k)^(n-r)
    std::vector<Rational> S(static_cast<std::size_t>(rmax) + 1);
    for (int r = 0; r <= rmax; ++r) {
        Rational coeff(binomial(k, r) * binomial(n, r) * factorial(r));
        S[static_cast<std::size_t>(r)] = coeff * rational_pow(zk, r) * rational_pow(1 - r * zk, n - r);
    }
    for (int x = 0; x <= rmax; ++x) {
        Rational acc(0);
        for (int r = x; r <= rmax; ++r) {
            Rational term = Rational(binomial(r, x)) * S[static_cast<std::size_t>(r)];
            if ((r - x) % 2)
                acc -= term;
            else
                acc += term;
        }
        probs[static_cast<std::size_t>(x)] = acc;
    }
    return probs;
}

}  // namespace

double expected_successes(int n, int k, double z) {
    if (n < 1 || k < 1) throw PreconditionError("n and k must be >= 1");
    check_mass(n, k, z);
    return z * n * std::pow(1.0 - z / k, n - 1);
}

std::vector<Rational> success_count_pmf_exact(int n, int k, const Rational& z) {
    if (n < 1 || k < 1) throw PreconditionError("n and k must be >= 1");
    if (z < 0 || z > 1) throw PreconditionError("z must lie in [0, 1]");
    return pmf_exact_unchecked(n, k, z);
}

SuccessPmf success_count_pmf(int n, int k, double z) {
    if (n < 1 || k < 1) throw PreconditionError("n and k must be >= 1");
    check_mass(n, k, z);
    SuccessPmf out;
    out.probs.assign(static_cast<std::size_t>(n) + 1, 0.0);
    if (n <= 64) {
        auto exact = pmf_exact_unchecked(n, k, rational_from_double(z));
        for (std::size_t x = 0; x < exact.size(); ++x) out.probs[x] = to_double(exact[x]);
        return out;
    }
    int rmax = std::min(n, k);
    auto lchoose = [](int a, int b) {
        return std::lgamma(a + 1.0L) - std::lgamma(b + 1.0L) - std::lgamma(a - b + 1.0L);
    };
    for (int x = 0; x <= rmax; ++x) {
        // Neumaier summation
        long double sum = 0, comp = 0;
        for (int r = x; r <= rmax; ++r) {
            long double base = 1.0L - static_cast<long double>(r) * z / k;
            long double term;
            if (z == 0.0) {
                term = r == 0 ? 1.0L : 0.0L;
            } else if (base <= 0.0L && n - r > 0) {
                term = 0.0L;
            } else {
                long double lg = lchoose(r, x) + lchoose(k, r) + lchoose(n, r) + std::lgamma(r + 1.0L) +
                                 r * std::log(static_cast<long double>(z) / k) +
                                 (n - r > 0 ? (n - r) * std::log(base) : 0.0L);
                term = std::exp(lg);
            }
            if ((r - x) % 2) term = -term;
            long double t = sum + term;
            if (std::fabs(sum) >= std::fabs(term))
                comp += (sum - t) + term;
            else
                comp += (term - t) + sum;
            sum = t;
        }
        out.probs[static_cast<std::size_t>(x)] = static_cast<double>(std::max(0.0L, sum + comp));
    }
    return out;
}

double optimal_transmission_mass(int n, int k) {
    if (n < 1 || k < 1) throw PreconditionError("n and k must be >= 1");
    return std::min(static_cast<double>(k) / n, 1.0);
}

// ---- f^k pending-count chain ---------------------------------------------

FkTransition fk_transition(int m, int k) {
    if (m < 1 || k < 1) throw PreconditionError("m and k must be >= 1");
    FkTransition t;
    t.fail.assign(static_cast<std::size_t>(m), Rational(0));
    int others = m - 1;
    Rational same(1, k);
    Rational other = 1 - same;
    t.success = rational_pow(other, others);
    // j others share the tagged player's channel; the rest spread over k-1 channels
    for (int j = 1; j <= others; ++j) {
        Rational pj = Rational(binomial(others, j)) * rational_pow(same, j) * rational_pow(other, others - j);
        if (pj == 0) continue;
        auto rest = pmf_exact_unchecked(others - j, k - 1, Rational(1));
        for (std::size_t x = 0; x < rest.size(); ++x) t.fail[x] += pj * rest[x];
    }
    return t;
}

Rational MarkovLatencyModel::max_row_defect() const {
    Rational worst(0);
    for (int m = 1; m <= n; ++m) {
        const auto& row = rows[static_cast<std::size_t>(m)];
        Rational s = row.success;
        for (const auto& f : row.fail) s += f;
        Rational d = abs(1 - s);
        if (d > worst) worst = d;
    }
    return worst;
}

double MarkovLatencyModel::max_residual() const {
    double worst = 0.0;
    for (int m = 1; m <= n; ++m) {
        const auto& row = rows[static_cast<std::size_t>(m)];
        Rational rhs(1);
        for (std::size_t x = 0; x < row.fail.size(); ++x)
            rhs += row.fail[x] * hitting[static_cast<std::size_t>(m) - x];
        worst = std::max(worst, std::abs(to_double(hitting[static_cast<std::size_t>(m)] - rhs)));
    }
    return worst;
}

MarkovLatencyModel build_fk_chain(int n, int k, int max_exact_n) {
    if (n < 1 || k < 1) throw PreconditionError("n and k must be >= 1");
    if (n > max_exact_n)
        throw PreconditionError("n=" + std::to_string(n) + " exceeds the exact-arithmetic cap " +
                                std::to_string(max_exact_n));
    MarkovLatencyModel model;
    model.n = n;
    model.k = k;
    model.rows.resize(static_cast<std::size_t>(n) + 1);
    model.hitting.assign(static_cast<std::size_t>(n) + 1, Rational(0));
    for (int m = 1; m <= n; ++m) {
        auto& row = model.rows[static_cast<std::size_t>(m)] = fk_transition(m, k);
        Rational stay = row.fail[0];
        if (stay == 1)
            throw PreconditionError("f^" + std::to_string(k) + " with " + std::to_string(m) +
                                    " pending players never finishes: expected latency is infinite");
        Rational acc(1);
        for (int x = 1; x < m; ++x)
            acc += row.fail[static_cast<std::size_t>(x)] * model.hitting[static_cast<std::size_t>(m - x)];
        model.hitting[static_cast<std::size_t>(m)] = acc / (1 - stay);
    }
    return model;
}

Rational fk_expected_latency(int n, int k, int max_exact_n) {
    return build_fk_chain(n, k, max_exact_n).hitting[static_cast<std::size_t>(n)];
}

Rational f2_closed_form_latency(int n) {
    if (n < 2) throw PreconditionError("f2_closed_form_latency needs n >= 2");
    return Rational(BigInt(1) << n, BigInt(n));
}

Rational f2_deviation_latency(int n) {
    if (n < 5) throw PreconditionError("f2_deviation_latency needs n >= 5");
    return f2_closed_form_latency(n) + Rational(4, n) - 1;
}

Rational no_transmit_round_value(int m, int k) {
    if (k != 2) throw PreconditionError("no_transmit_round_value is defined for k=2");
    if (m < 1 || m > 24) throw PreconditionError("no_transmit_round_value needs 1 <= m <= 24");
    auto latency = [](int j) { return j == 1 ? Rational(1) : f2_closed_form_latency(j); };
    auto others = pmf_exact_unchecked(m - 1, 2, Rational(1));
    Rational v(1);
    for (int x = 0; x <= m - 1; ++x) v += others[static_cast<std::size_t>(x)] * latency(m - x);
    return v;
}

// ---- finishing-time bounds -----------------------------------------------

double finishing_bound_constant() {
    return 1.0 / (1.0 - std::log(std::numbers::e - 1.0));
}

double sop_finishing_bound(int n, int k) {
    if (k < 2) throw PreconditionError("sop_finishing_bound: k=1 is not covered by this bound (needs k >= 2)");
    if (n <= k) throw PreconditionError("sop_finishing_bound needs n > k");
    return std::numbers::e * (n - k) / k + finishing_bound_constant() * std::log(k / 2.0) + 1.0 / (1.0 - 1.0 / k);
}

double small_regime_finishing_bound(int n, int k) {
    if (n < 2 || n > k) throw PreconditionError("small_regime_finishing_bound needs 2 <= n <= k");
    return finishing_bound_constant() * std::log(n / 2.0) + 1.0 / (1.0 - 1.0 / k);
}

double deadline_tail_bound(int n, int k) {
    if (k < 1 || n < 2 * k + 1) throw PreconditionError("deadline_tail_bound needs n >= 2k+1");
    return 2.0 * std::exp(-(n - k) / (2.0 * std::numbers::e * k));
}

nlohmann::ordered_json analytic_record(std::string_view operation, nlohmann::ordered_json inputs,
                                       const Rational& value) {
    nlohmann::ordered_json j;
    j["operation"] = operation;
    j["inputs"] = std::move(inputs);
    j["exact"] = to_string(value);
    j["approx"] = to_double(value);
    return j;
}

nlohmann::ordered_json analytic_record(std::string_view operation, nlohmann::ordered_json inputs, double value) {
    nlohmann::ordered_json j;
    j["operation"] = operation;
    j["inputs"] = std::move(inputs);
    j["exact"] = nullptr;
    j["approx"] = value;
    return j;
}

}  // namespace contend
