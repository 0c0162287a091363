#pragma once

#include <string>

#include <boost/multiprecision/cpp_int.hpp>

namespace contend {

using Rational = boost::multiprecision::cpp_rational;
using BigInt = boost::multiprecision::cpp_int;

// "p/q", or "p" for integers
inline std::string to_string(const Rational& r) { return r.str(); }

inline double to_double(const Rational& r) { return r.convert_to<double>(); }
inline long double to_long_double(const Rational& r) { return r.convert_to<long double>(); }

// Exact value of a finite double.
Rational rational_from_double(double x);

Rational rational_pow(const Rational& base, int exp);

BigInt binomial(int a, int b);

}  // namespace contend
