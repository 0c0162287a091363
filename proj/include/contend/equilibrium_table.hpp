#pragma once

#include <vector>

namespace contend {

// Symmetric two-channel equilibrium under ternary feedback, indexed by the
// pending count m. p[1] = 1/2 and F[1] = 1 by convention; F[0] = 0.
struct EquilibriumTable {
    int max_m = 1;
    std::vector<long double> p;
    std::vector<long double> F;

    // solver diagnostics, indexed like p
    std::vector<long double> recurrence_residual;
    std::vector<long double> indifference_gap;  // sure-transmit value minus sure-silent value
    std::vector<long double> bracket_width;
    std::vector<bool> corner;                   // root taken at p = 1/2 without a sign change

    long double tol = 0;
    int grid_points = 0;
    long double scan_lo = 0;

    bool covers(int m) const { return m >= 1 && m <= max_m; }
};

}  // namespace contend
