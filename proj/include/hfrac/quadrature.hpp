#pragma once

#include <cmath>
#include <cstdint>

#include "hfrac/common.hpp"

namespace hfrac {

namespace detail {

template <class F>
double adaptive_simpson_rec(const F& f, double a, double b, double fa, double fm, double fb,
                            double whole, double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (depth <= 0 || std::fabs(delta) <= 15.0 * tol)
        return left + right + delta / 15.0;
    return adaptive_simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           adaptive_simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

} // namespace detail

/// Adaptive Simpson on [a, b].
template <class F>
double integrate_1d(const F& f, double a, double b, double tol = 1e-12, int max_depth = 40) {
    if (a == b) return 0.0;
    const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    const double scale = std::fabs(whole) + 1e-300;
    return detail::adaptive_simpson_rec(f, a, b, fa, fm, fb, whole, tol * scale + 1e-300, max_depth);
}

/// ∫_a^∞ f, for integrands with eventual power-law decay. Dyadic panels
/// [a·2^k, a·2^{k+1}] are accumulated until two consecutive panels fall below
/// rel_tol of the running total.
template <class F>
double integrate_to_infinity(const F& f, double a, double rel_tol = 1e-12, int max_panels = 96) {
    require(a > 0.0, "integrate_to_infinity: lower limit must be positive");
    double total = 0.0;
    int quiet = 0;
    double lo = a;
    for (int k = 0; k < max_panels; ++k) {
        const double hi = 2.0 * lo;
        const double piece = integrate_1d(f, lo, hi, rel_tol);
        total += piece;
        if (std::fabs(piece) <= rel_tol * std::fabs(total) + 1e-300) {
            if (++quiet >= 2) break;
        } else {
            quiet = 0;
        }
        lo = hi;
    }
    return total;
}

} // namespace hfrac
