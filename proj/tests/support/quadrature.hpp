#pragma once

// Test-side adaptive Simpson quadrature: the independent oracle used to
// check the closed-form mass/mean of the interarrival law.  Kept free of
// any solver code on purpose.

#include <cmath>
#include <functional>

namespace qnet::testing {

inline double simpson(const std::function<double(double)>& f, double a, double m, double b,
                      double fa, double fm, double fb) {
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

inline double adaptive_simpson_rec(const std::function<double(double)>& f, double a, double b,
                                   double fa, double fm, double fb, double whole, double tol,
                                   int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = simpson(f, a, lm, m, fa, flm, fm);
    const double right = simpson(f, m, rm, b, fm, frm, fb);
    const double delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) <= 15.0 * tol)
        return left + right + delta / 15.0;
    return adaptive_simpson_rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) +
           adaptive_simpson_rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1);
}

inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                               double tol = 1e-12, int depth = 60) {
    const double m = 0.5 * (a + b);
    const double fa = f(a), fm = f(m), fb = f(b);
    return adaptive_simpson_rec(f, a, b, fa, fm, fb, simpson(f, a, m, b, fa, fm, fb), tol,
                                depth);
}

// Mass and mean of the law nu for candidate (M, beta, gamma), by quadrature
// over the continuous part plus the atom.  The density decays at rate beta
// past gamma*M, so the domain splits at gamma*M + 60/beta to give the
// adaptive rule a head start on the long flat region.
struct NuOracle {
    double M, beta, gamma;

    double density(double t) const {
        return (1.0 / M) * std::exp(-beta * (t - gamma * M));
    }

    double mass() const {
        const double lo = gamma * M, hi = 2.0 * M;
        const double cut = std::min(hi, lo + 60.0 / beta);
        auto f = [this](double t) { return density(t); };
        double integral = adaptive_simpson(f, lo, cut);
        if (cut < hi) integral += adaptive_simpson(f, cut, hi);
        return (1.0 - 1.0 / M) + integral;
    }

    double mean() const {
        const double lo = gamma * M, hi = 2.0 * M;
        const double cut = std::min(hi, lo + 60.0 / beta);
        auto f = [this](double t) { return t * density(t); };
        double integral = adaptive_simpson(f, lo, cut, 1e-10);
        if (cut < hi) integral += adaptive_simpson(f, cut, hi, 1e-10);
        return (1.0 / (M * M)) * (1.0 - 1.0 / M) + integral;
    }
};

}  // namespace qnet::testing
