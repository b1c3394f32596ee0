#include "qnet/stochastics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace qnet {

double RngStream::exponential(double mean) {
    // next_unit() < 1, so 1-u > 0 and log() is finite.
    return -mean * std::log(1.0 - next_unit());
}

// ---------------------------------------------------------------------------
// nu(M) closed forms.
//
// With R = (2 - gamma) M and E = e^{-beta R}:
//   mass = (1 - 1/M) + (1 - E) / (beta M)
//   mean = (1/M^2)(1 - 1/M)
//        + (1/M) [ gamma M (1-E)/beta + (1-E)/beta^2 - R E / beta ]
// The (1-E) terms are evaluated with expm1 to stay accurate for small
// beta*R; E underflows harmlessly to 0 for large M.
// ---------------------------------------------------------------------------

double NuParams::law_mass(double M, double beta, double gamma) {
    const double R = (2.0 - gamma) * M;
    const double one_minus_E = -std::expm1(-beta * R);
    return (1.0 - 1.0 / M) + one_minus_E / (beta * M);
}

double NuParams::law_mean(double M, double beta, double gamma) {
    const double R = (2.0 - gamma) * M;
    const double E = std::exp(-beta * R);
    const double one_minus_E = -std::expm1(-beta * R);
    const double A = one_minus_E / beta;                       // integral of density * M
    const double B = one_minus_E / (beta * beta) - R * E / beta;
    const double atom_part = (1.0 / (M * M)) * (1.0 - 1.0 / M);
    return atom_part + gamma * A + B / M;
}

double NuParams::density(double t) const {
    if (t < support_lo() || t > support_hi()) return 0.0;
    return (1.0 / M) * std::exp(-beta * (t - gamma * M));
}

namespace {

struct Residuals {
    double f1;  // M * (mass - 1) = (1-E)/beta - 1
    double f2;  // mean - 1
};

Residuals nu_residuals(double M, double b, double g) {
    const double R = (2.0 - g) * M;
    const double one_minus_E = -std::expm1(-b * R);
    return {one_minus_E / b - 1.0, NuParams::law_mean(M, b, g) - 1.0};
}

// Analytic Jacobian of (f1, f2) with respect to (beta, gamma).
void nu_jacobian(double M, double b, double g, double J[2][2]) {
    const double R = (2.0 - g) * M;
    const double E = std::exp(-b * R);
    const double one_minus_E = -std::expm1(-b * R);
    const double dA_db = (R * E * b - one_minus_E) / (b * b);
    const double dA_dg = -E * M;
    const double dB_db = 2.0 * R * E / (b * b) - 2.0 * one_minus_E / (b * b * b) + R * R * E / b;
    const double dB_dg = -M * R * E;
    const double A = one_minus_E / b;
    J[0][0] = dA_db;
    J[0][1] = dA_dg;
    J[1][0] = g * dA_db + dB_db / M;
    J[1][1] = A + g * dA_dg + dB_dg / M;
}

constexpr double kMassTol = 1e-12;  // on mass - 1 (solver aims below spec's 1e-10)
constexpr double kMeanTol = 1e-10;  // on mean - 1

bool nu_converged(double M, const Residuals& r) {
    return std::abs(r.f1 / M) <= kMassTol && std::abs(r.f2) <= kMeanTol;
}

// Scalar solve of f1(beta; gamma) = 0.  f1 is strictly decreasing in beta
// with a root in (0, 1) whenever R > 1.
double solve_beta_for_gamma(double M, double g) {
    double lo = 1e-12, hi = 1.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        const double f = nu_residuals(M, mid, g).f1;
        if (f > 0)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

NuParams solve_nu_params(double M) {
    if (!(M > 4.0)) throw std::invalid_argument("solve_nu_params: requires M > 4");

    double b = 1.0, g = 1.0 - 1.0 / M;
    Residuals r = nu_residuals(M, b, g);

    for (int iter = 0; iter < 100 && !nu_converged(M, r); ++iter) {
        double J[2][2];
        nu_jacobian(M, b, g, J);
        const double det = J[0][0] * J[1][1] - J[0][1] * J[1][0];
        if (det == 0.0 || !std::isfinite(det)) break;
        double db = (-r.f1 * J[1][1] + r.f2 * J[0][1]) / det;
        double dg = (-r.f2 * J[0][0] + r.f1 * J[1][0]) / det;

        // Damped step, clamped to the domain beta in (0,1], gamma in (0,2).
        const double norm0 = std::abs(r.f1) + std::abs(r.f2);
        double scale = 1.0;
        bool improved = false;
        for (int halves = 0; halves < 40; ++halves, scale *= 0.5) {
            double bn = std::clamp(b + scale * db, 1e-9, 1.0);
            double gn = std::clamp(g + scale * dg, 1e-9, 2.0 - 1e-9);
            Residuals rn = nu_residuals(M, bn, gn);
            if (std::abs(rn.f1) + std::abs(rn.f2) < norm0) {
                b = bn;
                g = gn;
                r = rn;
                improved = true;
                break;
            }
        }
        if (!improved) break;
    }

    if (!nu_converged(M, r)) {
        // Fallback: bisection on gamma with an inner scalar solve for beta.
        // mean(beta(gamma), gamma) is increasing in gamma.
        double glo = 1e-6, ghi = 2.0 - 1e-9;
        double flo = nu_residuals(M, solve_beta_for_gamma(M, glo), glo).f2;
        double fhi = nu_residuals(M, solve_beta_for_gamma(M, ghi), ghi).f2;
        if (flo > 0 || fhi < 0) {
            throw NuSolveError("solve_nu_params: no bracket for gamma", b, g, r.f1 / M, r.f2);
        }
        for (int i = 0; i < 200; ++i) {
            const double gm = 0.5 * (glo + ghi);
            const double fm = nu_residuals(M, solve_beta_for_gamma(M, gm), gm).f2;
            if (fm < 0)
                glo = gm;
            else
                ghi = gm;
        }
        g = 0.5 * (glo + ghi);
        b = solve_beta_for_gamma(M, g);
        r = nu_residuals(M, b, g);
        if (!nu_converged(M, r)) {
            throw NuSolveError("solve_nu_params: did not converge", b, g, r.f1 / M, r.f2);
        }
    }

    NuParams p;
    p.M = M;
    p.beta = b;
    p.gamma = g;
    p.mass_residual = NuParams::law_mass(M, b, g) - 1.0;
    p.mean_residual = NuParams::law_mean(M, b, g) - 1.0;
    return p;
}

double sample_interarrival(const NuParams& p, RngStream& s) {
    if (s.next_unit() < p.atom_mass()) return p.atom();
    for (;;) {
        const double t = p.support_lo() + s.exponential(1.0 / p.beta);
        if (t <= p.support_hi()) return t;
    }
}

// ---------------------------------------------------------------------------
// Service laws
// ---------------------------------------------------------------------------

bool operator==(const ErlangComponent& a, const ErlangComponent& b) {
    return a.weight == b.weight && a.stages == b.stages && a.stage_mean == b.stage_mean;
}

ServiceLaw ServiceLaw::deterministic(double mean) {
    ServiceLaw law;
    law.kind = Kind::Deterministic;
    law.mean_value = mean;
    law.validate();
    return law;
}

ServiceLaw ServiceLaw::exponential(double mean) {
    ServiceLaw law;
    law.kind = Kind::Exponential;
    law.mean_value = mean;
    law.validate();
    return law;
}

ServiceLaw ServiceLaw::erlang_mixture(std::vector<ErlangComponent> components) {
    ServiceLaw law;
    law.kind = Kind::ErlangMixture;
    law.components = std::move(components);
    law.validate();
    return law;
}

double ServiceLaw::mean() const {
    if (kind != Kind::ErlangMixture) return mean_value;
    double m = 0;
    for (const auto& c : components) m += c.weight * c.stages * c.stage_mean;
    return m;
}

void ServiceLaw::validate() const {
    if (kind != Kind::ErlangMixture) {
        if (!(mean_value > 0)) throw std::invalid_argument("ServiceLaw: mean must be > 0");
        return;
    }
    if (components.empty()) throw std::invalid_argument("ServiceLaw: empty mixture");
    double wsum = 0;
    for (const auto& c : components) {
        if (!(c.weight > 0) || c.stages < 1 || !(c.stage_mean > 0))
            throw std::invalid_argument("ServiceLaw: bad mixture component");
        wsum += c.weight;
    }
    if (std::abs(wsum - 1.0) > 1e-12)
        throw std::invalid_argument("ServiceLaw: mixture weights must sum to 1");
}

double sample_service(const ServiceLaw& law, RngStream& s) {
    switch (law.kind) {
        case ServiceLaw::Kind::Deterministic:
            return law.mean_value;  // no variate consumed
        case ServiceLaw::Kind::Exponential:
            return s.exponential(law.mean_value);
        case ServiceLaw::Kind::ErlangMixture: {
            double u = s.next_unit();
            const ErlangComponent* pick = &law.components.back();
            for (const auto& c : law.components) {
                if (u < c.weight) {
                    pick = &c;
                    break;
                }
                u -= c.weight;
            }
            double total = 0;
            for (int i = 0; i < pick->stages; ++i) total += s.exponential(pick->stage_mean);
            return total;
        }
    }
    return 0;  // unreachable
}

// ---------------------------------------------------------------------------
// Arrival laws
// ---------------------------------------------------------------------------

ArrivalLaw ArrivalLaw::nu_law(const NuParams& p) {
    ArrivalLaw law;
    law.kind = Kind::Nu;
    law.nu = p;
    law.mean_value = 1.0;
    return law;
}

ArrivalLaw ArrivalLaw::exponential(double mean) {
    if (!(mean > 0)) throw std::invalid_argument("ArrivalLaw: mean must be > 0");
    ArrivalLaw law;
    law.kind = Kind::Exponential;
    law.mean_value = mean;
    return law;
}

ArrivalLaw ArrivalLaw::atom(double value) {
    if (!(value > 0)) throw std::invalid_argument("ArrivalLaw: atom must be > 0");
    ArrivalLaw law;
    law.kind = Kind::Atom;
    law.mean_value = value;
    return law;
}

double ArrivalLaw::mean() const {
    return kind == Kind::Nu ? 1.0 : mean_value;
}

bool ArrivalLaw::operator==(const ArrivalLaw& o) const {
    if (kind != o.kind) return false;
    if (kind == Kind::Nu)
        return nu.M == o.nu.M && nu.beta == o.nu.beta && nu.gamma == o.nu.gamma &&
               nu.mass_residual == o.nu.mass_residual && nu.mean_residual == o.nu.mean_residual;
    return mean_value == o.mean_value;
}

double sample_arrival(const ArrivalLaw& law, RngStream& s) {
    switch (law.kind) {
        case ArrivalLaw::Kind::Nu:
            return sample_interarrival(law.nu, s);
        case ArrivalLaw::Kind::Exponential:
            return s.exponential(law.mean_value);
        case ArrivalLaw::Kind::Atom:
            return law.mean_value;
    }
    return 0;  // unreachable
}

ArrivalConditionReport validate_arrival_conditions(const ArrivalLaw& law) {
    switch (law.kind) {
        case ArrivalLaw::Kind::Nu:
            return {false, true};  // support bounded by 2M; density on [gamma M, 2M]
        case ArrivalLaw::Kind::Exponential:
            return {true, true};
        case ArrivalLaw::Kind::Atom:
            return {false, false};
    }
    return {};
}

}  // namespace qnet
