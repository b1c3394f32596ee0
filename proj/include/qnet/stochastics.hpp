#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "qnet/rng.hpp"

namespace qnet {

// ---------------------------------------------------------------------------
// Interarrival law nu(M):
//   nu({1/M^2}) = 1 - 1/M                       (atom, the "short" gaps)
//   nu(dt)      = (1/M) e^{-beta(t - gamma M)}  on [gamma M, 2M]
// with (beta, gamma) chosen so the law has total mass 1 and mean 1.
// ---------------------------------------------------------------------------

struct NuParams {
    double M = 0;
    double beta = 0;
    double gamma = 0;
    double mass_residual = 0;  // closed-form mass - 1 at the solved point
    double mean_residual = 0;  // closed-form mean - 1 at the solved point

    double atom() const { return 1.0 / (M * M); }
    double atom_mass() const { return 1.0 - 1.0 / M; }
    double support_lo() const { return gamma * M; }
    double support_hi() const { return 2.0 * M; }

    // Closed-form total mass / mean of the full law (atom + density) for
    // arbitrary candidate parameters; used by the solver and its tests.
    static double law_mass(double M, double beta, double gamma);
    static double law_mean(double M, double beta, double gamma);

    // Density of the continuous part at t (0 outside the support).
    double density(double t) const;
};

struct NuSolveError : std::runtime_error {
    NuSolveError(const std::string& what, double beta, double gamma,
                 double mass_residual, double mean_residual)
        : std::runtime_error(what),
          beta(beta),
          gamma(gamma),
          mass_residual(mass_residual),
          mean_residual(mean_residual) {}
    double beta, gamma, mass_residual, mean_residual;
};

// Solves the 2x2 system {mass = 1, mean = 1} for (beta, gamma) with a damped
// Newton iteration on the closed-form antiderivatives (analytic Jacobian,
// initial guess (1, 1 - 1/M)), falling back to nested bisection.  Throws
// NuSolveError with the last iterate if neither converges.
NuParams solve_nu_params(double M);

// One draw from nu: the atom with probability 1 - 1/M, otherwise
// gamma*M + Exp(beta) with rejection past 2M.
double sample_interarrival(const NuParams& p, RngStream& s);

// ---------------------------------------------------------------------------
// Service laws
// ---------------------------------------------------------------------------

struct ErlangComponent {
    double weight = 1.0;
    int stages = 1;
    double stage_mean = 1.0;
};

struct ServiceLaw {
    enum class Kind { Deterministic, Exponential, ErlangMixture };

    Kind kind = Kind::Deterministic;
    double mean_value = 0;                     // Deterministic / Exponential
    std::vector<ErlangComponent> components;   // ErlangMixture

    static ServiceLaw deterministic(double mean);
    static ServiceLaw exponential(double mean);
    static ServiceLaw erlang_mixture(std::vector<ErlangComponent> components);

    double mean() const;
    void validate() const;  // weights sum to 1, all means > 0

    bool operator==(const ServiceLaw&) const = default;
};

bool operator==(const ErlangComponent&, const ErlangComponent&);

double sample_service(const ServiceLaw& law, RngStream& s);

// ---------------------------------------------------------------------------
// Arrival laws (renewal interarrival distributions for external sources)
// ---------------------------------------------------------------------------

struct ArrivalLaw {
    enum class Kind { Nu, Exponential, Atom };

    Kind kind = Kind::Nu;
    NuParams nu;          // Kind::Nu
    double mean_value = 1.0;  // Exponential mean / Atom location

    static ArrivalLaw nu_law(const NuParams& p);
    static ArrivalLaw exponential(double mean);
    static ArrivalLaw atom(double value);

    // nu has mean 1 by construction; that defining value (not the solver
    // residual) is what flow-rate computations use.
    double mean() const;

    bool operator==(const ArrivalLaw&) const;
};

double sample_arrival(const ArrivalLaw& law, RngStream& s);

// Checks of the appendix's renewal-input conditions: unbounded support and
// presence of an absolutely continuous component.  Informational; nu(M)
// reports {false, true}.
struct ArrivalConditionReport {
    bool unbounded_support = false;
    bool density_component = false;
};

ArrivalConditionReport validate_arrival_conditions(const ArrivalLaw& law);

}  // namespace qnet
