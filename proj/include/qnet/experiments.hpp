#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qnet/observables.hpp"

namespace qnet {

// ---------------------------------------------------------------------------
// Statistics helpers
// ---------------------------------------------------------------------------

struct WilsonInterval {
    double lo = 0, hi = 1;
};

WilsonInterval wilson(long successes, long n, double z = 1.96);

double median_of(std::vector<double> v);

struct LinFit {
    double slope = 0, intercept = 0, slope_se = 0;
    int n = 0;
    // one-sided upper bound on the slope at the given normal quantile
    double slope_upper(double z) const { return slope + z * slope_se; }
};

LinFit linear_fit(const std::vector<double>& x, const std::vector<double>& y);

// Two-sample Kolmogorov-Smirnov statistic and asymptotic critical value.
double ks_statistic(std::vector<double> a, std::vector<double> b);
double ks_critical(double alpha, std::size_t n, std::size_t m);

// Empirical complementary CDF over a threshold grid, with Wilson bands and
// a log-linear fit over the strictly positive estimates.
struct TailEstimate {
    std::vector<double> x;
    std::vector<long> exceed;
    long n = 0;
    std::vector<double> p, lo, hi;
    LinFit log_fit;

    void count(double value);  // increments exceed[i] for every x[i] <= value
    void finalize();
    // nonincreasing up to confidence-band overlap
    bool nonincreasing_up_to_bands() const;
};

std::string tail_csv(const TailEstimate& t);

// Renewal arrivals over (0, t0].
std::vector<double> simulate_renewal_arrivals(const ArrivalLaw& law, double t0, RngStream s);

// ---------------------------------------------------------------------------
// Induction-step and multi-cycle growth experiments
// ---------------------------------------------------------------------------

struct InductionConfig {
    double M = 2000;
    double delta = 0.1;
    long N = 40000;
    int replications = 20;
    std::uint64_t seed = 1;
    int jobs = 1;  // parallel replications
    std::uint64_t event_cap = 1'000'000'000;

    bool precondition_met() const { return static_cast<double>(N) >= 2.0 * M / delta; }
    void validate() const;
};

struct FrequencyRow {
    std::string name;
    long count = 0;
    long total = 0;
    WilsonInterval ci;
};

struct InductionResult {
    InductionConfig cfg;
    std::vector<CycleMarks> reps;  // one completed cycle per replication
    long truncated = 0;
    std::vector<FrequencyRow> frequencies;
    bool precondition_warning = false;
};

InductionResult exp_induction(const InductionConfig& cfg);

std::string induction_frequencies_csv(const InductionResult& r);

struct GrowthCycle {
    int cycle = 0;
    double t_start = 0, t_end = 0;  // absolute clock values
    CycleMarks marks;               // relative S1/S2/T inside
    long head_count = 0;            // next head class count at cycle end
    double ratio = 0;               // head_count / previous head count
    bool completed = false;
};

struct GrowthReport {
    InductionConfig cfg;
    int cycles_requested = 0;
    std::vector<std::vector<GrowthCycle>> reps;

    // aggregates over replications that completed the cycle
    std::vector<double> median_head;   // per cycle
    std::vector<double> median_ratio;  // per cycle
    double overall_median_ratio = 0;   // over all completed (rep, cycle) ratios
    long reps_completed_all = 0;
    long reps_all_min_z = 0;     // every completed cycle had min Z >= N_n/4
    long reps_min_w_growing = 0; // per-cycle min W strictly increasing
    std::vector<FrequencyRow> w_dip_freq;  // per cycle: {min W <= N_n/6}

    void aggregate();
};

// Multi-cycle continuation of the same sample path: after each cycle the
// head class swaps (5 after odd cycles, 2 after even) and N is re-read as
// the head-class count.
GrowthReport exp_instability(const InductionConfig& cfg, int cycles);

// Same run with the workload trackers reported (they are always collected);
// kept as a named entry point for the workload-growth experiment.
GrowthReport exp_workload_growth(const InductionConfig& cfg, int cycles);

std::string growth_csv(const GrowthReport& r);

// ---------------------------------------------------------------------------
// Lemma verifiers
// ---------------------------------------------------------------------------

// Single queue, Poisson(1+eta) arrivals, unit service: tails of the total
// idle time |B| and of the excursion events {W_t >= 2 eta t, some t >= t0}.
struct DriftLemmaResult {
    double eta = 0;
    TailEstimate b_tail;
    struct Excursion {
        double t0 = 0;
        long count = 0;
        long n = 0;
        double p = 0;
        WilsonInterval ci;
    };
    std::vector<Excursion> excursions;
};

DriftLemmaResult exp_drift_lemma(double eta, const std::vector<double>& t0_grid,
                                 const std::vector<double>& x_grid, long reps,
                                 std::uint64_t seed);

std::string drift_excursions_csv(const DriftLemmaResult& r);

// Renewal counting deviations: P(|N_t - t/mu| / t >= beta) across a t grid.
struct CountingLdResult {
    double beta = 0;
    double mu = 0;
    TailEstimate tail;     // x = t grid
    double mu_hat = 0;     // N_t / t at the largest grid point
    double mu_hat_se = 0;  // standard error of the rate estimate
};

CountingLdResult exp_counting_ld(const ArrivalLaw& law, double beta,
                                 const std::vector<double>& t_grid, long reps,
                                 std::uint64_t seed);

// ---------------------------------------------------------------------------
// Appendix equivalences
// ---------------------------------------------------------------------------

// PS vs HLPPS under exponential service: per-class two-sample KS on the
// class counts at time t, repeated over independent experiments.
struct PsHlppsResult {
    double t = 0;
    long reps = 0;
    double alpha = 0;
    struct Experiment {
        std::vector<double> ks;    // per agg class
        std::vector<double> crit;  // per agg class
        bool pass = false;
    };
    std::vector<Experiment> experiments;
    long passed = 0;
    double pass_fraction() const {
        return experiments.empty() ? 0.0
                                   : static_cast<double>(passed) / experiments.size();
    }
};

PsHlppsResult exp_ps_hlpps(const NetworkSpec& spec, double t, long reps, double alpha,
                           int n_experiments, std::uint64_t seed, int jobs = 1);

std::string ps_hlpps_csv(const PsHlppsResult& r);

// Figure 1 vs Figure 2 coupling at (M, delta); negative horizon means
// events-capped only.
CouplingReport exp_stage_coupling(double M, double delta, std::uint64_t seed,
                                  std::uint64_t max_events, double horizon = -1);

// ---------------------------------------------------------------------------
// Parameter scan (fallback preset search for the growth criteria)
// ---------------------------------------------------------------------------

struct ScanOutcome {
    bool found = false;
    InductionConfig preset;
    double median_ratio = 0;
    bool heads_increasing = false;
    bool min_z_majority = false;
};

// Evaluates (median ratio >= min_ratio, strictly increasing median heads,
// min-Z majority) for each candidate; returns the first that passes.
ScanOutcome scan_growth_presets(const std::vector<InductionConfig>& candidates, int cycles,
                                double min_ratio = 1.5);

}  // namespace qnet
