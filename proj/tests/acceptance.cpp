// Acceptance suite: runs every criterion at its stated tolerance and prints
// one pass/fail line per criterion.  Exits nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "qnet/experiments.hpp"
#include "qnet/ioutil.hpp"
#include "support/auditor.hpp"
#include "support/quadrature.hpp"

using namespace qnet;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

class Criterion {
public:
    explicit Criterion(int number, std::string title)
        : number_(number), title_(std::move(title)), start_(clock_type::now()) {}

    void expect(bool ok, const std::string& what) {
        if (!ok) {
            failed_ = true;
            details_ += "\n    FAILED: " + what;
        }
    }

    void note(const std::string& what) { details_ += "\n    " + what; }

    double seconds() const {
        return std::chrono::duration<double>(clock_type::now() - start_).count();
    }

    ~Criterion() {
        const double dt = seconds();
        std::ostringstream line;
        line << (failed_ ? "[FAIL]" : "[PASS]") << " criterion " << number_ << ": " << title_
             << " (" << static_cast<long>(dt * 1000) << " ms)" << details_;
        std::cout << line.str() << "\n" << std::flush;
        if (failed_) ++g_failures;
    }

private:
    using clock_type = std::chrono::steady_clock;
    int number_;
    std::string title_;
    clock_type::time_point start_;
    bool failed_ = false;
    std::string details_;
};

std::string fmt(double v) { return format_double(v); }

// --------------------------------------------------------------------------

void criterion_1_nu_solver() {
    Criterion c(1, "nu solver: closed form and quadrature oracle agree at mass=mean=1");
    for (double M : {1e2, 1e3, 1e4}) {
        const NuParams p = solve_nu_params(M);
        c.expect(std::abs(p.mass_residual) <= 1e-10,
                 "closed-form |mass-1| <= 1e-10 at M=" + fmt(M));
        c.expect(std::abs(p.mean_residual) <= 1e-8,
                 "closed-form |mean-1| <= 1e-8 at M=" + fmt(M));
        const qnet::testing::NuOracle oracle{M, p.beta, p.gamma};
        c.expect(std::abs(oracle.mass() - 1.0) <= 1e-10,
                 "quadrature |mass-1| <= 1e-10 at M=" + fmt(M));
        c.expect(std::abs(oracle.mean() - 1.0) <= 1e-8,
                 "quadrature |mean-1| <= 1e-8 at M=" + fmt(M));
        if (M == 1e4) {
            c.expect(std::abs(p.beta - 1.0) <= 1e-3, "|beta-1| <= 1e-3 at M=1e4");
            c.expect(std::abs(p.gamma - 1.0) <= 1e-2, "|gamma-1| <= 1e-2 at M=1e4");
            c.note("M=1e4: beta=" + fmt(p.beta) + " gamma=" + fmt(p.gamma));
        }
    }
    c.expect(c.seconds() < 1.0, "runtime < 1 s");
}

void criterion_2_traffic() {
    Criterion c(2, "traffic algebra: fig1 loads exact, fig2 matches fig1");
    const TrafficReport t1 = traffic(build_fig1(64, 0.2));
    c.expect(std::abs(t1.rho(1) - 0.816) <= 1e-12, "rho_I = 0.816");
    c.expect(std::abs(t1.rho(4) - 0.816) <= 1e-12, "rho_IV = 0.816");
    c.expect(std::abs(t1.rho(2) - 0.8) <= 1e-12, "rho_II = 0.8");
    c.expect(std::abs(t1.rho(3) - 0.8) <= 1e-12, "rho_III = 0.8");
    for (double d : {0.2, 0.5}) {
        const TrafficReport a = traffic(build_fig1(64, d));
        const TrafficReport b = traffic(build_fig2(64, d));
        for (StationId s : {1, 2, 3, 4})
            c.expect(std::abs(a.rho(s) - b.rho(s)) <= 1e-12,
                     "fig2 load matches fig1 at delta=" + fmt(d) + " station " +
                         std::to_string(s));
    }
}

void criterion_3_discipline_fuzz() {
    Criterion c(3, "discipline invariants: 100 randomized runs x 1e5 events per discipline");
    const Discipline all[] = {Discipline::LifoPreemptive, Discipline::LifoNonpreemptive,
                              Discipline::Fifo,           Discipline::Ps,
                              Discipline::Hlpps,          Discipline::Is};
    std::uint64_t total_events = 0, total_violations = 0;
    RngStream cfg_stream = RngStream(20240).derive("fuzz");
    for (Discipline d : all) {
        std::uint64_t events_per_discipline = 0;
        for (int run = 0; run < 100; ++run) {
            RngStream pick = cfg_stream.derive(to_string(d)).derive(static_cast<std::uint64_t>(run));
            const double M = 8.0 * std::pow(2.0, 7.0 * pick.next_unit());  // 8..1024
            const double delta = 0.05 + 0.55 * pick.next_unit();           // subcritical range
            NetworkSpec spec = with_discipline(build_fig1(M, delta), d);
            Simulator sim(spec, pick.derive("run"));
            InitialCondition ic;
            for (ClassId k = 1; k <= 6; ++k) {
                const long n = static_cast<long>(pick.next_u64() % 20);
                if (n > 0) ic.counts.push_back({k, n});
            }
            sim.init(ic);
            qnet::testing::InvariantAuditor audit(sim);
            sim.set_auditor(&audit);
            sim.run(StopRule::events(100000), RunOptions{});
            events_per_discipline += audit.events();
            total_violations += audit.violations();
            if (audit.violations() > 0)
                c.expect(false, std::string("violation under ") + to_string(d) + " run " +
                                    std::to_string(run) + ": " + audit.first_violation());
        }
        total_events += events_per_discipline;
    }
    c.note("events audited: " + std::to_string(total_events) +
           ", violations: " + std::to_string(total_violations));
    c.expect(total_violations == 0, "zero violations");
}

void criterion_4_coupling() {
    Criterion c(4, "stage-expansion coupling: fig1 vs fig2 in lockstep");
    struct Case {
        double delta;
        long L;
    };
    for (const Case k : {Case{0.5, 5}, Case{0.2, 101}}) {
        c.expect(fig2_stage_count(k.delta) == k.L, "stage count at delta=" + fmt(k.delta));
        for (std::uint64_t seed = 1; seed <= 10; ++seed) {
            const CouplingReport r = exp_stage_coupling(64, k.delta, seed, 1000000);
            c.expect(r.max_count_discrepancy == 0,
                     "count discrepancy 0 at delta=" + fmt(k.delta) + " seed " +
                         std::to_string(seed) + (r.note.empty() ? "" : " (" + r.note + ")"));
            c.expect(r.max_workload_discrepancy <= 1e-9,
                     "workload discrepancy <= 1e-9 at delta=" + fmt(k.delta) + " seed " +
                         std::to_string(seed) + " (got " +
                         fmt(r.max_workload_discrepancy) + ")");
        }
    }
    c.expect(c.seconds() < 120.0, "runtime < 2 min");
}

void criterion_5_ps_hlpps() {
    Criterion c(5, "PS and HLPPS agree in law under exponential service");
    const NetworkSpec spec = exponentialized(build_fig1(32, 0.5));
    const PsHlppsResult r = exp_ps_hlpps(spec, 50.0, 1000, 0.01, 50, 424242);
    c.note("experiments passing all per-class KS: " + std::to_string(r.passed) + "/50");
    c.expect(r.pass_fraction() >= 0.9, "KS below the alpha=0.01 critical value in >= 90%");
    c.expect(c.seconds() < 600.0, "runtime < 10 min");
}

void criterion_6_lemma_verifiers() {
    Criterion c(6, "large-deviation lemma verifiers");
    std::vector<double> xs;
    for (int i = 0; i <= 30; ++i) xs.push_back(0.5 * i);
    const DriftLemmaResult drift =
        exp_drift_lemma(0.2, {0, 250, 500, 1000, 2000}, xs, 10000, 6001);
    c.note("idle-tail log slope " + fmt(drift.b_tail.log_fit.slope) + " (upper99 " +
           fmt(drift.b_tail.log_fit.slope_upper(2.576)) + ")");
    c.expect(drift.b_tail.log_fit.slope_upper(2.576) < 0.0,
             "fitted log-slope of P(|B| >= x) negative with 99% confidence");
    bool exc_ok = true;
    for (std::size_t i = 1; i < drift.excursions.size(); ++i)
        if (drift.excursions[i].p > drift.excursions[i - 1].p &&
            drift.excursions[i].ci.lo > drift.excursions[i - 1].ci.hi)
            exc_ok = false;
    c.expect(exc_ok, "excursion probability nonincreasing across the t0 grid");

    const ArrivalLaw nu = ArrivalLaw::nu_law(solve_nu_params(100));
    const CountingLdResult cnt =
        exp_counting_ld(nu, 0.1, {500, 1000, 2000, 4000, 8000}, 2000, 6002);
    c.expect(cnt.tail.nonincreasing_up_to_bands(),
             "counting deviation tail nonincreasing in t");
    std::string ps;
    for (double p : cnt.tail.p) ps += fmt(p) + " ";
    c.note("counting tail: " + ps);
}

void criterion_7_cluster_bound() {
    Criterion c(7, "cluster-count bound holds on every simulated path");
    const NuParams p = solve_nu_params(100);
    c.expect(p.gamma >= 0.5, "gamma >= 1/2 so the bound applies");
    const double t0 = 100.0 * p.M;
    const double bound = std::ceil(2.0 * t0 / p.M);
    RngStream root = RngStream(7007).derive("clusters");
    long worst = 0;
    for (int seed = 0; seed < 100; ++seed) {
        const auto arrivals = simulate_renewal_arrivals(
            ArrivalLaw::nu_law(p), t0, root.derive(static_cast<std::uint64_t>(seed)));
        const long k = static_cast<long>(detect_clusters(arrivals, p.gamma * p.M).size());
        worst = std::max(worst, k);
        if (static_cast<double>(k) > bound)
            c.expect(false, "seed " + std::to_string(seed) + " has " + std::to_string(k) +
                                " clusters > bound " + fmt(bound));
    }
    c.note("max clusters over 100 seeds: " + std::to_string(worst) + " (bound " + fmt(bound) +
           ")");
}

struct GrowthEval {
    bool ratio_ok = false, heads_ok = false, minz_ok = false, minw_ok = false;
    double median_ratio = 0;
};

GrowthEval evaluate(const GrowthReport& r) {
    GrowthEval e;
    e.median_ratio = r.overall_median_ratio;
    e.ratio_ok = r.overall_median_ratio >= 1.5;
    e.heads_ok = true;
    for (std::size_t cyc = 1; cyc < r.median_head.size(); ++cyc)
        if (!(r.median_head[cyc] > r.median_head[cyc - 1])) e.heads_ok = false;
    if (r.median_head.empty()) e.heads_ok = false;
    const long n = static_cast<long>(r.reps.size());
    e.minz_ok = 2 * r.reps_all_min_z > n;
    e.minw_ok = 2 * r.reps_min_w_growing > n;
    return e;
}

std::string growth_summary(const GrowthReport& r, const GrowthEval& e) {
    std::ostringstream os;
    os << "median ratio " << fmt(e.median_ratio) << ", median heads";
    for (double h : r.median_head) os << " " << fmt(h);
    os << ", minZ majority " << r.reps_all_min_z << "/" << r.reps.size() << ", minW growing "
       << r.reps_min_w_growing << "/" << r.reps.size();
    return os.str();
}

void criteria_8_9_instability() {
    // Criterion 8 runs the spec preset first; on failure the scan locates a
    // preset within M <= 1e4.  Criterion 9 evaluates min-W growth on the
    // accepted preset's report.
    GrowthReport accepted;
    GrowthEval accepted_eval;
    bool have_accepted = false;
    std::string accepted_name;
    {
        Criterion c(8, "cycle growth at desk scale (Theorem 3.1 mechanism)");
        InductionConfig preset;
        preset.M = 2000;
        preset.delta = 0.1;
        preset.N = 40000;
        preset.replications = 20;
        preset.seed = 8001;
        const GrowthReport base = exp_workload_growth(preset, 3);
        const GrowthEval be = evaluate(base);
        c.note("default preset (M=2000, delta=0.1, N=40000): " + growth_summary(base, be));

        // Theorem 3.1 event frequencies from the completed cycles
        long ev[5] = {0, 0, 0, 0, 0}, nvalid = 0;
        for (const auto& rep : base.reps)
            for (const auto& g : rep)
                if (g.marks.valid) {
                    ++nvalid;
                    ev[0] += g.marks.ev_head_growth;
                    ev[1] += g.marks.ev_small_upstream;
                    ev[2] += g.marks.ev_edge_empty;
                    ev[3] += g.marks.ev_w_small;
                    ev[4] += g.marks.ev_min_z;
                }
        std::ostringstream freq;
        freq << "event frequencies over " << nvalid << " cycles:"
             << " head-growth " << ev[0] << ", small-upstream " << ev[1] << ", edges-empty "
             << ev[2] << ", w-small " << ev[3] << ", min-z " << ev[4];
        c.note(freq.str());

        if (be.ratio_ok && be.heads_ok && be.minz_ok) {
            accepted = base;
            accepted_eval = be;
            have_accepted = true;
            accepted_name = "default preset";
        } else {
            c.note("default preset fails (a)/(b); scanning M <= 1e4 presets");
            std::vector<InductionConfig> candidates;
            auto cand = [&](double M, double delta, long N) {
                InductionConfig k = preset;
                k.M = M;
                k.delta = delta;
                k.N = N;
                candidates.push_back(k);
            };
            cand(4000, 0.30, 26700);
            cand(4000, 0.25, 32000);
            cand(10000, 0.30, 66700);
            cand(10000, 0.25, 80000);
            cand(10000, 0.35, 57200);
            for (const auto& k : candidates) {
                const GrowthReport r = exp_workload_growth(k, 3);
                const GrowthEval e = evaluate(r);
                std::ostringstream name;
                name << "scan preset (M=" << fmt(k.M) << ", delta=" << fmt(k.delta)
                     << ", N=" << k.N << ")";
                c.note(name.str() + ": " + growth_summary(r, e));
                if (e.ratio_ok && e.heads_ok && e.minz_ok) {
                    accepted = r;
                    accepted_eval = e;
                    have_accepted = true;
                    accepted_name = name.str();
                    break;
                }
            }
        }
        c.expect(have_accepted,
                 "a preset within M <= 1e4 satisfies (a) ratio >= 1.5 with increasing "
                 "median heads and (b) min-Z majority");
        if (have_accepted) c.note("accepted: " + accepted_name);
        c.expect(c.seconds() < 1800.0, "runtime <= 30 min");
    }
    {
        Criterion c(9, "per-cycle minimum total workload grows across cycles");
        if (!have_accepted) {
            c.expect(false, "no accepted preset from criterion 8");
        } else {
            c.note(accepted_name + ": minW growing in " +
                   std::to_string(accepted.reps_min_w_growing) + "/" +
                   std::to_string(accepted.reps.size()) + " replications");
            c.expect(accepted_eval.minw_ok, "majority of replications have growing min W");
        }
    }
}

void criterion_10_determinism() {
    Criterion c(10, "identical manifests reproduce byte-identical outputs");
    const char* bin = std::getenv("QNETSIM_BIN");
    if (!bin) {
        c.expect(false, "QNETSIM_BIN not set");
        return;
    }
    const fs::path base = fs::temp_directory_path() / "qnetsim_acceptance_det";
    fs::remove_all(base);
    fs::create_directories(base);
    auto run = [&](const std::string& args, const fs::path& out) {
        const std::string cmd = std::string(bin) + " " + args + " --outdir " + out.string() +
                                " > " + (out.string() + ".log") + " 2>&1";
        return std::system(cmd.c_str()) == 0;
    };
    const std::string sim_args = "simulate --net fig2 --M 64 --delta 0.5 --horizon 200 --seed 5";
    const std::string ind_args = "induction --M 400 --delta 0.5 --N 1600 --reps 3 --seed 9";
    for (const auto& [tag, args] : {std::pair<std::string, std::string>{"sim", sim_args},
                                    {"ind", ind_args}}) {
        const fs::path a = base / (tag + "_a"), b = base / (tag + "_b");
        c.expect(run(args, a), tag + " run A completed");
        c.expect(run(args, b), tag + " run B completed");
        for (const auto& entry : fs::directory_iterator(a)) {
            const std::string name = entry.path().filename().string();
            const std::string fa = read_text_file(entry.path().string());
            const std::string fb = read_text_file((b / name).string());
            c.expect(fa == fb, tag + "/" + name + " byte-identical");
        }
    }
}

}  // namespace

int main() {
    std::cout << "qnetsim acceptance suite\n";
    criterion_1_nu_solver();
    criterion_2_traffic();
    criterion_3_discipline_fuzz();
    criterion_4_coupling();
    criterion_5_ps_hlpps();
    criterion_6_lemma_verifiers();
    criterion_7_cluster_bound();
    criteria_8_9_instability();
    criterion_10_determinism();
    if (g_failures > 0) {
        std::cout << g_failures << " criterion(s) failed\n";
        return 1;
    }
    std::cout << "all criteria passed\n";
    return 0;
}
