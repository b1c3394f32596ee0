#include "qnet/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <thread>

#include "qnet/ioutil.hpp"

namespace qnet {

// ---------------------------------------------------------------------------
// Statistics helpers
// ---------------------------------------------------------------------------

WilsonInterval wilson(long successes, long n, double z) {
    if (n <= 0) return {0, 1};
    const double p = static_cast<double>(successes) / n;
    const double z2 = z * z;
    const double denom = 1.0 + z2 / n;
    const double center = (p + z2 / (2.0 * n)) / denom;
    const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
    return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

double median_of(std::vector<double> v) {
    if (v.empty()) return 0;
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

LinFit linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
    LinFit f;
    f.n = static_cast<int>(x.size());
    if (f.n < 2) return f;
    double sx = 0, sy = 0;
    for (int i = 0; i < f.n; ++i) {
        sx += x[i];
        sy += y[i];
    }
    const double mx = sx / f.n, my = sy / f.n;
    double sxx = 0, sxy = 0;
    for (int i = 0; i < f.n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx == 0) return f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    if (f.n > 2) {
        double sse = 0;
        for (int i = 0; i < f.n; ++i) {
            const double e = y[i] - (f.intercept + f.slope * x[i]);
            sse += e * e;
        }
        f.slope_se = std::sqrt(sse / (f.n - 2) / sxx);
    }
    return f;
}

double ks_statistic(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    double d = 0;
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        const double v = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= v) ++i;
        while (j < b.size() && b[j] <= v) ++j;
        d = std::max(d, std::abs(i / na - j / nb));
    }
    return d;
}

double ks_critical(double alpha, std::size_t n, std::size_t m) {
    const double c = std::sqrt(-std::log(alpha / 2.0) / 2.0);
    return c * std::sqrt(static_cast<double>(n + m) / (static_cast<double>(n) * m));
}

void TailEstimate::count(double value) {
    for (std::size_t i = 0; i < x.size(); ++i)
        if (value >= x[i]) exceed[i]++;
    n++;
}

void TailEstimate::finalize() {
    p.clear();
    lo.clear();
    hi.clear();
    std::vector<double> fx, fy;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double pi = n > 0 ? static_cast<double>(exceed[i]) / n : 0.0;
        p.push_back(pi);
        const WilsonInterval w = wilson(exceed[i], n);
        lo.push_back(w.lo);
        hi.push_back(w.hi);
        if (pi > 0) {
            fx.push_back(x[i]);
            fy.push_back(std::log(pi));
        }
    }
    log_fit = linear_fit(fx, fy);
}

bool TailEstimate::nonincreasing_up_to_bands() const {
    for (std::size_t i = 1; i < p.size(); ++i) {
        if (p[i] <= p[i - 1]) continue;
        // increase tolerated only when the bands overlap
        if (lo[i] > hi[i - 1]) return false;
    }
    return true;
}

std::string tail_csv(const TailEstimate& t) {
    std::string out = "x,exceed,n,p,wilson_lo,wilson_hi\n";
    for (std::size_t i = 0; i < t.x.size(); ++i) {
        out += format_double(t.x[i]);
        out += ',' + std::to_string(t.exceed[i]);
        out += ',' + std::to_string(t.n);
        out += ',' + format_double(t.p[i]);
        out += ',' + format_double(t.lo[i]);
        out += ',' + format_double(t.hi[i]);
        out += '\n';
    }
    return out;
}

std::vector<double> simulate_renewal_arrivals(const ArrivalLaw& law, double t0, RngStream s) {
    std::vector<double> out;
    double t = sample_arrival(law, s);
    while (t <= t0) {
        out.push_back(t);
        t += sample_arrival(law, s);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Worker pool: runs fn(rep_index) for each replication, `jobs` at a time.
// ---------------------------------------------------------------------------

namespace {

void run_replications(int reps, int jobs, const std::function<void(int)>& fn) {
    jobs = std::max(1, jobs);
    if (jobs == 1) {
        for (int r = 0; r < reps; ++r) fn(r);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < jobs; ++w)
        pool.emplace_back([&] {
            for (;;) {
                const int r = next.fetch_add(1);
                if (r >= reps) return;
                fn(r);
            }
        });
    for (auto& th : pool) th.join();
}

}  // namespace

// ---------------------------------------------------------------------------
// Induction step / multi-cycle growth
// ---------------------------------------------------------------------------

void InductionConfig::validate() const {
    if (N <= 0) throw std::invalid_argument("induction: N must be >= 1");
    if (replications <= 0) throw std::invalid_argument("induction: replications must be >= 1");
    if (!(M > 4.0) || !(delta > 0.0 && delta < 1.0))
        throw std::invalid_argument("induction: invalid (M, delta)");
}

namespace {

// Runs one replication for up to `cycles` cycles on one sample path.
std::vector<GrowthCycle> run_growth_cycles(const NetworkSpec& spec, const InductionConfig& cfg,
                                           int rep, int cycles) {
    Simulator sim(spec, RngStream(cfg.seed).derive("rep").derive(static_cast<std::uint64_t>(rep)));
    sim.init(InitialCondition::single_class(2, cfg.N));

    std::vector<GrowthCycle> out;
    long head_n = cfg.N;
    double cycle_start = 0;
    RunOptions opts;
    opts.hard_event_cap = cfg.event_cap;

    for (int n = 1; n <= cycles && head_n > 0; ++n) {
        const CycleRoles roles = CycleRoles::for_cycle(n);
        GrowthCycle gc;
        gc.cycle = n;
        gc.t_start = cycle_start;
        gc.marks.n = head_n;
        gc.marks.roles = roles;
        sim.reset_cycle_trackers();

        const RunOutcome o1 = sim.run(StopRule::until_agg_empty(roles.head), opts);
        if (o1.reason != StopReason::Predicate) {
            gc.marks.truncated = true;
            out.push_back(gc);
            break;
        }
        const double s1_abs = sim.clock();
        for (int k = 1; k <= 6; ++k) gc.marks.z_s1[static_cast<std::size_t>(k)] = sim.z_agg(k);
        gc.marks.w3_s1 = sim.immediate_workload(3);
        gc.marks.w6_s1 = sim.immediate_workload(6);

        const RunOutcome o2 = sim.run(StopRule::until_station_empty(roles.drain_station), opts);
        if (o2.reason != StopReason::Predicate) {
            gc.marks.truncated = true;
            out.push_back(gc);
            break;
        }
        const double t_abs = sim.clock();
        for (int k = 1; k <= 6; ++k) gc.marks.z_t[static_cast<std::size_t>(k)] = sim.z_agg(k);
        gc.marks.w3_t = sim.immediate_workload(3);
        gc.marks.w6_t = sim.immediate_workload(6);
        gc.marks.s1 = s1_abs - cycle_start;
        gc.marks.t = t_abs - cycle_start;
        gc.marks.s2 = gc.marks.t - gc.marks.s1;
        gc.marks.min_z = sim.min_z();
        gc.marks.min_w = sim.min_w();
        gc.marks.valid = true;
        evaluate_cycle_events(gc.marks, cfg.delta);

        gc.t_end = t_abs;
        gc.head_count = sim.z_agg(roles.next_head);
        gc.ratio = static_cast<double>(gc.head_count) / static_cast<double>(head_n);
        gc.completed = true;
        out.push_back(gc);

        head_n = gc.head_count;
        cycle_start = t_abs;
    }
    return out;
}

}  // namespace

InductionResult exp_induction(const InductionConfig& cfg) {
    cfg.validate();
    InductionResult res;
    res.cfg = cfg;
    res.precondition_warning = !cfg.precondition_met();
    const NetworkSpec spec = build_fig1(cfg.M, cfg.delta, false);

    std::vector<std::vector<GrowthCycle>> per_rep(cfg.replications);
    run_replications(cfg.replications, cfg.jobs,
                     [&](int r) { per_rep[r] = run_growth_cycles(spec, cfg, r, 1); });

    long n_ok = 0;
    long c_head = 0, c_up = 0, c_edge = 0, c_w = 0, c_minz = 0, c_trange = 0, c_all = 0;
    long c_s1range = 0, c_s2bound = 0;
    for (auto& cycles : per_rep) {
        if (cycles.empty() || !cycles[0].completed) {
            res.truncated++;
            continue;
        }
        const CycleMarks& m = cycles[0].marks;
        res.reps.push_back(m);
        n_ok++;
        c_head += m.ev_head_growth;
        c_up += m.ev_small_upstream;
        c_edge += m.ev_edge_empty;
        c_w += m.ev_w_small;
        c_minz += m.ev_min_z;
        c_trange += m.t_in_range;
        c_all += m.all_events();
        const double N = static_cast<double>(m.n);
        c_s1range += m.s1 >= N / (2.0 * cfg.delta) && m.s1 <= 2.0 * N / cfg.delta;
        // Proposition-6.1 shape with the recorded empirical a and N' = Z4(S1)
        const double d2 = cfg.delta * cfg.delta;
        const double n2 = static_cast<double>(m.z_s1[static_cast<std::size_t>(m.roles.bulk)]);
        c_s2bound += m.s2 <= 4.0 * m.a_emp * d2 * n2;
    }
    auto row = [&](const char* name, long c) {
        res.frequencies.push_back({name, c, n_ok, wilson(c, n_ok)});
    };
    row("Z5_T_ge_N_over_4delta", c_head);
    row("Z1_Z2_T_le_1e3_delta_N", c_up);
    row("Z3_Z4_T_zero", c_edge);
    row("W6_T_le_delta3_N", c_w);
    row("minZ_ge_N_over_4", c_minz);
    row("T_in_N_over_3delta_3N_over_delta", c_trange);
    row("all_events", c_all);
    row("S1_in_N_over_2delta_2N_over_delta", c_s1range);
    row("S2_le_4a_delta2_Z4S1", c_s2bound);
    return res;
}

std::string induction_frequencies_csv(const InductionResult& r) {
    std::string out = "event,count,total,freq,wilson_lo,wilson_hi\n";
    for (const auto& f : r.frequencies) {
        const double p = f.total > 0 ? static_cast<double>(f.count) / f.total : 0.0;
        out += f.name;
        out += ',' + std::to_string(f.count);
        out += ',' + std::to_string(f.total);
        out += ',' + format_double(p);
        out += ',' + format_double(f.ci.lo);
        out += ',' + format_double(f.ci.hi);
        out += '\n';
    }
    return out;
}

void GrowthReport::aggregate() {
    median_head.assign(static_cast<std::size_t>(cycles_requested), 0.0);
    median_ratio.assign(static_cast<std::size_t>(cycles_requested), 0.0);
    reps_completed_all = 0;
    reps_all_min_z = 0;
    reps_min_w_growing = 0;
    w_dip_freq.clear();

    std::vector<double> all_ratios;
    for (int c = 0; c < cycles_requested; ++c) {
        std::vector<double> heads, ratios;
        long dip = 0, done = 0;
        for (const auto& rep : reps) {
            if (c >= static_cast<int>(rep.size()) || !rep[c].completed) continue;
            done++;
            heads.push_back(static_cast<double>(rep[c].head_count));
            ratios.push_back(rep[c].ratio);
            all_ratios.push_back(rep[c].ratio);
            if (rep[c].marks.min_w <= static_cast<double>(rep[c].marks.n) / 6.0) dip++;
        }
        median_head[c] = median_of(heads);
        median_ratio[c] = median_of(ratios);
        w_dip_freq.push_back({"minW_le_N_over_6_cycle" + std::to_string(c + 1), dip, done,
                              wilson(dip, done)});
    }
    overall_median_ratio = median_of(all_ratios);
    for (const auto& rep : reps) {
        const bool all_done = static_cast<int>(rep.size()) == cycles_requested &&
                              std::all_of(rep.begin(), rep.end(),
                                          [](const GrowthCycle& g) { return g.completed; });
        if (!all_done) continue;
        reps_completed_all++;
        bool minz_ok = true, w_growing = true;
        for (std::size_t c = 0; c < rep.size(); ++c) {
            if (!rep[c].marks.ev_min_z) minz_ok = false;
            if (c > 0 && !(rep[c].marks.min_w > rep[c - 1].marks.min_w)) w_growing = false;
        }
        if (minz_ok) reps_all_min_z++;
        if (w_growing) reps_min_w_growing++;
    }
}

GrowthReport exp_instability(const InductionConfig& cfg, int cycles) {
    cfg.validate();
    if (cycles < 1) throw std::invalid_argument("instability: cycles must be >= 1");
    GrowthReport rep;
    rep.cfg = cfg;
    rep.cycles_requested = cycles;
    const NetworkSpec spec = build_fig1(cfg.M, cfg.delta, false);
    rep.reps.assign(static_cast<std::size_t>(cfg.replications), {});
    run_replications(cfg.replications, cfg.jobs, [&](int r) {
        rep.reps[static_cast<std::size_t>(r)] = run_growth_cycles(spec, cfg, r, cycles);
    });
    rep.aggregate();
    return rep;
}

GrowthReport exp_workload_growth(const InductionConfig& cfg, int cycles) {
    return exp_instability(cfg, cycles);
}

std::string growth_csv(const GrowthReport& r) {
    std::string out =
        "rep,cycle,t_start,t_end,N,S1,S2,T,head_count,ratio,minZ,minW,events_ok,completed\n";
    for (std::size_t i = 0; i < r.reps.size(); ++i) {
        for (const auto& g : r.reps[i]) {
            out += std::to_string(i);
            out += ',' + std::to_string(g.cycle);
            out += ',' + format_double(g.t_start);
            out += ',' + format_double(g.t_end);
            out += ',' + std::to_string(g.marks.n);
            out += ',' + format_double(g.marks.s1);
            out += ',' + format_double(g.marks.s2);
            out += ',' + format_double(g.marks.t);
            out += ',' + std::to_string(g.head_count);
            out += ',' + format_double(g.ratio);
            out += ',' + std::to_string(g.marks.min_z);
            out += ',' + format_double(g.marks.min_w);
            out += ',' + std::to_string(g.marks.events_bitmask());
            out += ',' + std::to_string(g.completed ? 1 : 0);
            out += '\n';
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Lemma verifiers
// ---------------------------------------------------------------------------

DriftLemmaResult exp_drift_lemma(double eta, const std::vector<double>& t0_grid,
                                 const std::vector<double>& x_grid, long reps,
                                 std::uint64_t seed) {
    if (!(eta > 0.0 && eta <= 1.0))
        throw std::invalid_argument("drift lemma: eta must be in (0, 1]");
    DriftLemmaResult res;
    res.eta = eta;
    res.b_tail.x = x_grid;
    res.b_tail.exceed.assign(x_grid.size(), 0);
    std::vector<long> exc_counts(t0_grid.size(), 0);

    const double t_grid_max =
        t0_grid.empty() ? 0.0 : *std::max_element(t0_grid.begin(), t0_grid.end());
    // Drift eta^2-scale exponential decay: run far enough past the grid that
    // later idle time / excursions are negligible.
    const double t_end = t_grid_max + 60.0 / (eta * eta);
    const double mean_gap = 1.0 / (1.0 + eta);

    RngStream root = RngStream(seed).derive("drift");
    for (long r = 0; r < reps; ++r) {
        RngStream s = root.derive(static_cast<std::uint64_t>(r));
        double t = 0, w = 0, idle = 0;
        std::vector<bool> hit(t0_grid.size(), false);
        while (t < t_end) {
            const double gap = s.exponential(mean_gap);
            const double tn = t + gap;
            // W drains at rate 1 between arrivals and may hit 0
            if (w < gap) {
                idle += gap - w;
                // crossing t0 with positive workload: check W(t0) >= 2 eta t0
                for (std::size_t i = 0; i < t0_grid.size(); ++i) {
                    const double t0 = t0_grid[i];
                    if (!hit[i] && t0 >= t && t0 < t + w && w - (t0 - t) >= 2.0 * eta * t0)
                        hit[i] = true;
                }
                w = 0;
            } else {
                for (std::size_t i = 0; i < t0_grid.size(); ++i) {
                    const double t0 = t0_grid[i];
                    if (!hit[i] && t0 >= t && t0 < tn && w - (t0 - t) >= 2.0 * eta * t0)
                        hit[i] = true;
                }
                w -= gap;
            }
            w += 1.0;  // the arriving unit job
            t = tn;
            for (std::size_t i = 0; i < t0_grid.size(); ++i)
                if (!hit[i] && t >= t0_grid[i] && w >= 2.0 * eta * t) hit[i] = true;
        }
        res.b_tail.count(idle);
        for (std::size_t i = 0; i < t0_grid.size(); ++i)
            if (hit[i]) exc_counts[i]++;
    }
    res.b_tail.finalize();
    for (std::size_t i = 0; i < t0_grid.size(); ++i) {
        DriftLemmaResult::Excursion e;
        e.t0 = t0_grid[i];
        e.count = exc_counts[i];
        e.n = reps;
        e.p = reps > 0 ? static_cast<double>(exc_counts[i]) / reps : 0.0;
        e.ci = wilson(exc_counts[i], reps);
        res.excursions.push_back(e);
    }
    return res;
}

std::string drift_excursions_csv(const DriftLemmaResult& r) {
    std::string out = "t0,count,n,p,wilson_lo,wilson_hi\n";
    for (const auto& e : r.excursions) {
        out += format_double(e.t0);
        out += ',' + std::to_string(e.count);
        out += ',' + std::to_string(e.n);
        out += ',' + format_double(e.p);
        out += ',' + format_double(e.ci.lo);
        out += ',' + format_double(e.ci.hi);
        out += '\n';
    }
    return out;
}

CountingLdResult exp_counting_ld(const ArrivalLaw& law, double beta,
                                 const std::vector<double>& t_grid, long reps,
                                 std::uint64_t seed) {
    if (!(beta > 0)) throw std::invalid_argument("counting ld: beta must be > 0");
    CountingLdResult res;
    res.beta = beta;
    res.mu = law.mean();
    res.tail.x = t_grid;
    res.tail.exceed.assign(t_grid.size(), 0);
    const double t_max =
        t_grid.empty() ? 0.0 : *std::max_element(t_grid.begin(), t_grid.end());

    RngStream root = RngStream(seed).derive("count");
    for (long r = 0; r < reps; ++r) {
        RngStream s = root.derive(static_cast<std::uint64_t>(r));
        double t = 0;
        long n = 0;
        std::size_t gi = 0;
        std::vector<bool> dev(t_grid.size(), false);
        while (gi < t_grid.size()) {
            const double next = t + sample_arrival(law, s);
            // N_t = n for every grid point in [t, next)
            while (gi < t_grid.size() && t_grid[gi] < next) {
                const double tg = t_grid[gi];
                if (std::abs(static_cast<double>(n) - tg / res.mu) / tg >= beta) dev[gi] = true;
                ++gi;
            }
            t = next;
            ++n;
        }
        res.tail.n++;
        for (std::size_t i = 0; i < t_grid.size(); ++i)
            if (dev[i]) res.tail.exceed[i]++;
    }
    // mu recovery with a dedicated pass (cheap relative to the tail runs)
    {
        RngStream s2 = RngStream(seed).derive("count-mu");
        const long k = std::min<long>(reps, 200);
        std::vector<double> rates;
        for (long r = 0; r < k; ++r) {
            RngStream s = s2.derive(static_cast<std::uint64_t>(r));
            double t = 0;
            long n = 0;
            while (true) {
                const double next = t + sample_arrival(law, s);
                if (next > t_max) break;
                t = next;
                ++n;
            }
            rates.push_back(static_cast<double>(n) / t_max);
        }
        double m = 0;
        for (double v : rates) m += v;
        m /= static_cast<double>(rates.size());
        double var = 0;
        for (double v : rates) var += (v - m) * (v - m);
        var /= rates.size() > 1 ? static_cast<double>(rates.size() - 1) : 1.0;
        res.mu_hat = m;
        res.mu_hat_se = std::sqrt(var / static_cast<double>(rates.size()));
    }
    res.tail.finalize();
    return res;
}

// ---------------------------------------------------------------------------
// PS vs HLPPS
// ---------------------------------------------------------------------------

PsHlppsResult exp_ps_hlpps(const NetworkSpec& spec, double t, long reps, double alpha,
                           int n_experiments, std::uint64_t seed, int jobs) {
    for (const auto& c : spec.classes)
        if (c.service.kind != ServiceLaw::Kind::Exponential)
            throw std::invalid_argument(
                "ps-hlpps: equality in law requires exponential service at every class");
    PsHlppsResult res;
    res.t = t;
    res.reps = reps;
    res.alpha = alpha;

    const NetworkSpec ps = with_discipline(spec, Discipline::Ps);
    const NetworkSpec hlpps = with_discipline(spec, Discipline::Hlpps);
    const std::vector<ClassId> aggs = spec.agg_classes();

    res.experiments.assign(static_cast<std::size_t>(n_experiments), {});
    run_replications(n_experiments, jobs, [&](int e) {
        RngStream ex_root = RngStream(seed).derive("pshlpps").derive(static_cast<std::uint64_t>(e));
        auto sample_counts = [&](const NetworkSpec& net, const RngStream& disc_root,
                                 std::vector<std::vector<double>>& out) {
            for (long r = 0; r < reps; ++r) {
                Simulator sim(net, disc_root.derive(static_cast<std::uint64_t>(r)));
                sim.init(InitialCondition::empty());
                sim.run(StopRule::at_time(t), RunOptions{});
                for (std::size_t k = 0; k < aggs.size(); ++k)
                    out[k].push_back(static_cast<double>(sim.z_agg(aggs[k])));
            }
        };
        std::vector<std::vector<double>> a(aggs.size()), b(aggs.size());
        sample_counts(ps, ex_root.derive("ps"), a);
        sample_counts(hlpps, ex_root.derive("hlpps"), b);
        PsHlppsResult::Experiment ex;
        ex.pass = true;
        for (std::size_t k = 0; k < aggs.size(); ++k) {
            const double d = ks_statistic(a[k], b[k]);
            const double crit = ks_critical(alpha, a[k].size(), b[k].size());
            ex.ks.push_back(d);
            ex.crit.push_back(crit);
            if (d >= crit) ex.pass = false;
        }
        res.experiments[static_cast<std::size_t>(e)] = std::move(ex);
    });
    for (const auto& ex : res.experiments)
        if (ex.pass) res.passed++;
    return res;
}

std::string ps_hlpps_csv(const PsHlppsResult& r) {
    std::string out = "experiment,class_idx,ks,critical,pass\n";
    for (std::size_t e = 0; e < r.experiments.size(); ++e) {
        const auto& ex = r.experiments[e];
        for (std::size_t k = 0; k < ex.ks.size(); ++k) {
            out += std::to_string(e);
            out += ',' + std::to_string(k);
            out += ',' + format_double(ex.ks[k]);
            out += ',' + format_double(ex.crit[k]);
            out += ',' + std::to_string(ex.pass ? 1 : 0);
            out += '\n';
        }
    }
    return out;
}

CouplingReport exp_stage_coupling(double M, double delta, std::uint64_t seed,
                                  std::uint64_t max_events, double horizon) {
    const NetworkSpec a = build_fig1(M, delta, false);
    const NetworkSpec b = build_fig2(M, delta);
    return coupled_run(a, b, seed, max_events, horizon);
}

ScanOutcome scan_growth_presets(const std::vector<InductionConfig>& candidates, int cycles,
                                double min_ratio) {
    ScanOutcome out;
    for (const auto& cfg : candidates) {
        const GrowthReport rep = exp_instability(cfg, cycles);
        bool increasing = rep.cycles_requested >= 1;
        double prev = static_cast<double>(cfg.N);
        for (int c = 0; c < rep.cycles_requested; ++c) {
            if (!(rep.median_head[static_cast<std::size_t>(c)] > prev)) increasing = false;
            prev = rep.median_head[static_cast<std::size_t>(c)];
        }
        const double med = rep.overall_median_ratio;
        const bool minz_major = 2 * rep.reps_all_min_z > static_cast<long>(rep.reps.size());
        if (med >= min_ratio && increasing && minz_major) {
            out.found = true;
            out.preset = cfg;
            out.median_ratio = med;
            out.heads_increasing = increasing;
            out.min_z_majority = minz_major;
            return out;
        }
    }
    return out;
}

}  // namespace qnet
