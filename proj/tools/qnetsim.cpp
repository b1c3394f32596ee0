// qnetsim: discrete-event simulation of multiclass queueing networks with
// LIFO/FIFO/PS/HLPPS/IS disciplines, plus the experiment harness around the
// Figure 1 / Figure 2 families.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <iostream>
#include <optional>

#include "qnet/experiments.hpp"
#include "qnet/ioutil.hpp"
#include "qnet/plot.hpp"

using namespace qnet;
using json = nlohmann::ordered_json;

namespace {

constexpr const char* kVersion = "0.1.0";

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitTruncated = 3;
constexpr int kExitSolver = 4;

struct CommonOpts {
    std::string outdir;
    std::uint64_t seed = 1;
    bool plot = false;
    int jobs = 1;
};

std::string default_outdir() {
    if (const char* env = std::getenv("QNETSIM_OUTDIR")) return env;
    return "out";
}

void add_common(CLI::App* cmd, CommonOpts& c) {
    cmd->add_option("--outdir", c.outdir, "output directory")->default_val(default_outdir());
    cmd->add_option("--seed", c.seed, "root random seed")->default_val("1");
    cmd->add_flag("--plot", c.plot, "emit SVG charts");
    cmd->add_option("--jobs", c.jobs, "parallel replications")->default_val("1");
}

// Writes the manifest twice: once before the run starts (inputs only) and
// once at the end with the output files and their checksums.
class Manifest {
public:
    Manifest(std::string outdir, std::string command, json params, std::uint64_t seed)
        : outdir_(std::move(outdir)) {
        ensure_directory(outdir_);
        doc_["tool"] = "qnetsim";
        doc_["version"] = kVersion;
        doc_["command"] = std::move(command);
        doc_["seed"] = seed;
        doc_["parameters"] = std::move(params);
        doc_["outputs"] = json::array();
        flush();
    }

    std::string write(const std::string& name, const std::string& content) {
        const std::string path = outdir_ + "/" + name;
        write_text_file(path, content);
        doc_["outputs"].push_back({{"file", name}, {"checksum", fnv1a64_hex(content)}});
        return path;
    }

    void flush() { write_text_file(outdir_ + "/manifest.json", doc_.dump(2) + "\n"); }

private:
    std::string outdir_;
    json doc_;
};

struct NetOpts {
    std::string net = "fig1";
    double M = 2000;
    double delta = 0.1;
    bool couple = false;
    long L = 0;
    std::string discipline;
};

void add_net(CLI::App* cmd, NetOpts& n, bool with_discipline = true) {
    cmd->add_option("--net", n.net, "fig1 | fig2 | path to a spec file")->default_val("fig1");
    cmd->add_option("--M", n.M, "time-scale parameter M")->default_val("2000");
    cmd->add_option("--delta", n.delta, "rate-gap parameter delta")->default_val("0.1");
    cmd->add_flag("--couple", n.couple, "force delta = M^(-1/15)");
    cmd->add_option("--L", n.L, "fig2 stage count (0 = derive from delta)");
    if (with_discipline)
        cmd->add_option("--discipline", n.discipline,
                        "override discipline at every station "
                        "(lifo|lifo-np|fifo|ps|hlpps|is)");
}

NetworkSpec build_net(const NetOpts& n, const CLI::App* cmd) {
    NetworkSpec spec;
    if (n.net == "fig1") {
        spec = build_fig1(n.M, n.delta, n.couple);
    } else if (n.net == "fig2") {
        spec = build_fig2(n.M, n.couple ? std::pow(n.M, -1.0 / 15.0) : n.delta, n.L);
    } else {
        if (cmd->count("--M") || cmd->count("--delta"))
            throw std::invalid_argument(
                "conflicting network selectors: a spec file fixes M and delta");
        spec = load_spec(n.net);
    }
    if (!n.discipline.empty())
        spec = with_discipline(spec, discipline_from_string(n.discipline));
    return spec;
}

json net_params(const NetOpts& n) {
    return {{"net", n.net}, {"M", n.M},         {"delta", n.delta},
            {"couple", n.couple}, {"L", n.L},   {"discipline", n.discipline}};
}

std::vector<PlotSeries> series_by_class(const Trajectory& t) {
    std::vector<PlotSeries> out;
    for (std::size_t c = 0; c < t.agg_ids.size(); ++c) {
        PlotSeries s;
        s.label = "Z" + t.agg_labels[c];
        for (std::size_t r = 0; r < t.rows(); ++r) {
            s.x.push_back(t.series_time[r]);
            s.y.push_back(static_cast<double>(t.z_at(r, c)));
        }
        out.push_back(std::move(s));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Subcommand runners
// ---------------------------------------------------------------------------

int run_solve_nu(double M, const CommonOpts& c) {
    const NuParams p = solve_nu_params(M);
    json j{{"M", p.M},
           {"beta", p.beta},
           {"gamma", p.gamma},
           {"mass_residual", p.mass_residual},
           {"mean_residual", p.mean_residual}};
    Manifest man(c.outdir, "solve-nu", {{"M", M}}, c.seed);
    man.write("nu_params.json", j.dump(2) + "\n");
    man.flush();
    std::cout << j.dump(2) << "\n";
    return kExitOk;
}

int run_validate(const NetOpts& n, const CLI::App* cmd, const CommonOpts& c) {
    const NetworkSpec spec = build_net(n, cmd);
    const TrafficReport t = traffic(spec);
    json stations = json::array();
    for (const auto& s : t.stations)
        stations.push_back({{"station", s.label}, {"rho", s.rho}});
    json sources = json::array();
    for (const auto& src : spec.sources) {
        const auto rep = validate_arrival_conditions(src.law);
        sources.push_back({{"entry", src.entry},
                           {"unbounded_support", rep.unbounded_support},
                           {"density_component", rep.density_component}});
    }
    json j{{"subcritical", t.subcritical()},
           {"max_rho", t.max_rho()},
           {"stations", stations},
           {"arrival_conditions", sources}};
    Manifest man(c.outdir, "validate", net_params(n), c.seed);
    man.write("validation.json", j.dump(2) + "\n");
    man.write("spec.json", to_json_text(spec));
    man.flush();
    std::cout << j.dump(2) << "\n";
    return t.subcritical() ? kExitOk : kExitConfig;
}

int run_simulate(const NetOpts& n, const CLI::App* cmd, const CommonOpts& c, double horizon,
                 std::uint64_t events, double grid_dt, bool no_log,
                 const std::vector<std::string>& init) {
    const NetworkSpec spec = build_net(n, cmd);
    json params = net_params(n);
    params["horizon"] = horizon;
    params["events"] = events;
    params["grid_dt"] = grid_dt;
    params["init"] = init;
    Manifest man(c.outdir, "simulate", params, c.seed);
    man.write("spec.json", to_json_text(spec));

    InitialCondition ic;
    for (const auto& item : init) {
        const auto pos = item.find(':');
        if (pos == std::string::npos)
            throw std::invalid_argument("--init expects class:count, got " + item);
        ic.counts.push_back({std::stoi(item.substr(0, pos)), std::stol(item.substr(pos + 1))});
    }

    Simulator sim(spec, RngStream(c.seed));
    sim.init(ic);
    StopRule stop;
    if (horizon > 0) stop.horizon = horizon;
    if (events > 0) stop.max_events = events;
    if (horizon <= 0 && events == 0) stop.horizon = 1000.0;
    RunOptions opts;
    opts.log_events = !no_log;
    opts.series = grid_dt > 0 ? RunOptions::Series::Grid : RunOptions::Series::Events;
    opts.grid_dt = grid_dt;
    Trajectory traj;
    const RunOutcome out = sim.run(stop, opts, &traj);

    if (opts.log_events) man.write("trajectory.csv", event_log_csv(traj));
    man.write("series.csv", series_csv(traj));
    if (c.plot) {
        man.write("zt.svg", line_chart_svg(series_by_class(traj),
                                           {"job counts by class", "t", "Z_k(t)", false}));
        PlotSeries w{"Wtotal", traj.series_time, traj.series_wtotal};
        man.write("wt.svg", line_chart_svg({w}, {"total workload", "t", "W(t)", false}));
    }
    man.flush();
    std::cout << "events=" << out.events << " end_time=" << format_double(out.end_time)
              << " stop=" << traj.stop_reason << "\n";
    return out.truncated ? kExitTruncated : kExitOk;
}

int run_induction(const InductionConfig& cfg, const CommonOpts& c) {
    Manifest man(c.outdir, "induction",
                 {{"M", cfg.M},
                  {"delta", cfg.delta},
                  {"N", cfg.N},
                  {"replications", cfg.replications},
                  {"event_cap", cfg.event_cap}},
                 cfg.seed);
    const InductionResult r = exp_induction(cfg);
    if (r.precondition_warning)
        std::cerr << "warning: N < 2M/delta, outside the theorem's regime\n";
    man.write("cycles.csv", cycle_marks_csv(r.reps));
    man.write("frequencies.csv", induction_frequencies_csv(r));
    json j{{"truncated", r.truncated}, {"completed", r.reps.size()}};
    man.write("summary.json", j.dump(2) + "\n");
    man.flush();
    std::cout << induction_frequencies_csv(r);
    return r.truncated > 0 ? kExitTruncated : kExitOk;
}

int run_growth(const InductionConfig& cfg, int cycles, const CommonOpts& c, const char* name) {
    Manifest man(c.outdir, name,
                 {{"M", cfg.M},
                  {"delta", cfg.delta},
                  {"N", cfg.N},
                  {"replications", cfg.replications},
                  {"cycles", cycles},
                  {"event_cap", cfg.event_cap}},
                 cfg.seed);
    const GrowthReport r = exp_instability(cfg, cycles);
    man.write("growth.csv", growth_csv(r));
    json med_head = json::array(), med_ratio = json::array(), dips = json::array();
    for (double v : r.median_head) med_head.push_back(v);
    for (double v : r.median_ratio) med_ratio.push_back(v);
    for (const auto& f : r.w_dip_freq)
        dips.push_back({{"name", f.name},
                        {"count", f.count},
                        {"total", f.total},
                        {"wilson_lo", f.ci.lo},
                        {"wilson_hi", f.ci.hi}});
    json j{{"median_head", med_head},
           {"median_ratio", med_ratio},
           {"overall_median_ratio", r.overall_median_ratio},
           {"reps_completed_all", r.reps_completed_all},
           {"reps_all_min_z", r.reps_all_min_z},
           {"reps_min_w_growing", r.reps_min_w_growing},
           {"w_dip_frequency", dips}};
    man.write("summary.json", j.dump(2) + "\n");
    if (c.plot) {
        std::vector<PlotSeries> ratios;
        for (std::size_t i = 0; i < r.reps.size(); ++i) {
            PlotSeries s;
            s.label = "rep " + std::to_string(i);
            for (const auto& g : r.reps[i])
                if (g.completed) {
                    s.x.push_back(g.cycle);
                    s.y.push_back(g.ratio);
                }
            ratios.push_back(std::move(s));
        }
        man.write("growth.svg",
                  line_chart_svg(ratios, {"growth ratio per cycle", "cycle", "ratio", false}));
    }
    man.flush();
    std::cout << j.dump(2) << "\n";
    bool any_truncated = false;
    for (const auto& rep : r.reps)
        for (const auto& g : rep)
            if (!g.completed) any_truncated = true;
    return any_truncated ? kExitTruncated : kExitOk;
}

int run_drift(double eta, std::vector<double> t0s, std::vector<double> xs, long reps,
              const CommonOpts& c) {
    Manifest man(c.outdir, "drift-lemma",
                 {{"eta", eta}, {"t0_grid", t0s}, {"x_grid", xs}, {"replications", reps}},
                 c.seed);
    const DriftLemmaResult r = exp_drift_lemma(eta, t0s, xs, reps, c.seed);
    man.write("b_tail.csv", tail_csv(r.b_tail));
    man.write("excursions.csv", drift_excursions_csv(r));
    json j{{"log_slope", r.b_tail.log_fit.slope},
           {"log_slope_se", r.b_tail.log_fit.slope_se},
           {"log_slope_upper99", r.b_tail.log_fit.slope_upper(2.576)}};
    man.write("summary.json", j.dump(2) + "\n");
    if (c.plot) {
        PlotSeries s{"P(|B| >= x)", r.b_tail.x, r.b_tail.p};
        man.write("b_tail.svg",
                  line_chart_svg({s}, {"idle-time tail", "x", "P(|B| >= x)", true}));
    }
    man.flush();
    std::cout << j.dump(2) << "\n";
    return kExitOk;
}

int run_counting(const std::string& law_name, double M, double mean, double beta,
                 std::vector<double> ts, long reps, const CommonOpts& c) {
    ArrivalLaw law = ArrivalLaw::exponential(1.0);
    if (law_name == "nu")
        law = ArrivalLaw::nu_law(solve_nu_params(M));
    else if (law_name == "exp")
        law = ArrivalLaw::exponential(mean);
    else if (law_name == "atom")
        law = ArrivalLaw::atom(mean);
    else
        throw std::invalid_argument("--law must be nu, exp or atom");
    Manifest man(c.outdir, "counting-ld",
                 {{"law", law_name}, {"M", M}, {"mean", mean}, {"beta", beta},
                  {"t_grid", ts}, {"replications", reps}},
                 c.seed);
    const CountingLdResult r = exp_counting_ld(law, beta, ts, reps, c.seed);
    man.write("deviation_tail.csv", tail_csv(r.tail));
    json j{{"mu", r.mu},
           {"mu_hat", r.mu_hat},
           {"mu_hat_se", r.mu_hat_se},
           {"nonincreasing_up_to_bands", r.tail.nonincreasing_up_to_bands()}};
    man.write("summary.json", j.dump(2) + "\n");
    if (c.plot) {
        PlotSeries s{"P(|N_t - t/mu|/t >= beta)", r.tail.x, r.tail.p};
        man.write("deviation_tail.svg",
                  line_chart_svg({s}, {"counting deviation tail", "t", "P", true}));
    }
    man.flush();
    std::cout << j.dump(2) << "\n";
    return kExitOk;
}

int run_ps_hlpps(const NetOpts& n, const CLI::App* cmd, double t, long reps, double alpha,
                 int experiments, const CommonOpts& c) {
    NetworkSpec spec = exponentialized(build_net(n, cmd));
    json params = net_params(n);
    params["t"] = t;
    params["replications"] = reps;
    params["alpha"] = alpha;
    params["experiments"] = experiments;
    Manifest man(c.outdir, "ps-hlpps", params, c.seed);
    const PsHlppsResult r = exp_ps_hlpps(spec, t, reps, alpha, experiments, c.seed, c.jobs);
    man.write("ks.csv", ps_hlpps_csv(r));
    json j{{"passed", r.passed},
           {"experiments", r.experiments.size()},
           {"pass_fraction", r.pass_fraction()}};
    man.write("summary.json", j.dump(2) + "\n");
    man.flush();
    std::cout << j.dump(2) << "\n";
    return kExitOk;
}

int run_coupling(double M, double delta, std::uint64_t events, const CommonOpts& c) {
    Manifest man(c.outdir, "stage-coupling", {{"M", M}, {"delta", delta}, {"events", events}},
                 c.seed);
    const CouplingReport r = exp_stage_coupling(M, delta, c.seed, events);
    json j{{"horizon", r.horizon},
           {"transitions_fig1", r.transitions_a},
           {"transitions_fig2", r.transitions_b},
           {"max_count_discrepancy", r.max_count_discrepancy},
           {"max_workload_discrepancy", r.max_workload_discrepancy},
           {"diverged", r.diverged},
           {"first_divergence_time", r.first_divergence_time},
           {"note", r.note}};
    man.write("coupling.json", j.dump(2) + "\n");
    man.flush();
    std::cout << j.dump(2) << "\n";
    return r.diverged || r.max_count_discrepancy != 0 ? 1 : kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"multiclass queueing network simulator and experiment harness"};
    app.require_subcommand(1);
    app.set_config("--config", "", "read options from a TOML/INI config file");
    app.allow_config_extras(false);

    // solve-nu
    auto* solve_cmd = app.add_subcommand("solve-nu", "solve the interarrival-law parameters");
    double solve_M = 100;
    CommonOpts solve_c;
    solve_cmd->add_option("--M", solve_M, "time-scale parameter")->required();
    add_common(solve_cmd, solve_c);

    // validate
    auto* val_cmd = app.add_subcommand("validate", "static network checks and traffic report");
    NetOpts val_net;
    CommonOpts val_c;
    add_net(val_cmd, val_net);
    add_common(val_cmd, val_c);

    // simulate
    auto* sim_cmd = app.add_subcommand("simulate", "run one trajectory and export it");
    NetOpts sim_net;
    CommonOpts sim_c;
    double sim_horizon = 0, sim_grid = 0;
    std::uint64_t sim_events = 0;
    bool sim_no_log = false;
    std::vector<std::string> sim_init;
    add_net(sim_cmd, sim_net);
    add_common(sim_cmd, sim_c);
    sim_cmd->add_option("--horizon", sim_horizon, "stop at this clock value");
    sim_cmd->add_option("--events", sim_events, "stop after this many events");
    sim_cmd->add_option("--grid-dt", sim_grid, "sample the series on a time grid");
    sim_cmd->add_flag("--no-log", sim_no_log, "skip the per-event trajectory log");
    sim_cmd->add_option("--init", sim_init, "initial jobs as class:count")->delimiter(',');

    // induction
    auto* ind_cmd = app.add_subcommand("induction", "single-cycle event frequencies");
    InductionConfig ind_cfg;
    CommonOpts ind_c;
    ind_cmd->add_option("--M", ind_cfg.M, "")->default_val("2000");
    ind_cmd->add_option("--delta", ind_cfg.delta, "")->default_val("0.1");
    ind_cmd->add_option("--N", ind_cfg.N, "initial head-class job count")->required();
    ind_cmd->add_option("--reps", ind_cfg.replications, "")->default_val("20");
    ind_cmd->add_option("--event-cap", ind_cfg.event_cap, "");
    add_common(ind_cmd, ind_c);

    // instability / workload-growth
    auto* inst_cmd = app.add_subcommand("instability", "multi-cycle growth on one path");
    auto* wg_cmd = app.add_subcommand("workload-growth", "growth run with workload report");
    InductionConfig inst_cfg;
    CommonOpts inst_c;
    int inst_cycles = 3;
    for (CLI::App* cmd : {inst_cmd, wg_cmd}) {
        cmd->add_option("--M", inst_cfg.M, "")->default_val("2000");
        cmd->add_option("--delta", inst_cfg.delta, "")->default_val("0.1");
        cmd->add_option("--N", inst_cfg.N, "initial head-class job count")->required();
        cmd->add_option("--reps", inst_cfg.replications, "")->default_val("20");
        cmd->add_option("--cycles", inst_cycles, "")->default_val("3");
        cmd->add_option("--event-cap", inst_cfg.event_cap, "");
        add_common(cmd, inst_c);
    }

    // drift-lemma
    auto* drift_cmd = app.add_subcommand("drift-lemma", "idle-time and excursion tails");
    double drift_eta = 0.2;
    long drift_reps = 10000;
    std::vector<double> drift_t0s{0, 250, 500, 1000, 2000};
    std::vector<double> drift_xs;
    CommonOpts drift_c;
    drift_cmd->add_option("--eta", drift_eta, "rate excess")->default_val("0.2");
    drift_cmd->add_option("--reps", drift_reps, "")->default_val("10000");
    drift_cmd->add_option("--t0-grid", drift_t0s, "")->delimiter(',');
    drift_cmd->add_option("--x-grid", drift_xs, "")->delimiter(',');
    add_common(drift_cmd, drift_c);

    // counting-ld
    auto* cnt_cmd = app.add_subcommand("counting-ld", "renewal counting deviation tails");
    std::string cnt_law = "nu";
    double cnt_M = 100, cnt_mean = 1.0, cnt_beta = 0.1;
    long cnt_reps = 400;
    std::vector<double> cnt_ts{500, 1000, 2000, 4000, 8000};
    CommonOpts cnt_c;
    cnt_cmd->add_option("--law", cnt_law, "nu | exp | atom")->default_val("nu");
    cnt_cmd->add_option("--M", cnt_M, "M for the nu law")->default_val("100");
    cnt_cmd->add_option("--mean", cnt_mean, "mean for exp/atom laws")->default_val("1");
    cnt_cmd->add_option("--beta", cnt_beta, "deviation size")->default_val("0.1");
    cnt_cmd->add_option("--t-grid", cnt_ts, "")->delimiter(',');
    cnt_cmd->add_option("--reps", cnt_reps, "")->default_val("400");
    add_common(cnt_cmd, cnt_c);

    // ps-hlpps
    auto* ph_cmd = app.add_subcommand("ps-hlpps", "PS vs HLPPS equality-in-law check");
    NetOpts ph_net;
    CommonOpts ph_c;
    double ph_t = 50;
    long ph_reps = 1000;
    double ph_alpha = 0.01;
    int ph_exps = 50;
    add_net(ph_cmd, ph_net, false);
    add_common(ph_cmd, ph_c);
    ph_cmd->add_option("--t", ph_t, "sample time")->default_val("50");
    ph_cmd->add_option("--reps", ph_reps, "replications per discipline")->default_val("1000");
    ph_cmd->add_option("--alpha", ph_alpha, "KS level")->default_val("0.01");
    ph_cmd->add_option("--experiments", ph_exps, "repeated experiments")->default_val("50");

    // stage-coupling
    auto* cp_cmd = app.add_subcommand("stage-coupling", "fig1 vs fig2 lockstep check");
    double cp_M = 64, cp_delta = 0.5;
    std::uint64_t cp_events = 100000;
    CommonOpts cp_c;
    cp_cmd->add_option("--M", cp_M, "")->default_val("64");
    cp_cmd->add_option("--delta", cp_delta, "")->default_val("0.5");
    cp_cmd->add_option("--events", cp_events, "")->default_val("100000");
    add_common(cp_cmd, cp_c);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return kExitConfig;
    }

    try {
        if (*solve_cmd) return run_solve_nu(solve_M, solve_c);
        if (*val_cmd) return run_validate(val_net, val_cmd, val_c);
        if (*sim_cmd)
            return run_simulate(sim_net, sim_cmd, sim_c, sim_horizon, sim_events, sim_grid,
                                sim_no_log, sim_init);
        if (*ind_cmd) {
            ind_cfg.seed = ind_c.seed;
            ind_cfg.jobs = ind_c.jobs;
            return run_induction(ind_cfg, ind_c);
        }
        if (*inst_cmd || *wg_cmd) {
            inst_cfg.seed = inst_c.seed;
            inst_cfg.jobs = inst_c.jobs;
            return run_growth(inst_cfg, inst_cycles, inst_c,
                              *inst_cmd ? "instability" : "workload-growth");
        }
        if (*drift_cmd) {
            if (drift_xs.empty())
                for (int i = 0; i <= 30; ++i) drift_xs.push_back(0.5 * i);
            return run_drift(drift_eta, drift_t0s, drift_xs, drift_reps, drift_c);
        }
        if (*cnt_cmd) return run_counting(cnt_law, cnt_M, cnt_mean, cnt_beta, cnt_ts,
                                          cnt_reps, cnt_c);
        if (*ph_cmd) return run_ps_hlpps(ph_net, ph_cmd, ph_t, ph_reps, ph_alpha, ph_exps, ph_c);
        if (*cp_cmd) return run_coupling(cp_M, cp_delta, cp_events, cp_c);
    } catch (const NuSolveError& e) {
        std::cerr << "solver error: " << e.what() << "\n";
        return kExitSolver;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return kExitConfig;
}
