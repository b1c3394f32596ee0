#include <doctest.h>

#include <cmath>

#include "qnet/engine.hpp"
#include "support/auditor.hpp"
#include "support/minispecs.hpp"

using namespace qnet;
using qnet::testing::InvariantAuditor;
using qnet::testing::single_station;
using qnet::testing::two_class_station;

namespace {

Simulator make_fig1_sim(double M, double delta, std::uint64_t seed,
                        const InitialCondition& ic) {
    Simulator sim(build_fig1(M, delta), RngStream(seed));
    sim.init(ic);
    return sim;
}

}  // namespace

TEST_CASE("LIFO preemptive serves the latest arrival at rate 1") {
    // deterministic arrivals at 1, 2, 3, ... with a long service
    const NetworkSpec spec = single_station(Discipline::LifoPreemptive,
                                            ServiceLaw::deterministic(100.0),
                                            ArrivalLaw::atom(1.0));
    Simulator sim(spec, RngStream(1));
    sim.init(InitialCondition::empty());
    sim.run(StopRule::at_time(2.5), RunOptions{});
    REQUIRE(sim.z_station(1) == 2);
    const auto alloc = sim.allocations(1);
    REQUIRE(alloc.size() == 1);
    CHECK(alloc[0].second == 1.0);
    CHECK(sim.job(alloc[0].first).stamp == 2.0);
    // the preempted job keeps the service it received
    for (JobRef r : sim.jobs_at_station(1))
        if (sim.job(r).stamp == 1.0)
            CHECK(sim.job_residual(r) == doctest::Approx(99.0).epsilon(1e-12));
}

TEST_CASE("PS splits the rate equally") {
    const NetworkSpec spec = single_station(Discipline::Ps, ServiceLaw::deterministic(100.0),
                                            ArrivalLaw::atom(1.0));
    Simulator sim(spec, RngStream(1));
    sim.init(InitialCondition::empty());
    sim.run(StopRule::at_time(3.5), RunOptions{});
    REQUIRE(sim.z_station(1) == 3);
    for (const auto& [ref, rate] : sim.allocations(1))
        CHECK(rate == doctest::Approx(1.0 / 3).epsilon(1e-15));
}

TEST_CASE("HLPPS gives each class head its class share") {
    NetworkSpec spec = two_class_station(Discipline::Hlpps, ServiceLaw::deterministic(100.0),
                                         ServiceLaw::deterministic(100.0),
                                         ArrivalLaw::atom(1.0), ArrivalLaw::atom(10.0));
    Simulator sim(spec, RngStream(1));
    InitialCondition ic;
    ic.source_clocks = {{1, 1.0}, {2, 1.5}};
    sim.init(ic);
    sim.run(StopRule::at_time(2.5), RunOptions{});  // class 1 arrivals at 1, 2; class 2 at 1.5
    REQUIRE(sim.z_station(1) == 3);
    const auto alloc = sim.allocations(1);
    REQUIRE(alloc.size() == 2);
    for (const auto& [ref, rate] : alloc) {
        const Job& j = sim.job(ref);
        if (spec.classes[j.cls].id == 1) {
            CHECK(rate == doctest::Approx(2.0 / 3).epsilon(1e-15));
            CHECK(j.stamp == 1.0);  // head = earliest of the class
        } else {
            CHECK(rate == doctest::Approx(1.0 / 3).epsilon(1e-15));
        }
    }
}

TEST_CASE("IS serves every job at rate 1") {
    const NetworkSpec spec = single_station(Discipline::Is, ServiceLaw::deterministic(5.0),
                                            ArrivalLaw::atom(1.0));
    Simulator sim(spec, RngStream(1));
    sim.init(InitialCondition::empty());
    sim.run(StopRule::at_time(3.5), RunOptions{});
    REQUIRE(sim.z_station(1) == 3);
    for (const auto& [ref, rate] : sim.allocations(1)) CHECK(rate == 1.0);
}

TEST_CASE("init: head-count start, empty start, explicit source clock") {
    SUBCASE("Z2(0)=100 gives W3(0)=0") {
        Simulator sim = make_fig1_sim(100, 0.2, 3, InitialCondition::single_class(2, 100));
        CHECK(sim.z_agg(2) == 100);
        CHECK(sim.z_total() == 100);
        CHECK(sim.immediate_workload(3) == 0.0);
    }
    SUBCASE("empty init: first event is an external arrival") {
        Simulator sim = make_fig1_sim(100, 0.2, 3, InitialCondition::empty());
        const double u1 = sim.next_source_time(1), u4 = sim.next_source_time(4);
        sim.run(StopRule::events(1), RunOptions{});
        CHECK(sim.clock() == std::min(u1, u4));
        CHECK(sim.arrivals(1) + sim.arrivals(4) == 1);
    }
    SUBCASE("explicit residual interarrival clock") {
        InitialCondition ic;
        ic.source_clocks = {{1, 1.0 / (100.0 * 100.0)}};
        Simulator sim = make_fig1_sim(100, 0.2, 3, ic);
        sim.run(StopRule::events(1), RunOptions{});
        CHECK(sim.clock() == 1.0 / (100.0 * 100.0));
        CHECK(sim.arrivals(1) == 1);
    }
    SUBCASE("bad init rejected") {
        Simulator sim(build_fig1(100, 0.2), RngStream(1));
        InitialCondition bad;
        bad.counts = {{9, 5}};
        CHECK_THROWS_AS(sim.init(bad), std::invalid_argument);
        Simulator sim2(build_fig1(100, 0.2), RngStream(1));
        InitialCondition bad2;
        bad2.counts = {{2, -1}};
        CHECK_THROWS_AS(sim2.init(bad2), std::invalid_argument);
    }
}

TEST_CASE("initial jobs are served FIFO within the sentinel tier under LIFO") {
    const NetworkSpec spec = single_station(Discipline::LifoPreemptive,
                                            ServiceLaw::deterministic(1.0),
                                            ArrivalLaw::atom(1000.0));
    Simulator sim(spec, RngStream(1));
    sim.init(InitialCondition::single_class(1, 3));
    RunOptions opts;
    opts.log_events = true;
    Trajectory traj;
    sim.run(StopRule::at_time(3.5), opts, &traj);
    // three departures, in creation order 0, 1, 2
    std::vector<std::uint64_t> departed;
    for (const auto& e : traj.events)
        if (e.kind == EventKind::Departure) departed.push_back(e.job);
    CHECK(departed == std::vector<std::uint64_t>{0, 1, 2});
}

TEST_CASE("preempt and resume rows appear in the event log") {
    const NetworkSpec spec = single_station(Discipline::LifoPreemptive,
                                            ServiceLaw::deterministic(5.0),
                                            ArrivalLaw::atom(2.0));
    Simulator sim(spec, RngStream(1));
    sim.init(InitialCondition::empty());
    RunOptions opts;
    opts.log_events = true;
    Trajectory traj;
    // arrivals at 2, 4, ...: job 0 is served 2 units, preempted at 4,
    // job 1 completes at 9 (with further arrivals 6, 8 preempting it first)
    sim.run(StopRule::at_time(5.0), opts, &traj);
    bool preempted = false;
    for (const auto& e : traj.events)
        if (e.kind == EventKind::Preempt && e.job == 0 && e.time == 4.0) preempted = true;
    CHECK(preempted);
    const JobRef j0 = [&] {
        for (JobRef r : sim.jobs_at_station(1))
            if (sim.job(r).id == 0) return r;
        return kNoJob;
    }();
    CHECK(sim.job_residual(j0) == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("FIFO serves in arrival order") {
    const NetworkSpec spec = single_station(Discipline::Fifo,
                                            ServiceLaw::deterministic(1.5),
                                            ArrivalLaw::atom(1.0));
    Simulator sim(spec, RngStream(1));
    sim.init(InitialCondition::empty());
    RunOptions opts;
    opts.log_events = true;
    Trajectory traj;
    sim.run(StopRule::at_time(6.0), opts, &traj);
    std::vector<std::pair<double, std::uint64_t>> departures;
    for (const auto& e : traj.events)
        if (e.kind == EventKind::Departure) departures.push_back({e.time, e.job});
    REQUIRE(departures.size() == 3);
    CHECK(departures[0] == std::pair<double, std::uint64_t>{2.5, 0});
    CHECK(departures[1] == std::pair<double, std::uint64_t>{4.0, 1});
    CHECK(departures[2] == std::pair<double, std::uint64_t>{5.5, 2});
}

TEST_CASE("IS departures are arrival plus service") {
    const NetworkSpec spec = single_station(Discipline::Is, ServiceLaw::deterministic(5.0),
                                            ArrivalLaw::atom(1.0));
    Simulator sim(spec, RngStream(1));
    sim.init(InitialCondition::empty());
    RunOptions opts;
    opts.log_events = true;
    Trajectory traj;
    sim.run(StopRule::at_time(8.5), opts, &traj);
    std::vector<double> times;
    for (const auto& e : traj.events)
        if (e.kind == EventKind::Departure) times.push_back(e.time);
    CHECK(times == std::vector<double>{6.0, 7.0, 8.0});
}

TEST_CASE("live state distance compares two simulators") {
    Simulator a = make_fig1_sim(100, 0.2, 3, InitialCondition::single_class(2, 4));
    Simulator b = make_fig1_sim(100, 0.2, 3, InitialCondition::single_class(2, 7));
    // identical clocks differ only in z2 and the residual source clocks
    CHECK(state_distance(a, b) == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(state_distance(a, a) == 0.0);
}

TEST_CASE("state distance is a metric on engine-generated states") {
    auto descriptor_after = [&](std::uint64_t seed, std::uint64_t events) {
        Simulator sim = make_fig1_sim(50, 0.3, seed, InitialCondition::single_class(2, 6));
        sim.run(StopRule::events(events), RunOptions{});
        return sim.descriptor();
    };
    for (int trial = 0; trial < 12; ++trial) {
        const StateDescriptor x = descriptor_after(100 + trial, 50 + 40 * trial);
        const StateDescriptor y = descriptor_after(200 + trial, 30 + 55 * trial);
        const StateDescriptor z = descriptor_after(300 + trial, 70 + 25 * trial);
        CHECK(state_distance(x, y) == doctest::Approx(state_distance(y, x)).epsilon(1e-12));
        CHECK(state_distance(x, y) <= state_distance(x, z) + state_distance(z, y) + 1e-12);
        CHECK(state_distance(x, x) == 0.0);
    }
}

TEST_CASE("grid series rows repeat the counts between events") {
    Trajectory ev, grid;
    {
        Simulator s1 = make_fig1_sim(50, 0.3, 21, InitialCondition::single_class(2, 10));
        RunOptions o;
        o.series = RunOptions::Series::Events;
        s1.run(StopRule::at_time(40.0), o, &ev);
    }
    {
        Simulator s2 = make_fig1_sim(50, 0.3, 21, InitialCondition::single_class(2, 10));
        RunOptions o;
        o.series = RunOptions::Series::Grid;
        o.grid_dt = 0.5;
        s2.run(StopRule::at_time(40.0), o, &grid);
    }
    REQUIRE(grid.rows() > 10);
    // every grid row matches the last event row at or before its time
    for (std::size_t g = 1; g < grid.rows(); ++g) {
        const double tg = grid.series_time[g];
        std::size_t last = 0;
        for (std::size_t r = 0; r < ev.rows(); ++r)
            if (ev.series_time[r] <= tg) last = r;
        for (std::size_t c = 0; c < grid.agg_ids.size(); ++c)
            CHECK(grid.z_at(g, c) == ev.z_at(last, c));
    }
}

TEST_CASE("nonpreemptive LIFO runs the in-service job to completion") {
    const NetworkSpec spec = single_station(Discipline::LifoNonpreemptive,
                                            ServiceLaw::deterministic(3.0),
                                            ArrivalLaw::atom(1.0));
    Simulator sim(spec, RngStream(1));
    sim.init(InitialCondition::empty());
    InvariantAuditor audit(sim);
    sim.set_auditor(&audit);
    RunOptions opts;
    opts.log_events = true;
    Trajectory traj;
    sim.run(StopRule::at_time(20.0), opts, &traj);
    CHECK(audit.violations() == 0);
    // first job arrives at 1, finishes at 4 despite arrivals at 2 and 3;
    // the next pick is the newest job present at the completion instant
    // (the arrival also stamped 4 is processed after the completion)
    std::vector<std::pair<double, std::uint64_t>> departures;
    for (const auto& e : traj.events)
        if (e.kind == EventKind::Departure) departures.push_back({e.time, e.job});
    REQUIRE(departures.size() >= 2);
    CHECK(departures[0].first == 4.0);
    CHECK(departures[0].second == 0);
    CHECK(departures[1].first == 7.0);
    CHECK(departures[1].second == 2);  // job that arrived at t=3
}

TEST_CASE("deterministic replay: identical logs byte for byte") {
    for (int variant = 0; variant < 2; ++variant) {
        const double horizon = variant == 0 ? 50.0 : 120.0;
        Trajectory t1, t2;
        for (Trajectory* t : {&t1, &t2}) {
            Simulator sim = make_fig1_sim(50, 0.3, 777, InitialCondition::single_class(2, 20));
            RunOptions opts;
            opts.log_events = true;
            opts.series = RunOptions::Series::Events;
            sim.run(StopRule::at_time(horizon), opts, t);
        }
        CHECK(event_log_csv(t1) == event_log_csv(t2));
        CHECK(series_csv(t1) == series_csv(t2));
    }
}

TEST_CASE("engine invariants hold on fig1 under every discipline") {
    for (Discipline d : {Discipline::LifoPreemptive, Discipline::LifoNonpreemptive,
                         Discipline::Fifo, Discipline::Ps, Discipline::Hlpps, Discipline::Is}) {
        CAPTURE(to_string(d));
        NetworkSpec spec = with_discipline(build_fig1(32, 0.3), d);
        Simulator sim(spec, RngStream(12345));
        InitialCondition ic;
        ic.counts = {{2, 10}, {5, 7}, {3, 2}};
        sim.init(ic);
        InvariantAuditor audit(sim);
        sim.set_auditor(&audit);
        sim.run(StopRule::events(20000), RunOptions{});
        CHECK(audit.events() == 20000);
        INFO(audit.first_violation());
        CHECK(audit.violations() == 0);
    }
}

TEST_CASE("workload trackers agree with exact recomputation") {
    Simulator sim = make_fig1_sim(32, 0.3, 9, InitialCondition::single_class(2, 15));
    sim.run(StopRule::events(30000), RunOptions{});
    CHECK(sim.total_workload() ==
          doctest::Approx(sim.exact_total_workload()).epsilon(1e-9));
    CHECK(sim.immediate_workload(3) ==
          doctest::Approx(sim.exact_immediate_workload(3)).epsilon(1e-9));
    CHECK(sim.immediate_workload(6) ==
          doctest::Approx(sim.exact_immediate_workload(6)).epsilon(1e-9));
}

TEST_CASE("descriptor exposes the section-2 coordinates") {
    Simulator sim = make_fig1_sim(100, 0.2, 3, InitialCondition::single_class(2, 5));
    StateDescriptor d0 = sim.descriptor();
    CHECK(d0.z2 == 5);
    CHECK(d0.jobs.empty());  // classes 2 and 5 carry counts only
    CHECK(d0.u1 > 0);
    sim.run(StopRule::events(200), RunOptions{});
    StateDescriptor d1 = sim.descriptor();
    CHECK(state_distance(d1, d1) == 0.0);
    // jobs listing restricted to classes 1, 3, 4, 6
    for (const auto& j : d1.jobs) CHECK((j.cls == 1 || j.cls == 3 || j.cls == 4 || j.cls == 6));
}

TEST_CASE("coupled_run: identical specs match exactly; zero horizon is empty") {
    const NetworkSpec f1 = build_fig1(32, 0.5);
    const CouplingReport same = coupled_run(f1, f1, 42, 20000);
    CHECK(same.max_count_discrepancy == 0);
    CHECK(same.max_workload_discrepancy == 0.0);
    CHECK_FALSE(same.diverged);
    CHECK(same.transitions_a == same.transitions_b);
    CHECK(same.transitions_a > 0);

    // a single-stage expansion is the identity up to renaming
    const CouplingReport l1 = coupled_run(f1, stage_expand(f1, 3, 1), 42, 20000);
    CHECK(l1.max_count_discrepancy == 0);
    CHECK(l1.max_workload_discrepancy == 0.0);
    CHECK_FALSE(l1.diverged);

    const CouplingReport zero = coupled_run(f1, f1, 42, 20000, 0.0);
    CHECK(zero.transitions_a == 0);
    CHECK(zero.max_count_discrepancy == 0);
}

TEST_CASE("coupled_run: fig1 vs fig2 stage expansion stays in lockstep") {
    const CouplingReport rep =
        coupled_run(build_fig1(32, 0.5), build_fig2(32, 0.5), 7, 50000);
    INFO(rep.note);
    CHECK_FALSE(rep.diverged);
    CHECK(rep.max_count_discrepancy == 0);
    CHECK(rep.max_workload_discrepancy <= 1e-9);
    CHECK(rep.transitions_a > 1000);  // fig2 spends events on stage moves, so
    CHECK(rep.transitions_b > 1000);  // raw counts differ; the span is shared
}

TEST_CASE("truncation flag set when a predicate cannot be reached") {
    Simulator sim = make_fig1_sim(50, 0.3, 5, InitialCondition::single_class(2, 1000));
    StopRule stop = StopRule::until_agg_empty(2);
    RunOptions opts;
    opts.hard_event_cap = 500;  // far too few events to drain 1000 jobs
    Trajectory traj;
    const RunOutcome out = sim.run(stop, opts, &traj);
    CHECK(out.reason == StopReason::EventCap);
    CHECK(out.truncated);
    CHECK(traj.truncated);
}

TEST_CASE("horizon stop leaves the state continuable") {
    Simulator sim = make_fig1_sim(50, 0.3, 5, InitialCondition::single_class(2, 10));
    sim.run(StopRule::at_time(10.0), RunOptions{});
    CHECK(sim.clock() == 10.0);
    const RunOutcome out = sim.run(StopRule::at_time(20.0), RunOptions{});
    CHECK(out.reason == StopReason::Horizon);
    CHECK(sim.clock() == 20.0);
    // piecing two runs together equals one long run
    Simulator once = make_fig1_sim(50, 0.3, 5, InitialCondition::single_class(2, 10));
    once.run(StopRule::at_time(20.0), RunOptions{});
    CHECK(once.events_executed() == sim.events_executed());
    CHECK(once.z_total() == sim.z_total());
    CHECK(once.total_workload() == doctest::Approx(sim.total_workload()).epsilon(1e-12));
}
