#pragma once

#include <array>
#include <vector>

#include "qnet/engine.hpp"

namespace qnet {

struct Workloads {
    double w3 = 0, w6 = 0, wtotal = 0;
};

// Exact workloads from the live state (stage classes aggregate into their
// parent totals, residuals plus remaining stage means).
Workloads workloads(Simulator& sim);
Workloads workloads_at_row(const Trajectory& t, std::size_t row);

// ---------------------------------------------------------------------------
// Cluster decomposition of an arrival stream: runs of arrivals separated by
// 1/M^2 atoms, delimited by gaps >= threshold (default gamma*M).  The first
// arrival begins a cluster.
// ---------------------------------------------------------------------------

struct Cluster {
    double start = 0;  // U_i
    long size = 0;     // script-L_i
    std::vector<double> members;
};

std::vector<Cluster> detect_clusters(const std::vector<double>& arrivals, double threshold);

// ---------------------------------------------------------------------------
// Stopping times S1 (first emptying of the head class) and T (subsequent
// first emptying of the drain station), read off event-level series.
// ---------------------------------------------------------------------------

struct S1Result {
    double time = 0;
    bool found = false;
    bool degenerate = false;  // head class already empty at the start
};

S1Result find_S1(const Trajectory& t, ClassId head = 2);

struct TResult {
    double time = 0, s2 = 0;
    bool found = false;
};

TResult find_T(const Trajectory& t, double s1, ClassId edge_a = 3, ClassId edge_b = 4);

// ---------------------------------------------------------------------------
// Per-cycle marks and the induction-step event indicators.
// ---------------------------------------------------------------------------

// Class roles of a cycle.  The forward cycle drains Class 2 and piles work
// at Station IV; after it completes the routes swap.
struct CycleRoles {
    int head = 2;       // class whose emptying defines S1
    int next_head = 5;  // class holding the pile at T
    int entry = 1;      // external class feeding the head
    int bulk = 4;       // class where the next cycle's jobs accumulate at S1
    int edge_a = 3, edge_b = 4;  // classes of the drain station
    int w_mid = 3;      // workload bounded at S1
    int w_small = 6;    // workload bounded at T
    StationId drain_station = 4;

    static CycleRoles forward();
    static CycleRoles mirrored();
    static CycleRoles for_cycle(int n) { return n % 2 == 1 ? forward() : mirrored(); }
};

struct CycleMarks {
    long n = 0;  // head count at cycle start
    CycleRoles roles;
    double s1 = 0, s2 = 0, t = 0;  // relative to the cycle start
    bool s1_degenerate = false;
    bool truncated = false;
    bool valid = false;  // booleans meaningful only when the cycle completed

    std::array<long, 7> z_s1{};  // indexed by class id 1..6
    std::array<long, 7> z_t{};
    double w3_s1 = 0, w6_s1 = 0;
    double w3_t = 0, w6_t = 0;
    long min_z = 0;
    double min_w = 0;
    double a_emp = 0;  // max(W_mid(S1), sum_{k not edge} Z_k(S1)) / (d^3 Z_bulk(S1))

    // induction-step events, role-aware
    bool ev_head_growth = false;  // Z_next(T) >= N/(4 delta)
    bool ev_small_upstream = false;  // Z_entry(T)+Z_head(T) <= 1e3 delta N
    bool ev_edge_empty = false;      // drain-station classes empty at T
    bool ev_w_small = false;         // W_small(T) <= delta^3 N
    bool ev_min_z = false;           // min Z >= N/4
    bool t_in_range = false;         // T in [N/(3 delta), 3N/delta]

    unsigned events_bitmask() const;
    bool all_events() const {
        return ev_head_growth && ev_small_upstream && ev_edge_empty && ev_w_small && ev_min_z;
    }
};

// Evaluates the event indicators from raw marks.
void evaluate_cycle_events(CycleMarks& m, double delta);

// Assembles marks for a completed cycle from a trajectory carrying
// event-level series (N is read from the first row's head-class count).
CycleMarks cycle_report(const Trajectory& traj, double delta,
                        CycleRoles roles = CycleRoles::forward());

// ---------------------------------------------------------------------------
// Idle time at Class 3 within cluster gaps (Y_i): for each gap between
// consecutive Class 4 clusters, the time during which Class 3 holds no job
// that arrived after the cluster's last atom.
// ---------------------------------------------------------------------------

struct GapIdle {
    struct Gap {
        double start = 0, end = 0;  // (U_i + L_i/M^2, U_{i+1}]
        double y = 0;
    };
    std::vector<Gap> gaps;
};

GapIdle cluster_gap_idle(const Trajectory& traj, const std::vector<Cluster>& clusters);

// Arrival times at an agg class, from the event log.
std::vector<double> arrival_times(const Trajectory& traj, ClassId agg);

// CSV row block for cycle marks:
// cycle,S1,S2,T,Z5_T,Z12_T,W6_T,minZ,events_ok
std::string cycle_marks_csv(const std::vector<CycleMarks>& marks);

}  // namespace qnet
