#include "qnet/observables.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "qnet/ioutil.hpp"

namespace qnet {

Workloads workloads(Simulator& sim) {
    Workloads w;
    w.wtotal = sim.total_workload();
    auto has_agg = [&](ClassId a) {
        for (const auto& c : sim.spec().classes)
            if (c.agg == a) return true;
        return false;
    };
    if (has_agg(3)) w.w3 = sim.immediate_workload(3);
    if (has_agg(6)) w.w6 = sim.immediate_workload(6);
    return w;
}

Workloads workloads_at_row(const Trajectory& t, std::size_t row) {
    return {t.series_w3[row], t.series_w6[row], t.series_wtotal[row]};
}

std::vector<Cluster> detect_clusters(const std::vector<double>& arrivals, double threshold) {
    if (!(threshold > 0)) throw std::invalid_argument("detect_clusters: threshold must be > 0");
    if (!std::is_sorted(arrivals.begin(), arrivals.end()))
        throw std::invalid_argument("detect_clusters: arrivals must be sorted");
    std::vector<Cluster> out;
    for (double t : arrivals) {
        if (out.empty() || t - out.back().members.back() >= threshold) {
            out.push_back({t, 0, {}});
        }
        out.back().members.push_back(t);
        out.back().size++;
    }
    return out;
}

namespace {

long row_total(const Trajectory& t, std::size_t row) {
    long z = 0;
    for (std::size_t c = 0; c < t.agg_ids.size(); ++c) z += t.z_at(row, c);
    return z;
}

std::size_t require_col(const Trajectory& t, ClassId agg, const char* who) {
    auto col = t.agg_col(agg);
    if (!col) throw std::invalid_argument(std::string(who) + ": trajectory lacks agg class");
    return *col;
}

}  // namespace

namespace {

// first row index with the head class empty, searching from `from`
std::ptrdiff_t s1_row(const Trajectory& t, ClassId head, std::size_t from) {
    const std::size_t col = require_col(t, head, "find_S1");
    for (std::size_t r = from; r < t.rows(); ++r)
        if (t.z_at(r, col) == 0) return static_cast<std::ptrdiff_t>(r);
    return -1;
}

std::ptrdiff_t t_row(const Trajectory& t, double s1, ClassId edge_a, ClassId edge_b) {
    const std::size_t ca = require_col(t, edge_a, "find_T");
    const std::size_t cb = require_col(t, edge_b, "find_T");
    for (std::size_t r = 0; r < t.rows(); ++r) {
        if (t.series_time[r] < s1) continue;
        if (t.z_at(r, ca) + t.z_at(r, cb) == 0) return static_cast<std::ptrdiff_t>(r);
    }
    return -1;
}

}  // namespace

S1Result find_S1(const Trajectory& t, ClassId head) {
    if (t.rows() == 0) return {};
    const std::size_t col = require_col(t, head, "find_S1");
    if (t.z_at(0, col) == 0) return {t.series_time[0], true, true};
    const std::ptrdiff_t r = s1_row(t, head, 1);
    if (r < 0) return {};
    return {t.series_time[static_cast<std::size_t>(r)], true, false};
}

TResult find_T(const Trajectory& t, double s1, ClassId edge_a, ClassId edge_b) {
    const std::ptrdiff_t r = t_row(t, s1, edge_a, edge_b);
    if (r < 0) return {};
    TResult res;
    res.time = t.series_time[static_cast<std::size_t>(r)];
    res.s2 = res.time - s1;
    res.found = true;
    return res;
}

CycleRoles CycleRoles::forward() { return CycleRoles{}; }

CycleRoles CycleRoles::mirrored() {
    CycleRoles r;
    r.head = 5;
    r.next_head = 2;
    r.entry = 4;
    r.bulk = 1;
    r.edge_a = 6;
    r.edge_b = 1;
    r.w_mid = 6;
    r.w_small = 3;
    r.drain_station = 1;
    return r;
}

unsigned CycleMarks::events_bitmask() const {
    unsigned m = 0;
    if (ev_head_growth) m |= 1u;
    if (ev_small_upstream) m |= 2u;
    if (ev_edge_empty) m |= 4u;
    if (ev_w_small) m |= 8u;
    if (ev_min_z) m |= 16u;
    return m;
}

void evaluate_cycle_events(CycleMarks& m, double delta) {
    if (!m.valid) return;
    const double N = static_cast<double>(m.n);
    const double d3 = delta * delta * delta;
    const auto& r = m.roles;
    m.ev_head_growth = static_cast<double>(m.z_t[r.next_head]) >= N / (4.0 * delta);
    m.ev_small_upstream =
        static_cast<double>(m.z_t[r.entry] + m.z_t[r.head]) <= 1e3 * delta * N;
    m.ev_edge_empty = m.z_t[r.edge_a] == 0 && m.z_t[r.edge_b] == 0;
    const double w_small_t = r.w_small == 6 ? m.w6_t : m.w3_t;
    m.ev_w_small = w_small_t <= d3 * N;
    m.ev_min_z = static_cast<double>(m.min_z) >= N / 4.0;
    m.t_in_range = m.t >= N / (3.0 * delta) && m.t <= 3.0 * N / delta;

    long others = 0;
    for (int k = 1; k <= 6; ++k)
        if (k != r.edge_a && k != r.edge_b) others += m.z_s1[k];
    const double w_mid_s1 = r.w_mid == 3 ? m.w3_s1 : m.w6_s1;
    const double bulk = static_cast<double>(m.z_s1[r.bulk]);
    m.a_emp = bulk > 0 ? std::max(w_mid_s1, static_cast<double>(others)) / (d3 * bulk) : 0.0;
}

CycleMarks cycle_report(const Trajectory& traj, double delta, CycleRoles roles) {
    CycleMarks m;
    m.roles = roles;
    if (traj.rows() == 0) {
        m.truncated = true;
        return m;
    }
    const std::size_t head_col = require_col(traj, roles.head, "cycle_report");
    m.n = traj.z_at(0, head_col);
    m.s1_degenerate = m.n == 0;

    const std::ptrdiff_t r1 = s1_row(traj, roles.head, m.s1_degenerate ? 0 : 1);
    if (r1 < 0) {
        m.truncated = true;
        return m;
    }
    const std::size_t row1 = static_cast<std::size_t>(r1);
    m.s1 = traj.series_time[row1] - traj.series_time[0];
    const std::ptrdiff_t r2 = t_row(traj, traj.series_time[row1], roles.edge_a, roles.edge_b);
    if (r2 < 0) {
        m.truncated = true;
        return m;
    }
    const std::size_t row2 = static_cast<std::size_t>(r2);
    m.t = traj.series_time[row2] - traj.series_time[0];
    m.s2 = m.t - m.s1;

    auto fill = [&](std::size_t row, std::array<long, 7>& z, double& w3, double& w6) {
        for (int k = 1; k <= 6; ++k) {
            auto col = traj.agg_col(k);
            z[k] = col ? traj.z_at(row, *col) : 0;
        }
        w3 = traj.series_w3[row];
        w6 = traj.series_w6[row];
    };
    fill(row1, m.z_s1, m.w3_s1, m.w6_s1);
    fill(row2, m.z_t, m.w3_t, m.w6_t);

    long min_z = row_total(traj, 0);
    double min_w = traj.series_wtotal[0];
    for (std::size_t r = 0; r <= row2; ++r) {
        min_z = std::min(min_z, row_total(traj, r));
        min_w = std::min(min_w, traj.series_wtotal[r]);
    }
    m.min_z = min_z;
    m.min_w = min_w;
    m.valid = true;
    evaluate_cycle_events(m, delta);
    return m;
}

std::vector<double> arrival_times(const Trajectory& traj, ClassId agg) {
    std::vector<double> times;
    for (const auto& e : traj.events) {
        if (e.kind != EventKind::Arrival) continue;
        if (e.cls < traj.class_agg.size() && traj.class_agg[e.cls] == agg)
            times.push_back(e.time);
    }
    return times;
}

GapIdle cluster_gap_idle(const Trajectory& traj, const std::vector<Cluster>& clusters) {
    if (traj.M <= 0) throw std::invalid_argument("cluster_gap_idle: trajectory lacks M");
    GapIdle out;
    if (clusters.size() < 2) return out;

    // class-3 arrival/departure rows, with arrival stamps per job
    struct Row {
        double time;
        bool arrive;
        std::uint64_t job;
    };
    std::vector<Row> rows;
    std::map<std::uint64_t, double> arrival_of;
    for (const auto& e : traj.events) {
        if (e.cls >= traj.class_agg.size() || traj.class_agg[e.cls] != 3) continue;
        if (e.kind == EventKind::Arrival) {
            rows.push_back({e.time, true, e.job});
            arrival_of[e.job] = e.time;
        } else if (e.kind == EventKind::Departure) {
            rows.push_back({e.time, false, e.job});
        }
    }

    const double atom = 1.0 / (traj.M * traj.M);
    for (std::size_t i = 0; i + 1 < clusters.size(); ++i) {
        const double c0 = clusters[i].start + static_cast<double>(clusters[i].size) * atom;
        const double c1 = clusters[i + 1].start;
        GapIdle::Gap gap{c0, c1, 0};
        long recent = 0;
        double mark = c0;  // start of the current no-recent-jobs stretch
        for (const auto& r : rows) {
            if (r.time <= c0) continue;
            if (r.time > c1) break;
            if (r.arrive) {
                if (recent == 0) gap.y += r.time - mark;
                recent++;
            } else {
                const auto it = arrival_of.find(r.job);
                if (it == arrival_of.end() || it->second <= c0) continue;  // old job
                recent--;
                if (recent == 0) mark = r.time;
            }
        }
        if (recent == 0) gap.y += c1 - mark;
        out.gaps.push_back(gap);
    }
    return out;
}

std::string cycle_marks_csv(const std::vector<CycleMarks>& marks) {
    std::string out = "cycle,S1,S2,T,Z5_T,Z12_T,W6_T,minZ,events_ok\n";
    int idx = 1;
    for (const auto& m : marks) {
        const auto& r = m.roles;
        out += std::to_string(idx++);
        out += ',';
        out += format_double(m.s1);
        out += ',';
        out += format_double(m.s2);
        out += ',';
        out += format_double(m.t);
        out += ',';
        out += std::to_string(m.z_t[r.next_head]);
        out += ',';
        out += std::to_string(m.z_t[r.entry] + m.z_t[r.head]);
        out += ',';
        out += format_double(r.w_small == 6 ? m.w6_t : m.w3_t);
        out += ',';
        out += std::to_string(m.min_z);
        out += ',';
        out += std::to_string(m.events_bitmask());
        out += '\n';
    }
    return out;
}

}  // namespace qnet
