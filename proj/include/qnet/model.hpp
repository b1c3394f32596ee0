#pragma once

#include <string>
#include <vector>

#include "qnet/stochastics.hpp"

namespace qnet {

using ClassId = int;
using StationId = int;
inline constexpr ClassId kExit = -1;

enum class Discipline {
    LifoPreemptive,
    LifoNonpreemptive,
    Fifo,
    Ps,
    Hlpps,
    Is,
};

std::string to_string(Discipline d);
Discipline discipline_from_string(const std::string& s);

struct ClassDef {
    ClassId id = 0;
    std::string label;       // "3" for plain classes, "3.2" for stage classes
    StationId station = 0;
    ServiceLaw service;
    ClassId successor = kExit;
    ClassId agg = 0;         // reporting parent; equals id unless a stage class
};

struct SourceDef {
    ClassId entry = 0;
    ArrivalLaw law;
};

struct StationDef {
    StationId id = 0;
    std::string label;
    Discipline discipline = Discipline::LifoPreemptive;
    std::vector<ClassId> classes;
};

// A multiclass queueing network: classes with deterministic successor routes,
// stations owning disjoint nonempty class sets, renewal external sources.
struct NetworkSpec {
    double M = 0;      // time-scale parameter of the arrival law
    double delta = 0;  // rate-gap parameter of the service means

    std::vector<ClassDef> classes;
    std::vector<SourceDef> sources;
    std::vector<StationDef> stations;

    const ClassDef& class_def(ClassId id) const;
    const StationDef& station_def(StationId id) const;
    bool has_class(ClassId id) const;

    // Chain of classes from entry to exit (inclusive).
    std::vector<ClassId> route_from(ClassId entry) const;

    // Sum of mean service times from this class to the exit, inclusive.
    double downstream_work(ClassId from) const;

    // Distinct agg ids, in first-appearance order over `classes`.
    std::vector<ClassId> agg_classes() const;

    // True when the station/agg layout matches Figure 1 (classes 1..6,
    // stations {1,6},{2},{5},{3,4}); the state metric requires this shape.
    bool fig1_topology() const;

    void validate() const;  // throws std::invalid_argument on any violation
};

// Figure 1 network: routes 1->2->3->exit and 4->5->6->exit, stations
// I={1,6}, II={2}, III={5}, IV={3,4}, preemptive LIFO everywhere, nu(M)
// sources at classes 1 and 4, means m1=m4=d^3, m2=m5=1-d, m3=m6=1-d+d^3.
// `couple` overwrites delta with M^{-1/15}.
NetworkSpec build_fig1(double M, double delta, bool couple = false);

// Figure 2 network: classes 3 and 6 split into L = (1-d+d^3)/d^3 stage
// classes of mean d^3 each, making stations I and IV Kelly type.  L may be
// passed explicitly (checked) or 0 to derive it; a non-integer L is an
// error naming the nearest valid delta.
NetworkSpec build_fig2(double M, double delta, long L = 0);

// Number of stages for build_fig2 at this delta; throws (naming the nearest
// valid delta) if (1-d+d^3)/d^3 is not an integer to within 1e-9.
long fig2_stage_count(double delta);

// Replaces `target` by L consecutive classes at the same station, rewiring
// the route.  Deterministic(m) splits into L deterministic stages of mean
// m/L; Exponential(m) expands to L exponential stages of mean m/L (method
// of stages); a single-component Erlang mixture with L stages becomes L
// exponential stage classes.  Aggregate mean is preserved.
NetworkSpec stage_expand(const NetworkSpec& spec, ClassId target, long L);

// Copy of the spec with every station running discipline `d`.
NetworkSpec with_discipline(const NetworkSpec& spec, Discipline d);

// Copy of the spec with every service law replaced by an exponential law of
// the same mean.
NetworkSpec exponentialized(const NetworkSpec& spec);

struct TrafficReport {
    struct StationLoad {
        StationId id = 0;
        std::string label;
        double rho = 0;
    };
    struct ClassRate {
        ClassId id = 0;
        double lambda = 0;
    };
    std::vector<StationLoad> stations;
    std::vector<ClassRate> classes;

    double rho(StationId id) const;
    double max_rho() const;
    bool subcritical() const { return max_rho() < 1.0; }
};

// Arrival rates by flow conservation from the sources, station loads
// rho_s = sum_{k in s} lambda_k m_k.
TrafficReport traffic(const NetworkSpec& spec);

// ---------------------------------------------------------------------------
// State descriptor and metric (Figure 1 topology).
//
// A state is the ordered list of job records (class k in {1,3,4,6}, age s,
// residual v) sorted by descending class then descending age (age = +inf
// for jobs initially in the network), plus the job counts z2, z5 and the
// residual interarrival clocks u1, u4.
// ---------------------------------------------------------------------------

struct JobRecord {
    int cls = 0;
    double age = 0;  // +inf marks an initial job
    double residual = 0;
};

struct StateDescriptor {
    std::vector<JobRecord> jobs;
    long z2 = 0, z5 = 0;
    double u1 = 0, u4 = 0;

    void canonicalize();  // sorts jobs into the descriptor order
};

// d(x,x') = sum_i ((|dk|+|ds|+|dv|) ^ 1) + |dz2| + |dz5| + |du1| + |du4|,
// with job lists padded by zero records and |inf - inf| = 0.
double state_distance(const StateDescriptor& a, const StateDescriptor& b);

// ---------------------------------------------------------------------------
// Serialization: round-trips losslessly through JSON text.
// ---------------------------------------------------------------------------

std::string to_json_text(const NetworkSpec& spec);
NetworkSpec spec_from_json_text(const std::string& text);
void save_spec(const NetworkSpec& spec, const std::string& path);
NetworkSpec load_spec(const std::string& path);

bool operator==(const NetworkSpec& a, const NetworkSpec& b);

}  // namespace qnet
