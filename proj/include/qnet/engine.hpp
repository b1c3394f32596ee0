#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "qnet/model.hpp"

namespace qnet {

using JobRef = std::uint32_t;
inline constexpr JobRef kNoJob = std::numeric_limits<JobRef>::max();

// One job in flight.  `stamp` is the arrival time at the current class;
// -inf marks jobs that were in the network at time 0 (the "initial job"
// sentinel, older than every real arrival and served FIFO within its tier).
//
// Service progress is tracked per station visit: `visit_target` accumulates
// the sampled services of the consecutive same-station classes seen so far,
// and `aux` holds the serving anchor (visit start minus work already done)
// while the job is on a rate-1 server, or the paused work total otherwise.
// Scheduling completions as anchor + visit_target keeps long stage chains
// to one rounding per service segment instead of one per stage.
struct Job {
    double stamp = 0;
    double visit_target = 0;  // cumulative sampled service through this class
    double aux = 0;           // anchor (kAnchored set) or received work
    double service = 0;       // sampled requirement at the current class
    double entry_time = 0;    // time the job entered the network
    std::uint64_t id = 0;     // global creation order
    std::uint16_t cls = 0;    // dense class index
    std::uint8_t flags = 0;

    static constexpr std::uint8_t kAlive = 1;
    static constexpr std::uint8_t kInitial = 2;
    static constexpr std::uint8_t kInitialAtAgg4 = 4;
    static constexpr std::uint8_t kAnchored = 8;

    bool alive() const { return flags & kAlive; }
    bool initial() const { return flags & kInitial; }
    bool anchored() const { return flags & kAnchored; }
};

enum class EventKind : std::uint8_t { Arrival, Departure, Preempt, Resume };

struct EventRow {
    double time = 0;
    EventKind kind = EventKind::Arrival;
    std::uint16_t cls = 0;  // dense class index
    std::uint64_t job = 0;
};

// A station-level transition (job entered or left the station), used by the
// stage-expansion coupling check; intra-station stage moves do not appear.
struct StationTransition {
    double time = 0;
    StationId station = 0;
    int delta = 0;        // +1 enter, -1 leave
    double workload = 0;  // exact total workload right after the transition
};

struct Trajectory {
    double M = 0, delta = 0;
    std::vector<std::string> agg_labels;  // column order of the z series
    std::vector<ClassId> agg_ids;
    std::vector<std::string> class_labels;  // dense class index -> label
    std::vector<ClassId> class_agg;         // dense class index -> agg id

    std::vector<EventRow> events;  // populated when RunOptions::log_events

    // Sampled series; z is row-major with stride agg_ids.size().
    std::vector<double> series_time;
    std::vector<long> series_z;
    std::vector<double> series_w3, series_w6, series_wtotal;

    bool truncated = false;
    std::string stop_reason;

    std::size_t rows() const { return series_time.size(); }
    long z_at(std::size_t row, std::size_t agg_col) const {
        return series_z[row * agg_ids.size() + agg_col];
    }
    std::optional<std::size_t> agg_col(ClassId agg) const;
};

struct InitialCondition {
    // Jobs per class (spec class ids), materialized in list order.
    std::vector<std::pair<ClassId, long>> counts;
    // Optional fixed residual per job for a class; otherwise service is
    // sampled from the class law.
    std::vector<std::pair<ClassId, double>> residuals;
    // Optional explicit residual interarrival clock per entry class;
    // otherwise sampled from the source law.
    std::vector<std::pair<ClassId, double>> source_clocks;

    static InitialCondition empty() { return {}; }
    static InitialCondition single_class(ClassId cls, long count);
};

class Simulator;

struct StopRule {
    std::optional<double> horizon;          // absolute clock value
    std::optional<std::uint64_t> max_events;  // events executed by this run() call
    std::function<bool(const Simulator&)> predicate;  // checked after each event

    static StopRule at_time(double t);
    static StopRule events(std::uint64_t n);
    static StopRule until_agg_empty(ClassId agg);
    static StopRule until_station_empty(StationId station);
};

struct RunOptions {
    enum class Series { None, Events, Grid };
    Series series = Series::None;
    double grid_dt = 0;  // for Series::Grid
    bool log_events = false;
    std::uint64_t hard_event_cap = 1'000'000'000;  // guards runaway predicates
    std::vector<StationTransition>* transitions = nullptr;  // coupling recorder
};

enum class StopReason { Predicate, Horizon, MaxEvents, EventCap, NoEvents };

struct RunOutcome {
    StopReason reason = StopReason::Predicate;
    bool truncated = false;  // predicate requested but event cap hit first
    std::uint64_t events = 0;
    double end_time = 0;
};

// Deterministic discrete-event kernel with exact preemptive-resume
// accounting.  All scheduling is driven by a (time, sequence)-ordered event
// queue; identical (spec, init, seed, stop rule) replays identical paths.
class Simulator {
public:
    Simulator(NetworkSpec spec, RngStream root);

    void init(const InitialCondition& ic);

    RunOutcome run(const StopRule& stop, const RunOptions& opts, Trajectory* traj = nullptr);

    // --- observation surface (advance internal clocks lazily, hence non-const)
    double clock() const { return clock_; }
    long z_agg(ClassId agg) const;
    long z_total() const { return total_jobs_; }
    long z_station(StationId station) const;
    std::int64_t arrivals(ClassId agg) const;
    std::int64_t departures(ClassId agg) const;
    std::int64_t d4o() const { return d4o_; }
    double immediate_workload(ClassId agg);  // W_agg, stage-aggregated
    double total_workload();                 // script-W
    std::uint64_t events_executed() const { return events_total_; }
    std::uint64_t jobs_created() const { return next_job_id_; }

    // Running minima of Z(t) and script-W(t) since the last reset.
    void reset_cycle_trackers();
    long min_z() const { return min_z_; }
    double min_w() const { return min_w_; }

    const NetworkSpec& spec() const { return spec_; }

    // Section-2 state descriptor (requires the Figure 1 station layout).
    StateDescriptor descriptor();

    // --- test/audit surface
    struct Auditor {
        virtual ~Auditor() = default;
        virtual void after_event(Simulator& sim) = 0;
    };
    void set_auditor(Auditor* a) { auditor_ = a; }

    // Current (job, rate) service allocation at a station.
    std::vector<std::pair<JobRef, double>> allocations(StationId station) const;
    const Job& job(JobRef ref) const { return pool_[ref]; }
    // remaining service at the job's current class, evaluated at the clock
    double job_residual(JobRef ref);
    // accounting of the most recent completion, for invariant checks
    std::uint64_t completions() const { return completions_; }
    double last_completion_service() const { return last_completion_service_; }
    double last_completion_leftover() const { return last_completion_leftover_; }
    std::uint64_t last_completed_job() const { return last_completed_job_; }
    JobRef served_job(StationId station) const;  // single-served disciplines
    std::vector<JobRef> jobs_at_station(StationId station) const;
    // indexed access into a station's container, avoiding the vector copy
    std::size_t station_job_count(StationId station) const;
    JobRef station_job(StationId station, std::size_t idx) const;
    double exact_total_workload();
    double exact_immediate_workload(ClassId agg);
    double next_source_time(ClassId entry) const;

private:
    struct ClassRt {
        ClassId spec_id = 0;
        ClassId agg = 0;
        std::string label;
        ServiceLaw service;
        std::uint16_t station = 0;    // dense station index
        std::uint16_t succ = kNoSucc; // dense class index
        std::uint16_t agg_col = 0;    // column in agg tables
        bool counts_agg_arrival = false;    // entering this class enters its agg
        bool counts_agg_departure = false;  // leaving this class leaves its agg
        double mean = 0;
        double agg_tail = 0;   // downstream means within the same agg
        double mean_tail = 0;  // downstream means after this class (all aggs)
        RngStream stream;
    };
    static constexpr std::uint16_t kNoSucc = 0xFFFF;

    struct StationRt {
        StationId spec_id = 0;
        Discipline disc = Discipline::LifoPreemptive;
        std::vector<std::uint16_t> members;  // dense class indices
        std::vector<JobRef> stack;           // LIFO variants, top at back
        std::deque<JobRef> fifo;
        std::vector<JobRef> bag;             // PS / IS
        std::vector<std::deque<JobRef>> class_q;  // HLPPS, indexed like members
        JobRef locked = kNoJob;  // nonpreemptive LIFO: job holding the server
        JobRef serving = kNoJob;  // anchored job on single-served disciplines
        int njobs = 0;
        double last_advance = 0;
        double rate_sum = 0;
        std::uint32_t token = 0;   // completion-event generation
        JobRef sched_job = kNoJob;
    };

    struct SourceRt {
        std::uint16_t entry = 0;  // dense class index
        ArrivalLaw law;
        RngStream stream;
        double next_time = 0;
    };

    struct QueuedEvent {
        double time = 0;
        std::uint64_t seq = 0;
        std::uint8_t kind = 0;  // 0 external arrival, 1 completion
        std::uint32_t a = 0;    // source index / station index
        std::uint32_t b = 0;    // completion token
        bool operator>(const QueuedEvent& o) const {
            if (time != o.time) return time > o.time;
            return seq > o.seq;
        }
    };

    // --- construction helpers
    std::uint16_t dense_class(ClassId id) const;
    std::uint16_t dense_station(StationId id) const;

    // --- kernel
    void advance_station(StationRt& st, double t);
    void advance_all(double t);
    void update_station_rate(StationRt& st);
    void reschedule(std::uint16_t sidx);
    void enter_class(JobRef ref, std::uint16_t cls, double now, bool external);
    void handle_completion(std::uint16_t sidx);
    JobRef make_job(std::uint16_t cls, double now, double stamp, std::uint8_t flags,
                    const double* fixed_residual);
    void remove_from_station(StationRt& st, JobRef ref, std::uint16_t local_idx);
    JobRef current_served(const StationRt& st) const;
    double next_completion(StationRt& st, JobRef& who) const;
    static bool single_served(Discipline d) {
        return d == Discipline::LifoPreemptive || d == Discipline::LifoNonpreemptive ||
               d == Discipline::Fifo;
    }
    double received_now(const Job& j) const {
        return j.anchored() ? clock_ - j.aux : j.aux;
    }
    double residual_now(const Job& j) const { return j.visit_target - received_now(j); }
    double effective_residual(const Job& j) const;
    void update_serving(StationRt& st);  // pause/resume anchors after mutations
    bool lifo_before(JobRef a, JobRef b) const;
    bool fifo_before(JobRef a, JobRef b) const;
    void free_job(JobRef ref);
    void log_event(EventKind kind, std::uint16_t cls, std::uint64_t id, double t);
    void emit_series_row(double t);
    void note_station_transition(const StationRt& st, int delta, double t);
    std::uint16_t local_class_index(const StationRt& st, std::uint16_t cls) const;

    NetworkSpec spec_;
    std::vector<ClassRt> classes_;
    std::vector<StationRt> stations_;
    std::vector<SourceRt> sources_;
    std::vector<ClassId> agg_ids_;

    std::vector<Job> pool_;
    std::vector<JobRef> freelist_;

    std::vector<QueuedEvent> heap_;  // binary min-heap by (time, seq)
    std::uint64_t seq_ = 0;

    double clock_ = 0;
    std::uint64_t next_job_id_ = 0;
    std::uint64_t events_total_ = 0;

    std::vector<long> z_agg_;
    std::vector<std::int64_t> a_agg_, d_agg_;
    std::vector<double> w_imm_;  // immediate workload per agg (incremental)
    std::int64_t d4o_ = 0;
    long total_jobs_ = 0;
    double w_incr_ = 0;     // total workload (incremental)
    double busy_rate_ = 0;  // current total service rate over stations

    long min_z_ = 0;
    double min_w_ = 0;

    std::uint64_t completions_ = 0;
    double last_completion_service_ = 0;
    double last_completion_leftover_ = 0;
    std::uint64_t last_completed_job_ = 0;

    bool initialized_ = false;

    Auditor* auditor_ = nullptr;
    // run-scoped
    Trajectory* traj_ = nullptr;
    const RunOptions* opts_ = nullptr;
    double next_grid_ = 0;
};

struct CouplingReport {
    double horizon = 0;  // time span actually compared
    std::uint64_t transitions_a = 0, transitions_b = 0;
    long max_count_discrepancy = 0;
    double max_workload_discrepancy = 0;
    bool diverged = false;
    double first_divergence_time = 0;
    std::string note;
};

// Section-2 metric between two live states over the Figure 1 layout.
double state_distance(Simulator& a, Simulator& b);

// Runs `a` and `b` (b a stage expansion of a, or equal) from an empty state
// with the same root seed, and compares the station-level transition
// sequences on the overlapping time span.  Transitions are aligned within
// `time_tol` to absorb floating-point jitter from stage-summed service
// times; any real mismatch is reported with its first divergence time.
// A negative horizon means "events-capped only".
CouplingReport coupled_run(const NetworkSpec& a, const NetworkSpec& b, std::uint64_t seed,
                           std::uint64_t max_events, double horizon = -1,
                           double time_tol = 1e-9);

// CSV export: events as (time,kind,class,job_id); series as
// (time,Z...,W3,W6,Wtotal) with one Z column per agg class.
std::string event_log_csv(const Trajectory& t);
std::string series_csv(const Trajectory& t);

}  // namespace qnet
