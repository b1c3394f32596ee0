#include "qnet/engine.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdlib>
#include <map>
#include <sstream>

#include "qnet/ioutil.hpp"

namespace qnet {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kResidualGuard = 1e-12;  // done when residual <= guard * service
}  // namespace

InitialCondition InitialCondition::single_class(ClassId cls, long count) {
    InitialCondition ic;
    ic.counts.push_back({cls, count});
    return ic;
}

std::optional<std::size_t> Trajectory::agg_col(ClassId agg) const {
    for (std::size_t i = 0; i < agg_ids.size(); ++i)
        if (agg_ids[i] == agg) return i;
    return std::nullopt;
}

StopRule StopRule::at_time(double t) {
    StopRule r;
    r.horizon = t;
    return r;
}

StopRule StopRule::events(std::uint64_t n) {
    StopRule r;
    r.max_events = n;
    return r;
}

StopRule StopRule::until_agg_empty(ClassId agg) {
    StopRule r;
    r.predicate = [agg](const Simulator& s) { return s.z_agg(agg) == 0; };
    return r;
}

StopRule StopRule::until_station_empty(StationId station) {
    StopRule r;
    r.predicate = [station](const Simulator& s) { return s.z_station(station) == 0; };
    return r;
}

// ---------------------------------------------------------------------------
// Construction
// ---------------------------------------------------------------------------

Simulator::Simulator(NetworkSpec spec, RngStream root) : spec_(std::move(spec)) {
    spec_.validate();
    agg_ids_ = spec_.agg_classes();

    for (const auto& st : spec_.stations) {
        StationRt rt;
        rt.spec_id = st.id;
        rt.disc = st.discipline;
        stations_.push_back(std::move(rt));
    }

    const RngStream svc_root = root.derive("svc");
    for (const auto& c : spec_.classes) {
        ClassRt rt;
        rt.spec_id = c.id;
        rt.agg = c.agg;
        rt.label = c.label;
        rt.service = c.service;
        rt.station = dense_station(c.station);
        rt.mean = c.service.mean();
        rt.mean_tail = c.successor == kExit ? 0.0 : spec_.downstream_work(c.successor);
        rt.stream = svc_root.derive(c.label);
        for (std::size_t i = 0; i < agg_ids_.size(); ++i)
            if (agg_ids_[i] == c.agg) rt.agg_col = static_cast<std::uint16_t>(i);
        classes_.push_back(std::move(rt));
    }
    // successor links, agg tails, agg arrival/departure markers
    for (std::size_t i = 0; i < spec_.classes.size(); ++i) {
        const auto& c = spec_.classes[i];
        auto& rt = classes_[i];
        rt.succ = c.successor == kExit ? kNoSucc : dense_class(c.successor);
        double tail = 0;
        ClassId k = c.successor;
        while (k != kExit) {
            const auto& d = spec_.class_def(k);
            if (d.agg != c.agg) break;
            tail += d.service.mean();
            k = d.successor;
        }
        rt.agg_tail = tail;
        const ClassDef* pred = nullptr;
        for (const auto& p : spec_.classes)
            if (p.successor == c.id) pred = &p;
        rt.counts_agg_arrival = pred == nullptr || pred->agg != c.agg;
        rt.counts_agg_departure = c.successor == kExit || spec_.class_def(c.successor).agg != c.agg;
    }
    for (std::size_t si = 0; si < spec_.stations.size(); ++si) {
        auto& rt = stations_[si];
        for (ClassId k : spec_.stations[si].classes)
            rt.members.push_back(dense_class(k));
        rt.class_q.resize(rt.members.size());
    }

    const RngStream arr_root = root.derive("arr");
    for (std::size_t i = 0; i < spec_.sources.size(); ++i) {
        SourceRt src;
        src.entry = dense_class(spec_.sources[i].entry);
        src.law = spec_.sources[i].law;
        src.stream = arr_root.derive(static_cast<std::uint64_t>(i));
        sources_.push_back(std::move(src));
    }

    z_agg_.assign(agg_ids_.size(), 0);
    a_agg_.assign(agg_ids_.size(), 0);
    d_agg_.assign(agg_ids_.size(), 0);
    w_imm_.assign(agg_ids_.size(), 0.0);
}

std::uint16_t Simulator::dense_class(ClassId id) const {
    for (std::size_t i = 0; i < spec_.classes.size(); ++i)
        if (spec_.classes[i].id == id) return static_cast<std::uint16_t>(i);
    throw std::invalid_argument("unknown class id " + std::to_string(id));
}

std::uint16_t Simulator::dense_station(StationId id) const {
    for (std::size_t i = 0; i < spec_.stations.size(); ++i)
        if (spec_.stations[i].id == id) return static_cast<std::uint16_t>(i);
    throw std::invalid_argument("unknown station id " + std::to_string(id));
}

std::uint16_t Simulator::local_class_index(const StationRt& st, std::uint16_t cls) const {
    for (std::size_t i = 0; i < st.members.size(); ++i)
        if (st.members[i] == cls) return static_cast<std::uint16_t>(i);
    throw std::logic_error("class not at station");
}

// ---------------------------------------------------------------------------
// Initial condition
// ---------------------------------------------------------------------------

JobRef Simulator::make_job(std::uint16_t cls, double now, double stamp, std::uint8_t flags,
                           const double* fixed_residual) {
    JobRef ref;
    if (!freelist_.empty()) {
        ref = freelist_.back();
        freelist_.pop_back();
    } else {
        ref = static_cast<JobRef>(pool_.size());
        pool_.emplace_back();
    }
    Job& j = pool_[ref];
    j.stamp = stamp;
    j.entry_time = now;
    j.id = next_job_id_++;
    j.cls = cls;
    j.flags = static_cast<std::uint8_t>(flags | Job::kAlive);
    j.service = fixed_residual ? *fixed_residual
                               : sample_service(classes_[cls].service, classes_[cls].stream);
    j.visit_target = j.service;
    j.aux = 0;
    return ref;
}

void Simulator::free_job(JobRef ref) {
    pool_[ref].flags = 0;
    freelist_.push_back(ref);
}

void Simulator::init(const InitialCondition& ic) {
    if (initialized_) throw std::logic_error("Simulator::init called twice");

    std::vector<std::vector<JobRef>> station_inits(stations_.size());
    for (const auto& [cls_id, count] : ic.counts) {
        if (count < 0) throw std::invalid_argument("init: negative job count");
        if (!spec_.has_class(cls_id))
            throw std::invalid_argument("init: unknown class " + std::to_string(cls_id));
        const std::uint16_t c = dense_class(cls_id);
        const ClassRt& crt = classes_[c];
        const double* fixed = nullptr;
        double fixed_value = 0;
        for (const auto& [rc, rv] : ic.residuals)
            if (rc == cls_id) {
                fixed_value = rv;
                fixed = &fixed_value;
            }
        std::uint8_t flags = Job::kInitial;
        if (crt.agg == 4) flags |= Job::kInitialAtAgg4;
        for (long i = 0; i < count; ++i) {
            const JobRef ref = make_job(c, 0.0, -kInf, flags, fixed);
            station_inits[crt.station].push_back(ref);
            z_agg_[crt.agg_col]++;
            total_jobs_++;
            const Job& j = pool_[ref];
            w_incr_ += j.service + crt.mean_tail;
            w_imm_[crt.agg_col] += j.service + crt.agg_tail;
        }
    }
    for (const auto& [rc, rv] : ic.residuals)
        if (!spec_.has_class(rc))
            throw std::invalid_argument("init: residual for unknown class");

    for (std::size_t si = 0; si < stations_.size(); ++si) {
        StationRt& st = stations_[si];
        auto& jobs = station_inits[si];
        st.njobs = static_cast<int>(jobs.size());
        switch (st.disc) {
            case Discipline::LifoPreemptive:
            case Discipline::LifoNonpreemptive:
                // reversed: the sentinel tier is served FIFO by creation index
                for (auto it = jobs.rbegin(); it != jobs.rend(); ++it) st.stack.push_back(*it);
                break;
            case Discipline::Fifo:
                for (JobRef r : jobs) st.fifo.push_back(r);
                break;
            case Discipline::Ps:
            case Discipline::Is:
                for (JobRef r : jobs) st.bag.push_back(r);
                break;
            case Discipline::Hlpps:
                for (JobRef r : jobs)
                    st.class_q[local_class_index(st, pool_[r].cls)].push_back(r);
                break;
        }
        update_station_rate(st);
        reschedule(static_cast<std::uint16_t>(si));
    }

    for (std::size_t i = 0; i < sources_.size(); ++i) {
        SourceRt& src = sources_[i];
        double u = -1;
        for (const auto& [cls_id, val] : ic.source_clocks)
            if (spec_.classes[src.entry].id == cls_id) u = val;
        src.next_time = u >= 0 ? u : sample_arrival(src.law, src.stream);
        heap_.push_back({src.next_time, ++seq_, 0, static_cast<std::uint32_t>(i), 0});
        std::push_heap(heap_.begin(), heap_.end(), std::greater<>{});
    }
    for (const auto& [cls_id, val] : ic.source_clocks) {
        bool known = false;
        for (const auto& src : sources_)
            if (spec_.classes[src.entry].id == cls_id) known = true;
        if (!known) throw std::invalid_argument("init: source clock for non-source class");
        if (val < 0) throw std::invalid_argument("init: negative source clock");
    }

    min_z_ = total_jobs_;
    min_w_ = w_incr_;
    initialized_ = true;
}

// ---------------------------------------------------------------------------
// Service-allocation mechanics
// ---------------------------------------------------------------------------

double Simulator::effective_residual(const Job& j) const {
    const double rem = residual_now(j);
    return rem <= kResidualGuard * j.service ? 0.0 : rem;
}

// Materializes anchor changes when the singly-served job at a station
// changes: the outgoing job's received work is frozen, the incoming job's
// anchor is re-derived from its frozen total.  Same-station stage moves of
// the serving job keep the anchor untouched.
void Simulator::update_serving(StationRt& st) {
    const JobRef now_served = current_served(st);
    if (st.serving == now_served) return;
    if (st.serving != kNoJob) {
        Job& old_job = pool_[st.serving];
        if (old_job.alive() && old_job.anchored()) {
            const double rec =
                std::clamp(clock_ - old_job.aux, 0.0, old_job.visit_target);
            old_job.aux = rec;
            old_job.flags = static_cast<std::uint8_t>(old_job.flags & ~Job::kAnchored);
        }
    }
    if (now_served != kNoJob) {
        Job& new_job = pool_[now_served];
        new_job.aux = clock_ - new_job.aux;  // anchor = now - received
        new_job.flags = static_cast<std::uint8_t>(new_job.flags | Job::kAnchored);
    }
    st.serving = now_served;
}

// a precedes b in the LIFO service order (b is served first)?  Later stamps
// win; on a finite-stamp tie the later creation wins; the sentinel tier of
// initial jobs is served FIFO by creation index.
bool Simulator::lifo_before(JobRef a, JobRef b) const {
    const Job& x = pool_[a];
    const Job& y = pool_[b];
    if (x.stamp != y.stamp) return x.stamp < y.stamp;
    if (std::isinf(x.stamp)) return x.id > y.id;
    return x.id < y.id;
}

// a precedes b in the FIFO service order (a is served first)?
bool Simulator::fifo_before(JobRef a, JobRef b) const {
    const Job& x = pool_[a];
    const Job& y = pool_[b];
    if (x.stamp != y.stamp) return x.stamp < y.stamp;
    return x.id < y.id;
}

void Simulator::update_station_rate(StationRt& st) {
    const double rate =
        st.disc == Discipline::Is ? static_cast<double>(st.njobs) : (st.njobs > 0 ? 1.0 : 0.0);
    busy_rate_ += rate - st.rate_sum;
    st.rate_sum = rate;
}

void Simulator::advance_station(StationRt& st, double t) {
    const double dt = t - st.last_advance;
    st.last_advance = t;
    if (dt <= 0 || st.njobs == 0) return;
    auto drain = [&](JobRef ref, double amount) {
        Job& j = pool_[ref];
        j.aux += amount;  // received work; rate-1 servers never come here
        w_imm_[classes_[j.cls].agg_col] -= amount;
    };
    switch (st.disc) {
        case Discipline::LifoPreemptive:
        case Discipline::LifoNonpreemptive:
        case Discipline::Fifo:
            // anchored accounting: the job's progress is implied by the
            // clock; only the workload tracker drains
            if (st.serving != kNoJob)
                w_imm_[classes_[pool_[st.serving].cls].agg_col] -= dt;
            break;
        case Discipline::Ps: {
            const double share = dt / st.njobs;
            for (JobRef r : st.bag) drain(r, share);
            break;
        }
        case Discipline::Is:
            for (JobRef r : st.bag) drain(r, dt);
            break;
        case Discipline::Hlpps: {
            for (auto& q : st.class_q)
                if (!q.empty())
                    drain(q.front(), dt * static_cast<double>(q.size()) / st.njobs);
            break;
        }
    }
}

void Simulator::advance_all(double t) {
    for (auto& st : stations_) advance_station(st, t);
}

JobRef Simulator::current_served(const StationRt& st) const {
    switch (st.disc) {
        case Discipline::LifoPreemptive:
            return st.stack.empty() ? kNoJob : st.stack.back();
        case Discipline::LifoNonpreemptive:
            return st.locked;
        case Discipline::Fifo:
            return st.fifo.empty() ? kNoJob : st.fifo.front();
        default:
            return kNoJob;  // multi-served disciplines
    }
}

double Simulator::next_completion(StationRt& st, JobRef& who) const {
    const double now = st.last_advance;
    switch (st.disc) {
        case Discipline::LifoPreemptive:
        case Discipline::LifoNonpreemptive:
        case Discipline::Fifo: {
            who = st.serving;
            const Job& j = pool_[who];
            if (effective_residual(j) <= 0) return now;
            // one rounding from the visit anchor, however many stages remain
            return std::max(now, j.aux + j.visit_target);
        }
        case Discipline::Ps: {
            double best = kInf;
            who = kNoJob;
            for (JobRef r : st.bag) {
                const double v = effective_residual(pool_[r]);
                if (v < best) {
                    best = v;
                    who = r;
                }
            }
            return now + best * st.njobs;
        }
        case Discipline::Is: {
            double best = kInf;
            who = kNoJob;
            for (JobRef r : st.bag) {
                const double v = effective_residual(pool_[r]);
                if (v < best) {
                    best = v;
                    who = r;
                }
            }
            return now + best;
        }
        case Discipline::Hlpps: {
            double best = kInf;
            who = kNoJob;
            for (const auto& q : st.class_q) {
                if (q.empty()) continue;
                const double v = effective_residual(pool_[q.front()]) *
                                 (static_cast<double>(st.njobs) / static_cast<double>(q.size()));
                if (v < best) {
                    best = v;
                    who = q.front();
                }
            }
            return now + best;
        }
    }
    who = kNoJob;
    return kInf;
}

void Simulator::reschedule(std::uint16_t sidx) {
    StationRt& st = stations_[sidx];
    st.token++;
    st.sched_job = kNoJob;
    if (st.njobs == 0) {
        if (single_served(st.disc)) update_serving(st);
        return;
    }
    if (st.disc == Discipline::LifoNonpreemptive && st.locked == kNoJob) {
        st.locked = st.stack.back();
        st.stack.pop_back();
    }
    if (single_served(st.disc)) update_serving(st);
    JobRef who = kNoJob;
    const double tc = next_completion(st, who);
    st.sched_job = who;
    heap_.push_back({tc, ++seq_, 1, sidx, st.token});
    std::push_heap(heap_.begin(), heap_.end(), std::greater<>{});
}

// ---------------------------------------------------------------------------
// Event execution
// ---------------------------------------------------------------------------

void Simulator::log_event(EventKind kind, std::uint16_t cls, std::uint64_t id, double t) {
    if (traj_ && opts_ && opts_->log_events) traj_->events.push_back({t, kind, cls, id});
}

void Simulator::note_station_transition(const StationRt& st, int delta, double t) {
    if (!opts_ || !opts_->transitions) return;
    opts_->transitions->push_back({t, st.spec_id, delta, exact_total_workload()});
}

void Simulator::enter_class(JobRef ref, std::uint16_t cls, double now, bool external) {
    Job& j = pool_[ref];
    const std::uint16_t old_cls = j.cls;
    const ClassRt& crt = classes_[cls];
    StationRt& dest = stations_[crt.station];
    // the serving job continuing at a new class of the same station keeps
    // its visit anchor; everything else starts a fresh visit
    const bool continue_visit = !external && classes_[old_cls].station == crt.station &&
                                single_served(dest.disc) && dest.serving == ref;
    j.cls = cls;
    j.service = sample_service(crt.service, classes_[cls].stream);
    if (continue_visit) {
        j.visit_target += j.service;
    } else {
        j.visit_target = j.service;
        j.aux = 0;
        j.flags = static_cast<std::uint8_t>(j.flags & ~Job::kAnchored);
    }

    if (crt.counts_agg_arrival) {
        a_agg_[crt.agg_col]++;
        z_agg_[crt.agg_col]++;
    }
    if (external) {
        total_jobs_++;
        w_incr_ += j.service + crt.mean_tail;
    } else {
        w_incr_ += j.service - crt.mean;
    }
    w_imm_[crt.agg_col] += j.service + crt.agg_tail;

    StationRt& st = dest;
    advance_station(st, now);
    switch (st.disc) {
        case Discipline::LifoPreemptive:
        case Discipline::LifoNonpreemptive: {
            // keep the stack sorted by the service order (back = served).
            // Arrivals carry the newest stamp, so this loop only moves a job
            // on an exact stamp tie (a stage move sharing an arrival's
            // timestamp), where creation order decides.
            st.stack.push_back(ref);
            std::size_t i = st.stack.size() - 1;
            while (i > 0 && lifo_before(st.stack[i], st.stack[i - 1])) {
                std::swap(st.stack[i], st.stack[i - 1]);
                --i;
            }
            break;
        }
        case Discipline::Fifo: {
            st.fifo.push_back(ref);
            std::size_t i = st.fifo.size() - 1;
            while (i > 0 && fifo_before(st.fifo[i], st.fifo[i - 1])) {
                std::swap(st.fifo[i], st.fifo[i - 1]);
                --i;
            }
            break;
        }
        case Discipline::Ps:
        case Discipline::Is:
            st.bag.push_back(ref);
            break;
        case Discipline::Hlpps:
            st.class_q[local_class_index(st, cls)].push_back(ref);
            break;
    }
    st.njobs++;
    update_station_rate(st);

    const bool station_transition =
        external || classes_[old_cls].station != crt.station;
    if (station_transition) note_station_transition(st, +1, now);
    log_event(EventKind::Arrival, cls, j.id, now);
}

void Simulator::remove_from_station(StationRt& st, JobRef ref, std::uint16_t local_idx) {
    switch (st.disc) {
        case Discipline::LifoPreemptive:
            assert(!st.stack.empty() && st.stack.back() == ref);
            st.stack.pop_back();
            break;
        case Discipline::LifoNonpreemptive:
            assert(st.locked == ref);
            st.locked = kNoJob;
            break;
        case Discipline::Fifo:
            assert(!st.fifo.empty() && st.fifo.front() == ref);
            st.fifo.pop_front();
            break;
        case Discipline::Ps:
        case Discipline::Is: {
            auto it = std::find(st.bag.begin(), st.bag.end(), ref);
            assert(it != st.bag.end());
            *it = st.bag.back();
            st.bag.pop_back();
            break;
        }
        case Discipline::Hlpps: {
            auto& q = st.class_q[local_idx];
            assert(!q.empty() && q.front() == ref);
            q.pop_front();
            break;
        }
    }
    st.njobs--;
}

void Simulator::handle_completion(std::uint16_t sidx) {
    StationRt& st = stations_[sidx];
    advance_station(st, clock_);
    const JobRef ref = st.sched_job;
    Job& j = pool_[ref];
    const ClassRt& crt = classes_[j.cls];

    // Exact service accounting: the residual at the scheduled instant is
    // ~0; fold the leftover into the workload trackers and close the class.
    // An anchored job keeps its anchor (the ulp-size leftover stays inside
    // the anchored representation and cannot accumulate across stages); a
    // drained job's received work is pinned to the target.
    const double leftover = residual_now(j);
    if (!j.anchored()) j.aux = j.visit_target;
    w_imm_[crt.agg_col] -= leftover + crt.agg_tail;
    w_incr_ -= leftover;
    completions_++;
    last_completion_service_ = j.service;
    last_completion_leftover_ = leftover;
    last_completed_job_ = j.id;

    remove_from_station(st, ref, st.disc == Discipline::Hlpps
                                     ? local_class_index(st, j.cls)
                                     : std::uint16_t{0});
    if (crt.counts_agg_departure) {
        d_agg_[crt.agg_col]++;
        z_agg_[crt.agg_col]--;
        if ((j.flags & Job::kInitialAtAgg4) && crt.agg == 4) d4o_++;
    }
    log_event(EventKind::Departure, j.cls, j.id, clock_);

    const std::uint16_t succ = crt.succ;
    const bool leaves_station = succ == kNoSucc || classes_[succ].station != crt.station;
    update_station_rate(st);
    if (leaves_station) note_station_transition(st, -1, clock_);

    if (succ == kNoSucc) {
        total_jobs_--;
        w_incr_ -= crt.mean_tail;  // zero by construction for exit classes
        if (st.serving == ref) st.serving = kNoJob;
        free_job(ref);
        reschedule(sidx);
    } else {
        j.stamp = clock_;
        if (leaves_station && st.serving == ref) st.serving = kNoJob;
        enter_class(ref, succ, clock_, false);
        reschedule(sidx);
        const std::uint16_t s2 = classes_[succ].station;
        if (s2 != sidx) reschedule(s2);
    }
}

// ---------------------------------------------------------------------------
// Run loop
// ---------------------------------------------------------------------------

void Simulator::emit_series_row(double t) {
    advance_all(t);
    traj_->series_time.push_back(t);
    for (long z : z_agg_) traj_->series_z.push_back(z);
    auto col_of = [&](ClassId agg) -> double {
        for (std::size_t i = 0; i < agg_ids_.size(); ++i)
            if (agg_ids_[i] == agg) return w_imm_[i];
        return 0.0;
    };
    traj_->series_w3.push_back(col_of(3));
    traj_->series_w6.push_back(col_of(6));
    traj_->series_wtotal.push_back(w_incr_ - busy_rate_ * std::max(0.0, t - clock_));
}

RunOutcome Simulator::run(const StopRule& stop, const RunOptions& opts, Trajectory* traj) {
    if (!initialized_) throw std::logic_error("Simulator::run before init");
    traj_ = traj;
    opts_ = &opts;
    if (traj) {
        if (traj->agg_ids.empty()) {
            traj->M = spec_.M;
            traj->delta = spec_.delta;
            traj->agg_ids = agg_ids_;
            for (ClassId a : agg_ids_) traj->agg_labels.push_back(std::to_string(a));
            for (const auto& c : classes_) {
                traj->class_labels.push_back(c.label);
                traj->class_agg.push_back(c.agg);
            }
        }
        if (opts.series != RunOptions::Series::None && traj->series_time.empty())
            emit_series_row(clock_);
    }
    const bool grid_mode = traj && opts.series == RunOptions::Series::Grid && opts.grid_dt > 0;
    if (grid_mode) next_grid_ = (std::floor(clock_ / opts.grid_dt) + 1.0) * opts.grid_dt;
    const bool event_series = traj && opts.series == RunOptions::Series::Events;

    auto finish = [&](RunOutcome out) {
        if (traj) {
            traj->truncated = traj->truncated || out.truncated;
            switch (out.reason) {
                case StopReason::Predicate: traj->stop_reason = "predicate"; break;
                case StopReason::Horizon: traj->stop_reason = "horizon"; break;
                case StopReason::MaxEvents: traj->stop_reason = "max-events"; break;
                case StopReason::EventCap: traj->stop_reason = "event-cap"; break;
                case StopReason::NoEvents: traj->stop_reason = "no-events"; break;
            }
        }
        traj_ = nullptr;
        opts_ = nullptr;
        return out;
    };

    if (stop.predicate && stop.predicate(*this))
        return finish({StopReason::Predicate, false, 0, clock_});

    std::uint64_t executed = 0;
    const std::uint64_t limit =
        std::min(stop.max_events.value_or(std::numeric_limits<std::uint64_t>::max()),
                 opts.hard_event_cap);

    // preempt/resume bookkeeping for single-served stations
    std::uint16_t touched[2];
    JobRef served_before[2];
    int ntouched = 0;
    auto watch = [&](std::uint16_t sidx) {
        if (!opts.log_events) return;
        for (int i = 0; i < ntouched; ++i)
            if (touched[i] == sidx) return;
        touched[ntouched] = sidx;
        served_before[ntouched] = current_served(stations_[sidx]);
        ++ntouched;
    };

    for (;;) {
        if (heap_.empty()) return finish({StopReason::NoEvents, stop.predicate != nullptr,
                                          executed, clock_});
        const QueuedEvent ev = heap_.front();
        if (ev.kind == 1 && ev.b != stations_[ev.a].token) {
            std::pop_heap(heap_.begin(), heap_.end(), std::greater<>{});
            heap_.pop_back();
            continue;
        }
        if (stop.horizon && ev.time > *stop.horizon) {
            const double h = *stop.horizon;
            if (grid_mode)
                while (next_grid_ <= h) {
                    emit_series_row(next_grid_);
                    next_grid_ += opts.grid_dt;
                }
            advance_all(h);
            const double w_at = w_incr_ - busy_rate_ * (h - clock_);
            min_w_ = std::min(min_w_, w_at);
            w_incr_ = w_at;
            clock_ = h;
            return finish({StopReason::Horizon, false, executed, clock_});
        }
        std::pop_heap(heap_.begin(), heap_.end(), std::greater<>{});
        heap_.pop_back();

        const double t = ev.time;
        if (grid_mode)
            while (next_grid_ < t) {
                emit_series_row(next_grid_);
                next_grid_ += opts.grid_dt;
            }
        const double w_at = w_incr_ - busy_rate_ * (t - clock_);
        min_w_ = std::min(min_w_, w_at);
        w_incr_ = w_at;
        clock_ = t;

        ntouched = 0;
        if (ev.kind == 0) {
            SourceRt& src = sources_[ev.a];
            watch(classes_[src.entry].station);
            const JobRef ref = make_job(src.entry, t, t, 0, nullptr);
            enter_class(ref, src.entry, t, true);
            reschedule(classes_[src.entry].station);
            src.next_time = t + sample_arrival(src.law, src.stream);
            heap_.push_back({src.next_time, ++seq_, 0, ev.a, 0});
            std::push_heap(heap_.begin(), heap_.end(), std::greater<>{});
        } else {
            const std::uint16_t sidx = static_cast<std::uint16_t>(ev.a);
            watch(sidx);
            const JobRef ref = stations_[sidx].sched_job;
            const std::uint16_t succ = classes_[pool_[ref].cls].succ;
            if (succ != kNoSucc) watch(classes_[succ].station);
            handle_completion(sidx);
        }
        if (opts.log_events) {
            for (int i = 0; i < ntouched; ++i) {
                const StationRt& st = stations_[touched[i]];
                const JobRef before = served_before[i];
                const JobRef after = current_served(st);
                if (before == after) continue;
                const auto partially_served = [&](JobRef r) {
                    const Job& j = pool_[r];
                    return received_now(j) > j.visit_target - j.service;
                };
                if (before != kNoJob && pool_[before].alive() && partially_served(before) &&
                    classes_[pool_[before].cls].station == touched[i])
                    log_event(EventKind::Preempt, pool_[before].cls, pool_[before].id, t);
                if (after != kNoJob && partially_served(after))
                    log_event(EventKind::Resume, pool_[after].cls, pool_[after].id, t);
            }
        }

        ++executed;
        ++events_total_;
        if (total_jobs_ < min_z_) min_z_ = total_jobs_;
        if (event_series) emit_series_row(clock_);
        if (auditor_) auditor_->after_event(*this);
        if (stop.predicate && stop.predicate(*this))
            return finish({StopReason::Predicate, false, executed, clock_});
        if (executed >= limit) {
            const bool explicit_stop = stop.max_events && executed >= *stop.max_events;
            return finish({explicit_stop ? StopReason::MaxEvents : StopReason::EventCap,
                           stop.predicate != nullptr && !explicit_stop, executed, clock_});
        }
    }
}

// ---------------------------------------------------------------------------
// Observation surface
// ---------------------------------------------------------------------------

long Simulator::z_agg(ClassId agg) const {
    for (std::size_t i = 0; i < agg_ids_.size(); ++i)
        if (agg_ids_[i] == agg) return z_agg_[i];
    throw std::invalid_argument("z_agg: unknown agg class");
}

long Simulator::z_station(StationId station) const {
    for (std::size_t i = 0; i < stations_.size(); ++i)
        if (stations_[i].spec_id == station) return stations_[i].njobs;
    throw std::invalid_argument("z_station: unknown station");
}

std::int64_t Simulator::arrivals(ClassId agg) const {
    for (std::size_t i = 0; i < agg_ids_.size(); ++i)
        if (agg_ids_[i] == agg) return a_agg_[i];
    throw std::invalid_argument("arrivals: unknown agg class");
}

std::int64_t Simulator::departures(ClassId agg) const {
    for (std::size_t i = 0; i < agg_ids_.size(); ++i)
        if (agg_ids_[i] == agg) return d_agg_[i];
    throw std::invalid_argument("departures: unknown agg class");
}

double Simulator::immediate_workload(ClassId agg) {
    advance_all(clock_);
    for (std::size_t i = 0; i < agg_ids_.size(); ++i)
        if (agg_ids_[i] == agg) return w_imm_[i];
    throw std::invalid_argument("immediate_workload: unknown agg class");
}

double Simulator::total_workload() {
    advance_all(clock_);
    return w_incr_;
}

double Simulator::exact_total_workload() {
    advance_all(clock_);
    double w = 0;
    for (const Job& j : pool_)
        if (j.alive()) w += std::max(residual_now(j), 0.0) + classes_[j.cls].mean_tail;
    return w;
}

double Simulator::exact_immediate_workload(ClassId agg) {
    advance_all(clock_);
    double w = 0;
    for (const Job& j : pool_)
        if (j.alive() && classes_[j.cls].agg == agg)
            w += std::max(residual_now(j), 0.0) + classes_[j.cls].agg_tail;
    return w;
}

double Simulator::job_residual(JobRef ref) {
    advance_all(clock_);
    return residual_now(pool_[ref]);
}

double Simulator::next_source_time(ClassId entry) const {
    for (const auto& src : sources_)
        if (spec_.classes[src.entry].id == entry) return src.next_time;
    throw std::invalid_argument("next_source_time: no source at class");
}

void Simulator::reset_cycle_trackers() {
    advance_all(clock_);
    min_z_ = total_jobs_;
    min_w_ = w_incr_;
}

StateDescriptor Simulator::descriptor() {
    if (!spec_.fig1_topology())
        throw std::invalid_argument("descriptor: requires the Figure 1 station layout");
    advance_all(clock_);
    StateDescriptor d;
    for (const Job& j : pool_) {
        if (!j.alive()) continue;
        const ClassId agg = classes_[j.cls].agg;
        if (agg == 2 || agg == 5) continue;
        d.jobs.push_back({static_cast<int>(agg),
                          std::isinf(j.stamp) ? kInf : clock_ - j.stamp,
                          std::max(residual_now(j), 0.0)});
    }
    d.z2 = z_agg(2);
    d.z5 = z_agg(5);
    d.u1 = next_source_time(1) - clock_;
    d.u4 = next_source_time(4) - clock_;
    d.canonicalize();
    return d;
}

std::vector<std::pair<JobRef, double>> Simulator::allocations(StationId station) const {
    const StationRt& st = stations_[dense_station(station)];
    std::vector<std::pair<JobRef, double>> out;
    if (st.njobs == 0) return out;
    switch (st.disc) {
        case Discipline::LifoPreemptive:
            out.push_back({st.stack.back(), 1.0});
            break;
        case Discipline::LifoNonpreemptive:
            if (st.locked != kNoJob) out.push_back({st.locked, 1.0});
            break;
        case Discipline::Fifo:
            out.push_back({st.fifo.front(), 1.0});
            break;
        case Discipline::Ps:
            for (JobRef r : st.bag) out.push_back({r, 1.0 / st.njobs});
            break;
        case Discipline::Is:
            for (JobRef r : st.bag) out.push_back({r, 1.0});
            break;
        case Discipline::Hlpps:
            for (const auto& q : st.class_q)
                if (!q.empty())
                    out.push_back({q.front(),
                                   static_cast<double>(q.size()) / static_cast<double>(st.njobs)});
            break;
    }
    return out;
}

JobRef Simulator::served_job(StationId station) const {
    return current_served(stations_[dense_station(station)]);
}

std::vector<JobRef> Simulator::jobs_at_station(StationId station) const {
    const StationRt& st = stations_[dense_station(station)];
    std::vector<JobRef> out;
    out.insert(out.end(), st.stack.begin(), st.stack.end());
    if (st.locked != kNoJob) out.push_back(st.locked);
    out.insert(out.end(), st.fifo.begin(), st.fifo.end());
    out.insert(out.end(), st.bag.begin(), st.bag.end());
    for (const auto& q : st.class_q) out.insert(out.end(), q.begin(), q.end());
    return out;
}

std::size_t Simulator::station_job_count(StationId station) const {
    return static_cast<std::size_t>(stations_[dense_station(station)].njobs);
}

JobRef Simulator::station_job(StationId station, std::size_t idx) const {
    const StationRt& st = stations_[dense_station(station)];
    if (!st.stack.empty() || st.locked != kNoJob) {
        if (st.locked != kNoJob) {
            if (idx == 0) return st.locked;
            --idx;
        }
        return st.stack[idx];
    }
    if (!st.fifo.empty()) return st.fifo[idx];
    if (!st.bag.empty()) return st.bag[idx];
    for (const auto& q : st.class_q) {
        if (idx < q.size()) return q[idx];
        idx -= q.size();
    }
    return kNoJob;
}

double state_distance(Simulator& a, Simulator& b) {
    return state_distance(a.descriptor(), b.descriptor());
}

// ---------------------------------------------------------------------------
// Stage-expansion coupling
// ---------------------------------------------------------------------------

CouplingReport coupled_run(const NetworkSpec& a, const NetworkSpec& b, std::uint64_t seed,
                           std::uint64_t max_events, double horizon, double time_tol) {
    auto run_one = [&](const NetworkSpec& spec, std::vector<StationTransition>& out) {
        Simulator sim(spec, RngStream(seed));
        sim.init(InitialCondition::empty());
        StopRule stop;
        stop.max_events = max_events;
        if (horizon >= 0) stop.horizon = horizon;
        RunOptions opts;
        opts.transitions = &out;
        sim.run(stop, opts);
        return sim.clock();
    };
    std::vector<StationTransition> ta, tb;
    const double end_a = run_one(a, ta);
    const double end_b = run_one(b, tb);

    CouplingReport rep;
    rep.horizon = std::min(end_a, end_b) - time_tol;
    rep.transitions_a = ta.size();
    rep.transitions_b = tb.size();

    std::map<StationId, long> za, zb;
    double max_w = 0;
    std::size_t i = 0, j = 0;
    while (true) {
        const bool more_a = i < ta.size() && ta[i].time <= rep.horizon;
        const bool more_b = j < tb.size() && tb[j].time <= rep.horizon;
        if (!more_a && !more_b) break;
        double t0 = kInf;
        if (more_a) t0 = std::min(t0, ta[i].time);
        if (more_b) t0 = std::min(t0, tb[j].time);

        // consume the window [t0, t0 + tol] on both sides
        double wa = -1, wb = -1;
        while (i < ta.size() && ta[i].time <= t0 + time_tol && ta[i].time <= rep.horizon) {
            za[ta[i].station] += ta[i].delta;
            wa = ta[i].workload;
            ++i;
        }
        while (j < tb.size() && tb[j].time <= t0 + time_tol && tb[j].time <= rep.horizon) {
            zb[tb[j].station] += tb[j].delta;
            wb = tb[j].workload;
            ++j;
        }
        long disc = 0;
        for (const auto& [st, z] : za) disc = std::max(disc, std::abs(z - zb[st]));
        for (const auto& [st, z] : zb) disc = std::max(disc, std::abs(z - za[st]));
        if (disc > 0 && !rep.diverged) {
            rep.diverged = true;
            rep.first_divergence_time = t0;
            std::ostringstream msg;
            msg << "station counts diverge at t=" << t0;
            rep.note = msg.str();
        }
        rep.max_count_discrepancy = std::max(rep.max_count_discrepancy, disc);
        if (wa >= 0 && wb >= 0)
            max_w = std::max(max_w, std::abs(wa - wb));
        if (rep.diverged) break;
    }
    rep.max_workload_discrepancy = max_w;
    return rep;
}

// ---------------------------------------------------------------------------
// CSV export
// ---------------------------------------------------------------------------

namespace {
const char* kind_name(EventKind k) {
    switch (k) {
        case EventKind::Arrival: return "arrival";
        case EventKind::Departure: return "departure";
        case EventKind::Preempt: return "preempt";
        case EventKind::Resume: return "resume";
    }
    return "?";
}
}  // namespace

std::string event_log_csv(const Trajectory& t) {
    std::string out = "time,kind,class,job_id\n";
    for (const auto& e : t.events) {
        out += format_double(e.time);
        out += ',';
        out += kind_name(e.kind);
        out += ',';
        out += t.class_labels[e.cls];
        out += ',';
        out += std::to_string(e.job);
        out += '\n';
    }
    return out;
}

std::string series_csv(const Trajectory& t) {
    std::string out = "time";
    for (const auto& lbl : t.agg_labels) out += ",Z" + lbl;
    out += ",W3,W6,Wtotal\n";
    const std::size_t k = t.agg_ids.size();
    for (std::size_t r = 0; r < t.rows(); ++r) {
        out += format_double(t.series_time[r]);
        for (std::size_t c = 0; c < k; ++c) {
            out += ',';
            out += std::to_string(t.series_z[r * k + c]);
        }
        out += ',';
        out += format_double(t.series_w3[r]);
        out += ',';
        out += format_double(t.series_w6[r]);
        out += ',';
        out += format_double(t.series_wtotal[r]);
        out += '\n';
    }
    return out;
}

}  // namespace qnet
