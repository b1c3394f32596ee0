#include "qnet/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <sstream>

namespace qnet {

std::string to_string(Discipline d) {
    switch (d) {
        case Discipline::LifoPreemptive: return "lifo";
        case Discipline::LifoNonpreemptive: return "lifo-np";
        case Discipline::Fifo: return "fifo";
        case Discipline::Ps: return "ps";
        case Discipline::Hlpps: return "hlpps";
        case Discipline::Is: return "is";
    }
    return "?";
}

Discipline discipline_from_string(const std::string& s) {
    if (s == "lifo") return Discipline::LifoPreemptive;
    if (s == "lifo-np") return Discipline::LifoNonpreemptive;
    if (s == "fifo") return Discipline::Fifo;
    if (s == "ps") return Discipline::Ps;
    if (s == "hlpps") return Discipline::Hlpps;
    if (s == "is") return Discipline::Is;
    throw std::invalid_argument("unknown discipline: " + s);
}

const ClassDef& NetworkSpec::class_def(ClassId id) const {
    for (const auto& c : classes)
        if (c.id == id) return c;
    throw std::invalid_argument("unknown class id " + std::to_string(id));
}

const StationDef& NetworkSpec::station_def(StationId id) const {
    for (const auto& s : stations)
        if (s.id == id) return s;
    throw std::invalid_argument("unknown station id " + std::to_string(id));
}

bool NetworkSpec::has_class(ClassId id) const {
    for (const auto& c : classes)
        if (c.id == id) return true;
    return false;
}

std::vector<ClassId> NetworkSpec::route_from(ClassId entry) const {
    std::vector<ClassId> route;
    ClassId k = entry;
    while (k != kExit) {
        route.push_back(k);
        if (route.size() > classes.size())
            throw std::invalid_argument("route from class " + std::to_string(entry) + " cycles");
        k = class_def(k).successor;
    }
    return route;
}

double NetworkSpec::downstream_work(ClassId from) const {
    double w = 0;
    for (ClassId k : route_from(from)) w += class_def(k).service.mean();
    return w;
}

std::vector<ClassId> NetworkSpec::agg_classes() const {
    std::vector<ClassId> out;
    for (const auto& c : classes)
        if (std::find(out.begin(), out.end(), c.agg) == out.end()) out.push_back(c.agg);
    return out;
}

bool NetworkSpec::fig1_topology() const {
    auto aggs = agg_classes();
    std::set<ClassId> want{1, 2, 3, 4, 5, 6};
    if (std::set<ClassId>(aggs.begin(), aggs.end()) != want) return false;
    if (stations.size() != 4) return false;
    // station of agg 1 must also hold agg 6, station of agg 3 must hold agg 4
    auto agg_station = [&](ClassId agg) -> std::set<StationId> {
        std::set<StationId> st;
        for (const auto& c : classes)
            if (c.agg == agg) st.insert(c.station);
        return st;
    };
    return agg_station(1) == agg_station(6) && agg_station(3) == agg_station(4) &&
           agg_station(2).size() == 1 && agg_station(5).size() == 1;
}

void NetworkSpec::validate() const {
    if (classes.empty()) throw std::invalid_argument("spec has no classes");
    std::set<ClassId> ids;
    for (const auto& c : classes) {
        if (!ids.insert(c.id).second)
            throw std::invalid_argument("duplicate class id " + std::to_string(c.id));
        c.service.validate();
        if (!(c.service.mean() > 0))
            throw std::invalid_argument("class " + c.label + " has nonpositive mean service");
    }
    // every class belongs to exactly one station, station class sets nonempty
    std::map<ClassId, int> owner_count;
    std::set<StationId> sids;
    for (const auto& st : stations) {
        if (!sids.insert(st.id).second)
            throw std::invalid_argument("duplicate station id");
        if (st.classes.empty()) throw std::invalid_argument("station with empty class set");
        for (ClassId k : st.classes) {
            if (!ids.count(k))
                throw std::invalid_argument("station lists unknown class " + std::to_string(k));
            owner_count[k]++;
            if (class_def(k).station != st.id)
                throw std::invalid_argument("class/station assignment mismatch");
        }
    }
    for (const auto& c : classes)
        if (owner_count[c.id] != 1)
            throw std::invalid_argument("class " + c.label + " not owned by exactly one station");
    if (sources.empty()) throw std::invalid_argument("spec has no external sources");
    for (const auto& src : sources) {
        if (!ids.count(src.entry))
            throw std::invalid_argument("source enters unknown class");
        route_from(src.entry);  // throws on cycles
    }
    // every class reachable from some source (acyclic chains partition the classes)
    std::set<ClassId> reached;
    for (const auto& src : sources)
        for (ClassId k : route_from(src.entry)) reached.insert(k);
    for (const auto& c : classes)
        if (!reached.count(c.id))
            throw std::invalid_argument("class " + c.label + " not on any route");
}

NetworkSpec build_fig1(double M, double delta, bool couple) {
    if (!(M > 4.0)) throw std::invalid_argument("build_fig1: requires M > 4");
    if (couple) delta = std::pow(M, -1.0 / 15.0);
    if (!(delta > 0.0 && delta < 1.0))
        throw std::invalid_argument("build_fig1: requires 0 < delta < 1");

    const double d3 = delta * delta * delta;
    const double m_entry = d3;             // m1 = m4
    const double m_mid = 1.0 - delta;      // m2 = m5
    const double m_last = 1.0 - delta + d3;  // m3 = m6
    if (!(m_entry > 0 && m_mid > 0 && m_last > 0))
        throw std::invalid_argument("build_fig1: nonpositive service mean");

    NetworkSpec spec;
    spec.M = M;
    spec.delta = delta;
    auto cls = [&](ClassId id, StationId st, ServiceLaw law, ClassId succ) {
        spec.classes.push_back({id, std::to_string(id), st, std::move(law), succ, id});
    };
    cls(1, 1, ServiceLaw::deterministic(m_entry), 2);
    cls(2, 2, ServiceLaw::exponential(m_mid), 3);
    cls(3, 4, ServiceLaw::deterministic(m_last), kExit);
    cls(4, 4, ServiceLaw::deterministic(m_entry), 5);
    cls(5, 3, ServiceLaw::exponential(m_mid), 6);
    cls(6, 1, ServiceLaw::deterministic(m_last), kExit);

    spec.stations = {
        {1, "I", Discipline::LifoPreemptive, {1, 6}},
        {2, "II", Discipline::LifoPreemptive, {2}},
        {3, "III", Discipline::LifoPreemptive, {5}},
        {4, "IV", Discipline::LifoPreemptive, {3, 4}},
    };

    const ArrivalLaw nu = ArrivalLaw::nu_law(solve_nu_params(M));
    spec.sources = {{1, nu}, {4, nu}};

    spec.validate();
    if (!traffic(spec).subcritical())
        throw std::invalid_argument("build_fig1: network not subcritical at delta=" +
                                    std::to_string(delta));
    return spec;
}

long fig2_stage_count(double delta) {
    if (!(delta > 0.0 && delta < 1.0))
        throw std::invalid_argument("fig2_stage_count: requires 0 < delta < 1");
    const double d3 = delta * delta * delta;
    const double L_real = (1.0 - delta + d3) / d3;
    const double L_round = std::round(L_real);
    if (std::abs(L_real - L_round) <= 1e-9) return static_cast<long>(L_round);

    // Name the nearest delta giving an integer stage count:
    // (L-1) d^3 + d - 1 = 0 has a unique root in (0,1) for each integer L.
    auto delta_for = [](double L) {
        double lo = 1e-9, hi = 1.0 - 1e-9;
        for (int i = 0; i < 200; ++i) {
            const double mid = 0.5 * (lo + hi);
            const double f = (L - 1.0) * mid * mid * mid + mid - 1.0;
            if (f < 0)
                lo = mid;
            else
                hi = mid;
        }
        return 0.5 * (lo + hi);
    };
    const double cand_lo = delta_for(std::ceil(L_real));   // larger L => smaller delta
    const double cand_hi = delta_for(std::floor(L_real));
    const double nearest =
        std::abs(cand_lo - delta) < std::abs(cand_hi - delta) ? cand_lo : cand_hi;
    std::ostringstream msg;
    msg.precision(12);
    msg << "build_fig2: L = (1-d+d^3)/d^3 = " << L_real << " is not an integer at delta = "
        << delta << "; nearest valid delta is " << nearest;
    throw std::invalid_argument(msg.str());
}

NetworkSpec build_fig2(double M, double delta, long L) {
    const long L_derived = fig2_stage_count(delta);
    if (L != 0 && L != L_derived)
        throw std::invalid_argument("build_fig2: passed L does not match (1-d+d^3)/d^3");
    NetworkSpec spec = build_fig1(M, delta, false);
    spec = stage_expand(spec, 3, L_derived);
    spec = stage_expand(spec, 6, L_derived);
    return spec;
}

NetworkSpec stage_expand(const NetworkSpec& spec, ClassId target, long L) {
    if (L < 1) throw std::invalid_argument("stage_expand: requires L >= 1");
    const ClassDef& orig = spec.class_def(target);

    ServiceLaw stage_law;
    switch (orig.service.kind) {
        case ServiceLaw::Kind::Deterministic:
            stage_law = ServiceLaw::deterministic(orig.service.mean_value / static_cast<double>(L));
            break;
        case ServiceLaw::Kind::Exponential:
            stage_law = ServiceLaw::exponential(orig.service.mean_value / static_cast<double>(L));
            break;
        case ServiceLaw::Kind::ErlangMixture: {
            if (orig.service.components.size() != 1)
                throw std::invalid_argument(
                    "stage_expand: only single-component Erlang mixtures can be expanded");
            const auto& c = orig.service.components.front();
            if (c.stages != L)
                throw std::invalid_argument(
                    "stage_expand: L must equal the Erlang stage count");
            stage_law = ServiceLaw::exponential(c.stage_mean);
            break;
        }
    }

    NetworkSpec out = spec;
    if (L == 1) {  // identity up to renaming
        for (auto& c : out.classes)
            if (c.id == target) c.label = orig.label + ".1";
        return out;
    }

    ClassId next_id = 0;
    for (const auto& c : spec.classes) next_id = std::max(next_id, c.id);
    ++next_id;

    std::vector<ClassDef> stage_classes;
    for (long i = 0; i < L; ++i) {
        ClassDef c;
        c.id = (i == 0) ? target : next_id++;
        c.label = orig.label + "." + std::to_string(i + 1);
        c.station = orig.station;
        c.service = stage_law;
        c.successor = orig.successor;  // last stage; earlier ones patched below
        c.agg = orig.agg;
        stage_classes.push_back(c);
    }
    for (long i = 0; i + 1 < L; ++i) stage_classes[i].successor = stage_classes[i + 1].id;

    for (auto& c : out.classes) {
        if (c.id == target) {
            c = stage_classes[0];
        }
    }
    out.classes.insert(out.classes.end(), stage_classes.begin() + 1, stage_classes.end());

    for (auto& st : out.stations) {
        auto it = std::find(st.classes.begin(), st.classes.end(), target);
        if (it != st.classes.end()) {
            for (long i = 1; i < L; ++i) it = st.classes.insert(it + 1, stage_classes[i].id);
        }
    }

    out.validate();
    return out;
}

NetworkSpec with_discipline(const NetworkSpec& spec, Discipline d) {
    NetworkSpec out = spec;
    for (auto& st : out.stations) st.discipline = d;
    return out;
}

NetworkSpec exponentialized(const NetworkSpec& spec) {
    NetworkSpec out = spec;
    for (auto& c : out.classes) c.service = ServiceLaw::exponential(c.service.mean());
    return out;
}

double TrafficReport::rho(StationId id) const {
    for (const auto& s : stations)
        if (s.id == id) return s.rho;
    throw std::invalid_argument("TrafficReport: unknown station");
}

double TrafficReport::max_rho() const {
    double m = 0;
    for (const auto& s : stations) m = std::max(m, s.rho);
    return m;
}

TrafficReport traffic(const NetworkSpec& spec) {
    spec.validate();
    std::map<ClassId, double> lambda;
    for (const auto& src : spec.sources) {
        const double rate = 1.0 / src.law.mean();
        for (ClassId k : spec.route_from(src.entry)) lambda[k] += rate;
    }
    TrafficReport rep;
    for (const auto& c : spec.classes) rep.classes.push_back({c.id, lambda[c.id]});
    for (const auto& st : spec.stations) {
        double rho = 0;
        for (ClassId k : st.classes) rho += lambda[k] * spec.class_def(k).service.mean();
        rep.stations.push_back({st.id, st.label, rho});
    }
    return rep;
}

// ---------------------------------------------------------------------------
// State metric
// ---------------------------------------------------------------------------

void StateDescriptor::canonicalize() {
    std::sort(jobs.begin(), jobs.end(), [](const JobRecord& a, const JobRecord& b) {
        if (a.cls != b.cls) return a.cls > b.cls;
        if (a.age != b.age) return a.age > b.age;
        return a.residual > b.residual;
    });
}

double state_distance(const StateDescriptor& a, const StateDescriptor& b) {
    StateDescriptor x = a, y = b;
    x.canonicalize();
    y.canonicalize();
    const std::size_t n = std::max(x.jobs.size(), y.jobs.size());
    double d = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const JobRecord xi = i < x.jobs.size() ? x.jobs[i] : JobRecord{};
        const JobRecord yi = i < y.jobs.size() ? y.jobs[i] : JobRecord{};
        double ds;
        if (std::isinf(xi.age) && std::isinf(yi.age))
            ds = 0;
        else
            ds = std::abs(xi.age - yi.age);  // inf vs finite -> inf, capped below
        const double term = std::abs(xi.cls - yi.cls) + ds + std::abs(xi.residual - yi.residual);
        d += std::min(term, 1.0);
    }
    d += std::abs(static_cast<double>(x.z2 - y.z2));
    d += std::abs(static_cast<double>(x.z5 - y.z5));
    d += std::abs(x.u1 - y.u1);
    d += std::abs(x.u4 - y.u4);
    return d;
}

}  // namespace qnet
