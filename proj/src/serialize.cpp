#include <fstream>
#include <json.hpp>

#include "qnet/model.hpp"

namespace qnet {

using json = nlohmann::ordered_json;

namespace {

json law_to_json(const ServiceLaw& law) {
    json j;
    switch (law.kind) {
        case ServiceLaw::Kind::Deterministic:
            j["type"] = "deterministic";
            j["mean"] = law.mean_value;
            break;
        case ServiceLaw::Kind::Exponential:
            j["type"] = "exponential";
            j["mean"] = law.mean_value;
            break;
        case ServiceLaw::Kind::ErlangMixture: {
            j["type"] = "erlang-mixture";
            json comps = json::array();
            for (const auto& c : law.components)
                comps.push_back({{"weight", c.weight},
                                 {"stages", c.stages},
                                 {"stage_mean", c.stage_mean}});
            j["components"] = std::move(comps);
            break;
        }
    }
    return j;
}

ServiceLaw law_from_json(const json& j) {
    const std::string type = j.at("type").get<std::string>();
    if (type == "deterministic") return ServiceLaw::deterministic(j.at("mean").get<double>());
    if (type == "exponential") return ServiceLaw::exponential(j.at("mean").get<double>());
    if (type == "erlang-mixture") {
        std::vector<ErlangComponent> comps;
        for (const auto& c : j.at("components"))
            comps.push_back({c.at("weight").get<double>(), c.at("stages").get<int>(),
                             c.at("stage_mean").get<double>()});
        return ServiceLaw::erlang_mixture(std::move(comps));
    }
    throw std::invalid_argument("unknown service law type: " + type);
}

json arrival_to_json(const ArrivalLaw& law) {
    json j;
    switch (law.kind) {
        case ArrivalLaw::Kind::Nu:
            j["type"] = "nu";
            j["M"] = law.nu.M;
            j["beta"] = law.nu.beta;
            j["gamma"] = law.nu.gamma;
            j["mass_residual"] = law.nu.mass_residual;
            j["mean_residual"] = law.nu.mean_residual;
            break;
        case ArrivalLaw::Kind::Exponential:
            j["type"] = "exponential";
            j["mean"] = law.mean_value;
            break;
        case ArrivalLaw::Kind::Atom:
            j["type"] = "atom";
            j["value"] = law.mean_value;
            break;
    }
    return j;
}

ArrivalLaw arrival_from_json(const json& j) {
    const std::string type = j.at("type").get<std::string>();
    if (type == "nu") {
        NuParams p;
        p.M = j.at("M").get<double>();
        p.beta = j.at("beta").get<double>();
        p.gamma = j.at("gamma").get<double>();
        p.mass_residual = j.at("mass_residual").get<double>();
        p.mean_residual = j.at("mean_residual").get<double>();
        return ArrivalLaw::nu_law(p);
    }
    if (type == "exponential") return ArrivalLaw::exponential(j.at("mean").get<double>());
    if (type == "atom") return ArrivalLaw::atom(j.at("value").get<double>());
    throw std::invalid_argument("unknown arrival law type: " + type);
}

}  // namespace

std::string to_json_text(const NetworkSpec& spec) {
    json j;
    j["params"] = {{"M", spec.M}, {"delta", spec.delta}};
    json classes = json::array();
    for (const auto& c : spec.classes)
        classes.push_back({{"id", c.id},
                           {"label", c.label},
                           {"station", c.station},
                           {"service", law_to_json(c.service)},
                           {"successor", c.successor},
                           {"agg", c.agg}});
    j["classes"] = std::move(classes);
    json sources = json::array();
    for (const auto& s : spec.sources)
        sources.push_back({{"entry", s.entry}, {"law", arrival_to_json(s.law)}});
    j["sources"] = std::move(sources);
    json stations = json::array();
    for (const auto& s : spec.stations)
        stations.push_back({{"id", s.id},
                            {"label", s.label},
                            {"discipline", to_string(s.discipline)},
                            {"classes", s.classes}});
    j["stations"] = std::move(stations);
    return j.dump(2) + "\n";
}

NetworkSpec spec_from_json_text(const std::string& text) {
    const json j = json::parse(text);
    NetworkSpec spec;
    spec.M = j.at("params").at("M").get<double>();
    spec.delta = j.at("params").at("delta").get<double>();
    for (const auto& c : j.at("classes")) {
        ClassDef def;
        def.id = c.at("id").get<ClassId>();
        def.label = c.at("label").get<std::string>();
        def.station = c.at("station").get<StationId>();
        def.service = law_from_json(c.at("service"));
        def.successor = c.at("successor").get<ClassId>();
        def.agg = c.at("agg").get<ClassId>();
        spec.classes.push_back(std::move(def));
    }
    for (const auto& s : j.at("sources"))
        spec.sources.push_back({s.at("entry").get<ClassId>(), arrival_from_json(s.at("law"))});
    for (const auto& s : j.at("stations")) {
        StationDef def;
        def.id = s.at("id").get<StationId>();
        def.label = s.at("label").get<std::string>();
        def.discipline = discipline_from_string(s.at("discipline").get<std::string>());
        def.classes = s.at("classes").get<std::vector<ClassId>>();
        spec.stations.push_back(std::move(def));
    }
    spec.validate();
    return spec;
}

void save_spec(const NetworkSpec& spec, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << to_json_text(spec);
}

NetworkSpec load_spec(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return spec_from_json_text(text);
}

bool operator==(const NetworkSpec& a, const NetworkSpec& b) {
    if (a.M != b.M || a.delta != b.delta) return false;
    if (a.classes.size() != b.classes.size() || a.sources.size() != b.sources.size() ||
        a.stations.size() != b.stations.size())
        return false;
    for (std::size_t i = 0; i < a.classes.size(); ++i) {
        const auto& x = a.classes[i];
        const auto& y = b.classes[i];
        if (x.id != y.id || x.label != y.label || x.station != y.station ||
            !(x.service == y.service) || x.successor != y.successor || x.agg != y.agg)
            return false;
    }
    for (std::size_t i = 0; i < a.sources.size(); ++i)
        if (a.sources[i].entry != b.sources[i].entry || !(a.sources[i].law == b.sources[i].law))
            return false;
    for (std::size_t i = 0; i < a.stations.size(); ++i) {
        const auto& x = a.stations[i];
        const auto& y = b.stations[i];
        if (x.id != y.id || x.label != y.label || x.discipline != y.discipline ||
            x.classes != y.classes)
            return false;
    }
    return true;
}

}  // namespace qnet
