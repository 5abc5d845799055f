#pragma once

#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hmlab/error.hpp"
#include "hmlab/chart.hpp"
#include "hmlab/jet.hpp"

namespace hmlab {

inline constexpr const char* kSubcommands[] = {"verify-core", "verify-hm", "dataset",  "monotonicity", "barrier",
                                               "stability",   "radial",    "foliation", "all"};

struct Tolerances {
    double hm = 1e-6;
    double weight = 1e-5;
    double barrier = 1e-5;
    double stability = 1e-5;
    double flow = 1e-3;
};

// Parameter block of one run. N or n left empty means "sweep the default cases".
// Output paths are kept apart from the parameters so that they never leak into a report.
struct RunConfig {
    std::string command = "all";
    std::optional<int> N, n;
    std::vector<double> b;  // flat scales b_1 .. b_{n-2}
    std::vector<double> deltas{0.1, 0.25, 0.5};
    double sigma = 20.0;
    double tbar = 0.7;
    int points = 100;
    unsigned seed = 1;
    std::string dataset;  // optional dataset JSON path
    Tolerances tol;
};

struct OutputPaths {
    std::string report = "hmlab_report.json";
    std::string csv_dir;
};

inline nlohmann::ordered_json config_to_json(const RunConfig& c) {
    nlohmann::ordered_json j;
    j["command"] = c.command;
    j["N"] = c.N ? nlohmann::ordered_json(*c.N) : nlohmann::ordered_json(nullptr);
    j["n"] = c.n ? nlohmann::ordered_json(*c.n) : nlohmann::ordered_json(nullptr);
    j["b"] = c.b;
    j["delta"] = c.deltas;
    j["sigma"] = c.sigma;
    j["tbar"] = c.tbar;
    j["points"] = c.points;
    j["seed"] = c.seed;
    j["dataset"] = c.dataset;
    j["tolerances"] = {{"hm", c.tol.hm},
                       {"weight", c.tol.weight},
                       {"barrier", c.tol.barrier},
                       {"stability", c.tol.stability},
                       {"flow", c.tol.flow}};
    return j;
}

namespace detail {

template <class T, class J>
T config_get(const J& j, const char* key) {
    try {
        return j.at(key).template get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError(std::string("config key '") + key + "' has the wrong type");
    }
}

template <class J>
void reject_unknown(const J& j, const std::set<std::string>& known, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!known.count(it.key())) throw ConfigError("unknown config key '" + it.key() + "' in " + where);
}

inline const std::set<std::string>& config_keys() {
    static const std::set<std::string> k{"command", "N", "n", "b", "delta", "sigma", "tbar",
                                         "points", "seed", "dataset", "tolerances"};
    return k;
}

}  // namespace detail

// Reads a complete parameter block (as produced by config_to_json or merged defaults).
template <class J>
RunConfig config_from_json(const J& j) {
    using detail::config_get;
    detail::reject_unknown(j, detail::config_keys(), "config");
    RunConfig c;
    c.command = config_get<std::string>(j, "command");
    for (auto [key, slot] : {std::pair{"N", &c.N}, std::pair{"n", &c.n}}) {
        if (j.at(key).is_null()) *slot = std::nullopt;
        else if (!j.at(key).is_number_integer()) throw ConfigError(std::string("config key '") + key + "' must be an integer");
        else *slot = j.at(key).template get<int>();
    }
    c.b = config_get<std::vector<double>>(j, "b");
    c.deltas = config_get<std::vector<double>>(j, "delta");
    c.sigma = config_get<double>(j, "sigma");
    c.tbar = config_get<double>(j, "tbar");
    c.points = config_get<int>(j, "points");
    if (!j.at("seed").is_number_unsigned()) throw ConfigError("config key 'seed' must be a non-negative integer");
    c.seed = config_get<unsigned>(j, "seed");
    c.dataset = config_get<std::string>(j, "dataset");
    const auto& t = j.at("tolerances");
    detail::reject_unknown(t, {"hm", "weight", "barrier", "stability", "flow"}, "tolerances");
    c.tol.hm = config_get<double>(t, "hm");
    c.tol.weight = config_get<double>(t, "weight");
    c.tol.barrier = config_get<double>(t, "barrier");
    c.tol.stability = config_get<double>(t, "stability");
    c.tol.flow = config_get<double>(t, "flow");
    return c;
}

// Overlays a partial block (config file or explicit flags) onto a full one.
inline void merge_config(nlohmann::ordered_json& base, const nlohmann::ordered_json& patch, const std::string& where) {
    detail::reject_unknown(patch, detail::config_keys(), where);
    for (auto it = patch.begin(); it != patch.end(); ++it) {
        if (it.key() == "tolerances") {
            detail::reject_unknown(it.value(), {"hm", "weight", "barrier", "stability", "flow"}, where + " tolerances");
            for (auto t = it.value().begin(); t != it.value().end(); ++t) base["tolerances"][t.key()] = t.value();
        } else {
            base[it.key()] = it.value();
        }
    }
}

inline nlohmann::ordered_json load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    try {
        return nlohmann::ordered_json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
    }
}

inline void validate_config(const RunConfig& c) {
    bool known = false;
    for (const char* s : kSubcommands) known = known || c.command == s;
    if (!known) throw ConfigError("unknown subcommand '" + c.command + "'");
    if (c.N && c.n && *c.n > *c.N) throw ConfigError("n ≤ N required");
    if (c.N && *c.N < 3) throw ConfigError("N ≥ 3 required");
    if (c.n && *c.n < 2) throw ConfigError("n ≥ 2 required");
    if (c.N && *c.N > 12) throw ConfigError("N ≤ 12 required");
    if (c.n && *c.n > kMaxJetDim) throw ConfigError("n ≤ " + std::to_string(kMaxJetDim) + " required");
    if (!c.b.empty()) {
        if (!c.n) throw ConfigError("flat scales b need an explicit n");
        if (static_cast<int>(c.b.size()) != *c.n - 2) throw ConfigError("b needs n-2 entries (b_1 .. b_{n-2})");
        for (double v : c.b)
            if (!(v > 0.0)) throw ConfigError("flat scales must be positive");
    }
    if (c.deltas.empty()) throw ConfigError("at least one delta required");
    for (double d : c.deltas)
        if (!(d > 0.0 && d <= 0.5)) throw ConfigError("delta must lie in (0, 1/2]");
    if (!(c.sigma > 0.0)) throw ConfigError("sigma must be positive");
    if (!(c.tbar >= 0.0 && c.tbar < kTwoPi)) throw ConfigError("tbar must be an angle in [0, 2 pi)");
    if (c.points < 1 || c.points > 100000) throw ConfigError("points must lie in [1, 100000]");
    for (double t : {c.tol.hm, c.tol.weight, c.tol.barrier, c.tol.stability, c.tol.flow})
        if (!(t > 0.0)) throw ConfigError("tolerances must be positive");
}

}  // namespace hmlab
