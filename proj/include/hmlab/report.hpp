#pragma once

#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hmlab/check.hpp"
#include "hmlab/config.hpp"
#include "hmlab/error.hpp"

#ifndef HMLAB_VERSION
#define HMLAB_VERSION "unknown"
#endif

namespace hmlab {

inline constexpr const char* kReportSchema = "hmlab-report/1";

using ojson = nlohmann::ordered_json;

// JSON has no infinities; they are spelled out so that a fitted exponent of -inf survives.
inline ojson json_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
}

// Shortest round-trip text, independent of the locale.
inline std::string format_double(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc()) throw Error("number formatting failed");
    return std::string(buf, end);
}

// Output of one work unit (one module at one parameter point).
struct UnitResult {
    std::string suite;
    std::string label;
    std::vector<Check> checks;
    std::vector<Table> tables;
    ojson summary = ojson::object();
    std::string error;  // non-empty when the unit crashed; a failing check is added as well
    double seconds = 0.0;
};

struct SuiteResult {
    std::string name;
    std::vector<UnitResult> units;
    bool pass() const {
        for (const auto& u : units)
            if (!u.error.empty() || !all_pass(u.checks)) return false;
        return true;
    }
};

inline ojson check_to_json(const Check& c) {
    ojson j;
    j["name"] = c.name;
    j["ref"] = c.ref;
    // upper bounds are residuals; lower bounds are plain values such as margins or exponents
    bool upper = c.relation == Relation::Less || c.relation == Relation::LessEqual;
    j[upper ? "max_residual" : "value"] = json_number(c.value);
    j["relation"] = relation_symbol(c.relation);
    j["tolerance"] = json_number(c.threshold);
    j["pass"] = c.pass;
    return j;
}

inline ojson environment_block() {
    ojson e;
    e["version"] = HMLAB_VERSION;
    e["precision"] = "IEEE-754 binary64";
    e["grid"] = {{"fd_step_scale", 4.0},
                 {"fd_richardson", true},
                 {"kappa_rk4_step", 1e-4},
                 {"chi_grid_points", 10000},
                 {"radial_intervals", 4096},
                 {"foliation_t_leaves", 16},
                 {"stability_points", 30}};
    return e;
}

inline ojson build_report(const RunConfig& cfg, const std::vector<SuiteResult>& suites) {
    ojson r;
    r["schema_version"] = kReportSchema;
    r["command"] = cfg.command;
    r["config"] = config_to_json(cfg);
    r["environment"] = environment_block();
    std::size_t total = 0, failed = 0;
    bool pass = true;
    ojson arr = ojson::array();
    for (const auto& s : suites) {
        ojson sj;
        sj["name"] = s.name;
        sj["pass"] = s.pass();
        ojson units = ojson::array();
        for (const auto& u : s.units) {
            ojson uj;
            uj["label"] = u.label;
            uj["pass"] = u.error.empty() && all_pass(u.checks);
            if (!u.error.empty()) uj["error"] = u.error;
            ojson checks = ojson::array();
            for (const auto& c : u.checks) {
                checks.push_back(check_to_json(c));
                ++total;
                if (!c.pass) ++failed;
            }
            uj["checks"] = std::move(checks);
            if (!u.summary.empty()) uj["summary"] = u.summary;
            units.push_back(std::move(uj));
        }
        sj["units"] = std::move(units);
        pass = pass && s.pass();
        arr.push_back(std::move(sj));
    }
    r["suites"] = std::move(arr);
    r["checks_total"] = total;
    r["checks_failed"] = failed;
    r["pass"] = pass;
    return r;
}

inline std::string table_to_csv(const Table& t) {
    std::string out;
    for (std::size_t i = 0; i < t.header.size(); ++i) out += (i ? "," : "") + t.header[i];
    out += '\n';
    for (const auto& row : t.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out += ',';
            out += format_double(row[i]);
        }
        out += '\n';
    }
    return out;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot write '" + path.string() + "'");
    f << text;
    if (!f) throw ConfigError("write failed for '" + path.string() + "'");
}

inline std::vector<std::filesystem::path> write_tables(const std::filesystem::path& dir, const std::vector<SuiteResult>& suites) {
    std::vector<std::filesystem::path> written;
    for (const auto& s : suites)
        for (const auto& u : s.units)
            for (const auto& t : u.tables) {
                if (t.name.empty() || t.rows.empty()) continue;
                auto p = dir / (t.name + ".csv");
                write_text(p, table_to_csv(t));
                written.push_back(p);
            }
    return written;
}

inline std::string utc_timestamp(std::chrono::system_clock::time_point tp) {
    std::time_t t = std::chrono::system_clock::to_time_t(tp);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// Timing and host facts live next to the report, never inside it.
inline std::filesystem::path meta_path(const std::filesystem::path& report) {
    return report.string() + ".meta.json";
}

inline ojson build_meta(std::chrono::system_clock::time_point start, std::chrono::system_clock::time_point end, int threads,
                        const std::vector<SuiteResult>& suites) {
    ojson m;
    m["started_utc"] = utc_timestamp(start);
    m["finished_utc"] = utc_timestamp(end);
    m["wall_seconds"] = std::chrono::duration<double>(end - start).count();
    m["threads"] = threads;
    ojson per = ojson::object();
    for (const auto& s : suites) {
        double sec = 0.0;
        for (const auto& u : s.units) sec += u.seconds;
        per[s.name] = sec;
    }
    m["suite_cpu_seconds"] = per;
    return m;
}

}  // namespace hmlab
