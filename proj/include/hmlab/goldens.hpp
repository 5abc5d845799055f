#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "hmlab/barriers.hpp"
#include "hmlab/curvature.hpp"
#include "hmlab/hm_model.hpp"
#include "hmlab/monotonicity.hpp"
#include "hmlab/report.hpp"

namespace hmlab {

struct GoldenFile {
    std::string name;  // file name inside the corpus directory
    std::vector<std::string> provenance;
    Table table;
};

inline std::string golden_text(const GoldenFile& g) {
    std::string out;
    for (const auto& line : g.provenance) out += "# " + line + "\n";
    return out + table_to_csv(g.table);
}

// Fixed evaluation points of the HM curvature samples (r, tau0, theta1).
inline std::vector<Point> golden_hm_points() {
    std::vector<Point> pts;
    const double raw[5][3] = {{0.8, 0.3, -1.0}, {1.0, 1.7, 0.0}, {1.5, 3.1, 0.5}, {2.5, 4.4, 2.0}, {5.0, 6.0, -3.0}};
    for (const auto& r : raw) {
        Point p(3);
        p << r[0], r[1], r[2];
        pts.push_back(p);
    }
    return pts;
}

inline std::vector<GoldenFile> golden_corpus() {
    const std::string stamp = std::string("generated by hmlab emit-goldens, version ") + HMLAB_VERSION;
    std::vector<GoldenFile> files;

    {
        GoldenFile g{"s_hat.csv",
                     {stamp, "s_hat(N): root of the junction equation in (2, inf), bracketed scan then bisection",
                      "residual: defining equation evaluated at the returned root"},
                     {"s_hat", {"N", "s_hat", "residual"}, {}}};
        for (int N = 3; N <= 7; ++N) {
            SHat s = solve_s_hat(N);
            g.table.rows.push_back({double(N), s.value, s.residual});
        }
        files.push_back(std::move(g));
    }
    {
        GoldenFile g{"kappa_regular.csv",
                     {stamp, "kappa_a(s) closed form of the regular family, evaluated directly (no ODE integration)"},
                     {"kappa_regular", {"N", "a", "s", "kappa"}, {}}};
        for (int N = 3; N <= 7; ++N)
            for (double a : {-1.0, 0.0, 1.0, 5.0})
                for (double s : {0.1, 0.5, 1.0, 2.0, 5.0}) g.table.rows.push_back({double(N), a, s, kappa_regular(s, a, N)});
        files.push_back(std::move(g));
    }
    {
        GoldenFile g{"kappa_singular.csv",
                     {stamp, "singular family tanh(N s / 2) + N / sinh(N s), evaluated directly"},
                     {"kappa_singular", {"N", "s", "kappa"}, {}}};
        for (int N = 3; N <= 7; ++N)
            for (double s : {0.1, 0.5, 1.0, 2.0, 5.0}) g.table.rows.push_back({double(N), s, kappa_singular(s, N)});
        files.push_back(std::move(g));
    }
    {
        GoldenFile g{"profiles_FG.csv",
                     {stamp, "F(s;N) = tanh(N s / 2), G(s;N) = cosh(N s / 2)^(2(N-1)/N)"},
                     {"profiles_FG", {"N", "s", "F", "G"}, {}}};
        for (int N = 3; N <= 7; ++N)
            for (double s : {0.25, 0.5, 1.0, 2.0, 4.0}) g.table.rows.push_back({double(N), s, F_profile(s, N), G_profile(s, N)});
        files.push_back(std::move(g));
    }
    {
        GoldenFile g{"hm_ricci_N4_n3.csv",
                     {stamp, "Ricci tensor and scalar curvature of g_HM with N = 4, n = 3, flat scale 1",
                      "coordinates (r, tau0, theta1); derivatives from exact forward-mode jets"},
                     {"hm_ricci_N4_n3", {"r", "tau0", "theta1", "ric_rr", "ric_r0", "ric_r1", "ric_00", "ric_01", "ric_11", "scalar"}, {}}};
        HMModel m(HMParams(4, 3));
        FdOptions exact;
        exact.source = DerivativeSource::Exact;
        for (const Point& p : golden_hm_points()) {
            CurvatureBundle cb = curvature(m.metric(), p, exact);
            const auto& R = cb.ricci;
            g.table.rows.push_back({p[0], p[1], p[2], R(0, 0), R(0, 1), R(0, 2), R(1, 1), R(1, 2), R(2, 2), cb.scalar});
        }
        files.push_back(std::move(g));
    }
    return files;
}

inline std::vector<std::filesystem::path> emit_goldens(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw ConfigError("cannot create corpus directory '" + dir.string() + "': " + ec.message());
    std::vector<std::filesystem::path> out;
    for (const auto& g : golden_corpus()) {
        write_text(dir / g.name, golden_text(g));
        out.push_back(dir / g.name);
    }
    return out;
}

// Parses a corpus file: '#' comment lines, one header row, numeric rows.
inline Table read_golden(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open golden file '" + path.string() + "'");
    Table t;
    t.name = path.stem().string();
    std::string line;
    bool header = false;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
        if (!header) {
            t.header = cells;
            header = true;
            continue;
        }
        std::vector<double> row;
        for (const auto& c : cells) {
            double v = 0.0;
            auto [p, e] = std::from_chars(c.data(), c.data() + c.size(), v);
            if (e != std::errc() || p != c.data() + c.size()) throw ConfigError("bad number '" + c + "' in " + path.string());
            row.push_back(v);
        }
        if (row.size() != t.header.size()) throw ConfigError("ragged row in " + path.string());
        t.rows.push_back(std::move(row));
    }
    return t;
}

}  // namespace hmlab
