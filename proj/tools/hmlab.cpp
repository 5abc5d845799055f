#include <chrono>
#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hmlab/config.hpp"
#include "hmlab/goldens.hpp"
#include "hmlab/report.hpp"
#include "hmlab/suites.hpp"

using namespace hmlab;

namespace {

struct Flags {
    int N = 0, n = 0;
    std::vector<double> b, delta;
    double sigma = 0, tbar = 0;
    int points = 0;
    unsigned seed = 0;
    std::string dataset, config;
    double tol_hm = 0, tol_weight = 0, tol_barrier = 0, tol_stability = 0, tol_flow = 0;
    std::string out = "hmlab_report.json", csv_dir;
};

void add_run_options(CLI::App* sub, Flags& f) {
    sub->add_option("--N", f.N, "ambient model dimension N (omit to sweep)");
    sub->add_option("--n", f.n, "manifold dimension n (omit to sweep)");
    sub->add_option("--b", f.b, "flat scales b_1 .. b_{n-2}");
    sub->add_option("--delta", f.delta, "decay rates delta");
    sub->add_option("--sigma", f.sigma, "barrier scale sigma");
    sub->add_option("--tbar", f.tbar, "barrier centre angle");
    sub->add_option("--points", f.points, "sample points per identity");
    sub->add_option("--seed", f.seed, "seed for random test fields");
    sub->add_option("--dataset", f.dataset, "dataset JSON file (dataset subcommand)");
    sub->add_option("--tol-hm", f.tol_hm, "tolerance for HM curvature identities");
    sub->add_option("--tol-weight", f.tol_weight, "tolerance for the weight identity");
    sub->add_option("--tol-barrier", f.tol_barrier, "tolerance for the mean-concavity identity");
    sub->add_option("--tol-stability", f.tol_stability, "tolerance for the stability identities");
    sub->add_option("--tol-flow", f.tol_flow, "relative tolerance for the flow oracle");
    sub->add_option("--config", f.config, "JSON config file; flags given on the command line take precedence");
    sub->add_option("--out", f.out, "report path (timestamps go to <out>.meta.json)");
    sub->add_option("--csv-dir", f.csv_dir, "directory for CSV tables");
}

// Only flags that were actually given end up in the patch.
ojson flag_patch(CLI::App* sub, const Flags& f) {
    ojson p = ojson::object();
    auto given = [sub](const char* name) { return sub->get_option(name)->count() > 0; };
    if (given("--N")) p["N"] = f.N;
    if (given("--n")) p["n"] = f.n;
    if (given("--b")) p["b"] = f.b;
    if (given("--delta")) p["delta"] = f.delta;
    if (given("--sigma")) p["sigma"] = f.sigma;
    if (given("--tbar")) p["tbar"] = f.tbar;
    if (given("--points")) p["points"] = f.points;
    if (given("--seed")) p["seed"] = f.seed;
    if (given("--dataset")) p["dataset"] = f.dataset;
    ojson tol = ojson::object();
    if (given("--tol-hm")) tol["hm"] = f.tol_hm;
    if (given("--tol-weight")) tol["weight"] = f.tol_weight;
    if (given("--tol-barrier")) tol["barrier"] = f.tol_barrier;
    if (given("--tol-stability")) tol["stability"] = f.tol_stability;
    if (given("--tol-flow")) tol["flow"] = f.tol_flow;
    if (!tol.empty()) p["tolerances"] = tol;
    return p;
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3e", v);
    return buf;
}

void print_summary(const std::vector<SuiteResult>& suites) {
    for (const auto& s : suites) {
        std::size_t total = 0, failed = 0;
        for (const auto& u : s.units)
            for (const auto& c : u.checks) {
                ++total;
                failed += !c.pass;
            }
        std::cout << (s.pass() ? "PASS " : "FAIL ") << s.name << "  " << (total - failed) << "/" << total << " checks\n";
        for (const auto& u : s.units) {
            if (!u.error.empty()) std::cout << "  [" << u.label << "] error: " << u.error << "\n";
            for (const auto& c : u.checks)
                if (!c.pass)
                    std::cout << "  failed: " << c.name << "  value " << fmt(c.value) << " " << relation_symbol(c.relation) << " "
                              << fmt(c.threshold) << " does not hold\n";
            if (s.name == "barrier" && !u.summary.empty()) std::cout << "  [" << u.label << "] " << u.summary.dump() << "\n";
        }
    }
}

int run(const std::string& command, CLI::App* sub, const Flags& f) {
    auto start = std::chrono::system_clock::now();
    RunConfig defaults;
    defaults.command = command;
    ojson eff = config_to_json(defaults);
    if (!f.config.empty()) merge_config(eff, load_config_file(f.config), "config file");
    merge_config(eff, flag_patch(sub, f), "command line");
    eff["command"] = command;
    RunConfig cfg = config_from_json(eff);
    validate_config(cfg);
    const int workers = worker_count();

    auto suites = run_suites(suites_for(cfg), cfg, workers);
    ojson report = build_report(cfg, suites);
    write_text(f.out, report.dump(2) + "\n");
    write_text(meta_path(f.out), build_meta(start, std::chrono::system_clock::now(), workers, suites).dump(2) + "\n");
    if (!f.csv_dir.empty()) write_tables(f.csv_dir, suites);

    print_summary(suites);
    bool pass = report["pass"].get<bool>();
    std::cout << (pass ? "all checks passed" : "some checks failed") << "; report: " << f.out << "\n";
    return pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hmlab: numerical verification of Horowitz-Myers geometry"};
    app.require_subcommand(1);
    app.set_version_flag("--version", HMLAB_VERSION);

    Flags flags;
    std::vector<std::pair<std::string, CLI::App*>> subs;
    const std::pair<const char*, const char*> commands[] = {
        {"verify-core", "coordinate charts, Christoffel symbols, curvature"},
        {"verify-hm", "HM curvature and weight identities"},
        {"dataset", "mass functional, u-equation, tame and decay checks"},
        {"monotonicity", "kappa ODE, length profile, two-dimensional model"},
        {"barrier", "s_hat, barrier profile and mean-concavity"},
        {"stability", "weighted Jacobi operator and second variation"},
        {"radial", "radial ODE solutions and decay"},
        {"foliation", "boundary geodesics and leaves"},
        {"all", "every suite"}};
    for (auto [name, help] : commands) {
        CLI::App* s = app.add_subcommand(name, help);
        add_run_options(s, flags);
        subs.push_back({name, s});
    }
    std::string golden_dir = "tests/golden";
    CLI::App* eg = app.add_subcommand("emit-goldens", "regenerate the golden-value corpus");
    eg->add_option("--out", golden_dir, "corpus directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (eg->parsed()) {
            for (const auto& p : emit_goldens(golden_dir)) std::cout << "wrote " << p.string() << "\n";
            return 0;
        }
        for (auto& [name, s] : subs)
            if (s->parsed()) return run(name, s, flags);
    } catch (const ConfigError& e) {
        std::cerr << "hmlab: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "hmlab: unexpected error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
