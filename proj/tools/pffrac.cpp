// Command line front end: run, check-energy, export.
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "pff/output.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitSolver = 3;

struct ConfigOptions {
    std::string preset;
    std::optional<double> scale;
    std::optional<int> k_back;
    std::optional<double> eta;
    std::string config;
    std::vector<std::string> sets;
    std::string out;
    bool save_intermediates = false;
    bool compat_lb = false;
};

void add_config_options(CLI::App* app, ConfigOptions& o, bool run_flags) {
    app->add_option("--preset", o.preset, "benchmark preset: sent, sens, lshape, bend3d");
    app->add_option("--scale", o.scale, "mesh resolution factor in (0, 1]; element size h / scale");
    app->add_option("--config", o.config, "INI file with [mesh] [material] [program] [backtrack] [solver] [output]");
    app->add_option("--set", o.sets, "override, section.key=value (repeatable)");
    if (!run_flags) {
        app->add_option("--out", o.out, "directory for config.ini and mesh.msh")->default_val("export");
        return;
    }
    app->add_option("--k-back", o.k_back, "maximal number of back steps K");
    app->add_option("--eta", o.eta, "tolerance of the energy inequality (N mm)");
    app->add_option("--out", o.out, "output directory");
    app->add_flag("--save-intermediates", o.save_intermediates, "write the states visited while backtracking");
    app->add_flag("--compat-box1-lb", o.compat_lb, "lower bound with the Dirichlet lifting as first argument");
}

pff::Settings gather(const ConfigOptions& o) {
    pff::Settings s;
    if (!o.config.empty()) s = pff::read_ini(o.config);
    if (o.config.empty() && o.preset.empty()) throw pff::ConfigError("need --preset or --config");
    if (!o.preset.empty()) s["run.preset"] = o.preset;
    if (o.scale) s["run.scale"] = fmt::format("{}", *o.scale);
    for (const auto& a : o.sets) pff::apply_override(s, a);
    if (o.k_back) s["backtrack.K"] = std::to_string(*o.k_back);
    if (o.eta) s["backtrack.eta"] = fmt::format("{}", *o.eta);
    if (!o.out.empty()) s["output.dir"] = o.out;
    if (o.save_intermediates) s["output.save_intermediates"] = "true";
    if (o.compat_lb) s["backtrack.compat_box1_lb"] = "true";
    return s;
}

int cmd_run(const ConfigOptions& o) {
    pff::RunSetup setup;
    try {
        setup = pff::build_setup(gather(o));
    } catch (const pff::ConfigError& e) {
        fmt::print(stderr, "config error: {}\n", e.what());
        return kExitConfig;
    } catch (const pff::MeshError& e) {
        fmt::print(stderr, "mesh error: {}\n", e.what());
        return kExitConfig;
    }

    pff::Problem pb(setup.mesh, setup.mat, pff::constrained_dofs(setup.program, setup.mesh));
    std::optional<pff::RunWriter> writer;
    try {
        writer.emplace(setup, pb, setup.output.dir);
    } catch (const std::exception& e) {
        fmt::print(stderr, "cannot prepare output directory {}: {}\n", setup.output.dir, e.what());
        return kExitConfig;
    }
    fmt::print(stderr, "{} nodes, {} elements, {} free dofs, {} steps, K = {}, eta = {:.3e}\n", pb.mesh.nodes.size(),
               pb.mesh.elements.size(), pb.dofs.n_free(), setup.program.steps, setup.backtrack.K, setup.backtrack.eta);
    pff::RunHistory empty;
    writer->write_log(empty, "running", 0.0);

    const auto t0 = std::chrono::steady_clock::now();
    auto seconds = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); };
    pff::DriverHooks hooks;
    hooks.on_accept = [&](const pff::RunHistory& h, int from) {
        writer->on_accept(h, from);
        const auto& r = h.accepted.back();
        if (r.step > 0) {
            fmt::print(stderr, "step {:4d}  w {:.4e}  F {:.6e}  delta {:.6e}  {}{}\n", r.step, r.applied, r.reaction,
                       r.report.delta, r.report.passed ? "ok" : "FAIL", from < r.step ? " (re-solve)" : "");
        }
    };
    hooks.on_intermediate = [&](const pff::IntermediateState& st, const pff::Vec& U, const pff::Vec& A) {
        writer->on_intermediate(st, U, A);
    };
    hooks.log = [](const std::string& s) { fmt::print(stderr, "{}\n", s); };

    pff::RunHistory h;
    try {
        h = pff::run(pb, setup.program, setup.backtrack, setup.solver, hooks);
    } catch (const pff::OutputError& e) {
        fmt::print(stderr, "output error: {}\n", e.what());
        return kExitSolver;
    }
    writer->write_log(h, h.aborted ? "failed" : "completed", seconds());
    if (h.aborted) {
        fmt::print(stderr, "solver failure: {}\n", h.abort_message);
        return kExitSolver;
    }
    int failing = 0;
    for (const auto& r : h.accepted) failing += (r.step > 0 && !r.report.passed) ? 1 : 0;
    fmt::print(stderr, "done: {} steps, {} solves, {} back-step events, {} failing rows, {:.1f} s\n",
               h.accepted.size() - 1, h.solves, h.events.size(), failing, seconds());
    return 0;
}

int cmd_export(const ConfigOptions& o) {
    pff::RunSetup setup;
    try {
        setup = pff::build_setup(gather(o));
    } catch (const std::exception& e) {
        fmt::print(stderr, "config error: {}\n", e.what());
        return kExitConfig;
    }
    const fs::path dir = o.out;
    fs::create_directories(dir);
    auto settings = setup.settings;
    settings.erase("output.dir");
    pff::write_atomic(dir / "config.ini", pff::to_ini(settings));
    pff::write_atomic(dir / "mesh.msh", pff::write_gmsh(setup.mesh));
    fmt::print("{}\n{}\n", (dir / "config.ini").string(), (dir / "mesh.msh").string());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Phase-field fracture with an energy-inequality backtracking driver"};
    app.require_subcommand(1);

    ConfigOptions run_opts;
    auto* run = app.add_subcommand("run", "run a loading program");
    add_config_options(run, run_opts, true);

    std::string history;
    auto* check = app.add_subcommand("check-energy", "recompute energy.csv from the snapshots of a run");
    check->add_option("dir", history, "output directory of a run")->required();

    ConfigOptions export_opts;
    auto* exp = app.add_subcommand("export", "write the resolved configuration and mesh");
    add_config_options(exp, export_opts, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitConfig;
    }

    try {
        if (*run) return cmd_run(run_opts);
        if (*check) return pff::check_energy(history, std::cout);
        if (*exp) return cmd_export(export_opts);
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return 1;
    }
    return 0;
}
