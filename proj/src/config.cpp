#include "pff/config.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include "pff/presets.hpp"

namespace pff {

namespace {

const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys = {
        "run.preset", "run.scale",
        "mesh.file", "mesh.generator", "mesh.extents", "mesh.divisions", "mesh.h", "mesh.h_ref", "mesh.coarse",
        "mesh.coarse_factor",
        "material.lambda", "material.mu", "material.E", "material.nu", "material.gc", "material.ell", "material.k",
        "material.dissipation", "material.kappa", "material.eps_pen",
        "program.steps", "program.dw", "program.dirichlet", "program.reaction",
        "backtrack.K", "backtrack.eta", "backtrack.eta_per_measure", "backtrack.compat_box1_lb",
        "backtrack.max_total_solves",
        "solver.tol_u", "solver.tol_a", "solver.max_newton", "solver.max_alt", "solver.clamp_damage",
        "solver.record_trace", "solver.clamp_abort",
        "output.dir", "output.snapshot_every", "output.save_intermediates",
    };
    return keys;
}

double to_num(const Settings& s, const std::string& key) {
    const std::string& v = s.at(key);
    try {
        std::size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError(fmt::format("{}: expected a number, got '{}'", key, v));
    }
}

int to_int(const Settings& s, const std::string& key) {
    const double d = to_num(s, key);
    if (d != std::floor(d)) throw ConfigError(fmt::format("{}: expected an integer, got '{}'", key, s.at(key)));
    return static_cast<int>(d);
}

bool to_bool(const Settings& s, const std::string& key) {
    const std::string v = boost::algorithm::to_lower_copy(s.at(key));
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError(fmt::format("{}: expected a boolean, got '{}'", key, s.at(key)));
}

double num_or(const Settings& s, const std::string& key, double dflt) {
    return s.count(key) ? to_num(s, key) : dflt;
}

std::vector<std::string> split(const std::string& text, const char* seps) {
    std::vector<std::string> parts;
    boost::algorithm::split(parts, text, boost::algorithm::is_any_of(seps));
    std::vector<std::string> out;
    for (auto& p : parts) {
        boost::algorithm::trim(p);
        if (!p.empty()) out.push_back(p);
    }
    return out;
}

int component(const std::string& c, const std::string& key) {
    if (c == "x" || c == "0") return 0;
    if (c == "y" || c == "1") return 1;
    if (c == "z" || c == "2") return 2;
    throw ConfigError(fmt::format("{}: bad component '{}'", key, c));
}

std::vector<DirichletBC> parse_dirichlet(const std::string& text) {
    std::vector<DirichletBC> out;
    for (const auto& entry : split(text, ";,")) {
        const auto f = split(entry, ":");
        if (f.size() != 3) throw ConfigError(fmt::format("program.dirichlet: expected set:comp:value, got '{}'", entry));
        DirichletBC bc;
        bc.set = f[0];
        bc.comp = component(f[1], "program.dirichlet");
        if (f[2].rfind("ramp", 0) == 0) {
            bc.ramp = true;
            bc.value = 1.0;
            if (f[2].size() > 4) {
                if (f[2][4] != '*') throw ConfigError("program.dirichlet: expected ramp or ramp*factor");
                Settings tmp{{"factor", f[2].substr(5)}};
                bc.value = to_num(tmp, "factor");
            }
        } else {
            Settings tmp{{"program.dirichlet", f[2]}};
            bc.value = to_num(tmp, "program.dirichlet");
        }
        out.push_back(bc);
    }
    return out;
}

std::vector<double> num_list(const Settings& s, const std::string& key) {
    std::vector<double> out;
    for (const auto& p : split(s.at(key), " ,;")) {
        Settings tmp{{key, p}};
        out.push_back(to_num(tmp, key));
    }
    return out;
}

Mesh build_mesh(const Settings& s, double ell, double scale, double& band_h) {
    band_h = 0.0;
    if (s.count("mesh.file")) {
        try {
            return read_gmsh(s.at("mesh.file"));
        } catch (const MeshError& e) {
            throw ConfigError(e.what());
        }
    }
    if (!s.count("mesh.generator")) throw ConfigError("mesh: need mesh.file or mesh.generator");
    const std::string gen = s.at("mesh.generator");
    if (gen == "box") {
        if (!s.count("mesh.extents") || !s.count("mesh.divisions")) {
            throw ConfigError("mesh: box generator needs mesh.extents and mesh.divisions");
        }
        const auto ext = num_list(s, "mesh.extents");
        const auto div_d = num_list(s, "mesh.divisions");
        std::vector<int> div(div_d.begin(), div_d.end());
        try {
            Mesh m = generate_structured(static_cast<int>(ext.size()), ext, div);
            m.node_sets["origin"] = select_nodes(m, [](const Point& x) { return std::hypot(x[0], x[1], x[2]); });
            return m;
        } catch (const MeshError& e) {
            throw ConfigError(e.what());
        }
    }
    if (!s.count("mesh.h") && !s.count("mesh.h_ref")) throw ConfigError("mesh: need mesh.h or mesh.h_ref");
    band_h = s.count("mesh.h") ? to_num(s, "mesh.h") : band_size(to_num(s, "mesh.h_ref"), ell, scale);
    const double coarse = s.count("mesh.coarse") ? to_num(s, "mesh.coarse") : num_or(s, "mesh.coarse_factor", 4.0) * band_h;
    if (!(band_h > 0.0) || !(coarse > 0.0)) throw ConfigError("mesh: element sizes must be positive");
    if (gen == "sent") return sent_mesh(band_h, coarse);
    if (gen == "sens") return sens_mesh(band_h, coarse);
    if (gen == "lshape") return lshape_mesh(band_h, coarse);
    if (gen == "bend3d") return bend3d_mesh(band_h, coarse);
    throw ConfigError(fmt::format("mesh: unknown generator '{}'", gen));
}

}  // namespace

Settings parse_ini(const std::string& text) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    std::istringstream in(text);
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(fmt::format("config line {}: {}", e.line(), e.message()));
    }
    Settings s;
    for (const auto& [section, body] : tree) {
        if (body.empty()) throw ConfigError(fmt::format("config: key '{}' outside of a section", section));
        for (const auto& [key, value] : body) {
            s[section + "." + key] = boost::algorithm::trim_copy(value.data());
        }
    }
    return s;
}

Settings read_ini(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_ini(ss.str());
}

std::string to_ini(const Settings& s) {
    std::string out;
    std::string current;
    for (const auto& [k, v] : s) {
        const auto dot = k.find('.');
        const std::string sec = k.substr(0, dot);
        if (sec != current) {
            if (!out.empty()) out += "\n";
            out += "[" + sec + "]\n";
            current = sec;
        }
        out += k.substr(dot + 1) + " = " + v + "\n";
    }
    return out;
}

void apply_override(Settings& s, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' is not key=value");
    const std::string key = boost::algorithm::trim_copy(assignment.substr(0, eq));
    if (key.find('.') == std::string::npos) throw ConfigError("override key '" + key + "' needs section.key");
    s[key] = boost::algorithm::trim_copy(assignment.substr(eq + 1));
}

RunSetup build_setup(Settings s) {
    if (s.count("run.preset")) {
        const double scale = num_or(s, "run.scale", 1.0);
        const Settings base = load_preset(s.at("run.preset"), scale);
        // Material given as E/nu in the file replaces a preset's lambda/mu and vice versa.
        const bool user_lame = s.count("material.lambda") || s.count("material.mu");
        const bool user_young = s.count("material.E") || s.count("material.nu");
        for (const auto& [k, v] : base) {
            if (s.count(k)) continue;
            if (user_young && (k == "material.lambda" || k == "material.mu")) continue;
            if (user_lame && (k == "material.E" || k == "material.nu")) continue;
            if (s.count("mesh.file") && k.rfind("mesh.", 0) == 0) continue;
            s[k] = v;
        }
    }
    for (const auto& [k, v] : s) {
        if (!known_keys().count(k)) throw ConfigError(fmt::format("unknown config key '{}'", k));
    }
    if (s.count("mesh.file")) {
        s["mesh.file"] = std::filesystem::absolute(s.at("mesh.file")).string();
    }

    RunSetup r;
    auto need = [&](const std::string& k) {
        if (!s.count(k)) throw ConfigError(fmt::format("missing config key '{}'", k));
    };

    // Material; moduli are read in kN/mm² and stored in N/mm².
    MaterialParams m;
    if (s.count("material.lambda") || s.count("material.mu")) {
        need("material.lambda");
        need("material.mu");
        m.lambda = to_num(s, "material.lambda") * kKiloNewton;
        m.mu = to_num(s, "material.mu") * kKiloNewton;
    } else {
        need("material.E");
        need("material.nu");
        const MaterialParams y = from_young(to_num(s, "material.E") * kKiloNewton, to_num(s, "material.nu"));
        m.lambda = y.lambda;
        m.mu = y.mu;
    }
    need("material.gc");
    need("material.ell");
    m.gc = to_num(s, "material.gc");
    m.ell = to_num(s, "material.ell");
    m.k = num_or(s, "material.k", 1e-4);
    try {
        m.dissipation = parse_dissipation(s.count("material.dissipation") ? s.at("material.dissipation") : "AT2");
        m.kappa = num_or(s, "material.kappa", 0.0);
        m.eps_pen = num_or(s, "material.eps_pen", 1e-6);
        m.modulus_unit = kKiloNewton;
        m.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    r.mat = m;

    const double scale = num_or(s, "run.scale", 1.0);
    if (!(scale > 0.0 && scale <= 1.0)) throw ConfigError("run.scale must lie in (0, 1]");
    r.mesh = build_mesh(s, m.ell, scale, r.band_h);

    need("program.steps");
    need("program.dirichlet");
    r.program.steps = to_int(s, "program.steps");
    r.program.dw = num_or(s, "program.dw", 0.0);
    r.program.bcs = parse_dirichlet(s.at("program.dirichlet"));
    if (s.count("program.reaction")) {
        const auto f = split(s.at("program.reaction"), ":");
        if (f.size() != 2) throw ConfigError("program.reaction: expected set:comp");
        r.program.reaction_set = f[0];
        r.program.reaction_dir = {0.0, 0.0, 0.0};
        r.program.reaction_dir[component(f[1], "program.reaction")] = 1.0;
    }
    try {
        r.program.validate(r.mesh);
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }

    r.backtrack.K = s.count("backtrack.K") ? to_int(s, "backtrack.K") : 50;
    r.backtrack.eta = num_or(s, "backtrack.eta", 1e-5);
    if (s.count("backtrack.eta_per_measure") && to_bool(s, "backtrack.eta_per_measure")) {
        r.backtrack.eta *= r.mesh.total_measure();
    }
    r.backtrack.listing_lower_bound = s.count("backtrack.compat_box1_lb") && to_bool(s, "backtrack.compat_box1_lb");
    r.backtrack.max_total_solves = s.count("backtrack.max_total_solves") ? to_int(s, "backtrack.max_total_solves") : 0;

    r.solver.tol_u = num_or(s, "solver.tol_u", 1e-5);
    r.solver.tol_a = num_or(s, "solver.tol_a", 1e-5);
    r.solver.max_newton = s.count("solver.max_newton") ? to_int(s, "solver.max_newton") : 50;
    r.solver.max_alt = s.count("solver.max_alt") ? to_int(s, "solver.max_alt") : 10000;
    r.solver.clamp_damage = !s.count("solver.clamp_damage") || to_bool(s, "solver.clamp_damage");
    r.solver.record_trace = !s.count("solver.record_trace") || to_bool(s, "solver.record_trace");
    r.solver.clamp_abort = num_or(s, "solver.clamp_abort", 1e-3);
    try {
        r.backtrack.validate();
        r.solver.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }

    if (s.count("output.dir")) r.output.dir = s.at("output.dir");
    r.output.snapshot_every = s.count("output.snapshot_every") ? to_int(s, "output.snapshot_every") : 1;
    r.output.save_intermediates = s.count("output.save_intermediates") && to_bool(s, "output.save_intermediates");
    if (r.output.snapshot_every < 1) throw ConfigError("output.snapshot_every must be >= 1");
    r.settings = std::move(s);
    return r;
}

}  // namespace pff
