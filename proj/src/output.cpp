#include "pff/output.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <boost/algorithm/string.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "pff/parallel.hpp"

namespace pff {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

std::string format_real(double v) { return fmt::format("{:.17g}", v); }

void write_atomic(const fs::path& path, const std::string& text) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw OutputError("cannot write " + tmp.string());
        out << text;
        out.flush();
        if (!out) throw OutputError("write failed for " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw OutputError(fmt::format("cannot rename {} to {}: {}", tmp.string(), path.string(), ec.message()));
}

std::string vtk_text(const Mesh& mesh, const Vec& displacement, const Vec& damage, const std::string& title) {
    const std::size_t np = mesh.nodes.size();
    const int dim = mesh.dim;
    const int nv = mesh.vertices_per_element();
    if (displacement.size() != static_cast<Eigen::Index>(np * dim) || damage.size() != static_cast<Eigen::Index>(np)) {
        throw OutputError("vtk: field sizes do not match the mesh");
    }
    std::string s;
    s.reserve(np * 120 + mesh.elements.size() * 30);
    auto out = std::back_inserter(s);
    fmt::format_to(out, "# vtk DataFile Version 3.0\n{}\nASCII\nDATASET UNSTRUCTURED_GRID\n", title);
    fmt::format_to(out, "POINTS {} double\n", np);
    for (const auto& n : mesh.nodes) {
        fmt::format_to(out, "{:.17g} {:.17g} {:.17g}\n", n.x[0], n.x[1], dim == 3 ? n.x[2] : 0.0);
    }
    fmt::format_to(out, "CELLS {} {}\n", mesh.elements.size(), mesh.elements.size() * (nv + 1));
    for (const auto& el : mesh.elements) {
        fmt::format_to(out, "{}", nv);
        for (int k = 0; k < nv; ++k) fmt::format_to(out, " {}", el.v[k]);
        s += '\n';
    }
    fmt::format_to(out, "CELL_TYPES {}\n", mesh.elements.size());
    const int type = dim == 2 ? 5 : 10;
    for (std::size_t e = 0; e < mesh.elements.size(); ++e) fmt::format_to(out, "{}\n", type);
    fmt::format_to(out, "POINT_DATA {}\nVECTORS displacement double\n", np);
    for (std::size_t i = 0; i < np; ++i) {
        const double z = dim == 3 ? displacement(i * 3 + 2) : 0.0;
        fmt::format_to(out, "{:.17g} {:.17g} {:.17g}\n", displacement(i * dim), displacement(i * dim + 1), z);
    }
    fmt::format_to(out, "SCALARS damage double 1\nLOOKUP_TABLE default\n");
    for (std::size_t i = 0; i < np; ++i) fmt::format_to(out, "{:.17g}\n", damage(i));
    return s;
}

void write_vtk(const fs::path& path, const Mesh& mesh, const Vec& displacement, const Vec& damage,
               const std::string& title) {
    write_atomic(path, vtk_text(mesh, displacement, damage, title));
}

namespace {

struct Tokens {
    std::istringstream in;
    std::string path;

    std::string word() {
        std::string w;
        if (!(in >> w)) throw OutputError("vtk: unexpected end of " + path);
        return w;
    }
    void expect(const std::string& w) {
        const std::string got = word();
        if (got != w) throw OutputError(fmt::format("vtk: expected '{}' but found '{}' in {}", w, got, path));
    }
    long integer() {
        const std::string w = word();
        try {
            return std::stol(w);
        } catch (const std::exception&) {
            throw OutputError(fmt::format("vtk: bad integer '{}' in {}", w, path));
        }
    }
    double real() {
        const std::string w = word();
        char* end = nullptr;
        const double v = std::strtod(w.c_str(), &end);
        if (end != w.c_str() + w.size()) throw OutputError(fmt::format("vtk: bad number '{}' in {}", w, path));
        return v;
    }
};

}  // namespace

VtkField read_vtk(const fs::path& path) {
    std::ifstream f(path);
    if (!f) throw OutputError("cannot open " + path.string());
    std::string line;
    std::getline(f, line);
    if (line.rfind("# vtk DataFile Version", 0) != 0) throw OutputError("not a legacy VTK file: " + path.string());
    std::getline(f, line);  // title
    std::getline(f, line);
    if (boost::algorithm::trim_copy(line) != "ASCII") throw OutputError("only ASCII VTK is supported: " + path.string());
    std::ostringstream rest;
    rest << f.rdbuf();
    Tokens t{std::istringstream(rest.str()), path.string()};

    VtkField v;
    t.expect("DATASET");
    t.expect("UNSTRUCTURED_GRID");
    std::size_t np = 0;
    std::string key;
    while (t.in >> key) {
        if (key == "POINTS") {
            np = static_cast<std::size_t>(t.integer());
            t.word();
            v.points.resize(np);
            for (auto& p : v.points) {
                for (int i = 0; i < 3; ++i) p[i] = t.real();
            }
        } else if (key == "CELLS") {
            const long nc = t.integer();
            t.integer();
            v.cells.resize(nc);
            for (auto& c : v.cells) {
                c.resize(t.integer());
                for (auto& id : c) id = static_cast<int>(t.integer());
            }
        } else if (key == "CELL_TYPES") {
            v.cell_types.resize(t.integer());
            for (auto& ct : v.cell_types) ct = static_cast<int>(t.integer());
        } else if (key == "POINT_DATA") {
            if (static_cast<std::size_t>(t.integer()) != np) throw OutputError("vtk: POINT_DATA size mismatch");
        } else if (key == "VECTORS") {
            const std::string name = t.word();
            t.word();
            Vec data(3 * np);
            for (std::size_t i = 0; i < 3 * np; ++i) data(i) = t.real();
            if (name == "displacement") v.displacement = data;
        } else if (key == "SCALARS") {
            const std::string name = t.word();
            t.word();
            std::string w = t.word();
            if (w != "LOOKUP_TABLE") w = t.word();
            t.word();
            Vec data(np);
            for (std::size_t i = 0; i < np; ++i) data(i) = t.real();
            if (name == "damage") v.damage = data;
        } else {
            throw OutputError(fmt::format("vtk: unsupported section '{}' in {}", key, path.string()));
        }
    }
    if (v.displacement.size() == 0 || v.damage.size() == 0) {
        throw OutputError("vtk: displacement or damage missing in " + path.string());
    }
    return v;
}

fs::path snapshot_path(const fs::path& dir, int step) {
    return dir / "snapshots" / fmt::format("step_{:05d}.vtk", step);
}

std::string load_disp_csv(const RunHistory& h) {
    std::string s = "step,applied,reaction\n";
    for (const auto& r : h.accepted) {
        s += fmt::format("{},{:.17g},{:.17g}\n", r.step, r.applied, r.reaction);
    }
    return s;
}

namespace {

std::string energy_row(int step, double E, double sumD, double delta, double LB, double UB, bool passed) {
    return fmt::format("{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{}\n", step, E, sumD, delta, LB, UB,
                       passed ? "true" : "false");
}

}  // namespace

std::string energy_csv(const RunHistory& h) {
    std::string s = "step,E,sum_D,delta,LB,UB,passed\n";
    double sumD = 0.0;
    for (std::size_t n = 1; n < h.accepted.size(); ++n) {
        const EnergyReport& r = h.accepted[n].report;
        sumD += r.D_inc;
        s += energy_row(static_cast<int>(n), r.E_next, sumD, r.delta, r.LB, r.UB, r.passed);
    }
    return s;
}

RunWriter::RunWriter(const RunSetup& setup, const Problem& pb, fs::path dir)
    : setup_(setup), pb_(pb), dir_(std::move(dir)) {
    fs::create_directories(dir_ / "snapshots");
    // Leftovers from an earlier run in the same directory would confuse check-energy.
    for (const auto& entry : fs::directory_iterator(dir_ / "snapshots")) fs::remove(entry.path());
    fs::remove_all(dir_ / "intermediates");
    if (setup.output.save_intermediates) fs::create_directories(dir_ / "intermediates");
    lift_.resize(setup.program.steps + 1);
    for (int n = 0; n <= setup.program.steps; ++n) lift_[n] = lifting_for_step(setup.program, n, pb.mesh);
}

bool RunWriter::keeps_snapshot(int step, int last) const {
    const int m = setup_.output.snapshot_every;
    // Pairs (n - 1, n) are kept so that check-energy can recompute row n.
    return m == 1 || step == 0 || step == last || step % m == 0 || (step + 1) % m == 0;
}

void RunWriter::on_accept(const RunHistory& h, int from) {
    const int last = static_cast<int>(h.accepted.size()) - 1;
    for (int n = last + 1; n <= written_; ++n) fs::remove(snapshot_path(dir_, n));
    if (written_ >= 0 && written_ < last && !keeps_snapshot(written_, last)) fs::remove(snapshot_path(dir_, written_));
    for (int n = std::max(from, 0); n <= last; ++n) {
        if (!keeps_snapshot(n, last)) continue;
        const StepRecord& r = h.accepted[n];
        write_vtk(snapshot_path(dir_, n), pb_.mesh, r.U + lift_[n], r.A, fmt::format("pffrac step {}", n));
    }
    written_ = last;
    write_atomic(dir_ / "load_disp.csv", load_disp_csv(h));
    write_atomic(dir_ / "energy.csv", energy_csv(h));
}

void RunWriter::on_intermediate(const IntermediateState& st, const Vec& U, const Vec& A) {
    if (!setup_.output.save_intermediates) return;
    const fs::path p = dir_ / "intermediates" / fmt::format("step_{:05d}_b{:03d}_solve{:06d}.vtk", st.step, st.b,
                                                            st.solve_index);
    write_vtk(p, pb_.mesh, U + lift_[st.step], A,
              fmt::format("pffrac intermediate step {} b {} passed {}", st.step, st.b, st.passed));
}

void RunWriter::write_log(const RunHistory& h, const std::string& status, double seconds) const {
    json j;
    j["status"] = status;
    j["config"] = setup_.settings;
    j["resolved"] = {
        {"lambda_N_per_mm2", setup_.mat.lambda},
        {"mu_N_per_mm2", setup_.mat.mu},
        {"penalty", setup_.mat.penalty()},
        {"eta", setup_.backtrack.eta},
        {"band_h", setup_.band_h},
        {"nodes", pb_.mesh.nodes.size()},
        {"elements", pb_.mesh.elements.size()},
        {"free_dofs", pb_.dofs.n_free()},
        {"threads", thread_count()},
        {"lower_bound", setup_.backtrack.listing_lower_bound ? "listing" : "proved"},
    };
    json events = json::array();
    for (const auto& e : h.events) {
        events.push_back({{"failed_step", e.failed_step},
                          {"revisit", e.revisit},
                          {"b", e.b},
                          {"guess_from", e.guess_from},
                          {"passed", e.passed}});
    }
    j["backtrack_events"] = events;
    json forced = json::array();
    json irrev = json::array();
    for (const auto& r : h.accepted) {
        if (r.step > 0 && r.forced) forced.push_back(r.step);
        if (r.report.irreversibility_violation) irrev.push_back(r.step);
    }
    j["forced_steps"] = forced;
    j["counters"] = {
        {"accepted_steps", h.accepted.empty() ? 0 : h.accepted.size() - 1},
        {"solves", h.solves},
        {"k_exhaustions", h.k_exhaustions},
        {"alternations", h.alt_iters},
        {"newton_u", h.newton_u},
        {"newton_beta", h.newton_beta},
        {"line_search_cuts", h.line_search_cuts},
        {"intermediate_states", h.intermediates.size()},
        {"solve_budget_hit", h.guard_hit},
    };
    j["clamp"] = {{"max_projection", h.clamp_max}, {"abort_threshold", setup_.solver.clamp_abort}};
    j["diagnostics"] = {{"max_functional_ascent", h.max_ascent}, {"irreversibility_violations", irrev}};
    if (h.aborted) j["error"] = h.abort_message;
    j["wall_seconds"] = seconds;
    write_atomic(dir_ / "run.json", j.dump(2) + "\n");
}

namespace {

struct CsvRow {
    int step = 0;
    double v[5] = {0, 0, 0, 0, 0};  // E, sum_D, delta, LB, UB
    bool passed = false;
};

std::vector<CsvRow> read_energy_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw OutputError("cannot open " + path.string());
    std::string line;
    std::getline(in, line);
    std::vector<CsvRow> rows;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (boost::algorithm::trim_copy(line).empty()) continue;
        std::vector<std::string> f;
        boost::algorithm::split(f, line, boost::algorithm::is_any_of(","));
        if (f.size() != 7) throw OutputError(fmt::format("{}:{}: expected 7 fields", path.string(), lineno));
        CsvRow r;
        try {
            r.step = std::stoi(f[0]);
            for (int i = 0; i < 5; ++i) {
                char* end = nullptr;
                r.v[i] = std::strtod(f[i + 1].c_str(), &end);
                if (end == f[i + 1].c_str() || *end != '\0') throw std::invalid_argument(f[i + 1]);
            }
        } catch (const std::exception&) {
            throw OutputError(fmt::format("{}:{}: bad number", path.string(), lineno));
        }
        const std::string p = boost::algorithm::trim_copy(f[6]);
        if (p != "true" && p != "false") throw OutputError(fmt::format("{}:{}: bad passed flag", path.string(), lineno));
        r.passed = p == "true";
        rows.push_back(r);
    }
    return rows;
}

bool close(double a, double b, double scale) {
    return std::abs(a - b) <= 1e-10 * std::max({std::abs(a), std::abs(b), scale});
}

}  // namespace

int check_energy(const fs::path& dir, std::ostream& out) {
    RunSetup setup;
    std::vector<CsvRow> rows;
    try {
        std::ifstream jf(dir / "run.json");
        if (!jf) {
            out << "missing " << (dir / "run.json").string() << "\n";
            return 2;
        }
        const json j = json::parse(jf);
        setup = build_setup(j.at("config").get<Settings>());
        rows = read_energy_csv(dir / "energy.csv");
    } catch (const std::exception& e) {
        out << "cannot load run: " << e.what() << "\n";
        return 2;
    }
    Problem pb(setup.mesh, setup.mat, constrained_dofs(setup.program, setup.mesh));
    const int dim = pb.dim();

    struct State {
        Vec U, UD, A;
    };
    std::map<int, State> cache;
    auto load = [&](int n) -> const State* {
        auto it = cache.find(n);
        if (it != cache.end()) return &it->second;
        const fs::path p = snapshot_path(dir, n);
        if (!fs::exists(p)) return nullptr;
        const VtkField v = read_vtk(p);
        if (v.damage.size() != pb.n_nodes()) throw OutputError("snapshot does not match the mesh: " + p.string());
        State s;
        s.UD = lifting_for_step(setup.program, n, pb.mesh);
        s.U = Vec::Zero(pb.n_u());
        for (Eigen::Index i = 0; i < pb.n_nodes(); ++i) {
            for (int c = 0; c < dim; ++c) {
                if (!pb.dofs.fixed[i * dim + c]) s.U(i * dim + c) = v.displacement(3 * i + c);
            }
        }
        s.A = v.damage;
        if (cache.size() > 4) cache.erase(cache.begin());
        return &cache.emplace(n, std::move(s)).first->second;
    };

    int mismatches = 0, failing = 0, checked = 0;
    double Escale = 0.0;
    for (const auto& r : rows) Escale = std::max(Escale, std::abs(r.v[0]));
    double sumD = 0.0;
    bool prefix = true;  // sum_D accumulated over every row so far
    static const char* names[5] = {"E", "sum_D", "delta", "LB", "UB"};
    try {
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const CsvRow& row = rows[i];
            if (row.step != static_cast<int>(i) + 1) {
                out << fmt::format("row {}: step {} out of sequence\n", i + 1, row.step);
                ++mismatches;
                prefix = false;
                continue;
            }
            if (!row.passed) {
                out << fmt::format("step {}: fails the energy inequality (delta {:.6e}, LB {:.6e}, UB {:.6e})\n",
                                   row.step, row.v[2], row.v[3], row.v[4]);
                ++failing;
            }
            const State* prev = load(row.step - 1);
            const State* next = prev ? load(row.step) : nullptr;
            if (!prev || !next) {
                if (setup.output.snapshot_every == 1) {
                    out << fmt::format("missing snapshot for step {}\n", prev ? row.step : row.step - 1);
                    return 2;
                }
                prefix = false;
                continue;
            }
            const EnergyReport rep =
                check_two_sided(pb, row.step, {prev->U, prev->UD, prev->A, next->U, next->UD, next->A},
                                setup.backtrack.eta, setup.backtrack.listing_lower_bound);
            sumD += rep.D_inc;
            const double sd = prefix ? sumD : dis(pb, next->A) - dis(pb, Vec::Zero(pb.n_nodes()));
            const double got[5] = {rep.E_next, sd, rep.delta, rep.LB, rep.UB};
            for (int c = 0; c < 5; ++c) {
                if (!close(got[c], row.v[c], c == 0 ? 0.0 : 1e-6 * Escale)) {
                    out << fmt::format("step {}: {} in energy.csv {:.17g}, recomputed {:.17g}\n", row.step, names[c],
                                       row.v[c], got[c]);
                    ++mismatches;
                }
            }
            if (rep.passed != row.passed) {
                out << fmt::format("step {}: passed in energy.csv {}, recomputed {}\n", row.step, row.passed,
                                   rep.passed);
                ++mismatches;
            }
            ++checked;
        }
    } catch (const std::exception& e) {
        out << "cannot read snapshots: " << e.what() << "\n";
        return 2;
    }
    if (checked == 0 && !rows.empty()) {
        out << "no row could be recomputed from the snapshots\n";
        return 2;
    }
    out << fmt::format("{} rows, {} recomputed, {} mismatches, {} failing\n", rows.size(), checked, mismatches,
                       failing);
    return (mismatches == 0 && failing == 0) ? 0 : 1;
}

}  // namespace pff
