#include "pff/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>

#include <fmt/format.h>

namespace pff {

namespace {

double signed_measure_of(const Mesh& m, const Element& el) {
    const auto& a = m.nodes[el.v[0]].x;
    const auto& b = m.nodes[el.v[1]].x;
    const auto& c = m.nodes[el.v[2]].x;
    if (m.dim == 2) {
        return 0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]));
    }
    const auto& d = m.nodes[el.v[3]].x;
    const double e1[3] = {b[0] - a[0], b[1] - a[1], b[2] - a[2]};
    const double e2[3] = {c[0] - a[0], c[1] - a[1], c[2] - a[2]};
    const double e3[3] = {d[0] - a[0], d[1] - a[1], d[2] - a[2]};
    const double det = e1[0] * (e2[1] * e3[2] - e2[2] * e3[1]) -
                       e1[1] * (e2[0] * e3[2] - e2[2] * e3[0]) +
                       e1[2] * (e2[0] * e3[1] - e2[1] * e3[0]);
    return det / 6.0;
}

void orient_positive(const Mesh& m, Element& el) {
    if (signed_measure_of(m, el) < 0.0) {
        if (m.dim == 2) {
            std::swap(el.v[1], el.v[2]);
        } else {
            std::swap(el.v[2], el.v[3]);
        }
    }
}

Facet sorted_key(Facet f, int n) {
    std::sort(f.begin(), f.begin() + n);
    return f;
}

std::vector<Facet> element_faces(const Mesh& m, const Element& el) {
    if (m.dim == 2) {
        return {Facet{el.v[0], el.v[1], -1}, Facet{el.v[1], el.v[2], -1},
                Facet{el.v[2], el.v[0], -1}};
    }
    return {Facet{el.v[1], el.v[2], el.v[3]}, Facet{el.v[0], el.v[3], el.v[2]},
            Facet{el.v[0], el.v[1], el.v[3]}, Facet{el.v[0], el.v[2], el.v[1]}};
}

std::vector<std::string> split_ws(const std::string& line) {
    std::istringstream is(line);
    std::vector<std::string> out;
    std::string tok;
    while (is >> tok) out.push_back(tok);
    return out;
}

int to_int(const std::string& s, int line_no) {
    try {
        std::size_t pos = 0;
        const int v = std::stoi(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw MeshError(fmt::format("gmsh: line {}: expected integer, got '{}'", line_no, s));
    }
}

double to_double(const std::string& s, int line_no) {
    // strtod, unlike stod, accepts subnormal values.
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size()) {
        throw MeshError(fmt::format("gmsh: line {}: expected number, got '{}'", line_no, s));
    }
    return v;
}

int gmsh_entity_dim(int type) {
    switch (type) {
        case 15: return 0;
        case 1: case 8: return 1;
        case 2: case 3: case 9: return 2;
        default: return 3;
    }
}

}  // namespace

double Mesh::signed_measure(std::size_t e) const { return signed_measure_of(*this, elements[e]); }

double Mesh::total_measure() const {
    double s = 0.0;
    for (std::size_t e = 0; e < elements.size(); ++e) s += signed_measure(e);
    return s;
}

const std::vector<int>& Mesh::node_set(const std::string& tag) const {
    auto it = node_sets.find(tag);
    if (it == node_sets.end()) throw MeshError("unknown node set '" + tag + "'");
    return it->second;
}

void Mesh::validate() const {
    if (dim != 2 && dim != 3) throw MeshError(fmt::format("unsupported dimension {}", dim));
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (nodes[i].id != static_cast<int>(i)) throw MeshError("node ids are not contiguous");
        for (double c : nodes[i].x) {
            if (!std::isfinite(c)) throw MeshError(fmt::format("node {} has a non-finite coordinate", i));
        }
    }
    const int nv = vertices_per_element();
    const int nn = static_cast<int>(nodes.size());
    for (std::size_t e = 0; e < elements.size(); ++e) {
        for (int k = 0; k < nv; ++k) {
            const int v = elements[e].v[k];
            if (v < 0 || v >= nn) throw MeshError(fmt::format("element {} references missing node {}", e, v));
        }
        if (!(signed_measure(e) > 0.0)) {
            throw MeshError(fmt::format("element {} has non-positive measure", e));
        }
    }
    for (const auto& [tag, ids] : node_sets) {
        for (int v : ids) {
            if (v < 0 || v >= nn) throw MeshError("node set '" + tag + "' references a missing node");
        }
    }
}

std::vector<Facet> boundary_facets(const Mesh& mesh) {
    const int nf = mesh.vertices_per_facet();
    std::map<Facet, std::pair<int, Facet>> count;
    for (const auto& el : mesh.elements) {
        for (const auto& f : element_faces(mesh, el)) {
            auto& slot = count[sorted_key(f, nf)];
            if (slot.first == 0) slot.second = f;
            ++slot.first;
        }
    }
    std::vector<Facet> out;
    for (const auto& [key, val] : count) {
        if (val.first == 1) out.push_back(val.second);
    }
    return out;
}

Mesh parse_gmsh(std::string_view text) {
    std::istringstream in{std::string(text)};
    std::string line;
    int line_no = 0;
    auto next_line = [&](const char* what) -> std::string {
        if (!std::getline(in, line)) {
            throw MeshError(fmt::format("gmsh: unexpected end of input while reading {}", what));
        }
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return line;
    };
    auto expect_end = [&](const std::string& section) {
        const std::string l = next_line(section.c_str());
        if (l != "$End" + section) {
            throw MeshError(fmt::format("gmsh: line {}: expected $End{}, got '{}'", line_no, section, l));
        }
    };

    bool have_format = false;
    std::map<std::pair<int, int>, std::string> phys_names;  // (dim, tag) -> name
    std::vector<Point> coords;
    std::unordered_map<long, int> id_map;

    struct RawElement {
        int type;
        int phys;
        std::vector<long> nodes;
        int line_no;
    };
    std::vector<RawElement> raw;

    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] != '$') throw MeshError(fmt::format("gmsh: line {}: expected section header, got '{}'", line_no, line));
        const std::string section = line.substr(1);
        if (section.rfind("End", 0) == 0) {
            throw MeshError(fmt::format("gmsh: line {}: unmatched '{}'", line_no, line));
        }
        if (section == "MeshFormat") {
            const auto tok = split_ws(next_line("MeshFormat"));
            if (tok.size() < 3) throw MeshError(fmt::format("gmsh: line {}: malformed $MeshFormat", line_no));
            if (tok[0].rfind("2", 0) != 0) {
                throw MeshError("gmsh: only format version 2.x is supported, got " + tok[0]);
            }
            if (tok[1] != "0") throw MeshError("gmsh: binary files are not supported");
            expect_end(section);
            have_format = true;
        } else if (section == "PhysicalNames") {
            const int n = to_int(split_ws(next_line("PhysicalNames")).at(0), line_no);
            for (int i = 0; i < n; ++i) {
                const std::string l = next_line("PhysicalNames");
                const auto tok = split_ws(l);
                if (tok.size() < 3) throw MeshError(fmt::format("gmsh: line {}: malformed physical name", line_no));
                const int pd = to_int(tok[0], line_no);
                const int tag = to_int(tok[1], line_no);
                const auto q0 = l.find('"');
                const auto q1 = l.rfind('"');
                std::string name = (q0 != std::string::npos && q1 > q0) ? l.substr(q0 + 1, q1 - q0 - 1) : tok[2];
                phys_names[{pd, tag}] = name;
            }
            expect_end(section);
        } else if (section == "Nodes") {
            if (!have_format) throw MeshError("gmsh: $Nodes before $MeshFormat");
            const auto head = split_ws(next_line("Nodes"));
            if (head.size() != 1) throw MeshError(fmt::format("gmsh: line {}: malformed node count", line_no));
            const int n = to_int(head[0], line_no);
            coords.reserve(n);
            for (int i = 0; i < n; ++i) {
                const auto tok = split_ws(next_line("Nodes"));
                if (tok.size() != 4) throw MeshError(fmt::format("gmsh: line {}: malformed node record", line_no));
                const long id = to_int(tok[0], line_no);
                if (!id_map.emplace(id, static_cast<int>(coords.size())).second) {
                    throw MeshError(fmt::format("gmsh: line {}: duplicate node id {}", line_no, id));
                }
                coords.push_back({to_double(tok[1], line_no), to_double(tok[2], line_no), to_double(tok[3], line_no)});
            }
            expect_end(section);
        } else if (section == "Elements") {
            if (!have_format) throw MeshError("gmsh: $Elements before $MeshFormat");
            const auto head = split_ws(next_line("Elements"));
            if (head.size() != 1) throw MeshError(fmt::format("gmsh: line {}: malformed element count", line_no));
            const int n = to_int(head[0], line_no);
            raw.reserve(n);
            for (int i = 0; i < n; ++i) {
                const auto tok = split_ws(next_line("Elements"));
                if (tok.size() < 3) throw MeshError(fmt::format("gmsh: line {}: malformed element record", line_no));
                RawElement re{to_int(tok[1], line_no), 0, {}, line_no};
                const int ntags = to_int(tok[2], line_no);
                if (static_cast<int>(tok.size()) < 3 + ntags) {
                    throw MeshError(fmt::format("gmsh: line {}: truncated element tags", line_no));
                }
                if (ntags > 0) re.phys = to_int(tok[3], line_no);
                for (std::size_t k = 3 + ntags; k < tok.size(); ++k) re.nodes.push_back(to_int(tok[k], line_no));
                raw.push_back(std::move(re));
            }
            expect_end(section);
        } else {
            // Unknown section: skip to its end marker.
            const std::string end = "$End" + section;
            bool closed = false;
            while (std::getline(in, line)) {
                ++line_no;
                if (!line.empty() && line.back() == '\r') line.pop_back();
                if (line == end) {
                    closed = true;
                    break;
                }
            }
            if (!closed) throw MeshError("gmsh: unterminated section $" + section);
        }
    }
    if (!have_format) throw MeshError("gmsh: missing $MeshFormat section");

    Mesh mesh;
    const bool has_tets = std::any_of(raw.begin(), raw.end(), [](const RawElement& r) { return r.type == 4; });
    const bool has_tris = std::any_of(raw.begin(), raw.end(), [](const RawElement& r) { return r.type == 2; });
    if (!has_tets && !has_tris) throw MeshError("gmsh: no triangle or tetrahedron elements");
    mesh.dim = has_tets ? 3 : 2;

    mesh.nodes.resize(coords.size());
    for (std::size_t i = 0; i < coords.size(); ++i) {
        mesh.nodes[i].id = static_cast<int>(i);
        mesh.nodes[i].x = coords[i];
        if (mesh.dim == 2) mesh.nodes[i].x[2] = 0.0;
    }

    auto resolve = [&](const RawElement& re, long gid) {
        auto it = id_map.find(gid);
        if (it == id_map.end()) {
            throw MeshError(fmt::format("gmsh: line {}: element references missing node {}", re.line_no, gid));
        }
        return it->second;
    };
    auto name_of = [&](int pd, int tag) {
        auto it = phys_names.find({pd, tag});
        return it != phys_names.end() ? it->second : std::to_string(tag);
    };

    const int vol_type = mesh.dim == 3 ? 4 : 2;
    std::map<std::string, std::set<int>> sets;
    std::map<std::string, std::vector<Facet>> facets;
    for (const auto& re : raw) {
        if (re.type == vol_type) {
            if (re.nodes.size() != static_cast<std::size_t>(mesh.dim + 1)) {
                throw MeshError(fmt::format("gmsh: line {}: wrong vertex count", re.line_no));
            }
            Element el;
            el.id = static_cast<int>(mesh.elements.size());
            for (int k = 0; k <= mesh.dim; ++k) el.v[k] = resolve(re, re.nodes[k]);
            orient_positive(mesh, el);
            mesh.elements.push_back(el);
            continue;
        }
        const int ed = gmsh_entity_dim(re.type);
        std::vector<int> ids;
        for (long g : re.nodes) ids.push_back(resolve(re, g));
        if (re.phys == 0 || ed >= mesh.dim) continue;
        const std::string name = name_of(ed, re.phys);
        sets[name].insert(ids.begin(), ids.end());
        const bool is_facet = (mesh.dim == 2 && re.type == 1) || (mesh.dim == 3 && re.type == 2);
        if (is_facet) {
            Facet f{-1, -1, -1};
            for (int k = 0; k < mesh.dim; ++k) f[k] = ids[k];
            facets[name].push_back(f);
        }
    }
    for (auto& [name, s] : sets) mesh.node_sets[name] = std::vector<int>(s.begin(), s.end());

    // Only facets on the geometric boundary become side sets.
    std::set<Facet> bnd;
    for (const auto& f : boundary_facets(mesh)) bnd.insert(sorted_key(f, mesh.dim));
    for (auto& [name, fs] : facets) {
        std::vector<Facet> kept;
        for (const auto& f : fs) {
            if (bnd.count(sorted_key(f, mesh.dim))) kept.push_back(f);
        }
        if (!kept.empty()) mesh.side_sets[name] = std::move(kept);
    }
    mesh.validate();
    return mesh;
}

Mesh read_gmsh(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw MeshError("cannot open mesh file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_gmsh(ss.str());
}

std::string write_gmsh(const Mesh& mesh) {
    std::string out = "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n";
    int tag = 1;
    std::vector<std::tuple<int, int, std::string>> names;
    std::map<std::string, int> node_tag, side_tag;
    for (const auto& [name, ids] : mesh.node_sets) {
        node_tag[name] = tag;
        names.emplace_back(0, tag++, name);
    }
    for (const auto& [name, fs] : mesh.side_sets) {
        side_tag[name] = tag;
        names.emplace_back(mesh.dim - 1, tag++, name);
    }
    if (!names.empty()) {
        out += fmt::format("$PhysicalNames\n{}\n", names.size());
        for (const auto& [d, t, n] : names) out += fmt::format("{} {} \"{}\"\n", d, t, n);
        out += "$EndPhysicalNames\n";
    }
    out += fmt::format("$Nodes\n{}\n", mesh.nodes.size());
    for (const auto& n : mesh.nodes) {
        out += fmt::format("{} {:.17g} {:.17g} {:.17g}\n", n.id + 1, n.x[0], n.x[1], n.x[2]);
    }
    out += "$EndNodes\n";

    std::size_t count = mesh.elements.size();
    for (const auto& [name, ids] : mesh.node_sets) count += ids.size();
    for (const auto& [name, fs] : mesh.side_sets) count += fs.size();
    out += fmt::format("$Elements\n{}\n", count);
    std::size_t eid = 1;
    for (const auto& [name, ids] : mesh.node_sets) {
        for (int v : ids) out += fmt::format("{} 15 2 {} {} {}\n", eid++, node_tag[name], node_tag[name], v + 1);
    }
    const int facet_type = mesh.dim == 2 ? 1 : 2;
    for (const auto& [name, fs] : mesh.side_sets) {
        for (const auto& f : fs) {
            out += fmt::format("{} {} 2 {} {}", eid++, facet_type, side_tag[name], side_tag[name]);
            for (int k = 0; k < mesh.dim; ++k) out += fmt::format(" {}", f[k] + 1);
            out += "\n";
        }
    }
    const int vol_type = mesh.dim == 2 ? 2 : 4;
    for (const auto& el : mesh.elements) {
        out += fmt::format("{} {} 2 0 1", eid++, vol_type);
        for (int k = 0; k <= mesh.dim; ++k) out += fmt::format(" {}", el.v[k] + 1);
        out += "\n";
    }
    out += "$EndElements\n";
    return out;
}

std::vector<double> graded_axis(double lo, double hi, double fine_h, double band_lo, double band_hi,
                                double coarse_h, std::vector<double> through) {
    if (!(hi > lo)) throw MeshError("graded_axis: empty interval");
    if (!(fine_h > 0.0) || !(coarse_h > 0.0)) throw MeshError("graded_axis: spacing must be positive");
    std::vector<double> cuts{lo, hi};
    for (double c : {band_lo, band_hi}) {
        if (c > lo && c < hi) cuts.push_back(c);
    }
    for (double c : through) {
        if (c > lo && c < hi) cuts.push_back(c);
    }
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end(), [](double a, double b) { return std::abs(a - b) < 1e-12; }),
               cuts.end());
    std::vector<double> pts{cuts.front()};
    for (std::size_t s = 0; s + 1 < cuts.size(); ++s) {
        const double a = cuts[s], b = cuts[s + 1];
        const double mid = 0.5 * (a + b);
        const double h = (mid >= band_lo && mid <= band_hi) ? fine_h : coarse_h;
        const int n = std::max(1, static_cast<int>(std::ceil((b - a) / h - 1e-9)));
        for (int i = 1; i < n; ++i) pts.push_back(a + (b - a) * i / n);
        pts.push_back(b);
    }
    return pts;
}

Mesh generate_grid(const std::vector<std::vector<double>>& axes) {
    const int dim = static_cast<int>(axes.size());
    if (dim != 2 && dim != 3) throw MeshError("generate_grid: dimension must be 2 or 3");
    for (const auto& ax : axes) {
        if (ax.size() < 2) throw MeshError("generate_grid: each axis needs at least two coordinates");
        for (std::size_t i = 1; i < ax.size(); ++i) {
            if (!(ax[i] > ax[i - 1])) throw MeshError("generate_grid: axis coordinates must increase strictly");
        }
    }
    Mesh mesh;
    mesh.dim = dim;
    const int nx = static_cast<int>(axes[0].size());
    const int ny = static_cast<int>(axes[1].size());
    const int nz = dim == 3 ? static_cast<int>(axes[2].size()) : 1;
    auto nid = [&](int i, int j, int k) { return i + nx * (j + ny * k); };
    mesh.nodes.reserve(static_cast<std::size_t>(nx) * ny * nz);
    for (int k = 0; k < nz; ++k) {
        for (int j = 0; j < ny; ++j) {
            for (int i = 0; i < nx; ++i) {
                Node n;
                n.id = nid(i, j, k);
                n.x = {axes[0][i], axes[1][j], dim == 3 ? axes[2][k] : 0.0};
                mesh.nodes.push_back(n);
            }
        }
    }
    auto push = [&](std::array<int, 4> v) {
        Element el;
        el.id = static_cast<int>(mesh.elements.size());
        el.v = v;
        orient_positive(mesh, el);
        mesh.elements.push_back(el);
    };
    if (dim == 2) {
        for (int j = 0; j + 1 < ny; ++j) {
            for (int i = 0; i + 1 < nx; ++i) {
                const int a = nid(i, j, 0), b = nid(i + 1, j, 0), c = nid(i + 1, j + 1, 0), d = nid(i, j + 1, 0);
                push({a, b, c, -1});
                push({a, c, d, -1});
            }
        }
    } else {
        // Kuhn split: one tetrahedron per monotone path from corner 000 to 111.
        static constexpr int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
        for (int k = 0; k + 1 < nz; ++k) {
            for (int j = 0; j + 1 < ny; ++j) {
                for (int i = 0; i + 1 < nx; ++i) {
                    for (const auto& p : perms) {
                        std::array<int, 3> off{0, 0, 0};
                        std::array<int, 4> v{};
                        v[0] = nid(i, j, k);
                        for (int s = 0; s < 3; ++s) {
                            off[p[s]] = 1;
                            v[s + 1] = nid(i + off[0], j + off[1], k + off[2]);
                        }
                        push(v);
                    }
                }
            }
        }
    }
    tag_box_faces(mesh);
    return mesh;
}

Mesh generate_structured(int dim, const std::vector<double>& extents, const std::vector<int>& divisions) {
    if (dim != 2 && dim != 3) throw MeshError("generate_structured: dimension must be 2 or 3");
    if (static_cast<int>(extents.size()) != dim || static_cast<int>(divisions.size()) != dim) {
        throw MeshError("generate_structured: extents/divisions must have one entry per axis");
    }
    std::vector<std::vector<double>> axes(dim);
    for (int d = 0; d < dim; ++d) {
        if (!(extents[d] > 0.0)) throw MeshError("generate_structured: extents must be positive");
        if (divisions[d] < 1) throw MeshError("generate_structured: divisions must be >= 1");
        for (int i = 0; i <= divisions[d]; ++i) axes[d].push_back(extents[d] * i / divisions[d]);
    }
    return generate_grid(axes);
}

void tag_box_faces(Mesh& mesh, double tol) {
    static const char* names[3][2] = {{"xmin", "xmax"}, {"ymin", "ymax"}, {"zmin", "zmax"}};
    for (int d = 0; d < mesh.dim; ++d) {
        double lo = mesh.nodes.front().x[d], hi = lo;
        for (const auto& n : mesh.nodes) {
            lo = std::min(lo, n.x[d]);
            hi = std::max(hi, n.x[d]);
        }
        mesh.node_sets[names[d][0]] = select_nodes(mesh, [d, lo](const Point& x) { return x[d] - lo; }, tol);
        mesh.node_sets[names[d][1]] = select_nodes(mesh, [d, hi](const Point& x) { return x[d] - hi; }, tol);
    }
}

void insert_slit(Mesh& mesh, const Slit& slit) {
    const int n0 = static_cast<int>(mesh.nodes.size());
    std::vector<int> twin(n0, -1);
    for (int i = 0; i < n0; ++i) {
        const auto& x = mesh.nodes[i].x;
        if (std::abs(x[slit.axis] - slit.offset) <= slit.tol && (!slit.inside || slit.inside(x))) {
            Node n;
            n.id = static_cast<int>(mesh.nodes.size());
            n.x = x;
            twin[i] = n.id;
            mesh.nodes.push_back(n);
        }
    }
    const int nv = mesh.vertices_per_element();
    for (auto& el : mesh.elements) {
        double c = 0.0;
        for (int k = 0; k < nv; ++k) c += mesh.nodes[el.v[k]].x[slit.axis];
        c /= nv;
        if (c <= slit.offset) continue;
        for (int k = 0; k < nv; ++k) {
            if (el.v[k] < n0 && twin[el.v[k]] >= 0) el.v[k] = twin[el.v[k]];
        }
    }
    for (auto& [tag, ids] : mesh.node_sets) {
        std::vector<int> extra;
        for (int v : ids) {
            if (v < n0 && twin[v] >= 0) extra.push_back(twin[v]);
        }
        ids.insert(ids.end(), extra.begin(), extra.end());
        std::sort(ids.begin(), ids.end());
    }
    if (!mesh.side_sets.empty()) {
        // A facet moves to the twins when the twinned version is a boundary facet.
        std::set<Facet> bnd;
        for (const auto& f : boundary_facets(mesh)) bnd.insert(sorted_key(f, mesh.dim));
        for (auto& [tag, fs] : mesh.side_sets) {
            for (auto& f : fs) {
                if (bnd.count(sorted_key(f, mesh.dim))) continue;
                Facet g = f;
                for (int k = 0; k < mesh.dim; ++k) {
                    if (g[k] < n0 && twin[g[k]] >= 0) g[k] = twin[g[k]];
                }
                f = g;
            }
        }
    }
}

std::vector<int> select_nodes(const Mesh& mesh, const CoordPredicate& f, double tol) {
    if (!(tol > 0.0)) throw MeshError("select_nodes: tolerance must be positive");
    std::vector<int> out;
    for (const auto& n : mesh.nodes) {
        if (std::abs(f(n.x)) <= tol) out.push_back(n.id);
    }
    return out;
}

}  // namespace pff
