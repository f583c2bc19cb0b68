#include "pff/presets.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace pff {

namespace {

// Removes elements matching `drop` and any node left without an element.
void drop_elements(Mesh& mesh, const std::function<bool(const Point&)>& drop) {
    const int nv = mesh.vertices_per_element();
    std::vector<Element> kept;
    for (const auto& el : mesh.elements) {
        Point c{0.0, 0.0, 0.0};
        for (int k = 0; k < nv; ++k) {
            for (int i = 0; i < 3; ++i) c[i] += mesh.nodes[el.v[k]].x[i] / nv;
        }
        if (!drop(c)) kept.push_back(el);
    }
    std::vector<int> remap(mesh.nodes.size(), -1);
    for (const auto& el : kept) {
        for (int k = 0; k < nv; ++k) remap[el.v[k]] = 0;
    }
    std::vector<Node> nodes;
    for (std::size_t i = 0; i < mesh.nodes.size(); ++i) {
        if (remap[i] < 0) continue;
        remap[i] = static_cast<int>(nodes.size());
        Node n = mesh.nodes[i];
        n.id = remap[i];
        nodes.push_back(n);
    }
    for (std::size_t e = 0; e < kept.size(); ++e) {
        kept[e].id = static_cast<int>(e);
        for (int k = 0; k < nv; ++k) kept[e].v[k] = remap[kept[e].v[k]];
    }
    mesh.nodes = std::move(nodes);
    mesh.elements = std::move(kept);
    for (auto& [tag, ids] : mesh.node_sets) {
        std::vector<int> out;
        for (int v : ids) {
            if (remap[v] >= 0) out.push_back(remap[v]);
        }
        ids = std::move(out);
    }
}

void alias_square_sides(Mesh& mesh) {
    mesh.node_sets["bottom"] = mesh.node_sets.at("ymin");
    mesh.node_sets["top"] = mesh.node_sets.at("ymax");
    mesh.node_sets["left"] = mesh.node_sets.at("xmin");
    mesh.node_sets["right"] = mesh.node_sets.at("xmax");
    mesh.node_sets["origin"] = select_nodes(mesh, [](const Point& x) { return std::hypot(x[0], x[1]); });
}

Mesh notched_square(double h, double coarse, double band_x0, double band_y0, double band_y1) {
    const auto xs = graded_axis(0.0, 1.0, h, band_x0, 1.0, coarse, {0.5});
    const auto ys = graded_axis(0.0, 1.0, h, band_y0, band_y1, coarse, {0.5});
    Mesh m = generate_grid({xs, ys});
    insert_slit(m, Slit{1, 0.5, [](const Point& x) { return x[0] < 0.5 - 1e-9; }});
    alias_square_sides(m);
    return m;
}

std::string num(double v) { return fmt::format("{}", v); }

}  // namespace

std::vector<std::string> preset_names() { return {"sent", "sens", "lshape", "bend3d"}; }

double band_size(double h_ref, double ell, double scale) {
    if (!(scale > 0.0 && scale <= 1.0)) throw ConfigError("scale must lie in (0, 1]");
    return std::min(h_ref, 0.5 * ell) / scale;
}

Mesh sent_mesh(double h, double coarse) {
    // Straight crack path along y = 0.5 from the slit tip to the right edge.
    return notched_square(h, coarse, 0.45, 0.4, 0.6);
}

Mesh sens_mesh(double h, double coarse) {
    // The crack kinks down towards the lower right corner.
    return notched_square(h, coarse, 0.45, 0.0, 0.55);
}

Mesh lshape_mesh(double h, double coarse) {
    const auto xs = graded_axis(0.0, 500.0, h, 0.0, 275.0, coarse, {250.0, 470.0});
    const auto ys = graded_axis(0.0, 500.0, h, 225.0, 350.0, coarse, {250.0});
    const auto zs = graded_axis(0.0, 100.0, coarse, 0.0, 0.0, std::min(coarse, 25.0));
    Mesh m = generate_grid({xs, ys, zs});
    drop_elements(m, [](const Point& c) { return c[0] > 250.0 && c[1] < 250.0; });
    m.node_sets.clear();
    tag_box_faces(m);
    m.node_sets["bottom"] = select_nodes(m, [](const Point& x) { return x[1]; });
    m.node_sets["load"] = select_nodes(m, [](const Point& x) { return std::hypot(x[0] - 470.0, x[1] - 250.0); });
    return m;
}

Mesh bend3d_mesh(double h, double coarse) {
    const auto xs = graded_axis(0.0, 100.0, coarse, 0.0, 0.0, std::min(coarse, 25.0));
    const auto ys = graded_axis(0.0, 840.0, h, 390.0, 450.0, coarse, {20.0, 420.0, 820.0});
    const auto zs = graded_axis(-100.0, 0.0, h, -100.0, 0.0, coarse, {-50.0});
    Mesh m = generate_grid({xs, ys, zs});
    // Notch from the supported face z = 0 up to mid-height.
    insert_slit(m, Slit{1, 420.0, [](const Point& x) { return x[2] > -50.0 + 1e-9; }});
    m.node_sets["support1"] = select_nodes(m, [](const Point& x) { return std::hypot(x[1] - 20.0, x[2]); });
    m.node_sets["support2"] = select_nodes(m, [](const Point& x) { return std::hypot(x[1] - 820.0, x[2]); });
    m.node_sets["load"] = select_nodes(m, [](const Point& x) { return std::hypot(x[1] - 420.0, x[2] + 100.0); });
    return m;
}

Settings load_preset(const std::string& name, double scale) {
    if (!(scale > 0.0 && scale <= 1.0)) throw ConfigError("scale must lie in (0, 1]");
    Settings s;
    s["run.preset"] = name;
    s["run.scale"] = num(scale);
    s["mesh.generator"] = name;
    s["mesh.coarse_factor"] = "4";
    s["material.k"] = "1e-4";
    s["material.dissipation"] = "AT2";
    s["backtrack.K"] = "50";
    s["backtrack.eta"] = "1e-5";
    s["solver.tol_u"] = "1e-5";
    s["solver.tol_a"] = "1e-5";
    s["solver.max_newton"] = "50";
    s["solver.max_alt"] = "10000";
    s["solver.clamp_damage"] = "true";
    s["output.snapshot_every"] = "1";
    if (name == "sent" || name == "sens") {
        s["material.lambda"] = "121.1538";
        s["material.mu"] = "80.7692";
        s["material.gc"] = "2.7";
        s["mesh.h_ref"] = "0.005";
        s["program.dw"] = "1e-4";
        if (name == "sent") {
            s["material.ell"] = "0.0175";
            s["material.eps_pen"] = "1e-6";
            s["program.steps"] = "150";
            s["program.dirichlet"] = "bottom:y:0; origin:x:0; top:x:0; top:y:ramp";
            s["program.reaction"] = "top:y";
        } else {
            s["material.ell"] = "0.001";
            s["material.eps_pen"] = "1e-5";
            s["program.steps"] = "200";
            s["program.dirichlet"] = "bottom:x:0; top:x:ramp; bottom:y:0; top:y:0; left:y:0; right:y:0";
            s["program.reaction"] = "top:x";
        }
    } else if (name == "lshape") {
        s["material.E"] = "25.85";
        s["material.nu"] = "0.18";
        s["material.gc"] = "0.095";
        s["material.ell"] = "20";
        s["material.eps_pen"] = "1e-4";
        s["mesh.h_ref"] = "6.25";
        s["program.steps"] = "600";
        s["program.dw"] = "1e-3";
        s["program.dirichlet"] = "bottom:x:0; bottom:y:0; bottom:z:0; load:y:ramp";
        s["program.reaction"] = "load:y";
    } else if (name == "bend3d") {
        s["material.E"] = "39.0";
        s["material.nu"] = "0.15";
        s["material.gc"] = "0.04";
        s["material.ell"] = "15";
        s["material.eps_pen"] = "1e-4";
        s["mesh.h_ref"] = "1";
        s["program.steps"] = "700";
        s["program.dw"] = "1e-3";
        s["program.dirichlet"] = "support1:x:0; support1:y:0; support1:z:0; support2:z:0; load:z:ramp";
        s["program.reaction"] = "load:z";
    } else {
        throw ConfigError(fmt::format("unknown preset '{}' (known: sent, sens, lshape, bend3d)", name));
    }
    return s;
}

}  // namespace pff
