#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace pff {

using Point = std::array<double, 3>;

class MeshError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Node {
    int id = 0;
    Point x{0.0, 0.0, 0.0};  // mm; z unused in 2-D
};

/// Linear simplex: 3 vertices in 2-D, 4 in 3-D. Unused trailing slots are -1.
struct Element {
    int id = 0;
    std::array<int, 4> v{-1, -1, -1, -1};
};

/// Boundary facet: 2 vertices (edge) in 2-D, 3 (triangle) in 3-D.
using Facet = std::array<int, 3>;

struct Mesh {
    int dim = 2;
    std::vector<Node> nodes;
    std::vector<Element> elements;
    std::map<std::string, std::vector<int>> node_sets;
    std::map<std::string, std::vector<Facet>> side_sets;

    int vertices_per_element() const { return dim + 1; }
    int vertices_per_facet() const { return dim; }
    std::size_t num_nodes() const { return nodes.size(); }
    std::size_t num_elements() const { return elements.size(); }

    /// Signed area (2-D) or volume (3-D) under the stored vertex order.
    double signed_measure(std::size_t e) const;
    double total_measure() const;

    const std::vector<int>& node_set(const std::string& tag) const;

    /// Throws MeshError on dangling references or non-positive elements.
    void validate() const;
};

/// Gmsh ASCII 2.2 reader. Keeps triangles (type 2) or tetrahedra (type 4);
/// lower-dimensional physical entities become node sets and side sets.
Mesh parse_gmsh(std::string_view text);
Mesh read_gmsh(const std::filesystem::path& path);

/// Writes the mesh back as Gmsh ASCII 2.2 with 17 significant digits.
/// Node sets become point entities, side sets line/triangle entities.
std::string write_gmsh(const Mesh& mesh);

/// Uniform box mesh: 2 triangles per cell in 2-D, 6 tetrahedra per cell in 3-D.
/// Adds the node sets xmin, xmax, ymin, ymax (and zmin, zmax).
Mesh generate_structured(int dim, const std::vector<double>& extents,
                         const std::vector<int>& divisions);

/// Tensor-product grid through the given (strictly increasing) axis
/// coordinates. Same triangulation and auto node sets as generate_structured.
Mesh generate_grid(const std::vector<std::vector<double>>& axes);

/// Axis coordinates from lo to hi: spacing <= fine_h inside [band_lo, band_hi],
/// <= coarse_h elsewhere; every value in `through` becomes a grid line.
std::vector<double> graded_axis(double lo, double hi, double fine_h,
                                double band_lo, double band_hi, double coarse_h,
                                std::vector<double> through = {});

/// Planar cut opened by duplicating nodes: nodes on plane x[axis] == offset for
/// which `inside` holds get a twin; elements on the positive side are moved to
/// the twins. The crack front (where `inside` is false) stays shared.
struct Slit {
    int axis = 1;
    double offset = 0.0;
    std::function<bool(const Point&)> inside;
    double tol = 1e-9;
};
void insert_slit(Mesh& mesh, const Slit& slit);

/// Residual-style coordinate predicate: a node matches when |f(x)| <= tol.
using CoordPredicate = std::function<double(const Point&)>;

std::vector<int> select_nodes(const Mesh& mesh, const CoordPredicate& f,
                              double tol = 1e-8);

/// Recomputes xmin/xmax/... from the bounding box.
void tag_box_faces(Mesh& mesh, double tol = 1e-8);

/// Facets that belong to exactly one element.
std::vector<Facet> boundary_facets(const Mesh& mesh);

}  // namespace pff
