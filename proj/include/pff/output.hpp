#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "pff/config.hpp"

namespace pff {

class OutputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// 17 significant digits, enough to read back the same double.
std::string format_real(double v);

/// Writes `text` to a sibling temp file and renames it over `path`.
void write_atomic(const std::filesystem::path& path, const std::string& text);

/// Legacy ASCII VTK. `displacement` is the full nodal field (dim per node),
/// written as 3-vectors with z = 0 in 2D.
std::string vtk_text(const Mesh& mesh, const Vec& displacement, const Vec& damage, const std::string& title);
void write_vtk(const std::filesystem::path& path, const Mesh& mesh, const Vec& displacement, const Vec& damage,
               const std::string& title = "pffrac");

struct VtkField {
    std::vector<Point> points;
    std::vector<std::vector<int>> cells;
    std::vector<int> cell_types;
    Vec displacement;  // 3 per point
    Vec damage;
};

VtkField read_vtk(const std::filesystem::path& path);

std::filesystem::path snapshot_path(const std::filesystem::path& dir, int step);

std::string load_disp_csv(const RunHistory& h);
std::string energy_csv(const RunHistory& h);

/// Keeps the output directory in sync with the accepted sequence.
class RunWriter {
public:
    RunWriter(const RunSetup& setup, const Problem& pb, std::filesystem::path dir);

    void on_accept(const RunHistory& h, int from);
    void on_intermediate(const IntermediateState& st, const Vec& U, const Vec& A);
    void write_log(const RunHistory& h, const std::string& status, double seconds) const;

    const std::filesystem::path& dir() const { return dir_; }

private:
    bool keeps_snapshot(int step, int last) const;

    const RunSetup& setup_;
    const Problem& pb_;
    std::filesystem::path dir_;
    int written_ = -1;  // highest snapshot step on disk
    std::vector<Vec> lift_;
};

/// Exit status: 0 agreement and every row passes, 1 mismatch or failing
/// rows, 2 missing or unreadable outputs. Reports go to `out`.
int check_energy(const std::filesystem::path& dir, std::ostream& out);

}  // namespace pff
