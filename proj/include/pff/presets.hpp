#pragma once

#include <string>
#include <vector>

#include "pff/config.hpp"

namespace pff {

std::vector<std::string> preset_names();

/// Full settings of a benchmark. Lengths in mm, moduli in kN/mm², g_c in N/mm.
Settings load_preset(const std::string& name, double scale = 1.0);

/// Geometry recipes. h is the element size in the refinement band,
/// coarse the size elsewhere.
Mesh sent_mesh(double h, double coarse);    // square, slit from the left edge
Mesh sens_mesh(double h, double coarse);    // same geometry, band in the lower right quarter
Mesh lshape_mesh(double h, double coarse);
Mesh bend3d_mesh(double h, double coarse);

/// Band element size for a preset at a resolution scale: min(h_ref, ell/2) / scale.
double band_size(double h_ref, double ell, double scale);

}  // namespace pff
