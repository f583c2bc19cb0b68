#pragma once

#include <map>
#include <stdexcept>
#include <string>

#include "pff/driver.hpp"

namespace pff {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Flat "section.key" -> value map. Presets, config files and --set
/// overrides all meet here; run.json echoes it verbatim.
using Settings = std::map<std::string, std::string>;

Settings parse_ini(const std::string& text);
Settings read_ini(const std::string& path);
std::string to_ini(const Settings& s);

/// "section.key=value"
void apply_override(Settings& s, const std::string& assignment);

struct OutputConfig {
    std::string dir = "out";
    int snapshot_every = 1;
    bool save_intermediates = false;
};

struct RunSetup {
    Settings settings;
    Mesh mesh;
    MaterialParams mat;
    LoadProgram program;
    BacktrackConfig backtrack;
    SolverConfig solver;
    OutputConfig output;
    double band_h = 0.0;  // element size used by a generator, 0 for files
};

/// Resolves a preset (when run.preset is set and other keys are missing),
/// builds the mesh and converts units. Throws ConfigError.
RunSetup build_setup(Settings s);

}  // namespace pff
