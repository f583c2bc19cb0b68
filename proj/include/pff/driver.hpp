#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "pff/energetics.hpp"
#include "pff/solver.hpp"

namespace pff {

/// One prescribed displacement component on a node set. A ramp prescribes
/// n * dw * value at step n; otherwise the value is held at every step.
struct DirichletBC {
    std::string set;
    int comp = 0;
    double value = 0.0;
    bool ramp = false;
};

struct LoadProgram {
    int steps = 1;
    double dw = 0.0;  // mm per increment
    std::vector<DirichletBC> bcs;
    std::string reaction_set;
    std::array<double, 3> reaction_dir{0.0, 1.0, 0.0};

    void validate(const Mesh& mesh) const;
    double applied(int n) const { return n * dw; }
};

/// Mask of displacement dofs constrained by the program.
std::vector<char> constrained_dofs(const LoadProgram& program, const Mesh& mesh);

Vec lifting_for_step(const LoadProgram& program, int n, const Mesh& mesh);

struct BacktrackConfig {
    int K = 50;
    double eta = 1e-5;  // N·mm
    bool listing_lower_bound = false;
    /// Termination guard: once this many step solves have been spent, failing
    /// steps are accepted without further back steps. 0 means 20 * (N + K).
    int max_total_solves = 0;

    void validate() const;
};

struct StepRecord {
    int step = 0;
    Vec U;
    Vec A;
    EnergyReport report;  // inequality between step - 1 and step (unset for step 0)
    double reaction = 0.0;
    double applied = 0.0;
    bool forced = false;  // accepted although the inequality failed
    int alt_iters = 0;
    int newton_u = 0;
    int newton_beta = 0;
};

struct BacktrackEvent {
    int failed_step = 0;   // step whose inequality failed
    int revisit = 0;       // step re-solved
    int b = 0;             // back-step counter
    int guess_from = 0;    // step the initial guess was taken from
    bool passed = false;
};

struct IntermediateState {
    int step = 0;
    int b = 0;
    int solve_index = 0;
    bool passed = false;
};

struct RunHistory {
    std::vector<StepRecord> accepted;  // index = step
    std::vector<BacktrackEvent> events;
    std::vector<IntermediateState> intermediates;
    int solves = 0;
    int k_exhaustions = 0;
    int alt_iters = 0;
    int newton_u = 0;
    int newton_beta = 0;
    int line_search_cuts = 0;
    double clamp_max = 0.0;
    double max_ascent = 0.0;
    bool guard_hit = false;
    bool aborted = false;
    std::string abort_message;
};

struct DriverHooks {
    /// After every change of the accepted sequence; `from` is the first step that changed.
    std::function<void(const RunHistory&, int from)> on_accept;
    /// Every solve during backtracking (failed forward solves and re-solves).
    std::function<void(const IntermediateState&, const Vec& U, const Vec& A)> on_intermediate;
    std::function<void(const std::string&)> log;
};

RunHistory run(Problem& pb, const LoadProgram& program, const BacktrackConfig& bt, const SolverConfig& cfg,
               const DriverHooks& hooks = {});

}  // namespace pff
