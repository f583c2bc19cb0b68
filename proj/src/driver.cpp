#include "pff/driver.hpp"

#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

namespace pff {

void LoadProgram::validate(const Mesh& mesh) const {
    if (steps < 1) throw std::invalid_argument("program: steps must be >= 1");
    if (!std::isfinite(dw)) throw std::invalid_argument("program: dw must be finite");
    for (const auto& bc : bcs) {
        if (bc.comp < 0 || bc.comp >= mesh.dim) {
            throw std::invalid_argument(fmt::format("program: component {} out of range for set '{}'", bc.comp, bc.set));
        }
        mesh.node_set(bc.set);
    }
    if (!reaction_set.empty()) mesh.node_set(reaction_set);
}

std::vector<char> constrained_dofs(const LoadProgram& program, const Mesh& mesh) {
    std::vector<char> fixed(mesh.nodes.size() * mesh.dim, 0);
    for (const auto& bc : program.bcs) {
        for (int n : mesh.node_set(bc.set)) fixed[n * mesh.dim + bc.comp] = 1;
    }
    return fixed;
}

Vec lifting_for_step(const LoadProgram& program, int n, const Mesh& mesh) {
    if (n < 0 || n > program.steps) throw std::out_of_range(fmt::format("lifting: step {} outside [0, {}]", n, program.steps));
    Vec UD = Vec::Zero(static_cast<Eigen::Index>(mesh.nodes.size()) * mesh.dim);
    // Later entries win where sets overlap, so list held values after ramps to pin them.
    for (const auto& bc : program.bcs) {
        const double v = bc.ramp ? n * program.dw * bc.value : bc.value;
        for (int node : mesh.node_set(bc.set)) UD(node * mesh.dim + bc.comp) = v;
    }
    return UD;
}

void BacktrackConfig::validate() const {
    if (K < 0) throw std::invalid_argument("backtrack: K must be >= 0");
    if (!(eta > 0.0)) throw std::invalid_argument("backtrack: eta must be > 0");
}

namespace {

struct Solved {
    AltResult alt;
    EnergyReport report;
};

}  // namespace

RunHistory run(Problem& pb, const LoadProgram& program, const BacktrackConfig& bt, const SolverConfig& cfg,
               const DriverHooks& hooks) {
    program.validate(pb.mesh);
    bt.validate();
    cfg.validate();
    const int N = program.steps;
    const int budget = bt.max_total_solves > 0 ? bt.max_total_solves : 20 * (N + bt.K);
    auto log = [&](const std::string& s) {
        if (hooks.log) hooks.log(s);
    };

    RunHistory h;
    std::vector<Vec> lift(N + 1);
    for (int n = 0; n <= N; ++n) lift[n] = lifting_for_step(program, n, pb.mesh);

    auto reaction = [&](const Vec& U, const Vec& UD, const Vec& A) {
        if (program.reaction_set.empty()) return 0.0;
        return reaction_force(pb, U, UD, A, program.reaction_set, program.reaction_dir);
    };

    StepRecord r0;
    r0.step = 0;
    r0.U = Vec::Zero(pb.n_u());
    r0.A = Vec::Zero(pb.n_nodes());
    r0.report.passed = true;
    r0.report.eta = bt.eta;
    r0.reaction = reaction(r0.U, lift[0], r0.A);
    h.accepted.push_back(r0);
    if (hooks.on_accept) hooks.on_accept(h, 0);

    Vec gU = r0.U, gA = r0.A;

    // Solves step n -> n + 1 from the current guess, anchored at the stored A_n.
    auto solve = [&](int n) -> Solved {
        const StepRecord& prev = h.accepted[n];
        Solved s;
        s.alt = alternate_minimize(pb, gU, gA, prev.A, lift[n + 1], cfg);
        ++h.solves;
        h.alt_iters += s.alt.alt_iters;
        h.newton_u += s.alt.newton_iters_u;
        h.newton_beta += s.alt.newton_iters_beta;
        h.line_search_cuts += s.alt.line_search_cuts;
        h.clamp_max = std::max(h.clamp_max, s.alt.clamp_max);
        h.max_ascent = std::max(h.max_ascent, s.alt.max_ascent);
        if (!s.alt.converged) {
            throw SolverError(fmt::format("step {}: {}", n + 1, s.alt.failure));
        }
        gU = s.alt.U;
        gA = s.alt.A;
        s.report = check_two_sided(pb, n + 1, {prev.U, lift[n], prev.A, s.alt.U, lift[n + 1], s.alt.A}, bt.eta,
                                   bt.listing_lower_bound);
        return s;
    };

    auto store = [&](int n, const Solved& s, bool forced) {
        h.accepted.resize(n + 1);
        StepRecord r;
        r.step = n + 1;
        r.U = s.alt.U;
        r.A = s.alt.A;
        r.report = s.report;
        r.applied = program.applied(n + 1);
        r.reaction = reaction(r.U, lift[n + 1], r.A);
        r.forced = forced;
        r.alt_iters = s.alt.alt_iters;
        r.newton_u = s.alt.newton_iters_u;
        r.newton_beta = s.alt.newton_iters_beta;
        h.accepted.push_back(std::move(r));
        if (hooks.on_accept) hooks.on_accept(h, n + 1);
    };

    auto intermediate = [&](int step, int b, const Solved& s) {
        IntermediateState st{step, b, h.solves, s.report.passed};
        h.intermediates.push_back(st);
        if (hooks.on_intermediate) hooks.on_intermediate(st, s.alt.U, s.alt.A);
    };

    try {
        int n = 0;
        while (n < N) {
            Solved s = solve(n);
            if (s.report.passed) {
                store(n, s, false);
                ++n;
                continue;
            }
            if (bt.K == 0 || h.guard_hit || n == 0) {
                store(n, s, true);
                if (bt.K > 0 && n == 0) log(fmt::format("step 1 fails the energy inequality; no earlier step to revisit"));
                ++n;
                continue;
            }
            const int failed = n + 1;
            log(fmt::format("step {} fails the energy inequality (delta {:.6e}, LB {:.6e}, UB {:.6e}); backtracking",
                            failed, s.report.delta, s.report.LB, s.report.UB));
            intermediate(failed, 0, s);
            int b = 0;
            bool passed = false;
            while (true) {
                if (n == 0) break;
                if (h.solves >= budget) {
                    h.guard_hit = true;
                    log(fmt::format("re-solve budget of {} reached; accepting remaining steps as they come", budget));
                    break;
                }
                const int from = n + 1;
                --n;
                ++b;
                Solved r = solve(n);
                passed = r.report.passed;
                h.events.push_back({failed, n + 1, b, from, passed});
                intermediate(n + 1, b, r);
                store(n, r, !passed);
                if (passed || b == bt.K) break;
            }
            if (!passed) {
                if (b == 0) {
                    store(n, s, true);
                } else if (b == bt.K) {
                    ++h.k_exhaustions;
                    log(fmt::format("K = {} back steps exhausted at step {}; accepted with a failing inequality", bt.K,
                                    n + 1));
                }
            }
            ++n;
        }
    } catch (const SolverError& e) {
        h.aborted = true;
        h.abort_message = e.what();
        log(std::string("aborted: ") + e.what());
    }
    return h;
}

}  // namespace pff
