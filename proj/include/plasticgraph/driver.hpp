#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "plasticgraph/field.hpp"
#include "plasticgraph/optim.hpp"

namespace plasticgraph {

// One load step: Dirichlet prescriptions per node set and component,
// constant surface tractions per facet set, optional optimizer override.
struct LoadStep {
  std::string label;
  std::map<std::string, std::array<std::optional<double>, 3>> dirichlet;
  std::map<std::string, std::array<double, 3>> tractions;
  std::optional<LbfgsConfig> optimizer;
};

struct SolveSettings {
  LossMode loss = LossMode::energy;
  HardeningMode hardening = HardeningMode::perfect;
  LbfgsConfig optimizer;
  int threads = 1;
  int quad_order = 0;  // 0 = per-kind default
};

struct SolutionState {
  std::string label;
  std::vector<double> u;  // full composed nodal displacement
  GaussHistory history;
  double loss = 0.0;
  OptimTrace trace;
  bool converged = true;
  DofField dofs;
};

// Resolves set-based Dirichlet data into the mask triple. Throws
// ConflictingBC when one DOF receives two different values and
// DanglingReference for unknown set names.
DofField build_dof_field(const Mesh& mesh, const LoadStep& step);

std::vector<double> build_external_force(const Mesh& mesh, const LoadStep& step);

// Minimizes the configured loss for one load step, warm-started from the
// previous solution when given, and commits the return-mapped Gauss states.
SolutionState run_load_step(const Mesh& mesh, const GeometryCache& geom,
                            std::span<const MaterialParams> materials,
                            const SolveSettings& settings, const SolutionState* prev,
                            const LoadStep& step);

// Sequential history with state carry-over. Stops at the first
// non-converged step unless keep_going is set. The callback (if any) sees
// each completed step.
std::vector<SolutionState> run_history(
    const Mesh& mesh, std::span<const MaterialParams> materials, const SolveSettings& settings,
    std::span<const LoadStep> steps, bool keep_going = false,
    const std::function<void(const SolutionState&)>& on_step = {});

struct RAdaptConfig {
  int rounds = 4;
  int coord_iters = 100;
  int disp_iters = 200;
  std::vector<std::string> fix_axes;  // coordinate axes held fixed ("z", ...)
  double round_tol = 1e-10;           // stop when a round improves less than this (relative)
};

struct RAdaptResult {
  Mesh mesh;
  SolutionState state;
  double initial_energy = 0.0;
  double final_energy = 0.0;
  int coord_iterations = 0;
};

// Movable-coordinate mask: interior nodes only (all boundary-facet nodes
// fixed), minus any axes named in fix_axes.
std::vector<uint8_t> default_movable_mask(const Mesh& mesh,
                                          std::span<const std::string> fix_axes);

// Energy-driven node relocation after convergence: alternating blocks of
// coordinate and displacement minimization of the same incremental
// functional the step was solved with. 'prev' is the state the step started
// from (nullptr = virgin); it fixes the frozen increment origin. Coordinate
// steps that invert an element evaluate to +inf and are rejected by the
// line search. Masked coordinates are bit-unchanged.
RAdaptResult r_adapt(const Mesh& mesh, std::span<const MaterialParams> materials,
                     const SolveSettings& settings, const SolutionState* prev,
                     const SolutionState& converged, const LoadStep& step,
                     std::span<const uint8_t> movable, const RAdaptConfig& config);

struct MetricsEntry {
  std::string field;
  int component = 0;      // -1 for scalar fields
  double mae = 0.0;
  double rel_l2 = 0.0;
  bool zero_reference = false;
};

// MAE and relative L2 per component of two equally shaped fields.
std::vector<MetricsEntry> error_metrics(const std::string& name, int components,
                                        std::span<const double> values,
                                        std::span<const double> reference);

}  // namespace plasticgraph
