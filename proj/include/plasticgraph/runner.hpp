#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "plasticgraph/conditioning.hpp"
#include "plasticgraph/problem.hpp"

namespace plasticgraph {

struct RunOptions {
  int threads = 1;
  std::string output_dir;  // overrides the problem's output directory when set
  bool keep_going = false;
};

struct RunOutcome {
  bool all_converged = true;
  std::string report;
  std::vector<std::string> written_files;
};

// Runs the load history (plus node relocation when enabled), writes the
// per-step VTK, trace CSV and fields JSON, and evaluates metrics against any
// configured reference solutions.
RunOutcome run_problem(const ProblemConfig& config, const RunOptions& options);

// Condition-number and convergence-rate study over structured mesh variants
// of the problem ("NxM" or "NxMxK" entries). For each mesh: extreme
// eigenvalues and kappa of the elastic stiffness, the kappa(K^T K) check,
// the measured fixed-step GD contraction on the elastic quadratic, and
// L-BFGS iterations until the displacement error against a tight reference
// solve drops below iter_tol, for both losses.
struct RateStudyOptions {
  std::vector<std::vector<int>> meshes;
  double iter_tol = 1e-2;
  int threads = 1;
  int max_iters = 0;     // 0 = problem optimizer budget
  bool spectrum = true;  // skip the eigenvalue/GD-rate block when false
};

std::vector<SpectralReport> rate_study(const ProblemConfig& config,
                                       const RateStudyOptions& options);

std::vector<std::vector<int>> parse_mesh_list(const std::string& text);

struct GradCheckReport {
  int points = 0;
  double max_rel_energy = 0.0;
  double max_rel_galerkin = 0.0;
  bool pass = false;
  std::string text;
};

// Central-difference validation of both loss gradients at random admissible
// displacement states of the first load step.
GradCheckReport gradcheck(const ProblemConfig& config, uint64_t seed, int points,
                          double tol_energy = 1e-5, double tol_galerkin = 1e-4, int threads = 1);

}  // namespace plasticgraph
