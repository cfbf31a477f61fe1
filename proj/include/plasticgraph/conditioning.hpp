#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace plasticgraph {

// Matrix-free symmetric positive definite operator.
struct LinearOperator {
  int dim = 0;
  std::function<void(std::span<const double>, std::span<double>)> apply;
};

// Extreme eigenvalues of an SPD operator: power iteration for lambda_max;
// lambda_min by full eigendecomposition when dim <= dense_limit, inverse
// iteration with CG solves above that. Results match a dense eigensolve to
// 1e-6 relative on fallback-sized systems.
std::pair<double, double> extreme_eigenvalues(const LinearOperator& op, double tol = 1e-9,
                                              int max_iters = 100000, int dense_limit = 500);

// kappa(K^T K) / kappa(K)^2, with kappa(K^T K) measured independently on the
// composed operator. 1 within 1e-6 for SPD inputs.
double verify_square_law(const LinearOperator& op);

// Log-linear fit of the asymptotic contraction rate over the trailing half
// of an error trace, skipping entries below the floor.
double fit_contraction_rate(std::span<const double> error_trace, double floor = 1e-13);

struct SpectralReport {
  std::string mesh;
  int n_free = 0;
  double lambda_min = 0.0;
  double lambda_max = 0.0;
  double kappa = 0.0;
  double kappa_sq_check = 0.0;  // kappa(K^T K) / kappa(K)^2
  double rho_star = 0.0;        // (kappa - 1) / (kappa + 1)
  double measured_rate = 0.0;   // fitted GD contraction on the elastic quadratic
  int iters_energy = -1;        // L-BFGS iterations to tolerance, energy loss
  int iters_galerkin = -1;      // same for the Galerkin loss
};

std::string spectral_report_csv(std::span<const SpectralReport> reports);

}  // namespace plasticgraph
