#include "plasticgraph/conditioning.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <sstream>

#include "plasticgraph/error.hpp"

namespace plasticgraph {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

std::vector<double> seed_vector(int n) {
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) v[i] = 1.0 + 0.3 * std::sin(1.0 + 0.7 * i);
  const double norm = std::sqrt(dot(v, v));
  for (double& x : v) x /= norm;
  return v;
}

double power_iteration(const LinearOperator& op, double tol, int max_iters) {
  std::vector<double> v = seed_vector(op.dim);
  std::vector<double> w(op.dim);
  double rayleigh = 0.0;
  for (int it = 0; it < max_iters; ++it) {
    op.apply(v, w);
    const double r = dot(v, w);
    if (!(r > 0.0) && it > 2)
      fail(ErrorCode::IndefiniteOperator, "non-positive Rayleigh quotient in power iteration");
    const double norm = std::sqrt(dot(w, w));
    if (norm == 0.0) fail(ErrorCode::IndefiniteOperator, "operator maps probe vector to zero");
    for (int i = 0; i < op.dim; ++i) v[i] = w[i] / norm;
    if (it > 0 && std::abs(r - rayleigh) <= tol * std::abs(r)) return r;
    rayleigh = r;
  }
  fail(ErrorCode::NotConverged, "power iteration did not converge");
}

// Conjugate gradients for SPD solves in the matrix-free path.
void cg_solve(const LinearOperator& op, std::span<const double> b, std::span<double> x,
              double tol, int max_iters) {
  const int n = op.dim;
  std::vector<double> r(b.begin(), b.end()), p(r), Ap(n);
  std::fill(x.begin(), x.end(), 0.0);
  double rr = dot(r, r);
  const double stop = tol * tol * rr;
  for (int it = 0; it < max_iters && rr > stop; ++it) {
    op.apply(p, Ap);
    const double pAp = dot(p, Ap);
    if (!(pAp > 0.0)) fail(ErrorCode::IndefiniteOperator, "CG encountered p^T K p <= 0");
    const double alpha = rr / pAp;
    for (int i = 0; i < n; ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * Ap[i];
    }
    const double rr_new = dot(r, r);
    for (int i = 0; i < n; ++i) p[i] = r[i] + (rr_new / rr) * p[i];
    rr = rr_new;
  }
}

Eigen::MatrixXd densify(const LinearOperator& op) {
  Eigen::MatrixXd M(op.dim, op.dim);
  std::vector<double> e(op.dim, 0.0), col(op.dim);
  for (int j = 0; j < op.dim; ++j) {
    e[j] = 1.0;
    op.apply(e, col);
    e[j] = 0.0;
    for (int i = 0; i < op.dim; ++i) M(i, j) = col[i];
  }
  return M;
}

}  // namespace

std::pair<double, double> extreme_eigenvalues(const LinearOperator& op, double tol, int max_iters,
                                              int dense_limit) {
  if (op.dim <= dense_limit) {
    const Eigen::MatrixXd M = densify(op);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (M + M.transpose()));
    if (eig.info() != Eigen::Success)
      fail(ErrorCode::NotConverged, "dense eigendecomposition failed");
    const double lo = eig.eigenvalues().minCoeff();
    const double hi = eig.eigenvalues().maxCoeff();
    if (!(lo > 0.0))
      fail(ErrorCode::IndefiniteOperator,
           "operator has non-positive eigenvalue " + std::to_string(lo));
    return {lo, hi};
  }

  const double lambda_max = power_iteration(op, tol, max_iters);

  // Inverse iteration: power iteration on K^{-1} with CG inner solves.
  std::vector<double> v = seed_vector(op.dim);
  std::vector<double> w(op.dim);
  double mu = 0.0;
  for (int it = 0; it < 1000; ++it) {
    cg_solve(op, v, w, 1e-12, 10 * op.dim);
    const double r = dot(v, w);  // Rayleigh quotient of K^{-1}
    if (!(r > 0.0)) fail(ErrorCode::IndefiniteOperator, "inverse iteration left the SPD cone");
    const double norm = std::sqrt(dot(w, w));
    for (int i = 0; i < op.dim; ++i) v[i] = w[i] / norm;
    if (it > 0 && std::abs(r - mu) <= tol * std::abs(r)) return {1.0 / r, lambda_max};
    mu = r;
  }
  fail(ErrorCode::NotConverged, "inverse iteration did not converge");
}

double verify_square_law(const LinearOperator& op) {
  const auto [lo, hi] = extreme_eigenvalues(op);
  const double kappa = hi / lo;

  std::vector<double> mid(op.dim);
  LinearOperator composed{op.dim, [&op, &mid](std::span<const double> x, std::span<double> y) {
                            op.apply(x, mid);
                            op.apply(mid, y);
                          }};
  const auto [lo2, hi2] = extreme_eigenvalues(composed);
  return (hi2 / lo2) / (kappa * kappa);
}

double fit_contraction_rate(std::span<const double> error_trace, double floor) {
  std::vector<std::pair<double, double>> pts;  // (k, log e_k)
  for (size_t k = 0; k < error_trace.size(); ++k)
    if (error_trace[k] > floor) pts.emplace_back(static_cast<double>(k), std::log(error_trace[k]));
  if (pts.size() < 4)
    fail(ErrorCode::NotConverged, "too few usable samples for a rate fit");
  const size_t start = pts.size() / 2;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double m = static_cast<double>(pts.size() - start);
  for (size_t i = start; i < pts.size(); ++i) {
    sx += pts[i].first;
    sy += pts[i].second;
    sxx += pts[i].first * pts[i].first;
    sxy += pts[i].first * pts[i].second;
  }
  const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  return std::exp(slope);
}

std::string spectral_report_csv(std::span<const SpectralReport> reports) {
  std::ostringstream os;
  os << "mesh,n_free,lambda_min,lambda_max,kappa,kappa_sq_check,rho_star,measured_rate,"
        "iters_energy,iters_galerkin\n";
  os.precision(12);
  for (const SpectralReport& r : reports) {
    os << r.mesh << ',' << r.n_free << ',' << r.lambda_min << ',' << r.lambda_max << ','
       << r.kappa << ',' << r.kappa_sq_check << ',' << r.rho_star << ',' << r.measured_rate << ','
       << r.iters_energy << ',' << r.iters_galerkin << '\n';
  }
  return os.str();
}

}  // namespace plasticgraph
