#include "plasticgraph/optim.hpp"

#include <cmath>
#include <deque>
#include <limits>

#include "plasticgraph/error.hpp"

namespace plasticgraph {

const char* to_string(StopReason reason) {
  switch (reason) {
    case StopReason::gradient_tolerance: return "gradient_tolerance";
    case StopReason::loss_tolerance: return "loss_tolerance";
    case StopReason::max_iterations: return "max_iterations";
    case StopReason::line_search_failure: return "line_search_failure";
  }
  return "?";
}

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double norm_inf(std::span<const double> a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

bool all_finite(std::span<const double> a) {
  for (double v : a)
    if (!std::isfinite(v)) return false;
  return true;
}

struct LineSearchOutcome {
  bool success = false;
  bool moved = false;  // best point improves on phi(0) even without Wolfe
  double step = 0.0;
  double phi = 0.0;
  int evals = 0;
  std::vector<double> x;
  std::vector<double> g;
};

// Strong Wolfe bracket-and-zoom. Every evaluation yields the gradient, so
// zoom interpolates with a derivative secant, which is exact on quadratics.
// Non-finite trial values are treated as Armijo violations, shrinking the
// step until the objective is finite again. The sufficient-decrease test
// carries a rounding band of a few ulps of phi0: close to a minimizer the
// true decrease underflows in double precision while the gradient is still
// informative, and without the band every step would be rejected there.
LineSearchOutcome line_search(const Objective& objective, std::span<const double> x0, double phi0,
                              std::span<const double> d, double dphi0, double a_init, double c1,
                              double c2, int max_evals) {
  const size_t n = x0.size();
  const double noise = 4.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(phi0));
  LineSearchOutcome out;
  std::vector<double> xt(n), gt(n);

  double best_phi = phi0;
  double best_a = 0.0;
  std::vector<double> best_x, best_g;

  auto eval = [&](double a, double& phi, double& dphi) {
    for (size_t i = 0; i < n; ++i) xt[i] = x0[i] + a * d[i];
    phi = objective(xt, gt);
    ++out.evals;
    dphi = std::isfinite(phi) && all_finite(gt) ? dot(gt, d) : std::nan("");
    if (std::isfinite(phi) && phi < best_phi) {
      best_phi = phi;
      best_a = a;
      best_x = xt;
      best_g = gt;
    }
  };

  auto accept = [&](double a, double phi) {
    out.success = true;
    out.moved = true;
    out.step = a;
    out.phi = phi;
    out.x = xt;
    out.g = gt;
  };

  auto give_up = [&]() {
    if (best_a > 0.0 && best_phi < phi0) {
      out.moved = true;
      out.step = best_a;
      out.phi = best_phi;
      out.x = std::move(best_x);
      out.g = std::move(best_g);
    }
  };

  struct End {
    double a, phi, dphi;
    bool finite;
  };

  auto zoom = [&](End lo, End hi) {
    while (out.evals < max_evals) {
      const double width = std::abs(hi.a - lo.a);
      if (width <= 1e-16 * std::max(1.0, std::abs(lo.a))) break;
      double a = 0.0;
      bool interpolated = false;
      if (hi.finite && lo.finite && hi.dphi != lo.dphi) {
        a = hi.a - hi.dphi * (hi.a - lo.a) / (hi.dphi - lo.dphi);
        const double lo_a = std::min(lo.a, hi.a), hi_a = std::max(lo.a, hi.a);
        if (a > lo_a + 0.1 * width && a < hi_a - 0.1 * width) interpolated = true;
      }
      if (!interpolated) a = 0.5 * (lo.a + hi.a);
      double phi, dphi;
      eval(a, phi, dphi);
      if (!std::isfinite(phi) || phi > phi0 + c1 * a * dphi0 + noise || phi >= lo.phi + noise) {
        hi = {a, phi, dphi, std::isfinite(phi) && std::isfinite(dphi)};
      } else {
        if (std::abs(dphi) <= -c2 * dphi0) {
          accept(a, phi);
          return;
        }
        if (dphi * (hi.a - lo.a) >= 0.0) hi = lo;
        lo = {a, phi, dphi, true};
      }
    }
    give_up();
  };

  End prev{0.0, phi0, dphi0, true};
  double a = a_init;
  for (int i = 1; out.evals < max_evals; ++i) {
    double phi, dphi;
    eval(a, phi, dphi);
    const bool finite = std::isfinite(phi) && std::isfinite(dphi);
    if (!finite || phi > phi0 + c1 * a * dphi0 + noise || (i > 1 && phi >= prev.phi + noise)) {
      zoom(prev, {a, phi, dphi, finite});
      return out;
    }
    if (std::abs(dphi) <= -c2 * dphi0) {
      accept(a, phi);
      return out;
    }
    if (dphi >= 0.0) {
      zoom({a, phi, dphi, true}, prev);
      return out;
    }
    prev = {a, phi, dphi, true};
    a *= 2.5;
    if (a > 1e12) break;
  }
  give_up();
  return out;
}

}  // namespace

LbfgsResult lbfgs_minimize(const Objective& objective, std::vector<double> x0,
                           const LbfgsConfig& config, const IterationObserver& observer) {
  if (!(config.c1 > 0.0 && config.c1 < config.c2 && config.c2 < 1.0) || config.memory < 1)
    fail(ErrorCode::SchemaError, "invalid L-BFGS configuration (need 0 < c1 < c2 < 1, memory >= 1)");

  const size_t n = x0.size();
  LbfgsResult result;
  result.x = std::move(x0);
  std::vector<double>& x = result.x;
  std::vector<double> g(n);
  double f = objective(x, g);
  result.trace.total_fevals = 1;
  if (!std::isfinite(f) || !all_finite(g))
    fail(ErrorCode::NonFiniteObjective, "objective is not finite at the starting point");

  auto grad_converged = [&]() { return norm_inf(g) <= config.tol_grad * (1.0 + std::abs(f)); };

  result.trace.final_loss = f;
  result.trace.final_grad_inf = norm_inf(g);
  if (grad_converged()) {
    result.trace.reason = StopReason::gradient_tolerance;
    return result;
  }

  struct Pair {
    std::vector<double> s, y;
    double rho;
  };
  std::deque<Pair> pairs;
  std::vector<double> d(n), q(n);
  std::vector<double> alpha_buf;

  for (int iter = 1; iter <= config.max_iters; ++iter) {
    // Two-loop recursion with gamma-scaled identity seed.
    if (pairs.empty()) {
      for (size_t i = 0; i < n; ++i) d[i] = -g[i];
    } else {
      q.assign(g.begin(), g.end());
      alpha_buf.assign(pairs.size(), 0.0);
      for (int i = static_cast<int>(pairs.size()) - 1; i >= 0; --i) {
        const Pair& p = pairs[i];
        alpha_buf[i] = p.rho * dot(p.s, q);
        for (size_t k = 0; k < n; ++k) q[k] -= alpha_buf[i] * p.y[k];
      }
      const Pair& last = pairs.back();
      const double gamma = dot(last.s, last.y) / dot(last.y, last.y);
      for (size_t k = 0; k < n; ++k) q[k] *= gamma;
      for (size_t i = 0; i < pairs.size(); ++i) {
        const Pair& p = pairs[i];
        const double beta = p.rho * dot(p.y, q);
        for (size_t k = 0; k < n; ++k) q[k] += (alpha_buf[i] - beta) * p.s[k];
      }
      for (size_t k = 0; k < n; ++k) d[k] = -q[k];
    }
    double dphi0 = dot(d, g);
    if (!(dphi0 < 0.0)) {
      pairs.clear();
      for (size_t i = 0; i < n; ++i) d[i] = -g[i];
      dphi0 = -dot(g, g);
      if (!(dphi0 < 0.0)) {
        result.trace.reason = StopReason::gradient_tolerance;
        break;
      }
    }

    // First step: scaled steepest descent, trial displacement capped at
    // init_step; afterwards the natural quasi-Newton step of 1.
    const double a_init =
        pairs.empty() ? config.init_step / std::max(1.0, norm2(d)) : 1.0;

    LineSearchOutcome ls = line_search(objective, x, f, d, dphi0, a_init, config.c1, config.c2,
                                       config.max_line_search);
    result.trace.total_fevals += ls.evals;

    if (!ls.success) {
      if (ls.moved) {
        x = std::move(ls.x);
        f = ls.phi;
        g = std::move(ls.g);
        result.trace.iterations.push_back(
            {iter, f, norm_inf(g), ls.step, ls.evals, false, false});
      }
      result.trace.reason = StopReason::line_search_failure;
      break;
    }

    std::vector<double> s(n), y(n);
    for (size_t k = 0; k < n; ++k) {
      s[k] = ls.x[k] - x[k];
      y[k] = ls.g[k] - g[k];
    }
    const double f_old = f;
    x = std::move(ls.x);
    f = ls.phi;
    g = std::move(ls.g);
    result.trace.iterations.push_back({iter, f, norm_inf(g), ls.step, ls.evals, true, true});
    if (observer) observer(iter, x, f, norm_inf(g));

    const double sy = dot(s, y);
    if (sy > 1e-10 * norm2(s) * norm2(y)) {
      pairs.push_back({std::move(s), std::move(y), 1.0 / sy});
      if (static_cast<int>(pairs.size()) > config.memory) pairs.pop_front();
    }

    if (grad_converged()) {
      result.trace.reason = StopReason::gradient_tolerance;
      break;
    }
    if (config.tol_loss > 0.0 && std::abs(f_old - f) <= config.tol_loss * (1.0 + std::abs(f))) {
      result.trace.reason = StopReason::loss_tolerance;
      break;
    }
    if (iter == config.max_iters) result.trace.reason = StopReason::max_iterations;
  }

  result.trace.final_loss = f;
  result.trace.final_grad_inf = norm_inf(g);
  return result;
}

GdResult gradient_descent(const Objective& objective, std::vector<double> x0, double alpha,
                          int iters, const std::vector<double>* x_star) {
  if (!(alpha >= 0.0)) fail(ErrorCode::SchemaError, "step size must be non-negative");
  GdResult res;
  res.x = std::move(x0);
  const size_t n = res.x.size();
  std::vector<double> g(n);

  auto record_error = [&]() {
    if (!x_star) return;
    double s = 0.0;
    for (size_t i = 0; i < n; ++i) {
      const double d = res.x[i] - (*x_star)[i];
      s += d * d;
    }
    res.error_trace.push_back(std::sqrt(s));
  };

  record_error();
  for (int k = 0; k < iters; ++k) {
    const double f = objective(res.x, g);
    if (!std::isfinite(f) || !all_finite(g))
      fail(ErrorCode::NonFiniteObjective,
           "gradient descent diverged at iteration " + std::to_string(k) +
               " (step size beyond 2/lambda_max?)");
    res.loss_trace.push_back(f);
    for (size_t i = 0; i < n; ++i) res.x[i] -= alpha * g[i];
    record_error();
  }
  return res;
}

}  // namespace plasticgraph
