#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace plasticgraph {

// Objective callback: returns the loss and fills the gradient (same length
// as x). Called many times per iteration by the line search.
using Objective = std::function<double(std::span<const double>, std::span<double>)>;

struct LbfgsConfig {
  // History pairs kept for the two-loop recursion.
  int memory = 20;
  // Strong Wolfe constants, 0 < c1 < c2 < 1. c1 is the sufficient-decrease
  // (Armijo) constant, c2 the curvature constant. The quasi-Newton pairing
  // c1 = 1e-4, c2 = 0.9 is the default; a tiny c2 makes the line search
  // nearly exact.
  double c1 = 1e-4;
  double c2 = 0.9;
  // Trial step scale of the first iteration. The first direction is scaled
  // steepest descent, so the first trial displacement has norm at most
  // init_step.
  double init_step = 1.0;
  int max_iters = 500;
  // Gradient stopping test: ||g||_inf <= tol_grad * (1 + |loss|).
  double tol_grad = 1e-8;
  // Relative loss-change stopping test; 0 disables it.
  double tol_loss = 0.0;
  // Objective evaluations allowed per line search.
  int max_line_search = 40;
};

enum class StopReason {
  gradient_tolerance,
  loss_tolerance,
  max_iterations,
  line_search_failure,
};

const char* to_string(StopReason reason);

struct IterationRecord {
  int iter = 0;
  double loss = 0.0;
  double grad_inf = 0.0;
  double step = 0.0;
  int fevals = 0;  // evaluations spent on this iteration's line search
  bool armijo_ok = false;
  bool curvature_ok = false;
};

struct OptimTrace {
  std::vector<IterationRecord> iterations;
  StopReason reason = StopReason::max_iterations;
  int total_fevals = 0;
  double final_loss = 0.0;
  double final_grad_inf = 0.0;

  int iteration_count() const { return static_cast<int>(iterations.size()); }
  bool converged() const {
    return reason == StopReason::gradient_tolerance || reason == StopReason::loss_tolerance;
  }
};

struct LbfgsResult {
  std::vector<double> x;
  OptimTrace trace;
};

// Called after each accepted iteration with the new iterate.
using IterationObserver =
    std::function<void(int iter, std::span<const double> x, double loss, double grad_inf)>;

// Limited-memory BFGS with a strong Wolfe bracket-and-zoom line search.
// Deterministic given (x0, config, objective). Curvature pairs with
// s.y <= 1e-10 ||s|| ||y|| are skipped. Throws NonFiniteObjective if the
// starting point does not evaluate finite; a failed line search returns the
// best iterate with reason line_search_failure.
LbfgsResult lbfgs_minimize(const Objective& objective, std::vector<double> x0,
                           const LbfgsConfig& config, const IterationObserver& observer = {});

struct GdResult {
  std::vector<double> x;
  std::vector<double> loss_trace;
  std::vector<double> error_trace;  // ||x_k - x*||_2 when x* was supplied
};

// Fixed-step gradient descent, x_{k+1} = x_k - alpha g. Throws
// NonFiniteObjective when the iterates blow up (alpha beyond 2/lambda_max).
GdResult gradient_descent(const Objective& objective, std::vector<double> x0, double alpha,
                          int iters, const std::vector<double>* x_star = nullptr);

}  // namespace plasticgraph
