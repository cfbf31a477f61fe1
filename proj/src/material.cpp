#include "plasticgraph/material.hpp"

#include <cmath>
#include <tuple>

#include "plasticgraph/error.hpp"

namespace plasticgraph {

namespace {
constexpr double kSqrt23 = 0.81649658092772603273;  // sqrt(2/3)
}

std::pair<double, double> lame_constants(double E, double nu) {
  if (!(E > 0.0)) fail(ErrorCode::InvalidPoisson, "elastic modulus must be positive");
  if (!(nu >= 0.0) || nu >= 0.5)
    fail(ErrorCode::InvalidPoisson, "Poisson ratio must satisfy 0 <= nu < 0.5");
  const double lambda = nu * E / ((1.0 + nu) * (1.0 - 2.0 * nu));
  const double mu = E / (2.0 * (1.0 + nu));
  return {lambda, mu};
}

MaterialParams MaterialParams::make(double E, double nu, double sigma_y, double K_iso,
                                    double H_kin) {
  if (!(sigma_y > 0.0)) fail(ErrorCode::InvalidPoisson, "yield stress must be positive");
  if (K_iso < 0.0 || H_kin < 0.0)
    fail(ErrorCode::InvalidPoisson, "hardening moduli must be non-negative");
  MaterialParams mat;
  mat.E = E;
  mat.nu = nu;
  std::tie(mat.lambda, mat.mu) = lame_constants(E, nu);
  mat.sigma_y = sigma_y;
  mat.K_iso = K_iso;
  mat.H_kin = H_kin;
  return mat;
}

SymTensor3 elastic_stress(const MaterialParams& mat, const SymTensor3& eps) {
  const double p = mat.lambda * eps.trace();
  SymTensor3 sigma = 2.0 * mat.mu * eps;
  sigma.xx += p;
  sigma.yy += p;
  sigma.zz += p;
  return sigma;
}

TrialState trial_state(const MaterialParams& mat, const PlasticState& state_t,
                       const SymTensor3& eps_next, const SymTensor3& eps_t,
                       const SymTensor3& sigma_t) {
  const SymTensor3 d_eps_dev = (eps_next - eps_t).deviator();
  TrialState trial;
  trial.sigma_dev_trial = sigma_t.deviator() + 2.0 * mat.mu * d_eps_dev;
  trial.eta_trial = trial.sigma_dev_trial - state_t.back_stress;
  trial.f_trial = trial.eta_trial.norm() - kSqrt23 * (mat.sigma_y + mat.K_iso * state_t.alpha);
  return trial;
}

ReturnResult radial_return(const MaterialParams& mat, const PlasticState& state_t,
                           const SymTensor3& eps_next, const SymTensor3& eps_t,
                           const SymTensor3& sigma_t) {
  const SymTensor3 d_eps = eps_next - eps_t;
  const TrialState trial = trial_state(mat, state_t, eps_next, eps_t, sigma_t);

  ReturnResult res;
  res.new_state = state_t;
  res.eta_trial_norm = trial.eta_trial.norm();

  const double p_next = (sigma_t.trace() / 3.0) + mat.bulk() * d_eps.trace();

  if (trial.f_trial <= 0.0) {
    res.sigma = trial.sigma_dev_trial;
    res.sigma.xx += p_next;
    res.sigma.yy += p_next;
    res.sigma.zz += p_next;
    return res;
  }

  res.yielded = true;
  res.delta_gamma = trial.f_trial / (2.0 * (mat.mu + (mat.H_kin + mat.K_iso) / 3.0));
  res.flow_dir = (1.0 / res.eta_trial_norm) * trial.eta_trial;

  res.new_state.eps_p = state_t.eps_p + res.delta_gamma * res.flow_dir;
  res.new_state.alpha = state_t.alpha + kSqrt23 * res.delta_gamma;
  res.new_state.back_stress =
      state_t.back_stress + (2.0 / 3.0) * res.delta_gamma * mat.H_kin * res.flow_dir;

  res.sigma = trial.sigma_dev_trial - (2.0 * mat.mu * res.delta_gamma) * res.flow_dir;
  res.sigma.xx += p_next;
  res.sigma.yy += p_next;
  res.sigma.zz += p_next;
  return res;
}

TangentMatrix elastic_tangent(const MaterialParams& mat) {
  TangentMatrix D{};
  const double l = mat.lambda, m = mat.mu;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) D[i * 6 + j] = l;
    D[i * 6 + i] += 2.0 * m;
    D[(i + 3) * 6 + (i + 3)] = m;
  }
  return D;
}

TangentMatrix algorithmic_tangent(const MaterialParams& mat, const ReturnResult& result) {
  if (!result.yielded) return elastic_tangent(mat);

  const double mu = mat.mu;
  const double kb = mat.bulk();
  const double ratio = 2.0 * mu * result.delta_gamma / result.eta_trial_norm;
  const double theta = 1.0 - ratio;
  const double theta_bar = 1.0 / (1.0 + (mat.K_iso + mat.H_kin) / (3.0 * mu)) - ratio;

  const SymTensor3& n = result.flow_dir;
  const double nv[6] = {n.xx, n.yy, n.zz, n.xy, n.yz, n.zx};

  TangentMatrix D{};
  // kb * 1x1 + 2 mu theta (I_sym - 1/3 1x1) - 2 mu theta_bar n x n, written
  // in the engineering-shear Voigt convention of TangentMatrix.
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) D[i * 6 + j] = kb - 2.0 * mu * theta / 3.0;
  for (int i = 0; i < 3; ++i) {
    D[i * 6 + i] += 2.0 * mu * theta;
    D[(i + 3) * 6 + (i + 3)] += mu * theta;
  }
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) D[i * 6 + j] -= 2.0 * mu * theta_bar * nv[i] * nv[j];
  return D;
}

SymTensor3 apply_tangent(const TangentMatrix& D, const SymTensor3& d_eps) {
  const double e[6] = {d_eps.xx, d_eps.yy,       d_eps.zz,
                       2.0 * d_eps.xy, 2.0 * d_eps.yz, 2.0 * d_eps.zx};
  double s[6];
  for (int i = 0; i < 6; ++i) {
    double acc = 0.0;
    for (int j = 0; j < 6; ++j) acc += D[i * 6 + j] * e[j];
    s[i] = acc;
  }
  return {s[0], s[1], s[2], s[3], s[4], s[5]};
}

}  // namespace plasticgraph
