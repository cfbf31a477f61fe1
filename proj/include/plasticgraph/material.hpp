#pragma once

#include <array>
#include <utility>

#include "plasticgraph/tensor.hpp"

namespace plasticgraph {

// Small-strain J2 flow theory with linear isotropic and kinematic hardening.
// Stress integration is the radial return map; all tensors are full 3D
// symmetric tensors (2D problems run in plane strain with the out-of-plane
// strain components pinned to zero kinematically, so out-of-plane plastic
// flow is still tracked).

struct MaterialParams {
  double E = 0.0;        // elastic modulus
  double nu = 0.0;       // Poisson ratio
  double lambda = 0.0;   // first Lame constant
  double mu = 0.0;       // shear modulus
  double sigma_y = 0.0;  // initial yield stress
  double K_iso = 0.0;    // linear isotropic hardening modulus
  double H_kin = 0.0;    // linear kinematic hardening modulus

  static MaterialParams make(double E, double nu, double sigma_y, double K_iso = 0.0,
                             double H_kin = 0.0);

  double bulk() const { return lambda + 2.0 * mu / 3.0; }
};

// lambda = nu E / ((1+nu)(1-2nu)), mu = E / (2(1+nu)). Throws InvalidPoisson
// for nu >= 0.5 and InvalidPoisson/SchemaError style failures for bad input.
std::pair<double, double> lame_constants(double E, double nu);

// sigma = lambda tr(eps) I + 2 mu eps
SymTensor3 elastic_stress(const MaterialParams& mat, const SymTensor3& eps);

struct PlasticState {
  SymTensor3 eps_p;       // plastic strain, deviatoric by construction
  double alpha = 0.0;     // equivalent plastic strain, non-decreasing
  SymTensor3 back_stress; // deviatoric back stress q
};

struct TrialState {
  SymTensor3 sigma_dev_trial;
  SymTensor3 eta_trial;  // relative stress sigma'_trial - q_t
  double f_trial = 0.0;  // ||eta_trial|| - sqrt(2/3) (sigma_y + K alpha_t)
};

// Elastic predictor from the committed state at t and the strain increment
// eps_next - eps_t.
TrialState trial_state(const MaterialParams& mat, const PlasticState& state_t,
                       const SymTensor3& eps_next, const SymTensor3& eps_t,
                       const SymTensor3& sigma_t);

struct ReturnResult {
  SymTensor3 sigma;
  PlasticState new_state;
  double delta_gamma = 0.0;
  SymTensor3 flow_dir;  // unit deviator n = eta_trial / ||eta_trial||
  bool yielded = false;
  double eta_trial_norm = 0.0;
};

// Radial return map. f_trial <= 0 takes the elastic branch (state unchanged,
// sigma = sigma_t + C : d_eps); otherwise the closed-form plastic corrector
// with delta_gamma = f_trial / (2 (mu + (H+K)/3)).
ReturnResult radial_return(const MaterialParams& mat, const PlasticState& state_t,
                           const SymTensor3& eps_next, const SymTensor3& eps_t,
                           const SymTensor3& sigma_t);

// 6x6 tangent in Voigt order (xx, yy, zz, xy, yz, zx), engineering shear on
// the strain side (gamma = 2 eps) and tensor shear on the stress side, so
// d sigma = D * [d eps_xx, ..., 2 d eps_xy, ...]. Row-major storage.
using TangentMatrix = std::array<double, 36>;

TangentMatrix elastic_tangent(const MaterialParams& mat);

// Consistent (algorithmic) tangent of the return map, d sigma_{t+1} / d eps_{t+1}.
// Equals the elastic tangent on the elastic branch.
TangentMatrix algorithmic_tangent(const MaterialParams& mat, const ReturnResult& result);

// Apply a tangent to a symmetric strain perturbation (tensor components in,
// stress tensor out).
SymTensor3 apply_tangent(const TangentMatrix& D, const SymTensor3& d_eps);

}  // namespace plasticgraph
