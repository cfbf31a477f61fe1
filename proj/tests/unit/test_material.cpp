#include <cmath>
#include <random>

#include "doctest.h"
#include "plasticgraph/error.hpp"
#include "plasticgraph/material.hpp"
#include "test_helpers.hpp"

using namespace plasticgraph;
using testutil::UniaxialOracle;

namespace {

const double kSqrt3 = std::sqrt(3.0);

SymTensor3 uniaxial(double e) { return {e, 0, 0, 0, 0, 0}; }

}  // namespace

TEST_CASE("Lame constants") {
  auto [l1, m1] = lame_constants(50.0, 0.3);
  CHECK(l1 == doctest::Approx(28.84615384615385).epsilon(1e-12));
  CHECK(m1 == doctest::Approx(19.23076923076923).epsilon(1e-12));

  auto [l2, m2] = lame_constants(7.0, 0.0);
  CHECK(l2 == doctest::Approx(0.0));
  CHECK(m2 == doctest::Approx(3.5));

  auto [l3, m3] = lame_constants(200.0, 0.3);
  CHECK(l3 == doctest::Approx(115.3846153846154).epsilon(1e-12));
  CHECK(m3 == doctest::Approx(76.92307692307692).epsilon(1e-12));

  CHECK_THROWS_AS(lame_constants(200.0, 0.5), Error);
  CHECK_THROWS_AS(lame_constants(-1.0, 0.3), Error);
}

TEST_CASE("elastic stress") {
  const MaterialParams mat = MaterialParams::make(50.0, 0.3, kSqrt3);
  CHECK(elastic_stress(mat, SymTensor3{}).norm() == 0.0);

  const double e = 0.01;
  const SymTensor3 s = elastic_stress(mat, uniaxial(e));
  CHECK(s.xx == doctest::Approx((mat.lambda + 2 * mat.mu) * e).epsilon(1e-14));
  CHECK(s.yy == doctest::Approx(mat.lambda * e).epsilon(1e-14));
  CHECK(s.zz == doctest::Approx(mat.lambda * e).epsilon(1e-14));

  const double g = 0.004;
  const SymTensor3 shear = elastic_stress(mat, {0, 0, 0, g, 0, 0});
  CHECK(shear.xy == doctest::Approx(2 * mat.mu * g).epsilon(1e-14));
  CHECK(shear.xx == 0.0);
  CHECK(shear.trace() == 0.0);
}

TEST_CASE("trial state") {
  const MaterialParams mat = MaterialParams::make(50.0, 0.3, kSqrt3);
  const PlasticState virgin;

  // Zero increment from virgin: f_trial = -sqrt(2/3) sigma_y.
  const TrialState t0 = trial_state(mat, virgin, SymTensor3{}, SymTensor3{}, SymTensor3{});
  CHECK(t0.f_trial == doctest::Approx(-std::sqrt(2.0 / 3.0) * kSqrt3).epsilon(1e-14));

  // Small uniaxial strain stays inside the surface.
  const TrialState t1 = trial_state(mat, virgin, uniaxial(1e-4), SymTensor3{}, SymTensor3{});
  CHECK(t1.f_trial < 0.0);

  // Pure shear: ||2 mu eps'|| = 2 mu g sqrt(2); yields when that exceeds
  // sqrt(2/3) sigma_y.
  const double g_yield = std::sqrt(2.0 / 3.0) * kSqrt3 / (2.0 * mat.mu * std::sqrt(2.0));
  const TrialState t2 =
      trial_state(mat, virgin, {0, 0, 0, 2.0 * g_yield, 0, 0}, SymTensor3{}, SymTensor3{});
  CHECK(t2.f_trial > 0.0);
  const TrialState t3 =
      trial_state(mat, virgin, {0, 0, 0, 0.5 * g_yield, 0, 0}, SymTensor3{}, SymTensor3{});
  CHECK(t3.f_trial < 0.0);
}

TEST_CASE("radial return: elastic branch is exact identity on the state") {
  const MaterialParams mat = MaterialParams::make(50.0, 0.3, kSqrt3);
  PlasticState state;
  state.eps_p = {1e-3, -5e-4, -5e-4, 2e-4, 0, 0};
  state.alpha = 0.01;
  const SymTensor3 eps_t = uniaxial(2e-3);
  const SymTensor3 sigma_t = elastic_stress(mat, eps_t - state.eps_p);
  const ReturnResult res = radial_return(mat, state, uniaxial(2.1e-3), eps_t, sigma_t);
  CHECK_FALSE(res.yielded);
  CHECK(res.delta_gamma == 0.0);
  CHECK(res.new_state.eps_p.xx == state.eps_p.xx);
  CHECK(res.new_state.alpha == state.alpha);
}

TEST_CASE("radial return: delta gamma closed form") {
  // f_trial = 1 with K = H = 0 gives delta_gamma = 1 / (2 mu).
  const MaterialParams mat = MaterialParams::make(50.0, 0.3, kSqrt3);
  // Choose a pure-shear strain that lands f_trial exactly at 1:
  // 2 mu g sqrt(2) = 1 + sqrt(2/3) sigma_y.
  const double target = 1.0 + std::sqrt(2.0 / 3.0) * kSqrt3;
  const double g = target / (2.0 * mat.mu * std::sqrt(2.0));
  const ReturnResult res =
      radial_return(mat, PlasticState{}, {0, 0, 0, g, 0, 0}, SymTensor3{}, SymTensor3{});
  REQUIRE(res.yielded);
  CHECK(res.delta_gamma == doctest::Approx(1.0 / (2.0 * mat.mu)).epsilon(1e-12));
  CHECK(res.delta_gamma == doctest::Approx(0.026).epsilon(1e-3));
}

TEST_CASE("perfect plasticity returns exactly to the yield surface") {
  const MaterialParams mat = MaterialParams::make(50.0, 0.3, kSqrt3);
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const SymTensor3 eps = testutil::random_sym(rng, 0.2);
    const ReturnResult res = radial_return(mat, PlasticState{}, eps, SymTensor3{}, SymTensor3{});
    if (!res.yielded) continue;
    const SymTensor3 eta = res.sigma.deviator() - res.new_state.back_stress;
    CHECK(eta.norm() == doctest::Approx(std::sqrt(2.0 / 3.0) * kSqrt3).epsilon(1e-12));
  }
}

TEST_CASE("KKT and isochoric flow over randomized histories") {
  const double params[4][2] = {{0, 0}, {100, 0}, {0, 100}, {100, 100}};
  std::mt19937_64 rng(17);
  for (auto [K, H] : params) {
    const MaterialParams mat = MaterialParams::make(200.0, 0.3, kSqrt3, K, H);
    PlasticState state;
    SymTensor3 eps_t, sigma_t;
    for (int step = 0; step < 200; ++step) {
      const SymTensor3 eps_next = eps_t + testutil::random_sym(rng, 0.03);
      const ReturnResult res = radial_return(mat, state, eps_next, eps_t, sigma_t);
      const double tol = 1e-10 * mat.sigma_y;
      CHECK(res.delta_gamma >= 0.0);
      const SymTensor3 eta = res.sigma.deviator() - res.new_state.back_stress;
      const double f =
          eta.norm() - std::sqrt(2.0 / 3.0) * (mat.sigma_y + mat.K_iso * res.new_state.alpha);
      CHECK(f <= tol);
      CHECK(std::abs(res.delta_gamma * f) <= tol);
      CHECK(std::abs(res.new_state.eps_p.trace() - state.eps_p.trace()) <= 1e-12);
      CHECK(std::abs(res.new_state.back_stress.trace()) <= 1e-10);
      CHECK(res.new_state.alpha >= state.alpha);
      state = res.new_state;
      eps_t = eps_next;
      sigma_t = res.sigma;
    }
  }
}

TEST_CASE("path consistency: sub-stepping converges at first order or better") {
  const MaterialParams mat = MaterialParams::make(200.0, 0.3, kSqrt3, 100.0, 0.0);
  auto drive = [&](int substeps) {
    UniaxialOracle dummy;  // not used; tensor path only
    (void)dummy;
    PlasticState state;
    SymTensor3 eps_t, sigma_t;
    const double e_total = 0.08;
    for (int i = 1; i <= substeps; ++i) {
      const SymTensor3 eps = uniaxial(e_total * i / substeps);
      const ReturnResult res = radial_return(mat, state, eps, eps_t, sigma_t);
      state = res.new_state;
      eps_t = eps;
      sigma_t = res.sigma;
    }
    return sigma_t;
  };
  // Proportional uniaxial-strain loading is exactly path independent for
  // this model, so compare against a slightly rotated two-leg path instead.
  auto two_leg = [&](int substeps) {
    PlasticState state;
    SymTensor3 eps_t, sigma_t;
    const SymTensor3 mid = {0.05, 0.0, 0.0, 0.04, 0, 0};
    const SymTensor3 fin = {0.08, 0.0, 0.0, 0.0, 0, 0};
    for (int i = 1; i <= substeps; ++i) {
      const double t = static_cast<double>(i) / substeps;
      SymTensor3 eps;
      if (t <= 0.5) {
        eps = 2.0 * t * mid;
      } else {
        eps = mid + (2.0 * t - 1.0) * (fin - mid);
      }
      const ReturnResult res = radial_return(mat, state, eps, eps_t, sigma_t);
      state = res.new_state;
      eps_t = eps;
      sigma_t = res.sigma;
    }
    return sigma_t;
  };
  const SymTensor3 fine = two_leg(512);
  const double err_coarse = (two_leg(8) - fine).norm();
  const double err_half = (two_leg(16) - fine).norm();
  CHECK(err_half * 1.5 < err_coarse);  // at least first-order decay
  (void)drive;
}

TEST_CASE("uniaxial cyclic drive matches the scalar oracle; Bauschinger ordering") {
  // Strain-driven single point, isotropic (K=100) vs kinematic (H=100).
  std::vector<double> history;
  for (int i = 1; i <= 20; ++i) history.push_back(0.004 * i);   // load to 0.08
  for (int i = 1; i <= 40; ++i) history.push_back(0.08 - 0.004 * i);  // reverse to -0.08

  double reverse_yield_iso = 0.0, reverse_yield_kin = 0.0;
  for (int mode = 0; mode < 2; ++mode) {
    const double K = mode == 0 ? 100.0 : 0.0;
    const double H = mode == 0 ? 0.0 : 100.0;
    const MaterialParams mat = MaterialParams::make(200.0, 0.3, kSqrt3, K, H);
    UniaxialOracle oracle;
    oracle.mat = mat;
    PlasticState state;
    SymTensor3 eps_t, sigma_t;
    double forward_alpha = 0.0;
    for (double e : history) {
      const double expected = oracle.step(e);
      const ReturnResult res = radial_return(mat, state, uniaxial(e), eps_t, sigma_t);
      state = res.new_state;
      eps_t = uniaxial(e);
      sigma_t = res.sigma;
      CHECK(sigma_t.xx == doctest::Approx(expected).epsilon(1e-12));
      if (e == 0.08) forward_alpha = state.alpha;
    }
    CHECK(state.alpha > forward_alpha);  // reverse flow adds plastic strain
    const double rev = std::abs(oracle.reverse_yield_s());
    if (mode == 0)
      reverse_yield_iso = rev;
    else
      reverse_yield_kin = rev;
  }
  CHECK(reverse_yield_iso > reverse_yield_kin);
}

TEST_CASE("algorithmic tangent: elastic branch reproduces the elastic law") {
  const MaterialParams mat = MaterialParams::make(50.0, 0.3, kSqrt3);
  const ReturnResult res =
      radial_return(mat, PlasticState{}, uniaxial(1e-4), SymTensor3{}, SymTensor3{});
  REQUIRE_FALSE(res.yielded);
  const TangentMatrix D = algorithmic_tangent(mat, res);
  std::mt19937_64 rng(5);
  for (int t = 0; t < 10; ++t) {
    const SymTensor3 deps = testutil::random_sym(rng, 1e-3);
    const SymTensor3 via_tangent = apply_tangent(D, deps);
    const SymTensor3 direct = elastic_stress(mat, deps);
    CHECK((via_tangent - direct).norm() < 1e-12 * std::max(1.0, direct.norm()));
  }
}

TEST_CASE("algorithmic tangent matches finite differences of the return map") {
  std::mt19937_64 rng(23);
  const double params[3][2] = {{0, 0}, {100, 0}, {0, 100}};
  for (auto [K, H] : params) {
    const MaterialParams mat = MaterialParams::make(200.0, 0.3, kSqrt3, K, H);
    for (int trial = 0; trial < 20; ++trial) {
      // Random committed state reached by one prior increment.
      const SymTensor3 eps_t = testutil::random_sym(rng, 0.05);
      const ReturnResult prior =
          radial_return(mat, PlasticState{}, eps_t, SymTensor3{}, SymTensor3{});
      const PlasticState state_t = prior.new_state;
      const SymTensor3 sigma_t = prior.sigma;
      const SymTensor3 eps = eps_t + testutil::random_sym(rng, 0.05);

      const ReturnResult res = radial_return(mat, state_t, eps, eps_t, sigma_t);
      const TangentMatrix D = algorithmic_tangent(mat, res);

      // Skip the measure-zero neighborhood of the branch switch where the
      // map is not differentiable.
      const TrialState trial_s = trial_state(mat, state_t, eps, eps_t, sigma_t);
      if (std::abs(trial_s.f_trial) < 1e-3) continue;

      const double h = 1e-6 * (1.0 + eps.norm());
      double worst = 0.0, scale = 0.0;
      double comp[6][2] = {};
      for (int c = 0; c < 6; ++c) {
        SymTensor3 dp{}, dm{};
        SymTensor3 pert{};
        double* entries = &pert.xx;
        entries[c] = h;
        dp = radial_return(mat, state_t, eps + pert, eps_t, sigma_t).sigma;
        dm = radial_return(mat, state_t, eps - pert, eps_t, sigma_t).sigma;
        const SymTensor3 fd = (1.0 / (2.0 * h)) * (dp - dm);
        const SymTensor3 an = apply_tangent(D, pert) * (1.0 / h);
        comp[c][0] = (fd - an).norm();
        comp[c][1] = fd.norm();
        worst = std::max(worst, comp[c][0]);
        scale = std::max(scale, comp[c][1]);
      }
      CHECK(worst <= 1e-6 * std::max(scale, 1.0));
    }
  }
}

TEST_CASE("plastic tangent is a contraction along the flow direction") {
  const MaterialParams mat = MaterialParams::make(200.0, 0.3, kSqrt3);
  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 20; ++trial) {
    const SymTensor3 eps = testutil::random_sym(rng, 0.1);
    const ReturnResult res = radial_return(mat, PlasticState{}, eps, SymTensor3{}, SymTensor3{});
    if (!res.yielded) continue;
    const TangentMatrix D_alg = algorithmic_tangent(mat, res);
    const TangentMatrix D_el = elastic_tangent(mat);
    const SymTensor3 deps = 1e-4 * res.flow_dir;
    CHECK(apply_tangent(D_alg, deps).norm() <= apply_tangent(D_el, deps).norm() + 1e-15);
  }
}

TEST_CASE("invariants: von Mises and equivalent plastic strain") {
  CHECK(von_mises(SymTensor3{2.5, 2.5, 2.5, 0, 0, 0}) == doctest::Approx(0.0));
  CHECK(von_mises(SymTensor3{3.0, 0, 0, 0, 0, 0}) == doctest::Approx(3.0));
  CHECK(von_mises(SymTensor3{-3.0, 0, 0, 0, 0, 0}) == doctest::Approx(3.0));
  CHECK(equivalent_plastic_strain(SymTensor3{}) == 0.0);
}

TEST_CASE("material parameter validation") {
  CHECK_THROWS_AS(MaterialParams::make(200.0, 0.3, -1.0), Error);
  CHECK_THROWS_AS(MaterialParams::make(200.0, 0.3, kSqrt3, -5.0, 0.0), Error);
  const MaterialParams mat = MaterialParams::make(200.0, 0.3, kSqrt3, 100.0, 50.0);
  // Lame constants consistent with E, nu.
  CHECK(mat.mu == doctest::Approx(mat.E / (2 * (1 + mat.nu))).epsilon(1e-12));
  CHECK(mat.lambda ==
        doctest::Approx(mat.nu * mat.E / ((1 + mat.nu) * (1 - 2 * mat.nu))).epsilon(1e-12));
}
