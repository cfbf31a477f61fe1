#include <cmath>
#include <random>

#include "doctest.h"
#include "plasticgraph/assembly.hpp"
#include "plasticgraph/driver.hpp"
#include "plasticgraph/error.hpp"
#include "plasticgraph/problem.hpp"
#include "test_helpers.hpp"

using namespace plasticgraph;

namespace {

const double kSqrt3 = std::sqrt(3.0);

LoadStep fixed_and_pulled(double pull_x, double pull_y = 0.0) {
  LoadStep step;
  step.label = "pull";
  step.dirichlet["x_min"] = {0.0, 0.0, std::nullopt};
  step.tractions["x_max"] = {pull_x, pull_y, 0.0};
  return step;
}

SolveSettings default_settings(LossMode loss, HardeningMode mode) {
  SolveSettings settings;
  settings.loss = loss;
  settings.hardening = mode;
  settings.optimizer.max_iters = 2000;
  settings.optimizer.tol_grad = 1e-12;
  return settings;
}

}  // namespace

TEST_CASE("compose_displacement forms") {
  DofField f = DofField::make(3, 2);
  for (int i = 0; i < 6; ++i) f.u_var[i] = 0.1 * (i + 1);
  f.finalize();
  CHECK(compose_displacement(f) == f.u_var);

  f.prescribe(2, -0.25);
  f.finalize();
  f.u_var[2] = 99.0;  // inert
  const std::vector<double> u = compose_displacement(f);
  CHECK(u[2] == -0.25);
  CHECK(u[3] == f.u_var[3]);

  DofField all = DofField::make(2, 2);
  for (int i = 0; i < 4; ++i) all.prescribe(i, 0.5 * i);
  all.finalize();
  const std::vector<double> ub = compose_displacement(all);
  for (int i = 0; i < 4; ++i) CHECK(ub[i] == 0.5 * i);
}

TEST_CASE("build_dof_field: conflicts and dangling sets") {
  const Mesh mesh = structured_mesh(ElementKind::quad4, std::vector<double>{1, 1},
                                    std::vector<int>{2, 2});
  LoadStep ok;
  ok.label = "ok";
  ok.dirichlet["x_min"] = {0.0, 0.0, std::nullopt};
  ok.dirichlet["y_min"] = {std::nullopt, 0.0, std::nullopt};  // corner overlap, same value
  const DofField dofs = build_dof_field(mesh, ok);
  CHECK(dofs.free_count() < dofs.size());

  LoadStep conflict = ok;
  conflict.dirichlet["y_min"] = {std::nullopt, 0.5, std::nullopt};  // corner now disagrees
  // x_min prescribes uy=0 on the corner node, y_min prescribes uy=0.5.
  conflict.dirichlet["x_min"] = {0.0, 0.0, std::nullopt};
  CHECK_THROWS_AS(build_dof_field(mesh, conflict), Error);
  try {
    build_dof_field(mesh, conflict);
  } catch (const Error& err) {
    CHECK(err.code() == ErrorCode::ConflictingBC);
  }

  LoadStep dangling;
  dangling.dirichlet["nope"] = {0.0, std::nullopt, std::nullopt};
  CHECK_THROWS_AS(build_dof_field(mesh, dangling), Error);

  LoadStep bad_component;
  bad_component.dirichlet["x_min"] = {std::nullopt, std::nullopt, 1.0};  // uz in 2D
  CHECK_THROWS_AS(build_dof_field(mesh, bad_component), Error);
}

TEST_CASE("zero-load step from a virgin state stays at rest") {
  const Mesh mesh = structured_mesh(ElementKind::quad4, std::vector<double>{1, 1},
                                    std::vector<int>{2, 2});
  const GeometryCache geom = build_geometry(mesh);
  const std::vector<MaterialParams> mats = {MaterialParams::make(50.0, 0.3, kSqrt3)};
  LoadStep step;
  step.label = "rest";
  step.dirichlet["x_min"] = {0.0, 0.0, std::nullopt};
  const SolveSettings settings = default_settings(LossMode::energy, HardeningMode::perfect);
  const SolutionState state = run_load_step(mesh, geom, mats, settings, nullptr, step);
  CHECK(state.loss == 0.0);
  CHECK(state.trace.iteration_count() == 0);
  for (double v : state.u) CHECK(v == 0.0);
}

TEST_CASE("elastic step matches the direct solve") {
  const Mesh mesh = structured_mesh(ElementKind::quad4, std::vector<double>{2, 1},
                                    std::vector<int>{4, 2});
  const GeometryCache geom = build_geometry(mesh);
  const std::vector<MaterialParams> mats = {MaterialParams::make(50.0, 0.3, 1e9)};
  const LoadStep step = fixed_and_pulled(0.5, 0.2);
  const SolveSettings settings = default_settings(LossMode::energy, HardeningMode::perfect);
  const SolutionState state = run_load_step(mesh, geom, mats, settings, nullptr, step);
  REQUIRE(state.converged);

  const DofField dofs = build_dof_field(mesh, step);
  const std::vector<double> f_ext = build_external_force(mesh, step);
  const std::vector<double> u_ref = solve_elastic(mesh, geom, mats, dofs, f_ext);
  double scale = 0.0;
  for (double v : u_ref) scale = std::max(scale, std::abs(v));
  for (size_t i = 0; i < u_ref.size(); ++i)
    CHECK(std::abs(state.u[i] - u_ref[i]) <= 1e-8 * scale);
}

TEST_CASE("fully prescribed uniaxial cyclic drive matches the scalar oracle per step") {
  // Single hex with every face displacement-controlled to a homogeneous
  // uniaxial strain state: eps = diag(e, 0, 0).
  const Mesh mesh = structured_mesh(ElementKind::hex8, std::vector<double>{1, 1, 1},
                                    std::vector<int>{1, 1, 1});
  const GeometryCache geom = build_geometry(mesh);

  for (int mode = 0; mode < 2; ++mode) {
    const double K = mode == 0 ? 100.0 : 0.0;
    const double H = mode == 0 ? 0.0 : 100.0;
    const std::vector<MaterialParams> mats = {MaterialParams::make(200.0, 0.3, kSqrt3, K, H)};
    const SolveSettings settings = default_settings(
        LossMode::energy, mode == 0 ? HardeningMode::isotropic : HardeningMode::kinematic);

    testutil::UniaxialOracle oracle;
    oracle.mat = mats[0];

    std::vector<LoadStep> steps;
    for (double e : {0.02, 0.05, 0.08, 0.03, -0.02, -0.06}) {
      LoadStep step;
      step.label = "e" + std::to_string(e);
      step.dirichlet["x_min"] = {0.0, std::nullopt, std::nullopt};
      step.dirichlet["x_max"] = {e, std::nullopt, std::nullopt};
      step.dirichlet["y_min"] = {std::nullopt, 0.0, std::nullopt};
      step.dirichlet["y_max"] = {std::nullopt, 0.0, std::nullopt};
      step.dirichlet["z_min"] = {std::nullopt, std::nullopt, 0.0};
      step.dirichlet["z_max"] = {std::nullopt, std::nullopt, 0.0};
      steps.push_back(step);
    }
    const std::vector<SolutionState> states = run_history(mesh, mats, settings, steps);
    REQUIRE(states.size() == steps.size());
    const double drives[6] = {0.02, 0.05, 0.08, 0.03, -0.02, -0.06};
    std::vector<double> prev_alpha(states[0].history.size(), 0.0);
    for (size_t s = 0; s < states.size(); ++s) {
      const double expected = oracle.step(drives[s]);
      for (const SymTensor3& sig : states[s].history.stress)
        CHECK(sig.xx == doctest::Approx(expected).epsilon(1e-8));
      // alpha never decreases across the history, per Gauss point
      for (int g = 0; g < states[s].history.size(); ++g) {
        CHECK(states[s].history.states[g].alpha >= prev_alpha[g]);
        prev_alpha[g] = states[s].history.states[g].alpha;
      }
    }
  }
}

TEST_CASE("traction-driven load-unload: plastic residuals stay, unloading adds no flow") {
  const Mesh mesh = structured_mesh(ElementKind::quad4, std::vector<double>{1, 1},
                                    std::vector<int>{2, 2});
  const GeometryCache geom = build_geometry(mesh);
  const std::vector<MaterialParams> mats = {MaterialParams::make(200.0, 0.3, kSqrt3, 100.0, 0.0)};
  SolveSettings settings = default_settings(LossMode::energy, HardeningMode::isotropic);

  std::vector<LoadStep> steps = {fixed_and_pulled(3.5), fixed_and_pulled(0.0)};
  steps[0].label = "load";
  steps[1].label = "unload";
  const std::vector<SolutionState> states = run_history(mesh, mats, settings, steps);
  REQUIRE(states.size() == 2);
  REQUIRE(states[0].converged);
  REQUIRE(states[1].converged);

  double alpha_max = 0.0;
  for (const PlasticState& ps : states[0].history.states) alpha_max = std::max(alpha_max, ps.alpha);
  CHECK(alpha_max > 1e-4);  // the load step actually yields

  // Unloading adds no plastic flow anywhere.
  for (int g = 0; g < geom.total_gauss(); ++g)
    CHECK(std::abs(states[1].history.states[g].alpha - states[0].history.states[g].alpha) <=
          1e-12);

  // Residual displacement after full unload.
  double residual = 0.0;
  for (double v : states[1].u) residual = std::max(residual, std::abs(v));
  CHECK(residual > 1e-5);
}

TEST_CASE("elastic load-unload returns to rest") {
  const Mesh mesh = structured_mesh(ElementKind::quad4, std::vector<double>{1, 1},
                                    std::vector<int>{2, 2});
  const std::vector<MaterialParams> mats = {MaterialParams::make(200.0, 0.3, 1e9)};
  SolveSettings settings = default_settings(LossMode::energy, HardeningMode::perfect);
  std::vector<LoadStep> steps = {fixed_and_pulled(1.0), fixed_and_pulled(0.0)};
  const std::vector<SolutionState> states = run_history(mesh, mats, settings, steps);
  REQUIRE(states.size() == 2);
  for (double v : states[1].u) CHECK(std::abs(v) < 1e-9);
  for (const PlasticState& ps : states[1].history.states) CHECK(ps.alpha == 0.0);
}

TEST_CASE("mask inertness in run_load_step") {
  const Mesh mesh = structured_mesh(ElementKind::quad4, std::vector<double>{1, 1},
                                    std::vector<int>{2, 2});
  const GeometryCache geom = build_geometry(mesh);
  const std::vector<MaterialParams> mats = {MaterialParams::make(200.0, 0.3, kSqrt3, 100.0, 0.0)};
  const SolveSettings settings = default_settings(LossMode::energy, HardeningMode::isotropic);
  const LoadStep step = fixed_and_pulled(1.5);

  const SolutionState a = run_load_step(mesh, geom, mats, settings, nullptr, step);

  // Previous state whose u_var carries junk at masked DOFs.
  SolutionState junk_prev = a;
  std::mt19937_64 rng(3);
  const DofField dofs = build_dof_field(mesh, step);
  junk_prev.u = a.u;
  for (int i = 0; i < dofs.size(); ++i)
    if (!dofs.mask[i]) junk_prev.u[i] = a.u[i];  // composed values stay valid
  const SolutionState b = run_load_step(mesh, geom, mats, settings, nullptr, step);
  CHECK(a.u == b.u);
  CHECK(a.loss == b.loss);
}

TEST_CASE("run_history warm start reaches the same answer as cold start") {
  const Mesh mesh = structured_mesh(ElementKind::quad4, std::vector<double>{2, 1},
                                    std::vector<int>{4, 2});
  const std::vector<MaterialParams> mats = {MaterialParams::make(200.0, 0.3, kSqrt3, 100.0, 0.0)};
  SolveSettings settings = default_settings(LossMode::energy, HardeningMode::isotropic);
  std::vector<LoadStep> steps = {fixed_and_pulled(2.0), fixed_and_pulled(2.6)};
  steps[0].label = "a";
  steps[1].label = "b";
  const std::vector<SolutionState> warm = run_history(mesh, mats, settings, steps);
  REQUIRE(warm.size() == 2);
  CHECK(warm[1].converged);
  // Second step converges to an equilibrium: residual below tolerance.
  CHECK(warm[1].trace.final_grad_inf <= 1e-10 * (1.0 + std::abs(warm[1].loss)));
}

TEST_CASE("four-step cyclic footing: equivalent plastic strain repeats across unload pairs") {
  // Reduced single-point quadrature, load / unload / larger load / unload.
  // Each unload step adds no plastic flow, so the Gauss-point eqps fields
  // at steps 1-2 and at steps 3-4 are pairwise identical.
  const char* text = R"({
    "mesh": {
      "structured": {"kind": "quad4", "extents": [20, 10], "divisions": [10, 5]},
      "facet_sets": {"load": {"box": [[5, 10], [15, 10]]}},
      "quadrature": 1
    },
    "materials": {"soil": {"E": 50.0, "nu": 0.3, "sigma_y": 1.7320508075688772}},
    "hardening": "perfect",
    "loss": "energy",
    "optimizer": {"max_iters": 5000, "tol_grad": 1e-11},
    "load_steps": [
      {"label": "load1",
       "dirichlet": {"y_min": {"ux": 0, "uy": 0}, "x_min": {"ux": 0}, "x_max": {"ux": 0}},
       "tractions": {"load": [0, -2.8]}},
      {"label": "unload1",
       "dirichlet": {"y_min": {"ux": 0, "uy": 0}, "x_min": {"ux": 0}, "x_max": {"ux": 0}},
       "tractions": {"load": [0, -0.4]}},
      {"label": "load2",
       "dirichlet": {"y_min": {"ux": 0, "uy": 0}, "x_min": {"ux": 0}, "x_max": {"ux": 0}},
       "tractions": {"load": [0, -3.2]}},
      {"label": "unload2",
       "dirichlet": {"y_min": {"ux": 0, "uy": 0}, "x_min": {"ux": 0}, "x_max": {"ux": 0}},
       "tractions": {"load": [0, -0.4]}}
    ]
  })";
  const ProblemConfig config = parse_problem_text(text);
  const std::vector<SolutionState> states =
      run_history(config.mesh, config.materials, config.settings, config.steps);
  REQUIRE(states.size() == 4);
  for (const SolutionState& s : states) REQUIRE(s.converged);

  double peak1 = 0.0, peak2 = 0.0;
  for (int g = 0; g < states[0].history.size(); ++g) {
    const double e1 = equivalent_plastic_strain(states[0].history.states[g].eps_p);
    const double e2 = equivalent_plastic_strain(states[1].history.states[g].eps_p);
    const double e3 = equivalent_plastic_strain(states[2].history.states[g].eps_p);
    const double e4 = equivalent_plastic_strain(states[3].history.states[g].eps_p);
    CHECK(std::abs(e2 - e1) <= 1e-12);
    CHECK(std::abs(e4 - e3) <= 1e-12);
    CHECK(e3 >= e1 - 1e-15);  // the larger reload only adds plastic strain
    peak1 = std::max(peak1, e1);
    peak2 = std::max(peak2, e3);
  }
  CHECK(peak1 > 1e-6);
  CHECK(peak2 > peak1);
}

TEST_CASE("run_history stops at a non-converged step unless told to keep going") {
  const Mesh mesh = structured_mesh(ElementKind::quad4, std::vector<double>{1, 1},
                                    std::vector<int>{2, 2});
  const std::vector<MaterialParams> mats = {MaterialParams::make(200.0, 0.3, kSqrt3, 100.0, 0.0)};
  SolveSettings settings = default_settings(LossMode::energy, HardeningMode::isotropic);
  settings.optimizer.max_iters = 2;  // guaranteed budget exhaustion
  settings.optimizer.tol_grad = 1e-14;
  std::vector<LoadStep> steps = {fixed_and_pulled(1.5), fixed_and_pulled(0.5)};

  const std::vector<SolutionState> stopped = run_history(mesh, mats, settings, steps, false);
  CHECK(stopped.size() == 1);
  CHECK_FALSE(stopped[0].converged);

  const std::vector<SolutionState> forced = run_history(mesh, mats, settings, steps, true);
  CHECK(forced.size() == 2);
}

TEST_CASE("error metrics") {
  const std::vector<double> ref = {1.0, 2.0, 3.0, 4.0};
  auto zero = error_metrics("u", 2, ref, ref);
  for (const auto& e : zero) {
    CHECK(e.mae == 0.0);
    CHECK(e.rel_l2 == 0.0);
  }

  std::vector<double> twice = ref;
  for (double& v : twice) v *= 2.0;
  auto doubled = error_metrics("u", 1, twice, ref);
  CHECK(doubled[0].rel_l2 == doctest::Approx(1.0));

  std::vector<double> shifted = ref;
  for (double& v : shifted) v += 0.25;
  auto shift = error_metrics("u", 1, shifted, ref);
  CHECK(shift[0].mae == doctest::Approx(0.25));

  const std::vector<double> zeros(4, 0.0);
  auto z = error_metrics("eqps", 1, ref, zeros);
  CHECK(z[0].zero_reference);
  CHECK(z[0].mae == doctest::Approx((1 + 2 + 3 + 4) / 4.0));

  CHECK_THROWS_AS(error_metrics("u", 2, ref, std::vector<double>{1.0}), Error);
}

TEST_CASE("coordinate gradient matches finite differences of the energy") {
  const Mesh mesh = structured_mesh(ElementKind::quad4, std::vector<double>{2, 1},
                                    std::vector<int>{4, 2});
  const GeometryCache geom = build_geometry(mesh);
  const std::vector<MaterialParams> mats = {MaterialParams::make(50.0, 0.3, kSqrt3)};
  const LoadStep step = fixed_and_pulled(1.0, -0.4);
  const SolveSettings settings = default_settings(LossMode::energy, HardeningMode::perfect);
  const SolutionState sol = run_load_step(mesh, geom, mats, settings, nullptr, step);
  const std::vector<double> u_free = sol.dofs.get_free();

  const std::vector<uint8_t> movable = default_movable_mask(mesh, {});
  int n_movable = 0;
  for (uint8_t m : movable) n_movable += m;
  REQUIRE(n_movable > 0);

  // Analytic coordinate gradient at the converged state.
  std::vector<double> coords(mesh.coords().begin(), mesh.coords().end());
  LossEvaluator eval(mesh, geom, mats, LossMode::energy, HardeningMode::perfect, sol.dofs,
                     build_external_force(mesh, step), GaussHistory::virgin(geom.total_gauss()));
  eval.loss_only(u_free);
  std::vector<double> grad(coords.size());
  eval.coordinate_gradient(movable, grad);

  GeometryCache trial;
  auto energy_at = [&](const std::vector<double>& c) {
    trial = build_geometry(mesh, 0, c);
    eval.set_geometry(&trial);
    const double value = eval.loss_only(u_free);
    eval.set_geometry(&geom);
    return value;
  };
  for (size_t i = 0; i < coords.size(); ++i) {
    if (!movable[i]) {
      CHECK(grad[i] == 0.0);
      continue;
    }
    const double h = 1e-6;
    std::vector<double> c = coords;
    c[i] += h;
    const double fp = energy_at(c);
    c[i] -= 2 * h;
    const double fm = energy_at(c);
    const double fd = (fp - fm) / (2 * h);
    CHECK(grad[i] == doctest::Approx(fd).epsilon(1e-5));
  }
}

TEST_CASE("r_adapt lowers the energy and leaves fixed coordinates untouched") {
  // Footing-like: pressure over part of the top edge, so the exact solution
  // has corner singularities a uniform mesh cannot capture.
  Mesh mesh = structured_mesh(ElementKind::quad4, std::vector<double>{4, 2},
                              std::vector<int>{6, 3});
  {
    std::vector<Facet> load;
    for (const Facet& f : mesh.facet_sets().at("y_max")) {
      bool inside = true;
      for (int local : face_nodes(mesh.kind(f.element), f.face)) {
        const double x = mesh.coords()[mesh.nodes_of(f.element)[local] * 2];
        inside = inside && x >= 1.0 - 1e-9 && x <= 3.0 + 1e-9;
      }
      if (inside) load.push_back(f);
    }
    REQUIRE(!load.empty());
    mesh = mesh.with_sets({}, {{"load", load}});
  }
  const std::vector<MaterialParams> mats = {MaterialParams::make(50.0, 0.3, kSqrt3)};
  SolveSettings settings = default_settings(LossMode::energy, HardeningMode::perfect);

  LoadStep step;
  step.label = "press";
  step.dirichlet["y_min"] = {0.0, 0.0, std::nullopt};
  step.dirichlet["x_min"] = {0.0, std::nullopt, std::nullopt};
  step.dirichlet["x_max"] = {0.0, std::nullopt, std::nullopt};
  step.tractions["load"] = {0.0, -1.1, 0.0};

  const GeometryCache geom = build_geometry(mesh);
  const SolutionState converged = run_load_step(mesh, geom, mats, settings, nullptr, step);
  REQUIRE(converged.converged);

  RAdaptConfig config;
  config.rounds = 2;
  config.coord_iters = 30;
  config.disp_iters = 100;
  const std::vector<uint8_t> movable = default_movable_mask(mesh, {});
  const RAdaptResult adapted =
      r_adapt(mesh, mats, settings, nullptr, converged, step, movable, config);

  CHECK(adapted.final_energy < adapted.initial_energy);
  // Boundary coordinates bit-unchanged.
  for (size_t i = 0; i < movable.size(); ++i)
    if (!movable[i]) CHECK(adapted.mesh.coords()[i] == mesh.coords()[i]);
  // Relocated mesh still validates (no inverted elements).
  const GeometryCache check = build_geometry(adapted.mesh);
  for (double d : check.detjw) CHECK(d > 0.0);

  // All coordinates masked: identity.
  const std::vector<uint8_t> none(movable.size(), 0);
  RAdaptConfig tiny_config;
  tiny_config.rounds = 1;
  tiny_config.coord_iters = 5;
  tiny_config.disp_iters = 5;
  const RAdaptResult frozen =
      r_adapt(mesh, mats, settings, nullptr, converged, step, none, tiny_config);
  for (size_t i = 0; i < movable.size(); ++i)
    CHECK(frozen.mesh.coords()[i] == mesh.coords()[i]);
  CHECK(frozen.final_energy <= frozen.initial_energy + 1e-12 * std::abs(frozen.initial_energy));

  // Node relocation is defined for the energy loss only.
  SolveSettings galerkin = settings;
  galerkin.loss = LossMode::galerkin;
  CHECK_THROWS_AS(r_adapt(mesh, mats, galerkin, nullptr, converged, step, movable, tiny_config),
                  Error);
}
