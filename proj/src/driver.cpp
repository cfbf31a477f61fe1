#include "plasticgraph/driver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "plasticgraph/error.hpp"

namespace plasticgraph {

DofField build_dof_field(const Mesh& mesh, const LoadStep& step) {
  DofField field = DofField::make(mesh.node_count(), mesh.dim());
  // Track the prescribing set per DOF so conflicts can name both sides.
  std::vector<const std::string*> owner(field.size(), nullptr);
  for (const auto& [set_name, components] : step.dirichlet) {
    auto it = mesh.node_sets().find(set_name);
    if (it == mesh.node_sets().end())
      fail(ErrorCode::DanglingReference,
           "load step '" + step.label + "' references unknown node set '" + set_name + "'");
    for (int c = 0; c < 3; ++c) {
      if (!components[c].has_value()) continue;
      if (c >= mesh.dim())
        fail(ErrorCode::SchemaError, "Dirichlet component " + std::to_string(c) +
                                         " out of range for a " + std::to_string(mesh.dim()) +
                                         "D mesh");
      const double value = *components[c];
      for (int node : it->second) {
        const int dof = field.dof(node, c);
        if (!field.mask[dof] && field.u_bar[dof] != value) {
          std::ostringstream msg;
          msg << "node " << node << " component " << c << " prescribed " << field.u_bar[dof]
              << " by set '" << *owner[dof] << "' and " << value << " by set '" << set_name
              << "'";
          fail(ErrorCode::ConflictingBC, msg.str());
        }
        field.prescribe(dof, value);
        owner[dof] = &set_name;
      }
    }
  }
  field.finalize();
  return field;
}

std::vector<double> build_external_force(const Mesh& mesh, const LoadStep& step) {
  return assemble_external_force(mesh, step.tractions);
}

SolutionState run_load_step(const Mesh& mesh, const GeometryCache& geom,
                            std::span<const MaterialParams> materials,
                            const SolveSettings& settings, const SolutionState* prev,
                            const LoadStep& step) {
  DofField dofs = build_dof_field(mesh, step);
  if (prev) {
    // Warm start: carry the previous converged displacement into the free
    // unknowns (prescribed DOFs are overridden by the new mask anyway).
    if (static_cast<int>(prev->u.size()) != dofs.size())
      fail(ErrorCode::LengthMismatch, "previous solution does not match this mesh");
    dofs.u_var = prev->u;
  }
  std::vector<double> f_ext = build_external_force(mesh, step);
  GaussHistory history =
      prev ? prev->history : GaussHistory::virgin(geom.total_gauss());

  LossEvaluator evaluator(mesh, geom, {materials.begin(), materials.end()}, settings.loss,
                          settings.hardening, dofs, std::move(f_ext), std::move(history),
                          settings.threads);

  const LbfgsConfig config = step.optimizer.value_or(settings.optimizer);

  SolutionState out;
  out.label = step.label;
  out.dofs = dofs;

  if (dofs.free_count() == 0) {
    // Fully prescribed step: a single forward evaluation fixes the state.
    out.loss = evaluator.loss_only(std::span<const double>{});
    out.trace.final_loss = out.loss;
    out.trace.reason = StopReason::gradient_tolerance;
  } else {
    Objective objective = [&evaluator](std::span<const double> x, std::span<double> g) {
      return evaluator.evaluate(x, g);
    };
    LbfgsResult result = lbfgs_minimize(objective, dofs.get_free(), config);
    out.trace = std::move(result.trace);
    out.dofs.set_free(result.x);
    // Refresh the evaluator state at the accepted minimizer (the last line
    // search evaluation may have probed elsewhere).
    std::vector<double> grad(result.x.size());
    out.loss = evaluator.evaluate(result.x, grad);
    out.converged = out.trace.converged();
  }

  out.u = evaluator.last_displacement();
  out.history = evaluator.commit();
  return out;
}

std::vector<SolutionState> run_history(const Mesh& mesh, std::span<const MaterialParams> materials,
                                       const SolveSettings& settings,
                                       std::span<const LoadStep> steps, bool keep_going,
                                       const std::function<void(const SolutionState&)>& on_step) {
  const GeometryCache geom = build_geometry(mesh, settings.quad_order);
  std::vector<SolutionState> states;
  const SolutionState* prev = nullptr;
  for (const LoadStep& step : steps) {
    SolutionState state = run_load_step(mesh, geom, materials, settings, prev, step);
    const bool converged = state.converged;
    states.push_back(std::move(state));
    prev = &states.back();
    if (on_step) on_step(states.back());
    if (!converged && !keep_going) break;
  }
  return states;
}

std::vector<uint8_t> default_movable_mask(const Mesh& mesh,
                                          std::span<const std::string> fix_axes) {
  const int dim = mesh.dim();
  std::vector<uint8_t> axis_fixed(dim, 0);
  for (const std::string& axis : fix_axes) {
    const int a = axis == "x" ? 0 : axis == "y" ? 1 : axis == "z" ? 2 : -1;
    if (a < 0 || a >= dim) fail(ErrorCode::SchemaError, "unknown axis '" + axis + "'");
    axis_fixed[a] = 1;
  }

  std::vector<uint8_t> movable(static_cast<size_t>(mesh.node_count()) * dim, 1);
  // A boundary facet pins its nodes unless it lies in a plane orthogonal to
  // a fixed axis: motion along the remaining axes keeps such a facet in its
  // plane, so thin slabs with a frozen thickness direction keep their
  // in-plane interior movable.
  for (const Facet& f : mesh.boundary_facets()) {
    auto conn = mesh.nodes_of(f.element);
    auto locals = face_nodes(mesh.kind(f.element), f.face);
    bool in_fixed_plane = false;
    for (int a = 0; a < dim && !in_fixed_plane; ++a) {
      if (!axis_fixed[a]) continue;
      const double first = mesh.coords()[conn[locals[0]] * dim + a];
      bool constant = true;
      for (int local : locals)
        constant = constant && std::abs(mesh.coords()[conn[local] * dim + a] - first) <= 1e-12;
      in_fixed_plane = constant;
    }
    if (in_fixed_plane) continue;
    for (int local : locals)
      for (int a = 0; a < dim; ++a) movable[conn[local] * dim + a] = 0;
  }
  for (int a = 0; a < dim; ++a)
    if (axis_fixed[a])
      for (int node = 0; node < mesh.node_count(); ++node) movable[node * dim + a] = 0;
  return movable;
}

RAdaptResult r_adapt(const Mesh& mesh, std::span<const MaterialParams> materials,
                     const SolveSettings& settings, const SolutionState* prev,
                     const SolutionState& converged, const LoadStep& step,
                     std::span<const uint8_t> movable, const RAdaptConfig& config) {
  if (settings.loss != LossMode::energy)
    fail(ErrorCode::ModeParameterMismatch, "node relocation requires the energy loss");

  std::vector<int> free_coords;
  for (size_t i = 0; i < movable.size(); ++i)
    if (movable[i]) free_coords.push_back(static_cast<int>(i));

  RAdaptResult res{mesh, converged, 0.0, 0.0, 0};
  std::vector<double> coords(mesh.coords().begin(), mesh.coords().end());

  GeometryCache geom = build_geometry(res.mesh, settings.quad_order);
  std::vector<double> f_ext = build_external_force(res.mesh, step);
  // The frozen increment origin is the state this step started from.
  GaussHistory origin =
      prev ? prev->history : GaussHistory::virgin(geom.total_gauss());
  LossEvaluator evaluator(res.mesh, geom, {materials.begin(), materials.end()}, settings.loss,
                          settings.hardening, converged.dofs, std::move(f_ext),
                          std::move(origin), settings.threads);
  std::vector<double> u_free = converged.dofs.get_free();
  res.initial_energy = evaluator.loss_only(u_free);
  double energy = res.initial_energy;

  LbfgsConfig coord_config = settings.optimizer;
  coord_config.max_iters = config.coord_iters;
  LbfgsConfig disp_config = settings.optimizer;
  disp_config.max_iters = config.disp_iters;

  for (int round = 0; round < config.rounds; ++round) {
    const double round_start = energy;

    // Coordinate block: u fixed, nodes move. Geometry is rebuilt per trial;
    // inverted trial meshes evaluate to +inf so the line search backs off.
    GeometryCache trial_geom;
    Objective coord_objective = [&](std::span<const double> xc, std::span<double> gc) {
      for (size_t k = 0; k < free_coords.size(); ++k) coords[free_coords[k]] = xc[k];
      try {
        trial_geom = build_geometry(res.mesh, settings.quad_order, coords);
      } catch (const Error& err) {
        if (err.code() == ErrorCode::InvertedElement)
          return std::numeric_limits<double>::infinity();
        throw;
      }
      evaluator.set_geometry(&trial_geom);
      const double loss = evaluator.loss_only(u_free);
      std::vector<double> grad_coords(coords.size());
      evaluator.coordinate_gradient(movable, grad_coords);
      for (size_t k = 0; k < free_coords.size(); ++k) gc[k] = grad_coords[free_coords[k]];
      return loss;
    };
    std::vector<double> xc(free_coords.size());
    for (size_t k = 0; k < free_coords.size(); ++k) xc[k] = coords[free_coords[k]];
    LbfgsResult coord_result = lbfgs_minimize(coord_objective, std::move(xc), coord_config);
    res.coord_iterations += coord_result.trace.iteration_count();
    for (size_t k = 0; k < free_coords.size(); ++k) coords[free_coords[k]] = coord_result.x[k];

    res.mesh = res.mesh.with_coords(coords);
    geom = build_geometry(res.mesh, settings.quad_order);
    evaluator.set_mesh(&res.mesh);
    evaluator.set_geometry(&geom);

    // Displacement block on the relocated mesh, warm-started.
    Objective disp_objective = [&](std::span<const double> x, std::span<double> g) {
      return evaluator.evaluate(x, g);
    };
    LbfgsResult disp_result = lbfgs_minimize(disp_objective, u_free, disp_config);
    u_free = std::move(disp_result.x);
    std::vector<double> grad(u_free.size());
    energy = evaluator.evaluate(u_free, grad);

    if (round_start - energy <= config.round_tol * (1.0 + std::abs(round_start))) break;
  }

  res.final_energy = energy;
  res.state = converged;
  res.state.dofs.set_free(u_free);
  res.state.u = evaluator.last_displacement();
  res.state.history = evaluator.commit();
  res.state.loss = energy;
  return res;
}

std::vector<MetricsEntry> error_metrics(const std::string& name, int components,
                                        std::span<const double> values,
                                        std::span<const double> reference) {
  if (values.size() != reference.size())
    fail(ErrorCode::LengthMismatch, "field '" + name + "' and reference differ in size");
  if (components < 1 || values.size() % components != 0)
    fail(ErrorCode::LengthMismatch, "field '" + name + "' is not divisible into components");
  const size_t n = values.size() / components;
  std::vector<MetricsEntry> out;
  for (int c = 0; c < components; ++c) {
    MetricsEntry entry;
    entry.field = name;
    entry.component = components == 1 ? -1 : c;
    double abs_sum = 0.0, diff_sq = 0.0, ref_sq = 0.0;
    for (size_t i = 0; i < n; ++i) {
      const double d = values[i * components + c] - reference[i * components + c];
      abs_sum += std::abs(d);
      diff_sq += d * d;
      ref_sq += reference[i * components + c] * reference[i * components + c];
    }
    entry.mae = abs_sum / static_cast<double>(n);
    if (ref_sq > 0.0) {
      entry.rel_l2 = std::sqrt(diff_sq) / std::sqrt(ref_sq);
    } else {
      entry.zero_reference = true;
      entry.rel_l2 = 0.0;
    }
    out.push_back(entry);
  }
  return out;
}

}  // namespace plasticgraph
