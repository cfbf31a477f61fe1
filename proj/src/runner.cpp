#include "plasticgraph/runner.hpp"

#include <Eigen/SparseCore>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "plasticgraph/assembly.hpp"
#include "plasticgraph/error.hpp"
#include "plasticgraph/vtk.hpp"

namespace plasticgraph {

namespace {

std::string step_stem(const std::string& dir, int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "step_%03d", index);
  return dir + "/" + buf;
}

void write_step_outputs(const ProblemConfig& config, const Mesh& mesh, const SolutionState& state,
                        const std::string& stem, RunOutcome& outcome) {
  const GeometryCache geom = build_geometry(mesh, config.settings.quad_order);
  const FieldData fields = collect_fields(mesh, state, config.output.fields);

  std::map<std::string, std::vector<double>> point_vectors;
  std::map<std::string, std::vector<double>> cell_scalars;
  point_vectors["u"] = state.u;
  const char* comp_names[6] = {"xx", "yy", "zz", "xy", "yz", "zx"};
  for (const auto& [name, field] : fields.fields) {
    if (name == "u") continue;
    if (field.first == 1) {
      cell_scalars[name] = element_average(mesh, geom.gp_offset, field.second);
    } else {
      // Tensor Gauss fields export one element-averaged scalar per component.
      const int comps = field.first;
      std::vector<double> slice(field.second.size() / comps);
      for (int c = 0; c < comps; ++c) {
        for (size_t g = 0; g < slice.size(); ++g) slice[g] = field.second[g * comps + c];
        cell_scalars[name + "_" + comp_names[c]] =
            element_average(mesh, geom.gp_offset, slice);
      }
    }
  }
  write_vtk(mesh, point_vectors, cell_scalars, stem + ".vtk");
  outcome.written_files.push_back(stem + ".vtk");

  write_fields(fields, stem + "_fields.json");
  outcome.written_files.push_back(stem + "_fields.json");

  write_trace_csv(state.trace, stem + "_trace.csv");
  outcome.written_files.push_back(stem + "_trace.csv");
}

std::vector<double> probe_vector(int n, double scale) {
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) v[i] = scale * (1.0 + 0.3 * std::sin(1.0 + 0.7 * i));
  return v;
}

}  // namespace

RunOutcome run_problem(const ProblemConfig& config, const RunOptions& options) {
  RunOutcome outcome;
  std::ostringstream report;

  SolveSettings settings = config.settings;
  settings.threads = options.threads;
  const std::string dir =
      options.output_dir.empty() ? config.output.directory : options.output_dir;
  std::filesystem::create_directories(dir);

  for (const std::string& warning : config.warnings) report << "warning: " << warning << "\n";

  std::vector<SolutionState> states = run_history(config.mesh, config.materials, settings,
                                                  config.steps, options.keep_going);
  for (size_t i = 0; i < states.size(); ++i) {
    const SolutionState& state = states[i];
    if (!state.converged) outcome.all_converged = false;
    report << state.label << ": loss=" << state.loss
           << " iters=" << state.trace.iteration_count()
           << " grad_inf=" << state.trace.final_grad_inf
           << " stop=" << to_string(state.trace.reason) << "\n";
    const std::string stem = step_stem(dir, static_cast<int>(i) + 1);
    write_step_outputs(config, config.mesh, state, stem, outcome);

    auto ref = config.references.find(state.label);
    if (ref != config.references.end()) {
      const FieldData reference = read_fields(ref->second);
      const FieldData ours = collect_fields(config.mesh, state, config.output.fields);
      const auto entries = compare_fields(ours, reference);
      const std::string metrics_path = stem + "_metrics.csv";
      std::ofstream mout(metrics_path);
      mout << metrics_report(entries);
      outcome.written_files.push_back(metrics_path);
      for (const MetricsEntry& e : entries) {
        report << "  metric " << e.field;
        if (e.component >= 0) report << "[" << e.component << "]";
        report << ": mae=" << e.mae;
        if (!e.zero_reference) report << " rel_l2=" << e.rel_l2;
        report << "\n";
      }
    }
  }

  if (config.r_adapt_enabled && !states.empty() && outcome.all_converged) {
    const SolutionState* prev = states.size() > 1 ? &states[states.size() - 2] : nullptr;
    const std::vector<uint8_t> movable =
        default_movable_mask(config.mesh, config.r_adapt.fix_axes);
    RAdaptResult adapted = r_adapt(config.mesh, config.materials, settings, prev, states.back(),
                                   config.steps.back(), movable, config.r_adapt);
    report << "r_adapt: energy " << adapted.initial_energy << " -> " << adapted.final_energy
           << " (" << adapted.coord_iterations << " coordinate iterations)\n";
    const std::string stem = step_stem(dir, static_cast<int>(states.size())) + "_adapted";
    write_step_outputs(config, adapted.mesh, adapted.state, stem, outcome);
  }

  outcome.report = report.str();
  return outcome;
}

std::vector<std::vector<int>> parse_mesh_list(const std::string& text) {
  std::vector<std::vector<int>> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::vector<int> divisions;
    std::stringstream is(item);
    std::string part;
    while (std::getline(is, part, 'x')) {
      try {
        divisions.push_back(std::stoi(part));
      } catch (...) {
        fail(ErrorCode::SchemaError, "bad mesh divisions '" + item + "'");
      }
    }
    if (divisions.size() < 2 || divisions.size() > 3)
      fail(ErrorCode::SchemaError, "bad mesh divisions '" + item + "'");
    out.push_back(std::move(divisions));
  }
  if (out.empty()) fail(ErrorCode::SchemaError, "empty mesh list");
  return out;
}

std::vector<SpectralReport> rate_study(const ProblemConfig& config,
                                       const RateStudyOptions& options) {
  if (!config.structured)
    fail(ErrorCode::SchemaError, "the rate study requires a structured mesh problem");
  if (config.steps.empty()) fail(ErrorCode::SchemaError, "no load steps");

  std::vector<SpectralReport> reports;
  for (const std::vector<int>& divisions : options.meshes) {
    if (static_cast<int>(divisions.size()) != dimension(config.structured->kind))
      fail(ErrorCode::SchemaError, "mesh divisions do not match the problem dimension");
    Mesh mesh = structured_mesh(config.structured->kind, config.structured->extents, divisions,
                                config.structured->origin);
    {
      // Re-select box-defined sets on the rebuilt mesh.
      std::map<std::string, std::vector<int>> node_sets;
      std::map<std::string, std::vector<Facet>> facet_sets;
      for (const auto& [name, box] : config.node_set_boxes)
        node_sets[name] = box_select_nodes(mesh, box);
      for (const auto& [name, box] : config.facet_set_boxes)
        facet_sets[name] = box_select_facets(mesh, box);
      if (!node_sets.empty() || !facet_sets.empty())
        mesh = mesh.with_sets(std::move(node_sets), std::move(facet_sets));
    }
    const GeometryCache geom = build_geometry(mesh, config.settings.quad_order);
    const LoadStep& step = config.steps.front();
    const DofField dofs = build_dof_field(mesh, step);
    const std::vector<double> f_ext = build_external_force(mesh, step);

    SpectralReport report;
    {
      std::ostringstream name;
      for (size_t i = 0; i < divisions.size(); ++i) name << (i ? "x" : "") << divisions[i];
      report.mesh = name.str();
    }
    report.n_free = dofs.free_count();

    const Eigen::SparseMatrix<double> K =
        assemble_elastic_stiffness(mesh, geom, config.materials, dofs);
    const LinearOperator op{dofs.free_count(),
                            [&K](std::span<const double> x, std::span<double> y) {
                              Eigen::Map<const Eigen::VectorXd> xv(x.data(), x.size());
                              Eigen::Map<Eigen::VectorXd> yv(y.data(), y.size());
                              yv = K * xv;
                            }};
    if (options.spectrum) {
      const auto [lo, hi] = extreme_eigenvalues(op);
      report.lambda_min = lo;
      report.lambda_max = hi;
      report.kappa = hi / lo;
      report.rho_star = (report.kappa - 1.0) / (report.kappa + 1.0);
      report.kappa_sq_check = verify_square_law(op);
    }

    // Fixed-step GD on the elastic quadratic with the optimal step size.
    if (options.spectrum) {
      const std::vector<double> u_full = solve_elastic(mesh, geom, config.materials, dofs, f_ext,
                                                       options.threads);
      DofField sol = dofs;
      sol.u_var = u_full;
      const std::vector<double> x_star = sol.get_free();
      // Right-hand side consistent with the reduced system, b = K x*.
      Eigen::VectorXd b =
          K * Eigen::Map<const Eigen::VectorXd>(x_star.data(), x_star.size());
      Objective quadratic = [&](std::span<const double> x, std::span<double> g) {
        Eigen::Map<const Eigen::VectorXd> xv(x.data(), x.size());
        Eigen::VectorXd Kx = K * xv;
        double fval = 0.0;
        for (int i = 0; i < dofs.free_count(); ++i) {
          g[i] = Kx(i) - b(i);
          fval += 0.5 * x[i] * Kx(i) - b(i) * x[i];
        }
        return fval;
      };
      const double alpha = 2.0 / (report.lambda_max + report.lambda_min);
      const int iters = std::clamp(
          static_cast<int>(std::ceil(std::log(1e-9) / std::log(report.rho_star))), 30, 2000);
      std::vector<double> x0 = x_star;
      const std::vector<double> seed = probe_vector(dofs.free_count(), 1.0);
      for (int i = 0; i < dofs.free_count(); ++i) x0[i] += seed[i];
      const GdResult gd = gradient_descent(quadratic, std::move(x0), alpha, iters, &x_star);
      report.measured_rate = fit_contraction_rate(gd.error_trace);
    }

    // L-BFGS iterations until the displacement error against a tight
    // reference solve drops below iter_tol, for both losses.
    {
      const int budget =
          options.max_iters > 0 ? options.max_iters : config.settings.optimizer.max_iters;
      LbfgsConfig tight = config.settings.optimizer;
      tight.tol_grad = 1e-12;
      tight.max_iters = 4 * budget;
      LossEvaluator ref_eval(mesh, geom, config.materials, LossMode::energy,
                             config.settings.hardening, dofs, f_ext,
                             GaussHistory::virgin(geom.total_gauss()), options.threads);
      Objective ref_objective = [&ref_eval](std::span<const double> x, std::span<double> g) {
        return ref_eval.evaluate(x, g);
      };
      const LbfgsResult reference =
          lbfgs_minimize(ref_objective, std::vector<double>(dofs.free_count(), 0.0), tight);
      const std::vector<double>& u_star = reference.x;
      double u_star_norm = 0.0;
      for (double v : u_star) u_star_norm += v * v;
      u_star_norm = std::sqrt(u_star_norm);

      for (LossMode loss : {LossMode::energy, LossMode::galerkin}) {
        LossEvaluator eval(mesh, geom, config.materials, loss, config.settings.hardening, dofs,
                           f_ext, GaussHistory::virgin(geom.total_gauss()), options.threads);
        Objective objective = [&eval](std::span<const double> x, std::span<double> g) {
          return eval.evaluate(x, g);
        };
        LbfgsConfig run = config.settings.optimizer;
        run.max_iters = budget;
        run.tol_grad = 1e-14;  // let the iteration budget or the observer decide
        int reached = -1;
        IterationObserver observer = [&](int iter, std::span<const double> x, double, double) {
          if (reached >= 0) return;
          double err = 0.0;
          for (size_t i = 0; i < x.size(); ++i) {
            const double d = x[i] - u_star[i];
            err += d * d;
          }
          if (std::sqrt(err) <= options.iter_tol * u_star_norm) reached = iter;
        };
        lbfgs_minimize(objective, std::vector<double>(dofs.free_count(), 0.0), run, observer);
        if (loss == LossMode::energy)
          report.iters_energy = reached;
        else
          report.iters_galerkin = reached;
      }
    }
    reports.push_back(std::move(report));
  }
  return reports;
}

GradCheckReport gradcheck(const ProblemConfig& config, uint64_t seed, int points,
                          double tol_energy, double tol_galerkin, int threads) {
  if (config.steps.empty()) fail(ErrorCode::SchemaError, "no load steps");
  const Mesh& mesh = config.mesh;
  const GeometryCache geom = build_geometry(mesh, config.settings.quad_order);
  const LoadStep& step = config.steps.front();
  const DofField dofs = build_dof_field(mesh, step);
  const std::vector<double> f_ext = build_external_force(mesh, step);
  const int n = dofs.free_count();

  // Problem-scaled admissible baseline: the elastic direct solution.
  const std::vector<double> u_elastic =
      solve_elastic(mesh, geom, config.materials, dofs, f_ext, threads);
  DofField base = dofs;
  base.u_var = u_elastic;
  const std::vector<double> x_base = base.get_free();
  double scale = 0.0;
  for (double v : x_base) scale = std::max(scale, std::abs(v));
  for (int i = 0; i < dofs.size(); ++i) scale = std::max(scale, std::abs(dofs.u_bar[i]));
  if (scale == 0.0) scale = 1.0;

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(-0.5, 0.5);

  GradCheckReport report;
  report.points = points;
  std::ostringstream text;

  for (LossMode loss : {LossMode::energy, LossMode::galerkin}) {
    LossEvaluator eval(mesh, geom, config.materials, loss, config.settings.hardening, dofs, f_ext,
                       GaussHistory::virgin(geom.total_gauss()), threads);
    double worst = 0.0;
    for (int p = 0; p < points; ++p) {
      std::vector<double> x(n);
      for (int i = 0; i < n; ++i) x[i] = x_base[i] + scale * uniform(rng);
      std::vector<double> grad(n);
      eval.evaluate(x, grad);
      double err_inf = 0.0, ref_inf = 0.0;
      for (int i = 0; i < n; ++i) {
        const double h = 1e-6 * (1.0 + std::abs(x[i]));
        const double keep = x[i];
        x[i] = keep + h;
        const double f_plus = eval.loss_only(x);
        x[i] = keep - h;
        const double f_minus = eval.loss_only(x);
        x[i] = keep;
        const double fd = (f_plus - f_minus) / (2.0 * h);
        err_inf = std::max(err_inf, std::abs(grad[i] - fd));
        ref_inf = std::max(ref_inf, std::abs(fd));
      }
      worst = std::max(worst, err_inf / std::max(ref_inf, 1e-300));
    }
    if (loss == LossMode::energy)
      report.max_rel_energy = worst;
    else
      report.max_rel_galerkin = worst;
    text << to_string(loss) << " gradient: max relative FD error " << worst << " over " << points
         << " points\n";
  }
  report.pass = report.max_rel_energy <= tol_energy && report.max_rel_galerkin <= tol_galerkin;
  text << (report.pass ? "PASS" : "FAIL") << " (tolerances " << tol_energy << " / "
       << tol_galerkin << ")\n";
  report.text = text.str();
  return report;
}

}  // namespace plasticgraph
