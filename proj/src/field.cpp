#include "plasticgraph/field.hpp"

#include <cmath>

#include "plasticgraph/error.hpp"
#include "plasticgraph/parallel.hpp"

namespace plasticgraph {

const char* to_string(HardeningMode mode) {
  switch (mode) {
    case HardeningMode::perfect: return "perfect";
    case HardeningMode::isotropic: return "isotropic";
    case HardeningMode::kinematic: return "kinematic";
  }
  return "?";
}

const char* to_string(LossMode mode) {
  return mode == LossMode::energy ? "energy" : "galerkin";
}

GeometryCache build_geometry(const Mesh& mesh, int quad_order) {
  return build_geometry(mesh, quad_order, mesh.coords());
}

GeometryCache build_geometry(const Mesh& mesh, int quad_order, std::span<const double> coords) {
  GeometryCache geom;
  geom.dim = mesh.dim();
  geom.quad_order = quad_order;
  const int ne = mesh.element_count();
  geom.gp_offset.assign(ne + 1, 0);
  geom.grad_offset.assign(ne + 1, 0);
  geom.force_offset.assign(ne + 1, 0);
  for (int e = 0; e < ne; ++e) {
    const ElementKind k = mesh.kind(e);
    const int order = effective_quadrature_order(k, quad_order);
    const int ng = natural_basis(k, order).rule.size();
    const int nn = node_count(k);
    geom.gp_offset[e + 1] = geom.gp_offset[e] + ng;
    geom.grad_offset[e + 1] = geom.grad_offset[e] + ng * nn * geom.dim;
    geom.force_offset[e + 1] = geom.force_offset[e] + nn * geom.dim;
  }
  geom.grads.resize(geom.grad_offset[ne]);
  geom.detjw.resize(geom.gp_offset[ne]);

  std::vector<double> xe;
  for (int e = 0; e < ne; ++e) {
    const ElementKind k = mesh.kind(e);
    const int order = effective_quadrature_order(k, quad_order);
    auto conn = mesh.nodes_of(e);
    const int nn = static_cast<int>(conn.size());
    xe.resize(static_cast<size_t>(nn) * geom.dim);
    for (int j = 0; j < nn; ++j)
      for (int a = 0; a < geom.dim; ++a) xe[j * geom.dim + a] = coords[conn[j] * geom.dim + a];
    ElementGeometry eg;
    try {
      eg = isoparametric_update(k, xe, natural_basis(k, order).rule);
    } catch (const Error& err) {
      if (err.code() == ErrorCode::InvertedElement)
        fail(ErrorCode::InvertedElement, "element " + std::to_string(e) + ": " + err.what());
      throw;
    }
    std::copy(eg.grad_phys.begin(), eg.grad_phys.end(), geom.grads.begin() + geom.grad_offset[e]);
    std::copy(eg.scaled_weight.begin(), eg.scaled_weight.end(),
              geom.detjw.begin() + geom.gp_offset[e]);
  }

  // Node gather lists: for node j, the (element, local index) pairs in
  // ascending element order. Assembly folds per-element contributions in
  // this order, independent of the worker count.
  const int nn = mesh.node_count();
  geom.gather_offset.assign(nn + 1, 0);
  for (int j = 0; j < nn; ++j)
    geom.gather_offset[j + 1] = geom.gather_offset[j] + static_cast<int>(mesh.elements_of(j).size());
  geom.gather_elem.resize(geom.gather_offset[nn]);
  geom.gather_local.resize(geom.gather_offset[nn]);
  std::vector<int> cursor(geom.gather_offset.begin(), geom.gather_offset.end() - 1);
  for (int e = 0; e < ne; ++e) {
    auto conn = mesh.nodes_of(e);
    for (int local = 0; local < static_cast<int>(conn.size()); ++local) {
      const int j = conn[local];
      geom.gather_elem[cursor[j]] = e;
      geom.gather_local[cursor[j]] = local;
      ++cursor[j];
    }
  }
  return geom;
}

namespace {

// Displacement gradient at one Gauss point: grad_u[p*dim+m] = sum_j u_j,p g_j,m.
inline void gp_grad_u(const double* grads, const double* ue, int nn, int dim, double* grad_u) {
  for (int p = 0; p < dim; ++p)
    for (int m = 0; m < dim; ++m) {
      double s = 0.0;
      for (int j = 0; j < nn; ++j) s += ue[j * dim + p] * grads[j * dim + m];
      grad_u[p * dim + m] = s;
    }
}

inline SymTensor3 strain_from_grad(const double* g, int dim) {
  SymTensor3 eps;
  if (dim == 2) {
    eps.xx = g[0];
    eps.yy = g[3];
    eps.xy = 0.5 * (g[1] + g[2]);
  } else {
    eps.xx = g[0];
    eps.yy = g[4];
    eps.zz = g[8];
    eps.xy = 0.5 * (g[1] + g[3]);
    eps.yz = 0.5 * (g[5] + g[7]);
    eps.zx = 0.5 * (g[2] + g[6]);
  }
  return eps;
}

}  // namespace

void gauss_strain(const Mesh& mesh, const GeometryCache& geom, std::span<const double> u,
                  std::span<SymTensor3> eps_out, int threads) {
  const int dim = geom.dim;
  parallel_for(mesh.element_count(), threads, [&](int begin, int end) {
    std::vector<double> ue;
    double grad_u[9];
    for (int e = begin; e < end; ++e) {
      auto conn = mesh.nodes_of(e);
      const int nn = static_cast<int>(conn.size());
      ue.resize(static_cast<size_t>(nn) * dim);
      for (int j = 0; j < nn; ++j)
        for (int a = 0; a < dim; ++a) ue[j * dim + a] = u[conn[j] * dim + a];
      const int ng = geom.n_gauss(e);
      for (int g = 0; g < ng; ++g) {
        const double* grads = &geom.grads[geom.grad_offset[e] + static_cast<size_t>(g) * nn * dim];
        gp_grad_u(grads, ue.data(), nn, dim, grad_u);
        eps_out[geom.gp_offset[e] + g] = strain_from_grad(grad_u, dim);
      }
    }
  });
}

void gauss_stress(const Mesh& mesh, const GeometryCache& geom,
                  std::span<const MaterialParams> materials, const GaussHistory& previous,
                  std::span<const SymTensor3> eps, std::span<SymTensor3> sigma_out,
                  std::span<PlasticState> states_out, int threads) {
  parallel_for(mesh.element_count(), threads, [&](int begin, int end) {
    for (int e = begin; e < end; ++e) {
      const MaterialParams& mat = materials[mesh.material(e)];
      for (int g = geom.gp_offset[e]; g < geom.gp_offset[e + 1]; ++g) {
        const ReturnResult res = radial_return(mat, previous.states[g], eps[g],
                                               previous.strain[g], previous.stress[g]);
        sigma_out[g] = res.sigma;
        states_out[g] = res.new_state;
      }
    }
  });
}

std::vector<double> assemble_internal_force(const Mesh& mesh, const GeometryCache& geom,
                                            std::span<const SymTensor3> sigma, int threads) {
  const int dim = geom.dim;
  std::vector<double> element_force(geom.force_offset.back(), 0.0);
  parallel_for(mesh.element_count(), threads, [&](int begin, int end) {
    for (int e = begin; e < end; ++e) {
      auto conn = mesh.nodes_of(e);
      const int nn = static_cast<int>(conn.size());
      double* fe = &element_force[geom.force_offset[e]];
      const int ng = geom.n_gauss(e);
      for (int g = 0; g < ng; ++g) {
        const double* grads = &geom.grads[geom.grad_offset[e] + static_cast<size_t>(g) * nn * dim];
        const double w = geom.detjw[geom.gp_offset[e] + g];
        const SymTensor3& s = sigma[geom.gp_offset[e] + g];
        for (int j = 0; j < nn; ++j) {
          const std::array<double, 3> gj = {grads[j * dim + 0], grads[j * dim + 1],
                                            dim == 3 ? grads[j * dim + 2] : 0.0};
          const std::array<double, 3> f = s.apply(gj);
          for (int a = 0; a < dim; ++a) fe[j * dim + a] += f[a] * w;
        }
      }
    }
  });

  std::vector<double> f_int(static_cast<size_t>(mesh.node_count()) * dim, 0.0);
  parallel_for(mesh.node_count(), threads, [&](int begin, int end) {
    for (int j = begin; j < end; ++j)
      for (int k = geom.gather_offset[j]; k < geom.gather_offset[j + 1]; ++k) {
        const double* fe = &element_force[geom.force_offset[geom.gather_elem[k]]];
        for (int a = 0; a < dim; ++a) f_int[j * dim + a] += fe[geom.gather_local[k] * dim + a];
      }
  });
  return f_int;
}

namespace {

// Quadrature over one boundary face using the volume element's shape
// functions restricted to the face.
void integrate_facet(const Mesh& mesh, const Facet& facet, const std::array<double, 3>& traction,
                     std::vector<double>& f_ext) {
  const int dim = mesh.dim();
  const ElementKind kind = mesh.kind(facet.element);
  auto conn = mesh.nodes_of(facet.element);
  auto locals = face_nodes(kind, facet.face);
  const int m = static_cast<int>(locals.size());

  std::array<std::array<double, 3>, 4> x{};
  for (int j = 0; j < m; ++j)
    for (int a = 0; a < dim; ++a) x[j][a] = mesh.coords()[conn[locals[j]] * dim + a];

  const double ga = 1.0 / std::sqrt(3.0);
  if (m == 2) {
    // Edge of a 2D element, unit thickness.
    const double half_len =
        0.5 * std::hypot(x[1][0] - x[0][0], x[1][1] - x[0][1]);
    for (double s : {-ga, ga}) {
      const double n0 = 0.5 * (1.0 - s), n1 = 0.5 * (1.0 + s);
      const double da = half_len;  // weight 1 per point
      for (int a = 0; a < dim; ++a) {
        f_ext[conn[locals[0]] * dim + a] += n0 * traction[a] * da;
        f_ext[conn[locals[1]] * dim + a] += n1 * traction[a] * da;
      }
    }
  } else if (m == 3) {
    std::array<double, 3> t1, t2;
    for (int a = 0; a < 3; ++a) {
      t1[a] = x[1][a] - x[0][a];
      t2[a] = x[2][a] - x[0][a];
    }
    const std::array<double, 3> cr = {t1[1] * t2[2] - t1[2] * t2[1],
                                      t1[2] * t2[0] - t1[0] * t2[2],
                                      t1[0] * t2[1] - t1[1] * t2[0]};
    const double area2 = std::sqrt(cr[0] * cr[0] + cr[1] * cr[1] + cr[2] * cr[2]);
    const double da = 0.5 * area2;  // single point, weight 1/2 on the reference triangle
    for (int j = 0; j < 3; ++j)
      for (int a = 0; a < dim; ++a)
        f_ext[conn[locals[j]] * dim + a] += (1.0 / 3.0) * traction[a] * da;
  } else {
    // Bilinear quad face, 2x2 Gauss.
    for (double eta : {-ga, ga})
      for (double xi : {-ga, ga}) {
        const double n[4] = {0.25 * (1 - xi) * (1 - eta), 0.25 * (1 + xi) * (1 - eta),
                             0.25 * (1 + xi) * (1 + eta), 0.25 * (1 - xi) * (1 + eta)};
        const double dxi[4] = {-0.25 * (1 - eta), 0.25 * (1 - eta), 0.25 * (1 + eta),
                               -0.25 * (1 + eta)};
        const double deta[4] = {-0.25 * (1 - xi), -0.25 * (1 + xi), 0.25 * (1 + xi),
                                0.25 * (1 - xi)};
        std::array<double, 3> t1{}, t2{};
        for (int j = 0; j < 4; ++j)
          for (int a = 0; a < 3; ++a) {
            t1[a] += dxi[j] * x[j][a];
            t2[a] += deta[j] * x[j][a];
          }
        const std::array<double, 3> cr = {t1[1] * t2[2] - t1[2] * t2[1],
                                          t1[2] * t2[0] - t1[0] * t2[2],
                                          t1[0] * t2[1] - t1[1] * t2[0]};
        const double da = std::sqrt(cr[0] * cr[0] + cr[1] * cr[1] + cr[2] * cr[2]);
        for (int j = 0; j < 4; ++j)
          for (int a = 0; a < dim; ++a)
            f_ext[conn[locals[j]] * dim + a] += n[j] * traction[a] * da;
      }
  }
}

}  // namespace

std::vector<double> assemble_external_force(
    const Mesh& mesh, const std::map<std::string, std::array<double, 3>>& tractions) {
  std::vector<double> f_ext(static_cast<size_t>(mesh.node_count()) * mesh.dim(), 0.0);
  for (const auto& [name, traction] : tractions) {
    auto it = mesh.facet_sets().find(name);
    if (it == mesh.facet_sets().end() || it->second.empty())
      fail(ErrorCode::EmptyFacetSet, "facet set '" + name + "' is missing or empty");
    for (const Facet& facet : it->second) integrate_facet(mesh, facet, traction, f_ext);
  }
  return f_ext;
}

LossEvaluator::LossEvaluator(const Mesh& mesh, const GeometryCache& geom,
                             std::vector<MaterialParams> materials, LossMode loss,
                             HardeningMode hardening, DofField dofs, std::vector<double> f_ext,
                             GaussHistory previous, int threads)
    : mesh_(&mesh),
      geom_(&geom),
      materials_(std::move(materials)),
      loss_(loss),
      hardening_(hardening),
      dofs_(std::move(dofs)),
      f_ext_(std::move(f_ext)),
      prev_(std::move(previous)),
      threads_(threads < 1 ? 1 : threads) {
  if (static_cast<int>(f_ext_.size()) != dofs_.size())
    fail(ErrorCode::LengthMismatch, "external force length does not match DOF count");
  if (prev_.size() != geom.total_gauss())
    fail(ErrorCode::LengthMismatch, "plastic state count does not match Gauss point count");

  if (loss_ == LossMode::energy) {
    for (size_t m = 0; m < materials_.size(); ++m) {
      const MaterialParams& mat = materials_[m];
      switch (hardening_) {
        case HardeningMode::perfect:
          if (mat.K_iso != 0.0 || mat.H_kin != 0.0)
            fail(ErrorCode::ModeParameterMismatch,
                 "perfect-plasticity energy functional requires K_iso = H_kin = 0 (material " +
                     std::to_string(m) + ")");
          break;
        case HardeningMode::isotropic:
          if (mat.H_kin != 0.0)
            fail(ErrorCode::ModeParameterMismatch,
                 "isotropic-hardening energy functional requires H_kin = 0 (material " +
                     std::to_string(m) + ")");
          break;
        case HardeningMode::kinematic:
          if (mat.K_iso != 0.0)
            fail(ErrorCode::ModeParameterMismatch,
                 "kinematic-hardening energy functional requires K_iso = 0 (material " +
                     std::to_string(m) + ")");
          if (mat.H_kin == 0.0)
            warnings_.push_back("kinematic hardening mode with H_kin = 0 (material " +
                                std::to_string(m) + ") reduces to perfect plasticity");
          break;
      }
    }
  }

  const int n_gp = geom.total_gauss();
  u_full_.resize(dofs_.size());
  strain_.resize(n_gp);
  stress_.resize(n_gp);
  states_.resize(n_gp);
  grad_u_.resize(static_cast<size_t>(n_gp) * geom.dim * geom.dim);
  psi_.resize(n_gp);
  if (loss_ == LossMode::galerkin) tangents_.resize(n_gp);
  element_force_.resize(geom.force_offset.back());
}

double LossEvaluator::energy_density(const MaterialParams& mat, const ReturnResult& res,
                                     const PlasticState& prev, const SymTensor3& eps) const {
  const SymTensor3 eps_e = eps - res.new_state.eps_p;
  const double w_elastic = 0.5 * elastic_stress(mat, eps_e).ddot(eps_e);
  const double dissipation = (res.new_state.eps_p - prev.eps_p).ddot(res.sigma);
  double psi = w_elastic + dissipation;
  if (hardening_ == HardeningMode::isotropic) {
    const double a = res.new_state.alpha;
    psi += 0.5 * mat.K_iso * a * a - mat.K_iso * a * (a - prev.alpha);
  } else if (hardening_ == HardeningMode::kinematic && mat.H_kin > 0.0) {
    const SymTensor3& q = res.new_state.back_stress;
    psi += 3.0 / (4.0 * mat.H_kin) * q.ddot(q) -
           3.0 / (2.0 * mat.H_kin) * q.ddot(q - prev.back_stress);
  }
  return psi;
}

void LossEvaluator::forward_pass(std::span<const double> x_free) {
  dofs_.set_free(x_free);
  dofs_.compose_into(u_full_);
  const Mesh& mesh = *mesh_;
  const GeometryCache& geom = *geom_;
  const int dim = geom.dim;

  std::fill(element_force_.begin(), element_force_.end(), 0.0);
  parallel_for(mesh.element_count(), threads_, [&](int begin, int end) {
    std::vector<double> ue;
    for (int e = begin; e < end; ++e) {
      auto conn = mesh.nodes_of(e);
      const int nn = static_cast<int>(conn.size());
      const MaterialParams& mat = materials_[mesh.material(e)];
      ue.resize(static_cast<size_t>(nn) * dim);
      for (int j = 0; j < nn; ++j)
        for (int a = 0; a < dim; ++a) ue[j * dim + a] = u_full_[conn[j] * dim + a];
      double* fe = &element_force_[geom.force_offset[e]];
      const int ng = geom.n_gauss(e);
      for (int g = 0; g < ng; ++g) {
        const int gp = geom.gp_offset[e] + g;
        const double* grads = &geom.grads[geom.grad_offset[e] + static_cast<size_t>(g) * nn * dim];
        double* gu = &grad_u_[static_cast<size_t>(gp) * dim * dim];
        gp_grad_u(grads, ue.data(), nn, dim, gu);
        const SymTensor3 eps = strain_from_grad(gu, dim);
        const PlasticState& prev = prev_.states[gp];
        const ReturnResult res =
            radial_return(mat, prev, eps, prev_.strain[gp], prev_.stress[gp]);
        strain_[gp] = eps;
        stress_[gp] = res.sigma;
        states_[gp] = res.new_state;
        psi_[gp] = loss_ == LossMode::energy ? energy_density(mat, res, prev, eps) : 0.0;
        if (loss_ == LossMode::galerkin) tangents_[gp] = algorithmic_tangent(mat, res);
        const double w = geom.detjw[gp];
        for (int j = 0; j < nn; ++j) {
          const std::array<double, 3> gj = {grads[j * dim + 0], grads[j * dim + 1],
                                            dim == 3 ? grads[j * dim + 2] : 0.0};
          const std::array<double, 3> f = res.sigma.apply(gj);
          for (int a = 0; a < dim; ++a) fe[j * dim + a] += f[a] * w;
        }
      }
    }
  });

  f_int_.assign(static_cast<size_t>(mesh.node_count()) * dim, 0.0);
  parallel_for(mesh.node_count(), threads_, [&](int begin, int end) {
    for (int j = begin; j < end; ++j)
      for (int k = geom.gather_offset[j]; k < geom.gather_offset[j + 1]; ++k) {
        const double* fe = &element_force_[geom.force_offset[geom.gather_elem[k]]];
        for (int a = 0; a < dim; ++a) f_int_[j * dim + a] += fe[geom.gather_local[k] * dim + a];
      }
  });
}

double LossEvaluator::evaluate(std::span<const double> x_free, std::span<double> grad_free) {
  if (static_cast<int>(grad_free.size()) != dofs_.free_count())
    fail(ErrorCode::LengthMismatch, "gradient buffer has wrong length");
  const double loss = loss_only(x_free);

  if (loss_ == LossMode::energy) {
    for (int k = 0; k < dofs_.free_count(); ++k) {
      const int dof = dofs_.free_dofs[k];
      grad_free[k] = f_int_[dof] - f_ext_[dof];
    }
    return loss;
  }

  // Galerkin: grad = (2/N) K_alg^T r with the consistent tangent applied
  // matrix-free: the residual is lifted to a nodal field, differentiated
  // like a displacement, pushed through the per-point tangents and
  // reassembled as a force.
  const Mesh& mesh = *mesh_;
  const GeometryCache& geom = *geom_;
  const int dim = geom.dim;
  const int n_free = dofs_.free_count();
  std::vector<double> r_full(dofs_.size(), 0.0);
  for (int k = 0; k < n_free; ++k) {
    const int dof = dofs_.free_dofs[k];
    r_full[dof] = f_int_[dof] - f_ext_[dof];
  }
  std::vector<double> element_grad(geom.force_offset.back(), 0.0);
  parallel_for(mesh.element_count(), threads_, [&](int begin, int end) {
    std::vector<double> re;
    double grad_r[9];
    for (int e = begin; e < end; ++e) {
      auto conn = mesh.nodes_of(e);
      const int nn = static_cast<int>(conn.size());
      re.resize(static_cast<size_t>(nn) * dim);
      for (int j = 0; j < nn; ++j)
        for (int a = 0; a < dim; ++a) re[j * dim + a] = r_full[conn[j] * dim + a];
      double* ge = &element_grad[geom.force_offset[e]];
      const int ng = geom.n_gauss(e);
      for (int g = 0; g < ng; ++g) {
        const int gp = geom.gp_offset[e] + g;
        const double* grads = &geom.grads[geom.grad_offset[e] + static_cast<size_t>(g) * nn * dim];
        gp_grad_u(grads, re.data(), nn, dim, grad_r);
        const SymTensor3 eps_r = strain_from_grad(grad_r, dim);
        const SymTensor3 sig_r = apply_tangent(tangents_[gp], eps_r);
        const double w = geom.detjw[gp];
        for (int j = 0; j < nn; ++j) {
          const std::array<double, 3> gj = {grads[j * dim + 0], grads[j * dim + 1],
                                            dim == 3 ? grads[j * dim + 2] : 0.0};
          const std::array<double, 3> f = sig_r.apply(gj);
          for (int a = 0; a < dim; ++a) ge[j * dim + a] += f[a] * w;
        }
      }
    }
  });
  std::vector<double> g_full(dofs_.size(), 0.0);
  parallel_for(mesh.node_count(), threads_, [&](int begin, int end) {
    for (int j = begin; j < end; ++j)
      for (int k = geom.gather_offset[j]; k < geom.gather_offset[j + 1]; ++k) {
        const double* ge = &element_grad[geom.force_offset[geom.gather_elem[k]]];
        for (int a = 0; a < dim; ++a) g_full[j * dim + a] += ge[geom.gather_local[k] * dim + a];
      }
  });
  const double scale = 2.0 / n_free;
  for (int k = 0; k < n_free; ++k) grad_free[k] = scale * g_full[dofs_.free_dofs[k]];
  return loss;
}

double LossEvaluator::loss_only(std::span<const double> x_free) {
  forward_pass(x_free);
  if (loss_ == LossMode::energy) {
    double acc = 0.0;
    const int n_gp = geom_->total_gauss();
    for (int gp = 0; gp < n_gp; ++gp) acc += psi_[gp] * geom_->detjw[gp];
    double work = 0.0;
    for (int i = 0; i < dofs_.size(); ++i) work += f_ext_[i] * u_full_[i];
    return acc - work;
  }
  double acc = 0.0;
  for (int dof : dofs_.free_dofs) {
    const double r = f_int_[dof] - f_ext_[dof];
    acc += r * r;
  }
  return acc / dofs_.free_count();
}

std::vector<double> LossEvaluator::last_residual() const {
  std::vector<double> r(dofs_.free_count());
  for (int k = 0; k < dofs_.free_count(); ++k) {
    const int dof = dofs_.free_dofs[k];
    r[k] = f_int_[dof] - f_ext_[dof];
  }
  return r;
}

void LossEvaluator::coordinate_gradient(std::span<const uint8_t> coord_mask,
                                        std::span<double> grad_coords) const {
  if (loss_ != LossMode::energy)
    fail(ErrorCode::ModeParameterMismatch, "coordinate gradients require the energy loss");
  const Mesh& mesh = *mesh_;
  const GeometryCache& geom = *geom_;
  const int dim = geom.dim;
  if (static_cast<int>(grad_coords.size()) != mesh.node_count() * dim ||
      static_cast<int>(coord_mask.size()) != mesh.node_count() * dim)
    fail(ErrorCode::LengthMismatch, "coordinate gradient buffer has wrong length");

  // Per Gauss point: d(psi detJ w)/dx_{k,c}
  //   = detJ w (psi g_k,c - (grad_u^T sigma g_k)_c),
  // from d(detJ)/dx_k = detJ g_k and d(grad N_j)/dx_{k,c} = -g_k g_j,c.
  std::vector<double> element_grad(geom.force_offset.back(), 0.0);
  parallel_for(mesh.element_count(), threads_, [&](int begin, int end) {
    for (int e = begin; e < end; ++e) {
      auto conn = mesh.nodes_of(e);
      const int nn = static_cast<int>(conn.size());
      double* ge = &element_grad[geom.force_offset[e]];
      const int ng = geom.n_gauss(e);
      for (int g = 0; g < ng; ++g) {
        const int gp = geom.gp_offset[e] + g;
        const double* grads = &geom.grads[geom.grad_offset[e] + static_cast<size_t>(g) * nn * dim];
        const double* gu = &grad_u_[static_cast<size_t>(gp) * dim * dim];
        const double w = geom.detjw[gp];
        const SymTensor3& sig = stress_[gp];
        for (int k = 0; k < nn; ++k) {
          const std::array<double, 3> gk = {grads[k * dim + 0], grads[k * dim + 1],
                                            dim == 3 ? grads[k * dim + 2] : 0.0};
          const std::array<double, 3> sg = sig.apply(gk);
          for (int c = 0; c < dim; ++c) {
            double pull = 0.0;
            for (int p = 0; p < dim; ++p) pull += gu[p * dim + c] * sg[p];
            ge[k * dim + c] += w * (psi_[gp] * gk[c] - pull);
          }
        }
      }
    }
  });

  std::fill(grad_coords.begin(), grad_coords.end(), 0.0);
  for (int j = 0; j < mesh.node_count(); ++j)
    for (int k = geom.gather_offset[j]; k < geom.gather_offset[j + 1]; ++k) {
      const double* ge = &element_grad[geom.force_offset[geom.gather_elem[k]]];
      for (int a = 0; a < dim; ++a)
        if (coord_mask[j * dim + a])
          grad_coords[j * dim + a] += ge[geom.gather_local[k] * dim + a];
    }
}

}  // namespace plasticgraph
