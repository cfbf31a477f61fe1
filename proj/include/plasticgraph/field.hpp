#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "plasticgraph/dof.hpp"
#include "plasticgraph/material.hpp"
#include "plasticgraph/mesh.hpp"

namespace plasticgraph {

enum class HardeningMode { perfect, isotropic, kinematic };
enum class LossMode { energy, galerkin };

const char* to_string(HardeningMode mode);
const char* to_string(LossMode mode);

// Precomputed per-Gauss-point physical shape-function gradients and scaled
// weights for a whole mesh, plus the node gather lists used for
// deterministic force assembly.
struct GeometryCache {
  int dim = 0;
  int quad_order = 0;  // as requested; 0 keeps per-kind defaults
  std::vector<int> gp_offset;      // element -> first global Gauss point
  std::vector<int> grad_offset;    // element -> offset into grads
  std::vector<int> force_offset;   // element -> offset into per-element force buffers
  std::vector<double> grads;       // per gp: n_nodes * dim physical gradients
  std::vector<double> detjw;       // per global gp
  std::vector<int> gather_offset;  // node -> first entry in gather lists
  std::vector<int> gather_elem;    // incident element
  std::vector<int> gather_local;   // local node index within that element

  int total_gauss() const { return gp_offset.empty() ? 0 : gp_offset.back(); }
  int n_gauss(int e) const { return gp_offset[e + 1] - gp_offset[e]; }
};

GeometryCache build_geometry(const Mesh& mesh, int quad_order = 0);

// Same topology, relocated nodes: 'coords' overrides the mesh coordinates.
GeometryCache build_geometry(const Mesh& mesh, int quad_order, std::span<const double> coords);

// Committed per-Gauss-point history of a load step: plastic internal
// variables plus the strain and stress the next increment starts from.
struct GaussHistory {
  std::vector<PlasticState> states;
  std::vector<SymTensor3> strain;
  std::vector<SymTensor3> stress;

  static GaussHistory virgin(int n_gauss) {
    GaussHistory h;
    h.states.resize(n_gauss);
    h.strain.resize(n_gauss);
    h.stress.resize(n_gauss);
    return h;
  }
  int size() const { return static_cast<int>(states.size()); }
};

// Strain at every Gauss point from a full nodal displacement vector,
// eps = sym(sum_j u_j grad N_j^T), as full 3D tensors (plane strain in 2D).
void gauss_strain(const Mesh& mesh, const GeometryCache& geom, std::span<const double> u,
                  std::span<SymTensor3> eps_out, int threads = 1);

// Stress update at every Gauss point: the radial return map of each
// element's material, starting from the committed previous-step history.
void gauss_stress(const Mesh& mesh, const GeometryCache& geom,
                  std::span<const MaterialParams> materials, const GaussHistory& previous,
                  std::span<const SymTensor3> eps, std::span<SymTensor3> sigma_out,
                  std::span<PlasticState> states_out, int threads = 1);

// f_j = sum_e sum_g sigma_g grad N_j detJ w. The node gather runs in fixed
// incidence order so results are bit-identical for any thread count.
std::vector<double> assemble_internal_force(const Mesh& mesh, const GeometryCache& geom,
                                            std::span<const SymTensor3> sigma, int threads = 1);

// Surface tractions integrated with face-restricted shape functions.
// 'tractions' maps facet-set names to constant traction vectors. Throws
// EmptyFacetSet for unknown or empty sets.
std::vector<double> assemble_external_force(
    const Mesh& mesh, const std::map<std::string, std::array<double, 3>>& tractions);

// Incremental loss over nodal displacements for one load step. Internal
// variables are not unknowns: every evaluation recomputes them from the
// frozen previous-step history through the return map, which makes the loss
// a pure function of u and the assembled nodal force residual its exact
// gradient on the energy branch.
class LossEvaluator {
 public:
  LossEvaluator(const Mesh& mesh, const GeometryCache& geom,
                std::vector<MaterialParams> materials, LossMode loss, HardeningMode hardening,
                DofField dofs, std::vector<double> f_ext, GaussHistory previous, int threads = 1);

  int free_count() const { return dofs_.free_count(); }
  const DofField& dofs() const { return dofs_; }
  const std::vector<std::string>& warnings() const { return warnings_; }
  const std::vector<double>& external_force() const { return f_ext_; }
  const GaussHistory& previous() const { return prev_; }

  // Loss and gradient over the free DOFs at the given free vector.
  double evaluate(std::span<const double> x_free, std::span<double> grad_free);
  double loss_only(std::span<const double> x_free);

  // Fields computed by the last evaluate()/loss_only() call.
  const std::vector<SymTensor3>& last_strain() const { return strain_; }
  const std::vector<SymTensor3>& last_stress() const { return stress_; }
  const std::vector<PlasticState>& last_states() const { return states_; }
  const std::vector<double>& last_internal_force() const { return f_int_; }
  const std::vector<double>& last_displacement() const { return u_full_; }

  // Snapshot of the last evaluation as the committed history of this step.
  GaussHistory commit() const { return {states_, strain_, stress_}; }

  // Per-free-DOF residual (f_int - f_ext) of the last evaluation.
  std::vector<double> last_residual() const;

  // Gradient of the energy functional with respect to movable nodal
  // coordinates, evaluated at the state of the last call. Requires the
  // energy loss. 'grad_coords' has mesh dim * node count entries; masked
  // entries are left at zero.
  void coordinate_gradient(std::span<const uint8_t> coord_mask,
                           std::span<double> grad_coords) const;

  // Swap in a geometry built for relocated coordinates (same topology).
  void set_geometry(const GeometryCache* geom) { geom_ = geom; }
  void set_mesh(const Mesh* mesh) { mesh_ = mesh; }

 private:
  double energy_density(const MaterialParams& mat, const ReturnResult& res,
                        const PlasticState& prev, const SymTensor3& eps) const;
  void forward_pass(std::span<const double> x_free);

  const Mesh* mesh_;
  const GeometryCache* geom_;
  std::vector<MaterialParams> materials_;
  LossMode loss_;
  HardeningMode hardening_;
  DofField dofs_;
  std::vector<double> f_ext_;
  GaussHistory prev_;
  int threads_;
  std::vector<std::string> warnings_;

  // workspace
  std::vector<double> u_full_;
  std::vector<SymTensor3> strain_, stress_;
  std::vector<PlasticState> states_;
  std::vector<double> grad_u_;      // per gp dim*dim displacement gradient
  std::vector<double> psi_;         // per gp energy density
  std::vector<TangentMatrix> tangents_;  // per gp, Galerkin mode only
  std::vector<double> element_force_;    // per element local force vectors
  std::vector<double> f_int_;
};

}  // namespace plasticgraph
