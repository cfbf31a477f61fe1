#include "plasticgraph/assembly.hpp"

#include <Eigen/SparseCholesky>

#include "plasticgraph/error.hpp"

namespace plasticgraph {

namespace {

// Element stiffness via B^T D B with the engineering-shear Voigt convention
// of TangentMatrix. Rows of B: xx, yy, zz, xy, yz, zx (2D uses xx, yy, xy).
void element_stiffness(const double* grads, int nn, int dim, const double* detjw, int ng,
                       int grad_stride, const TangentMatrix* tangents, double* ke) {
  const int ndof = nn * dim;
  std::fill(ke, ke + ndof * ndof, 0.0);
  const int rows = dim == 2 ? 3 : 6;
  // Voigt row -> tensor component mapping used by TangentMatrix.
  const int map2[3] = {0, 1, 3};  // xx, yy, xy within the 6-slot convention
  std::vector<double> B(static_cast<size_t>(rows) * ndof);
  std::vector<double> DB(static_cast<size_t>(rows) * ndof);
  for (int g = 0; g < ng; ++g) {
    const double* gp = grads + static_cast<size_t>(g) * grad_stride;
    std::fill(B.begin(), B.end(), 0.0);
    for (int j = 0; j < nn; ++j) {
      const double gx = gp[j * dim + 0];
      const double gy = gp[j * dim + 1];
      if (dim == 2) {
        B[0 * ndof + j * dim + 0] = gx;
        B[1 * ndof + j * dim + 1] = gy;
        B[2 * ndof + j * dim + 0] = gy;
        B[2 * ndof + j * dim + 1] = gx;
      } else {
        const double gz = gp[j * dim + 2];
        B[0 * ndof + j * dim + 0] = gx;
        B[1 * ndof + j * dim + 1] = gy;
        B[2 * ndof + j * dim + 2] = gz;
        B[3 * ndof + j * dim + 0] = gy;
        B[3 * ndof + j * dim + 1] = gx;
        B[4 * ndof + j * dim + 1] = gz;
        B[4 * ndof + j * dim + 2] = gy;
        B[5 * ndof + j * dim + 0] = gz;
        B[5 * ndof + j * dim + 2] = gx;
      }
    }
    const TangentMatrix& D = tangents[g];
    for (int r = 0; r < rows; ++r) {
      const int rr = dim == 2 ? map2[r] : r;
      for (int c = 0; c < ndof; ++c) {
        double acc = 0.0;
        for (int s = 0; s < rows; ++s) {
          const int ss = dim == 2 ? map2[s] : s;
          acc += D[rr * 6 + ss] * B[s * ndof + c];
        }
        DB[r * ndof + c] = acc;
      }
    }
    const double w = detjw[g];
    for (int a = 0; a < ndof; ++a)
      for (int b = 0; b < ndof; ++b) {
        double acc = 0.0;
        for (int r = 0; r < rows; ++r) acc += B[r * ndof + a] * DB[r * ndof + b];
        ke[a * ndof + b] += acc * w;
      }
  }
}

}  // namespace

Eigen::SparseMatrix<double> assemble_tangent_stiffness(const Mesh& mesh,
                                                       const GeometryCache& geom,
                                                       const DofField& dofs,
                                                       std::span<const TangentMatrix> tangents) {
  const int dim = geom.dim;
  const int n_free = dofs.free_count();
  std::vector<int> free_index(dofs.size(), -1);
  for (int k = 0; k < n_free; ++k) free_index[dofs.free_dofs[k]] = k;

  std::vector<Eigen::Triplet<double>> triplets;
  std::vector<double> ke;
  for (int e = 0; e < mesh.element_count(); ++e) {
    auto conn = mesh.nodes_of(e);
    const int nn = static_cast<int>(conn.size());
    const int ndof = nn * dim;
    ke.resize(static_cast<size_t>(ndof) * ndof);
    element_stiffness(&geom.grads[geom.grad_offset[e]], nn, dim, &geom.detjw[geom.gp_offset[e]],
                      geom.n_gauss(e), nn * dim, tangents.data() + geom.gp_offset[e], ke.data());
    for (int a = 0; a < ndof; ++a) {
      const int ga = free_index[conn[a / dim] * dim + a % dim];
      if (ga < 0) continue;
      for (int b = 0; b < ndof; ++b) {
        const int gb = free_index[conn[b / dim] * dim + b % dim];
        if (gb < 0) continue;
        triplets.emplace_back(ga, gb, ke[a * ndof + b]);
      }
    }
  }
  Eigen::SparseMatrix<double> K(n_free, n_free);
  K.setFromTriplets(triplets.begin(), triplets.end());
  K.makeCompressed();
  return K;
}

Eigen::SparseMatrix<double> assemble_elastic_stiffness(const Mesh& mesh,
                                                       const GeometryCache& geom,
                                                       std::span<const MaterialParams> materials,
                                                       const DofField& dofs) {
  std::vector<TangentMatrix> tangents(geom.total_gauss());
  for (int e = 0; e < mesh.element_count(); ++e) {
    const TangentMatrix D = elastic_tangent(materials[mesh.material(e)]);
    for (int g = geom.gp_offset[e]; g < geom.gp_offset[e + 1]; ++g) tangents[g] = D;
  }
  return assemble_tangent_stiffness(mesh, geom, dofs, tangents);
}

std::vector<double> solve_direct(const Eigen::SparseMatrix<double>& K,
                                 std::span<const double> rhs) {
  if (K.rows() != static_cast<Eigen::Index>(rhs.size()))
    fail(ErrorCode::LengthMismatch, "rhs length does not match system size");
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(K);
  if (ldlt.info() != Eigen::Success)
    fail(ErrorCode::SingularSystem, "LDLT factorization failed (unconstrained rigid modes?)");
  const double d_max = ldlt.vectorD().cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < K.rows(); ++i)
    if (!(ldlt.vectorD()(i) > 1e-12 * d_max))
      fail(ErrorCode::SingularSystem,
           "stiffness is singular or indefinite (unconstrained rigid modes?)");
  Eigen::VectorXd b = Eigen::Map<const Eigen::VectorXd>(rhs.data(), rhs.size());
  Eigen::VectorXd x = ldlt.solve(b);
  return {x.data(), x.data() + x.size()};
}

std::vector<double> solve_elastic(const Mesh& mesh, const GeometryCache& geom,
                                  std::span<const MaterialParams> materials, const DofField& dofs,
                                  std::span<const double> f_ext, int threads) {
  // K_ff u_f = f_ext,f - K_fc u_bar; the coupling term is the elastic
  // internal force at u_var = 0.
  DofField zero = dofs;
  std::fill(zero.u_var.begin(), zero.u_var.end(), 0.0);
  std::vector<double> u0 = zero.compose();
  std::vector<SymTensor3> eps(geom.total_gauss());
  gauss_strain(mesh, geom, u0, eps, threads);
  std::vector<SymTensor3> sig(eps.size());
  for (int e = 0; e < mesh.element_count(); ++e)
    for (int g = geom.gp_offset[e]; g < geom.gp_offset[e + 1]; ++g)
      sig[g] = elastic_stress(materials[mesh.material(e)], eps[g]);
  std::vector<double> f_c = assemble_internal_force(mesh, geom, sig, threads);

  std::vector<double> rhs(dofs.free_count());
  for (int k = 0; k < dofs.free_count(); ++k) {
    const int dof = dofs.free_dofs[k];
    rhs[k] = f_ext[dof] - f_c[dof];
  }
  const Eigen::SparseMatrix<double> K = assemble_elastic_stiffness(mesh, geom, materials, dofs);
  const std::vector<double> x = solve_direct(K, rhs);
  DofField out = dofs;
  out.set_free(x);
  return out.compose();
}

}  // namespace plasticgraph
