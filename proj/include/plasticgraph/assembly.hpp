#pragma once

#include <Eigen/SparseCore>
#include <span>
#include <vector>

#include "plasticgraph/dof.hpp"
#include "plasticgraph/field.hpp"

namespace plasticgraph {

// Tangent stiffness over the free DOFs, K[ab] = sum_e sum_g B_a^T D_g B_b
// detJ w, Dirichlet rows and columns eliminated. One TangentMatrix per
// global Gauss point selects elastic or algorithmic behaviour.
Eigen::SparseMatrix<double> assemble_tangent_stiffness(const Mesh& mesh,
                                                       const GeometryCache& geom,
                                                       const DofField& dofs,
                                                       std::span<const TangentMatrix> tangents);

// Elastic stiffness: per-element material tangent at every Gauss point.
Eigen::SparseMatrix<double> assemble_elastic_stiffness(const Mesh& mesh,
                                                       const GeometryCache& geom,
                                                       std::span<const MaterialParams> materials,
                                                       const DofField& dofs);

// LDLT solve of K x = rhs on the free DOFs. Throws SingularSystem when the
// factorization fails or the matrix is not positive definite (unconstrained
// rigid modes).
std::vector<double> solve_direct(const Eigen::SparseMatrix<double>& K,
                                 std::span<const double> rhs);

// Direct elastic solution honoring nonzero Dirichlet values: returns the
// full composed displacement.
std::vector<double> solve_elastic(const Mesh& mesh, const GeometryCache& geom,
                                  std::span<const MaterialParams> materials, const DofField& dofs,
                                  std::span<const double> f_ext, int threads = 1);

}  // namespace plasticgraph
