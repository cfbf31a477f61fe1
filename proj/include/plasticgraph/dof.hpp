#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace plasticgraph {

// Nodal unknown vector with Dirichlet handling via the mask triple
// u = u_var (.) m + u_bar: 'mask' is 1 at free DOFs and 0 at Dirichlet DOFs,
// 'u_bar' holds the prescribed values at Dirichlet DOFs and zeros elsewhere.
// Entries of u_var at masked DOFs are inert.
struct DofField {
  int dim = 0;
  int n_nodes = 0;
  std::vector<double> u_var;
  std::vector<uint8_t> mask;   // 1 = free
  std::vector<double> u_bar;
  std::vector<int> free_dofs;  // ascending global dof ids

  static DofField make(int n_nodes, int dim);

  int size() const { return dim * n_nodes; }
  int free_count() const { return static_cast<int>(free_dofs.size()); }
  int dof(int node, int component) const { return node * dim + component; }

  // Marks a DOF as Dirichlet with the given value. Re-prescribing with a
  // conflicting value is the caller's concern (checked in the load-step
  // machinery where set names are known).
  void prescribe(int dof, double value);

  // Must be called after the last prescribe() and before free-vector use.
  void finalize();

  // u = u_var (.) m + u_bar
  std::vector<double> compose() const;
  void compose_into(std::span<double> u) const;

  // Scatter a free-DOF vector into u_var; gather back out.
  void set_free(std::span<const double> x);
  std::vector<double> get_free() const;
};

std::vector<double> compose_displacement(const DofField& field);

}  // namespace plasticgraph
