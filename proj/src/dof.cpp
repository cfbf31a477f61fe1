#include "plasticgraph/dof.hpp"

#include "plasticgraph/error.hpp"

namespace plasticgraph {

DofField DofField::make(int n_nodes, int dim) {
  DofField f;
  f.dim = dim;
  f.n_nodes = n_nodes;
  f.u_var.assign(static_cast<size_t>(n_nodes) * dim, 0.0);
  f.mask.assign(static_cast<size_t>(n_nodes) * dim, 1);
  f.u_bar.assign(static_cast<size_t>(n_nodes) * dim, 0.0);
  return f;
}

void DofField::prescribe(int dof, double value) {
  mask[dof] = 0;
  u_bar[dof] = value;
}

void DofField::finalize() {
  free_dofs.clear();
  for (int i = 0; i < size(); ++i)
    if (mask[i]) free_dofs.push_back(i);
}

std::vector<double> DofField::compose() const {
  std::vector<double> u(size());
  compose_into(u);
  return u;
}

void DofField::compose_into(std::span<double> u) const {
  if (static_cast<int>(u.size()) != size())
    fail(ErrorCode::LengthMismatch, "composed displacement has wrong length");
  for (int i = 0; i < size(); ++i) u[i] = u_var[i] * mask[i] + u_bar[i];
}

void DofField::set_free(std::span<const double> x) {
  if (static_cast<int>(x.size()) != free_count())
    fail(ErrorCode::LengthMismatch, "free vector has wrong length");
  for (size_t k = 0; k < x.size(); ++k) u_var[free_dofs[k]] = x[k];
}

std::vector<double> DofField::get_free() const {
  std::vector<double> x(free_dofs.size());
  for (size_t k = 0; k < x.size(); ++k) x[k] = u_var[free_dofs[k]];
  return x;
}

std::vector<double> compose_displacement(const DofField& field) { return field.compose(); }

}  // namespace plasticgraph
