#pragma once

#include <array>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "plasticgraph/elements.hpp"

namespace plasticgraph {

struct ElementRecord {
  ElementKind kind;
  std::vector<int> nodes;
  int material = 0;
};

struct Facet {
  int element = -1;
  int face = -1;
  friend bool operator==(const Facet&, const Facet&) = default;
};

// Node-element graph of a finite element mesh: nodal coordinates, elements
// with per-element material id, and the node->element incidence derived from
// the connectivity. Immutable after construction; safe to share read-only
// across element workers.
class Mesh {
 public:
  Mesh() = default;  // empty placeholder; real meshes come from build()

  // Validates connectivity (index range, arity, positive Jacobians at the
  // default quadrature points) and builds sorted incidence lists.
  static Mesh build(int dim, std::vector<double> coords, std::vector<ElementRecord> elements,
                    std::map<std::string, std::vector<int>> node_sets = {},
                    std::map<std::string, std::vector<Facet>> facet_sets = {});

  int dim() const { return dim_; }
  int node_count() const { return static_cast<int>(coords_.size()) / dim_; }
  int element_count() const { return static_cast<int>(kinds_.size()); }

  std::span<const double> coords() const { return coords_; }
  std::span<const double> node(int j) const { return {&coords_[j * dim_], size_t(dim_)}; }

  ElementKind kind(int e) const { return kinds_[e]; }
  int material(int e) const { return materials_[e]; }
  std::span<const int> nodes_of(int e) const {
    return {&connectivity_[offsets_[e]], size_t(offsets_[e + 1] - offsets_[e])};
  }

  // Elements incident to a node, ascending.
  std::span<const int> elements_of(int j) const {
    return {&incidence_[incidence_offsets_[j]],
            size_t(incidence_offsets_[j + 1] - incidence_offsets_[j])};
  }

  const std::map<std::string, std::vector<int>>& node_sets() const { return node_sets_; }
  const std::map<std::string, std::vector<Facet>>& facet_sets() const { return facet_sets_; }

  // Facets owned by exactly one element, in deterministic (element, face) order.
  const std::vector<Facet>& boundary_facets() const { return boundary_facets_; }

  // Same topology and sets with relocated nodes; re-runs validation.
  Mesh with_coords(std::vector<double> coords) const;

  // Copy with additional named sets (indices validated, duplicate names
  // rejected); geometry is not re-validated.
  Mesh with_sets(std::map<std::string, std::vector<int>> node_sets,
                 std::map<std::string, std::vector<Facet>> facet_sets) const;

  // Global Gauss-point bookkeeping at a given quadrature order (0 = per-kind
  // default): element offsets into the flat Gauss-point arrays.
  std::vector<int> gauss_offsets(int quad_order) const;

 private:
  void validate() const;
  void build_incidence();
  void build_boundary_facets();

  int dim_ = 0;
  std::vector<double> coords_;
  std::vector<ElementKind> kinds_;
  std::vector<int> materials_;
  std::vector<int> connectivity_;
  std::vector<int> offsets_;  // element_count + 1
  std::vector<int> incidence_;
  std::vector<int> incidence_offsets_;  // node_count + 1
  std::map<std::string, std::vector<int>> node_sets_;
  std::map<std::string, std::vector<Facet>> facet_sets_;
  std::vector<Facet> boundary_facets_;
};

// Structured box mesh with lexicographic node numbering (x fastest).
// Boundary node sets and facet sets are auto-populated per box face
// ("x_min", "x_max", ...). quad4/hex8 tile the box directly; tri3/tet4 are
// produced by splitting each cell (2 triangles, 6 tetrahedra).
Mesh structured_mesh(ElementKind kind, std::span<const double> extents,
                     std::span<const int> divisions, std::span<const double> origin = {});

// Quadrature order actually used for a kind given a problem-level override
// (0 keeps the per-kind default).
int effective_quadrature_order(ElementKind kind, int requested);

}  // namespace plasticgraph
