#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

namespace plasticgraph {

// Supported linear isoparametric element kinds.
//
// Node ordering conventions (fixed, see docs/formats.md):
//   tri3  : counter-clockwise, reference nodes (0,0) (1,0) (0,1)
//   quad4 : counter-clockwise, reference nodes (-1,-1) (1,-1) (1,1) (-1,1)
//   tet4  : reference nodes (0,0,0) (1,0,0) (0,1,0) (0,0,1)
//   hex8  : bottom face counter-clockwise then top face, reference nodes
//           (+-1,+-1,-1) then (+-1,+-1,+1)
enum class ElementKind { tri3, quad4, tet4, hex8 };

int dimension(ElementKind kind);
int node_count(ElementKind kind);
int default_quadrature_order(ElementKind kind);
const char* to_string(ElementKind kind);
ElementKind parse_element_kind(const std::string& name);

// Reference-domain coordinates of the element nodes.
std::span<const std::array<double, 3>> reference_nodes(ElementKind kind);

// Shape function values N_j(xi). 'values' must hold node_count entries.
void shape_values(ElementKind kind, const double* xi, double* values);

// Natural-domain gradients dN_j/dxi, row-major (node, axis).
void shape_gradients_natural(ElementKind kind, const double* xi, double* grads);

struct QuadratureRule {
  ElementKind kind;
  int order = 0;
  std::vector<std::array<double, 3>> points;
  std::vector<double> weights;

  int size() const { return static_cast<int>(points.size()); }
};

// Gauss rule on the reference domain. Orders 1 and 2 (tensor product) for
// quad4/hex8, order 1 for the simplices. Throws UnsupportedOrder otherwise.
QuadratureRule quadrature_rule(ElementKind kind, int order);

// Shape values and natural gradients tabulated at the points of a rule.
// Cached per (kind, order); the returned reference is stable for the
// process lifetime.
struct NaturalBasis {
  QuadratureRule rule;
  std::vector<double> values;  // n_gauss * n_nodes
  std::vector<double> grads;   // n_gauss * n_nodes * dim
};
const NaturalBasis& natural_basis(ElementKind kind, int order);

// Per-Gauss-point geometry of one element under given nodal coordinates:
// Jacobian, its determinant and inverse, physical shape-function gradients
// and the quadrature-scaled volume element.
struct ElementGeometry {
  int dim = 0;
  int n_nodes = 0;
  int n_gauss = 0;
  std::vector<double> jacobian;       // n_gauss * dim * dim, row-major
  std::vector<double> det_jacobian;   // n_gauss
  std::vector<double> inv_jacobian;   // n_gauss * dim * dim
  std::vector<double> grad_phys;      // n_gauss * n_nodes * dim
  std::vector<double> scaled_weight;  // detJ * w per Gauss point
};

// Maps natural gradients to the physical domain. Throws InvertedElement
// when det J <= 0 at any Gauss point. 'coords' is node-major (x,y[,z]).
ElementGeometry isoparametric_update(ElementKind kind, std::span<const double> coords,
                                     const QuadratureRule& rule);

// Local faces (edges in 2D) for facet sets and traction integration.
// Face node ids index into the element's local connectivity; orientation
// gives the outward normal on the reference element.
int face_count(ElementKind kind);
std::span<const int> face_nodes(ElementKind kind, int face);

}  // namespace plasticgraph
