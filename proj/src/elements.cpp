#include "plasticgraph/elements.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <sstream>

#include "plasticgraph/error.hpp"

namespace plasticgraph {

int dimension(ElementKind kind) {
  switch (kind) {
    case ElementKind::tri3:
    case ElementKind::quad4:
      return 2;
    case ElementKind::tet4:
    case ElementKind::hex8:
      return 3;
  }
  return 0;
}

int node_count(ElementKind kind) {
  switch (kind) {
    case ElementKind::tri3: return 3;
    case ElementKind::quad4: return 4;
    case ElementKind::tet4: return 4;
    case ElementKind::hex8: return 8;
  }
  return 0;
}

int default_quadrature_order(ElementKind kind) {
  switch (kind) {
    case ElementKind::quad4:
    case ElementKind::hex8:
      return 2;
    default:
      return 1;
  }
}

const char* to_string(ElementKind kind) {
  switch (kind) {
    case ElementKind::tri3: return "tri3";
    case ElementKind::quad4: return "quad4";
    case ElementKind::tet4: return "tet4";
    case ElementKind::hex8: return "hex8";
  }
  return "?";
}

ElementKind parse_element_kind(const std::string& name) {
  if (name == "tri3") return ElementKind::tri3;
  if (name == "quad4") return ElementKind::quad4;
  if (name == "tet4") return ElementKind::tet4;
  if (name == "hex8") return ElementKind::hex8;
  fail(ErrorCode::SchemaError, "unknown element kind '" + name + "'");
}

namespace {

constexpr std::array<std::array<double, 3>, 3> kTri3Nodes = {{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}}};
constexpr std::array<std::array<double, 3>, 4> kQuad4Nodes = {
    {{-1, -1, 0}, {1, -1, 0}, {1, 1, 0}, {-1, 1, 0}}};
constexpr std::array<std::array<double, 3>, 4> kTet4Nodes = {
    {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
constexpr std::array<std::array<double, 3>, 8> kHex8Nodes = {{{-1, -1, -1},
                                                              {1, -1, -1},
                                                              {1, 1, -1},
                                                              {-1, 1, -1},
                                                              {-1, -1, 1},
                                                              {1, -1, 1},
                                                              {1, 1, 1},
                                                              {-1, 1, 1}}};

// Local faces, outward-oriented on the reference element.
constexpr int kTri3Faces[3][2] = {{0, 1}, {1, 2}, {2, 0}};
constexpr int kQuad4Faces[4][2] = {{0, 1}, {1, 2}, {2, 3}, {3, 0}};
constexpr int kTet4Faces[4][3] = {{0, 2, 1}, {0, 1, 3}, {1, 2, 3}, {0, 3, 2}};
constexpr int kHex8Faces[6][4] = {{0, 3, 2, 1}, {4, 5, 6, 7}, {0, 1, 5, 4},
                                  {1, 2, 6, 5}, {2, 3, 7, 6}, {3, 0, 4, 7}};

}  // namespace

std::span<const std::array<double, 3>> reference_nodes(ElementKind kind) {
  switch (kind) {
    case ElementKind::tri3: return kTri3Nodes;
    case ElementKind::quad4: return kQuad4Nodes;
    case ElementKind::tet4: return kTet4Nodes;
    case ElementKind::hex8: return kHex8Nodes;
  }
  return {};
}

void shape_values(ElementKind kind, const double* xi, double* n) {
  switch (kind) {
    case ElementKind::tri3:
      n[0] = 1.0 - xi[0] - xi[1];
      n[1] = xi[0];
      n[2] = xi[1];
      return;
    case ElementKind::quad4:
      for (int j = 0; j < 4; ++j)
        n[j] = 0.25 * (1.0 + kQuad4Nodes[j][0] * xi[0]) * (1.0 + kQuad4Nodes[j][1] * xi[1]);
      return;
    case ElementKind::tet4:
      n[0] = 1.0 - xi[0] - xi[1] - xi[2];
      n[1] = xi[0];
      n[2] = xi[1];
      n[3] = xi[2];
      return;
    case ElementKind::hex8:
      for (int j = 0; j < 8; ++j)
        n[j] = 0.125 * (1.0 + kHex8Nodes[j][0] * xi[0]) * (1.0 + kHex8Nodes[j][1] * xi[1]) *
               (1.0 + kHex8Nodes[j][2] * xi[2]);
      return;
  }
}

void shape_gradients_natural(ElementKind kind, const double* xi, double* g) {
  switch (kind) {
    case ElementKind::tri3:
      g[0] = -1.0; g[1] = -1.0;
      g[2] = 1.0;  g[3] = 0.0;
      g[4] = 0.0;  g[5] = 1.0;
      return;
    case ElementKind::quad4:
      for (int j = 0; j < 4; ++j) {
        const double sx = kQuad4Nodes[j][0], sy = kQuad4Nodes[j][1];
        g[2 * j + 0] = 0.25 * sx * (1.0 + sy * xi[1]);
        g[2 * j + 1] = 0.25 * sy * (1.0 + sx * xi[0]);
      }
      return;
    case ElementKind::tet4:
      g[0] = -1.0; g[1] = -1.0; g[2] = -1.0;
      g[3] = 1.0;  g[4] = 0.0;  g[5] = 0.0;
      g[6] = 0.0;  g[7] = 1.0;  g[8] = 0.0;
      g[9] = 0.0;  g[10] = 0.0; g[11] = 1.0;
      return;
    case ElementKind::hex8:
      for (int j = 0; j < 8; ++j) {
        const double sx = kHex8Nodes[j][0], sy = kHex8Nodes[j][1], sz = kHex8Nodes[j][2];
        g[3 * j + 0] = 0.125 * sx * (1.0 + sy * xi[1]) * (1.0 + sz * xi[2]);
        g[3 * j + 1] = 0.125 * sy * (1.0 + sx * xi[0]) * (1.0 + sz * xi[2]);
        g[3 * j + 2] = 0.125 * sz * (1.0 + sx * xi[0]) * (1.0 + sy * xi[1]);
      }
      return;
  }
}

QuadratureRule quadrature_rule(ElementKind kind, int order) {
  QuadratureRule rule;
  rule.kind = kind;
  rule.order = order;
  const double a = 1.0 / std::sqrt(3.0);
  switch (kind) {
    case ElementKind::tri3:
      if (order != 1) fail(ErrorCode::UnsupportedOrder, "tri3 supports quadrature order 1 only");
      rule.points = {{1.0 / 3.0, 1.0 / 3.0, 0.0}};
      rule.weights = {0.5};
      return rule;
    case ElementKind::tet4:
      if (order != 1) fail(ErrorCode::UnsupportedOrder, "tet4 supports quadrature order 1 only");
      rule.points = {{0.25, 0.25, 0.25}};
      rule.weights = {1.0 / 6.0};
      return rule;
    case ElementKind::quad4:
      if (order == 1) {
        rule.points = {{0.0, 0.0, 0.0}};
        rule.weights = {4.0};
      } else if (order == 2) {
        for (double y : {-a, a})
          for (double x : {-a, a}) {
            rule.points.push_back({x, y, 0.0});
            rule.weights.push_back(1.0);
          }
      } else {
        fail(ErrorCode::UnsupportedOrder, "quad4 supports quadrature orders 1 and 2");
      }
      return rule;
    case ElementKind::hex8:
      if (order == 1) {
        rule.points = {{0.0, 0.0, 0.0}};
        rule.weights = {8.0};
      } else if (order == 2) {
        for (double z : {-a, a})
          for (double y : {-a, a})
            for (double x : {-a, a}) {
              rule.points.push_back({x, y, z});
              rule.weights.push_back(1.0);
            }
      } else {
        fail(ErrorCode::UnsupportedOrder, "hex8 supports quadrature orders 1 and 2");
      }
      return rule;
  }
  fail(ErrorCode::UnsupportedOrder, "bad element kind");
}

const NaturalBasis& natural_basis(ElementKind kind, int order) {
  static std::mutex mutex;
  static std::map<std::pair<int, int>, NaturalBasis> cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto key = std::make_pair(static_cast<int>(kind), order);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;

  NaturalBasis basis;
  basis.rule = quadrature_rule(kind, order);
  const int nn = node_count(kind);
  const int dim = dimension(kind);
  const int ng = basis.rule.size();
  basis.values.resize(static_cast<size_t>(ng) * nn);
  basis.grads.resize(static_cast<size_t>(ng) * nn * dim);
  for (int g = 0; g < ng; ++g) {
    shape_values(kind, basis.rule.points[g].data(), &basis.values[static_cast<size_t>(g) * nn]);
    shape_gradients_natural(kind, basis.rule.points[g].data(),
                            &basis.grads[static_cast<size_t>(g) * nn * dim]);
  }
  return cache.emplace(key, std::move(basis)).first->second;
}

namespace {

inline double det2(const double* m) { return m[0] * m[3] - m[1] * m[2]; }

inline double det3(const double* m) {
  return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
         m[2] * (m[3] * m[7] - m[4] * m[6]);
}

inline void inv2(const double* m, double det, double* out) {
  const double inv = 1.0 / det;
  out[0] = m[3] * inv;
  out[1] = -m[1] * inv;
  out[2] = -m[2] * inv;
  out[3] = m[0] * inv;
}

inline void inv3(const double* m, double det, double* out) {
  const double inv = 1.0 / det;
  out[0] = (m[4] * m[8] - m[5] * m[7]) * inv;
  out[1] = (m[2] * m[7] - m[1] * m[8]) * inv;
  out[2] = (m[1] * m[5] - m[2] * m[4]) * inv;
  out[3] = (m[5] * m[6] - m[3] * m[8]) * inv;
  out[4] = (m[0] * m[8] - m[2] * m[6]) * inv;
  out[5] = (m[2] * m[3] - m[0] * m[5]) * inv;
  out[6] = (m[3] * m[7] - m[4] * m[6]) * inv;
  out[7] = (m[1] * m[6] - m[0] * m[7]) * inv;
  out[8] = (m[0] * m[4] - m[1] * m[3]) * inv;
}

}  // namespace

ElementGeometry isoparametric_update(ElementKind kind, std::span<const double> coords,
                                     const QuadratureRule& rule) {
  const int dim = dimension(kind);
  const int nn = node_count(kind);
  if (static_cast<int>(coords.size()) != nn * dim)
    fail(ErrorCode::ArityMismatch, std::string("expected ") + std::to_string(nn * dim) +
                                       " coordinates for " + to_string(kind));
  const NaturalBasis& basis = natural_basis(kind, rule.order);
  const int ng = rule.size();

  ElementGeometry geom;
  geom.dim = dim;
  geom.n_nodes = nn;
  geom.n_gauss = ng;
  geom.jacobian.resize(static_cast<size_t>(ng) * dim * dim);
  geom.det_jacobian.resize(ng);
  geom.inv_jacobian.resize(static_cast<size_t>(ng) * dim * dim);
  geom.grad_phys.resize(static_cast<size_t>(ng) * nn * dim);
  geom.scaled_weight.resize(ng);

  for (int g = 0; g < ng; ++g) {
    double* J = &geom.jacobian[static_cast<size_t>(g) * dim * dim];
    const double* dn = &basis.grads[static_cast<size_t>(g) * nn * dim];
    // J = sum_j x_j (dN_j/dxi)^T, row a = physical axis, column b = natural axis.
    for (int a = 0; a < dim; ++a)
      for (int b = 0; b < dim; ++b) {
        double s = 0.0;
        for (int j = 0; j < nn; ++j) s += coords[j * dim + a] * dn[j * dim + b];
        J[a * dim + b] = s;
      }
    const double det = (dim == 2) ? det2(J) : det3(J);
    if (!(det > 0.0)) {
      std::ostringstream msg;
      msg << to_string(kind) << " element has non-positive Jacobian determinant " << det
          << " at Gauss point " << g;
      fail(ErrorCode::InvertedElement, msg.str());
    }
    geom.det_jacobian[g] = det;
    double* invJ = &geom.inv_jacobian[static_cast<size_t>(g) * dim * dim];
    if (dim == 2)
      inv2(J, det, invJ);
    else
      inv3(J, det, invJ);
    // grad_x N_j = J^{-T} grad_xi N_j
    double* gp = &geom.grad_phys[static_cast<size_t>(g) * nn * dim];
    for (int j = 0; j < nn; ++j)
      for (int a = 0; a < dim; ++a) {
        double s = 0.0;
        for (int b = 0; b < dim; ++b) s += invJ[b * dim + a] * dn[j * dim + b];
        gp[j * dim + a] = s;
      }
    geom.scaled_weight[g] = det * rule.weights[g];
  }
  return geom;
}

int face_count(ElementKind kind) {
  switch (kind) {
    case ElementKind::tri3: return 3;
    case ElementKind::quad4: return 4;
    case ElementKind::tet4: return 4;
    case ElementKind::hex8: return 6;
  }
  return 0;
}

std::span<const int> face_nodes(ElementKind kind, int face) {
  if (face < 0 || face >= face_count(kind))
    fail(ErrorCode::IndexOutOfRange, "face index out of range");
  switch (kind) {
    case ElementKind::tri3: return kTri3Faces[face];
    case ElementKind::quad4: return kQuad4Faces[face];
    case ElementKind::tet4: return kTet4Faces[face];
    case ElementKind::hex8: return kHex8Faces[face];
  }
  return {};
}

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::ArityMismatch: return "ArityMismatch";
    case ErrorCode::InvertedElement: return "InvertedElement";
    case ErrorCode::InvalidDivisions: return "InvalidDivisions";
    case ErrorCode::UnsupportedOrder: return "UnsupportedOrder";
    case ErrorCode::InvalidPoisson: return "InvalidPoisson";
    case ErrorCode::ModeParameterMismatch: return "ModeParameterMismatch";
    case ErrorCode::EmptyFacetSet: return "EmptyFacetSet";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::DanglingReference: return "DanglingReference";
    case ErrorCode::ConflictingBC: return "ConflictingBC";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::NotConverged: return "NotConverged";
    case ErrorCode::IndefiniteOperator: return "IndefiniteOperator";
    case ErrorCode::NonFiniteObjective: return "NonFiniteObjective";
    case ErrorCode::ZeroReference: return "ZeroReference";
  }
  return "?";
}

}  // namespace plasticgraph
