#include "plasticgraph/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "plasticgraph/error.hpp"

namespace plasticgraph {

int effective_quadrature_order(ElementKind kind, int requested) {
  if (requested == 0) return default_quadrature_order(kind);
  if (dimension(kind) >= 2 && (kind == ElementKind::tri3 || kind == ElementKind::tet4))
    return 1;  // simplices have a single supported rule
  return requested;
}

Mesh Mesh::build(int dim, std::vector<double> coords, std::vector<ElementRecord> elements,
                 std::map<std::string, std::vector<int>> node_sets,
                 std::map<std::string, std::vector<Facet>> facet_sets) {
  if (dim != 2 && dim != 3) fail(ErrorCode::SchemaError, "mesh dimension must be 2 or 3");
  if (coords.size() % dim != 0)
    fail(ErrorCode::LengthMismatch, "coordinate array length is not a multiple of dim");

  Mesh mesh;
  mesh.dim_ = dim;
  mesh.coords_ = std::move(coords);
  mesh.offsets_.push_back(0);
  for (auto& rec : elements) {
    if (dimension(rec.kind) != dim)
      fail(ErrorCode::ArityMismatch, std::string(to_string(rec.kind)) + " element in a " +
                                         std::to_string(dim) + "D mesh");
    if (static_cast<int>(rec.nodes.size()) != plasticgraph::node_count(rec.kind)) {
      std::ostringstream msg;
      msg << to_string(rec.kind) << " element " << mesh.kinds_.size() << " has "
          << rec.nodes.size() << " nodes, expected " << plasticgraph::node_count(rec.kind);
      fail(ErrorCode::ArityMismatch, msg.str());
    }
    mesh.kinds_.push_back(rec.kind);
    mesh.materials_.push_back(rec.material);
    mesh.connectivity_.insert(mesh.connectivity_.end(), rec.nodes.begin(), rec.nodes.end());
    mesh.offsets_.push_back(static_cast<int>(mesh.connectivity_.size()));
  }
  mesh.node_sets_ = std::move(node_sets);
  mesh.facet_sets_ = std::move(facet_sets);

  mesh.validate();
  mesh.build_incidence();
  mesh.build_boundary_facets();
  return mesh;
}

void Mesh::validate() const {
  const int nn = node_count();
  for (int v : connectivity_)
    if (v < 0 || v >= nn)
      fail(ErrorCode::IndexOutOfRange,
           "element references node " + std::to_string(v) + " of " + std::to_string(nn));
  for (const auto& [name, nodes] : node_sets_)
    for (int v : nodes)
      if (v < 0 || v >= nn)
        fail(ErrorCode::IndexOutOfRange, "node set '" + name + "' references node " +
                                             std::to_string(v) + " of " + std::to_string(nn));
  for (const auto& [name, facets] : facet_sets_)
    for (const Facet& f : facets) {
      if (f.element < 0 || f.element >= element_count())
        fail(ErrorCode::IndexOutOfRange, "facet set '" + name + "' references element " +
                                             std::to_string(f.element));
      if (f.face < 0 || f.face >= face_count(kinds_[f.element]))
        fail(ErrorCode::IndexOutOfRange,
             "facet set '" + name + "' references face " + std::to_string(f.face));
    }

  // Positive Jacobians at the default rule of each kind.
  std::vector<double> xe;
  for (int e = 0; e < element_count(); ++e) {
    const ElementKind k = kinds_[e];
    auto conn = nodes_of(e);
    xe.resize(conn.size() * dim_);
    for (size_t j = 0; j < conn.size(); ++j)
      for (int a = 0; a < dim_; ++a) xe[j * dim_ + a] = coords_[conn[j] * dim_ + a];
    try {
      isoparametric_update(k, xe, quadrature_rule(k, default_quadrature_order(k)));
    } catch (const Error& err) {
      if (err.code() == ErrorCode::InvertedElement) {
        std::ostringstream msg;
        msg << "element " << e << ": " << err.what();
        fail(ErrorCode::InvertedElement, msg.str());
      }
      throw;
    }
  }
}

void Mesh::build_incidence() {
  const int nn = node_count();
  std::vector<int> degree(nn, 0);
  for (int v : connectivity_) ++degree[v];
  incidence_offsets_.assign(nn + 1, 0);
  for (int j = 0; j < nn; ++j) incidence_offsets_[j + 1] = incidence_offsets_[j] + degree[j];
  incidence_.assign(connectivity_.size(), 0);
  std::vector<int> cursor(incidence_offsets_.begin(), incidence_offsets_.end() - 1);
  // Element ids visited ascending, so per-node lists come out sorted.
  for (int e = 0; e < element_count(); ++e)
    for (int v : nodes_of(e)) incidence_[cursor[v]++] = e;
}

void Mesh::build_boundary_facets() {
  // Key each face by its sorted node ids; boundary faces occur exactly once.
  std::map<std::vector<int>, std::pair<Facet, int>> faces;
  for (int e = 0; e < element_count(); ++e) {
    auto conn = nodes_of(e);
    for (int f = 0; f < face_count(kinds_[e]); ++f) {
      std::vector<int> key;
      for (int local : face_nodes(kinds_[e], f)) key.push_back(conn[local]);
      std::sort(key.begin(), key.end());
      auto it = faces.find(key);
      if (it == faces.end())
        faces.emplace(std::move(key), std::make_pair(Facet{e, f}, 1));
      else
        ++it->second.second;
    }
  }
  boundary_facets_.clear();
  for (const auto& [key, entry] : faces)
    if (entry.second == 1) boundary_facets_.push_back(entry.first);
  std::sort(boundary_facets_.begin(), boundary_facets_.end(), [](const Facet& a, const Facet& b) {
    return a.element != b.element ? a.element < b.element : a.face < b.face;
  });
}

Mesh Mesh::with_coords(std::vector<double> coords) const {
  if (coords.size() != coords_.size())
    fail(ErrorCode::LengthMismatch, "coordinate array size changed");
  Mesh mesh(*this);
  mesh.coords_ = std::move(coords);
  mesh.validate();
  return mesh;
}

Mesh Mesh::with_sets(std::map<std::string, std::vector<int>> node_sets,
                     std::map<std::string, std::vector<Facet>> facet_sets) const {
  Mesh mesh(*this);
  for (auto& [name, nodes] : node_sets) {
    if (mesh.node_sets_.count(name))
      fail(ErrorCode::SchemaError, "duplicate node set '" + name + "'");
    for (int v : nodes)
      if (v < 0 || v >= node_count())
        fail(ErrorCode::IndexOutOfRange, "node set '" + name + "' references node " +
                                             std::to_string(v) + " of " +
                                             std::to_string(node_count()));
    mesh.node_sets_.emplace(name, std::move(nodes));
  }
  for (auto& [name, facets] : facet_sets) {
    if (mesh.facet_sets_.count(name))
      fail(ErrorCode::SchemaError, "duplicate facet set '" + name + "'");
    for (const Facet& f : facets) {
      if (f.element < 0 || f.element >= element_count())
        fail(ErrorCode::IndexOutOfRange,
             "facet set '" + name + "' references element " + std::to_string(f.element));
      if (f.face < 0 || f.face >= face_count(kinds_[f.element]))
        fail(ErrorCode::IndexOutOfRange,
             "facet set '" + name + "' references face " + std::to_string(f.face));
    }
    mesh.facet_sets_.emplace(name, std::move(facets));
  }
  return mesh;
}

std::vector<int> Mesh::gauss_offsets(int quad_order) const {
  std::vector<int> offsets(element_count() + 1, 0);
  for (int e = 0; e < element_count(); ++e) {
    const int order = effective_quadrature_order(kinds_[e], quad_order);
    offsets[e + 1] = offsets[e] + natural_basis(kinds_[e], order).rule.size();
  }
  return offsets;
}

namespace {

struct BoxGrid {
  int dim;
  std::array<int, 3> nv;  // vertices per axis
  std::array<double, 3> h;
  std::array<double, 3> origin;

  int vertex(int i, int j, int k) const { return (k * nv[1] + j) * nv[0] + i; }
};

void add_box_sets(const BoxGrid& grid, const Mesh& mesh,
                  std::map<std::string, std::vector<int>>& node_sets,
                  std::map<std::string, std::vector<Facet>>& facet_sets,
                  std::span<const double> extents) {
  const int dim = grid.dim;
  const char axes[3] = {'x', 'y', 'z'};
  struct Side {
    std::string name;
    int axis;
    double value;
  };
  std::vector<Side> sides;
  for (int a = 0; a < dim; ++a) {
    sides.push_back({std::string(1, axes[a]) + "_min", a, grid.origin[a]});
    sides.push_back({std::string(1, axes[a]) + "_max", a, grid.origin[a] + extents[a]});
  }
  const auto coords = mesh.coords();
  for (const Side& side : sides) {
    const double tol = 1e-12 * std::max(1.0, std::abs(extents[side.axis]));
    std::vector<int>& nodes = node_sets[side.name];
    for (int v = 0; v < mesh.node_count(); ++v)
      if (std::abs(coords[v * dim + side.axis] - side.value) <= tol) nodes.push_back(v);
    std::vector<Facet>& facets = facet_sets[side.name];
    for (const Facet& f : mesh.boundary_facets()) {
      auto conn = mesh.nodes_of(f.element);
      bool on_plane = true;
      for (int local : face_nodes(mesh.kind(f.element), f.face))
        if (std::abs(coords[conn[local] * dim + side.axis] - side.value) > tol) {
          on_plane = false;
          break;
        }
      if (on_plane) facets.push_back(f);
    }
  }
}

}  // namespace

Mesh structured_mesh(ElementKind kind, std::span<const double> extents,
                     std::span<const int> divisions, std::span<const double> origin) {
  const int dim = dimension(kind);
  if (static_cast<int>(extents.size()) != dim || static_cast<int>(divisions.size()) != dim)
    fail(ErrorCode::InvalidDivisions, "extents/divisions must have one entry per axis");
  for (int a = 0; a < dim; ++a) {
    if (divisions[a] < 1)
      fail(ErrorCode::InvalidDivisions, "divisions must be >= 1 per axis");
    if (!(extents[a] > 0.0))
      fail(ErrorCode::InvalidDivisions, "extents must be positive");
  }

  BoxGrid grid;
  grid.dim = dim;
  grid.nv = {1, 1, 1};
  grid.h = {0, 0, 0};
  grid.origin = {0, 0, 0};
  for (int a = 0; a < dim; ++a) {
    grid.nv[a] = divisions[a] + 1;
    grid.h[a] = extents[a] / divisions[a];
    if (!origin.empty()) grid.origin[a] = origin[a];
  }

  std::vector<double> coords;
  coords.reserve(static_cast<size_t>(grid.nv[0]) * grid.nv[1] * grid.nv[2] * dim);
  for (int k = 0; k < grid.nv[2]; ++k)
    for (int j = 0; j < grid.nv[1]; ++j)
      for (int i = 0; i < grid.nv[0]; ++i) {
        coords.push_back(grid.origin[0] + i * grid.h[0]);
        coords.push_back(grid.origin[1] + j * grid.h[1]);
        if (dim == 3) coords.push_back(grid.origin[2] + k * grid.h[2]);
      }

  std::vector<ElementRecord> elements;
  const int nx = divisions[0];
  const int ny = dim >= 2 ? divisions[1] : 1;
  const int nz = dim == 3 ? divisions[2] : 1;
  if (dim == 2) {
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        const int a = grid.vertex(i, j, 0), b = grid.vertex(i + 1, j, 0);
        const int c = grid.vertex(i + 1, j + 1, 0), d = grid.vertex(i, j + 1, 0);
        if (kind == ElementKind::quad4) {
          elements.push_back({kind, {a, b, c, d}, 0});
        } else {
          elements.push_back({ElementKind::tri3, {a, b, c}, 0});
          elements.push_back({ElementKind::tri3, {a, c, d}, 0});
        }
      }
  } else {
    for (int k = 0; k < nz; ++k)
      for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
          const int v0 = grid.vertex(i, j, k), v1 = grid.vertex(i + 1, j, k);
          const int v2 = grid.vertex(i + 1, j + 1, k), v3 = grid.vertex(i, j + 1, k);
          const int v4 = grid.vertex(i, j, k + 1), v5 = grid.vertex(i + 1, j, k + 1);
          const int v6 = grid.vertex(i + 1, j + 1, k + 1), v7 = grid.vertex(i, j + 1, k + 1);
          if (kind == ElementKind::hex8) {
            elements.push_back({kind, {v0, v1, v2, v3, v4, v5, v6, v7}, 0});
          } else {
            // Kuhn split around the v0-v6 diagonal keeps shared faces conforming.
            elements.push_back({ElementKind::tet4, {v0, v1, v2, v6}, 0});
            elements.push_back({ElementKind::tet4, {v0, v2, v3, v6}, 0});
            elements.push_back({ElementKind::tet4, {v0, v3, v7, v6}, 0});
            elements.push_back({ElementKind::tet4, {v0, v7, v4, v6}, 0});
            elements.push_back({ElementKind::tet4, {v0, v4, v5, v6}, 0});
            elements.push_back({ElementKind::tet4, {v0, v5, v1, v6}, 0});
          }
        }
  }

  Mesh mesh = Mesh::build(dim, std::move(coords), std::move(elements));
  std::map<std::string, std::vector<int>> node_sets;
  std::map<std::string, std::vector<Facet>> facet_sets;
  add_box_sets(grid, mesh, node_sets, facet_sets, extents);
  return mesh.with_sets(std::move(node_sets), std::move(facet_sets));
}

}  // namespace plasticgraph
