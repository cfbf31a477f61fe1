#include <cmath>
#include <random>

#include "doctest.h"
#include "plasticgraph/error.hpp"
#include "plasticgraph/mesh.hpp"

using namespace plasticgraph;

namespace {

std::vector<double> node_coords(ElementKind kind) {
  std::vector<double> coords;
  const int dim = dimension(kind);
  for (const auto& node : reference_nodes(kind))
    for (int a = 0; a < dim; ++a) coords.push_back(node[a]);
  return coords;
}

}  // namespace

TEST_CASE("shape values: partition of unity and Kronecker property") {
  std::mt19937_64 rng(7);
  for (ElementKind kind :
       {ElementKind::tri3, ElementKind::quad4, ElementKind::tet4, ElementKind::hex8}) {
    const int nn = node_count(kind);
    const int dim = dimension(kind);
    std::vector<double> n(nn);

    // Kronecker delta at reference nodes.
    auto nodes = reference_nodes(kind);
    for (int k = 0; k < nn; ++k) {
      shape_values(kind, nodes[k].data(), n.data());
      for (int j = 0; j < nn; ++j) CHECK(n[j] == doctest::Approx(j == k ? 1.0 : 0.0).epsilon(1e-14));
    }

    // Partition of unity at random interior points.
    std::uniform_real_distribution<double> u(0.05, 0.2);
    for (int trial = 0; trial < 20; ++trial) {
      double xi[3] = {0, 0, 0};
      if (kind == ElementKind::tri3 || kind == ElementKind::tet4) {
        for (int a = 0; a < dim; ++a) xi[a] = u(rng);
      } else {
        std::uniform_real_distribution<double> v(-0.95, 0.95);
        for (int a = 0; a < dim; ++a) xi[a] = v(rng);
      }
      shape_values(kind, xi, n.data());
      double sum = 0.0;
      for (double v : n) sum += v;
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-14));
    }
  }
}

TEST_CASE("quad4 center values and tri3 barycenter") {
  double xi[2] = {0.0, 0.0};
  double n[4];
  shape_values(ElementKind::quad4, xi, n);
  for (int j = 0; j < 4; ++j) CHECK(n[j] == doctest::Approx(0.25));

  double bary[2] = {1.0 / 3.0, 1.0 / 3.0};
  double nt[3];
  shape_values(ElementKind::tri3, bary, nt);
  for (int j = 0; j < 3; ++j) CHECK(nt[j] == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("natural gradients: zero sum and finite-difference match") {
  std::mt19937_64 rng(11);
  for (ElementKind kind :
       {ElementKind::tri3, ElementKind::quad4, ElementKind::tet4, ElementKind::hex8}) {
    const int nn = node_count(kind);
    const int dim = dimension(kind);
    std::vector<double> g(nn * dim), np(nn), nm(nn);
    std::uniform_real_distribution<double> u(0.02, 0.2);
    for (int trial = 0; trial < 10; ++trial) {
      double xi[3] = {u(rng), u(rng), u(rng)};
      shape_gradients_natural(kind, xi, g.data());
      for (int a = 0; a < dim; ++a) {
        double sum = 0.0;
        for (int j = 0; j < nn; ++j) sum += g[j * dim + a];
        CHECK(std::abs(sum) < 1e-13);
      }
      const double h = 1e-7;
      for (int a = 0; a < dim; ++a) {
        double xp[3] = {xi[0], xi[1], xi[2]};
        double xm[3] = {xi[0], xi[1], xi[2]};
        xp[a] += h;
        xm[a] -= h;
        shape_values(kind, xp, np.data());
        shape_values(kind, xm, nm.data());
        for (int j = 0; j < nn; ++j)
          CHECK(g[j * dim + a] == doctest::Approx((np[j] - nm[j]) / (2 * h)).epsilon(1e-8));
      }
    }
  }
}

TEST_CASE("tri3 gradients are the constant simplex gradients") {
  double xi[2] = {0.3, 0.4};
  double g[6];
  shape_gradients_natural(ElementKind::tri3, xi, g);
  CHECK(g[0] == -1.0);
  CHECK(g[1] == -1.0);
  CHECK(g[2] == 1.0);
  CHECK(g[3] == 0.0);
  CHECK(g[4] == 0.0);
  CHECK(g[5] == 1.0);
}

TEST_CASE("quad4 corner natural gradient") {
  double xi[2] = {0.0, 0.0};
  double g[8];
  shape_gradients_natural(ElementKind::quad4, xi, g);
  CHECK(g[0] == doctest::Approx(-0.25));
  CHECK(g[1] == doctest::Approx(-0.25));
}

TEST_CASE("quadrature rules: weight sums and polynomial exactness") {
  CHECK(quadrature_rule(ElementKind::quad4, 1).points.size() == 1);
  CHECK(quadrature_rule(ElementKind::quad4, 1).weights[0] == doctest::Approx(4.0));
  CHECK(quadrature_rule(ElementKind::hex8, 2).points.size() == 8);
  for (double w : quadrature_rule(ElementKind::hex8, 2).weights) CHECK(w == doctest::Approx(1.0));
  CHECK(quadrature_rule(ElementKind::tet4, 1).weights[0] == doctest::Approx(1.0 / 6.0));
  CHECK(quadrature_rule(ElementKind::tri3, 1).weights[0] == doctest::Approx(0.5));

  // Reference-measure sums.
  const double sums[4] = {0.5, 4.0, 1.0 / 6.0, 8.0};
  const ElementKind kinds[4] = {ElementKind::tri3, ElementKind::quad4, ElementKind::tet4,
                                ElementKind::hex8};
  for (int i = 0; i < 4; ++i) {
    const auto rule = quadrature_rule(kinds[i], default_quadrature_order(kinds[i]));
    double sum = 0.0;
    for (double w : rule.weights) sum += w;
    CHECK(sum == doctest::Approx(sums[i]).epsilon(1e-14));
  }

  // Tensor-Gauss order 2 integrates cubics exactly on [-1,1]^2.
  const auto rule = quadrature_rule(ElementKind::quad4, 2);
  double integral = 0.0;
  for (int g = 0; g < rule.size(); ++g) {
    const double x = rule.points[g][0], y = rule.points[g][1];
    integral += rule.weights[g] * (x * x * x * y + x * x * y * y + 3.0);
  }
  CHECK(integral == doctest::Approx(4.0 / 9.0 + 12.0).epsilon(1e-14));

  CHECK_THROWS_AS(quadrature_rule(ElementKind::quad4, 3), Error);
  CHECK_THROWS_AS(quadrature_rule(ElementKind::tri3, 2), Error);
}

TEST_CASE("isoparametric identity and affine maps") {
  // Reference-shaped tri3: J = I.
  const auto tri = isoparametric_update(ElementKind::tri3, node_coords(ElementKind::tri3),
                                        quadrature_rule(ElementKind::tri3, 1));
  CHECK(tri.det_jacobian[0] == doctest::Approx(1.0));
  double gn[6];
  shape_gradients_natural(ElementKind::tri3, quadrature_rule(ElementKind::tri3, 1).points[0].data(), gn);
  for (int i = 0; i < 6; ++i) CHECK(tri.grad_phys[i] == doctest::Approx(gn[i]));

  // quad4 scaled to side h: J = (h/2) I, detJ = h^2/4.
  const double h = 0.37;
  std::vector<double> quad = node_coords(ElementKind::quad4);
  for (double& c : quad) c *= h / 2.0;
  const auto geom = isoparametric_update(ElementKind::quad4, quad,
                                         quadrature_rule(ElementKind::quad4, 2));
  for (int g = 0; g < geom.n_gauss; ++g) {
    CHECK(geom.det_jacobian[g] == doctest::Approx(h * h / 4.0));
    CHECK(geom.jacobian[g * 4 + 0] == doctest::Approx(h / 2.0));
    CHECK(geom.jacobian[g * 4 + 1] == doctest::Approx(0.0));
  }
}

TEST_CASE("isoparametric invariants on a distorted quad") {
  const std::vector<double> coords = {0.0, 0.0, 1.3, 0.1, 1.1, 1.2, -0.2, 0.9};
  const auto rule = quadrature_rule(ElementKind::quad4, 2);
  const auto geom = isoparametric_update(ElementKind::quad4, coords, rule);
  for (int g = 0; g < geom.n_gauss; ++g) {
    CHECK(geom.det_jacobian[g] > 0.0);
    // J * invJ = I
    const double* J = &geom.jacobian[g * 4];
    const double* Ji = &geom.inv_jacobian[g * 4];
    CHECK(J[0] * Ji[0] + J[1] * Ji[2] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(J[0] * Ji[1] + J[1] * Ji[3] == doctest::Approx(0.0).epsilon(1e-12));
    // sum_j grad N_j = 0
    for (int a = 0; a < 2; ++a) {
      double sum = 0.0;
      for (int j = 0; j < 4; ++j) sum += geom.grad_phys[g * 8 + j * 2 + a];
      CHECK(std::abs(sum) < 1e-12);
    }
    // linear completeness: sum_j x_j grad N_j^T = I
    double lc[4] = {0, 0, 0, 0};
    for (int j = 0; j < 4; ++j)
      for (int p = 0; p < 2; ++p)
        for (int m = 0; m < 2; ++m)
          lc[p * 2 + m] += coords[j * 2 + p] * geom.grad_phys[g * 8 + j * 2 + m];
    CHECK(lc[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(lc[1] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(lc[2] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(lc[3] == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("physical gradients match finite differences of the isoparametric map") {
  // For the bilinear map x(xi), grad_x N evaluated at a Gauss point must
  // match (dN/dxi) J^{-1} computed by finite differences of x(xi).
  const std::vector<double> coords = {0.0, 0.0, 1.4, 0.2, 1.2, 1.1, 0.1, 0.8};
  const auto rule = quadrature_rule(ElementKind::quad4, 2);
  const auto geom = isoparametric_update(ElementKind::quad4, coords, rule);
  auto map = [&](const double* xi, double* x) {
    double n[4];
    shape_values(ElementKind::quad4, xi, n);
    x[0] = x[1] = 0.0;
    for (int j = 0; j < 4; ++j) {
      x[0] += n[j] * coords[j * 2 + 0];
      x[1] += n[j] * coords[j * 2 + 1];
    }
  };
  const double h = 1e-7;
  for (int g = 0; g < rule.size(); ++g) {
    const double* xi = rule.points[g].data();
    double Jfd[4];
    for (int b = 0; b < 2; ++b) {
      double xp[2] = {xi[0], xi[1]}, xm[2] = {xi[0], xi[1]};
      xp[b] += h;
      xm[b] -= h;
      double fp[2], fm[2];
      map(xp, fp);
      map(xm, fm);
      for (int a = 0; a < 2; ++a) Jfd[a * 2 + b] = (fp[a] - fm[a]) / (2 * h);
    }
    double gn[8];
    shape_gradients_natural(ElementKind::quad4, xi, gn);
    const double det = Jfd[0] * Jfd[3] - Jfd[1] * Jfd[2];
    const double Jinv[4] = {Jfd[3] / det, -Jfd[1] / det, -Jfd[2] / det, Jfd[0] / det};
    for (int j = 0; j < 4; ++j)
      for (int a = 0; a < 2; ++a) {
        const double expect = Jinv[0 * 2 + a] * gn[j * 2 + 0] + Jinv[1 * 2 + a] * gn[j * 2 + 1];
        CHECK(geom.grad_phys[g * 8 + j * 2 + a] == doctest::Approx(expect).epsilon(1e-6));
      }
  }
}

TEST_CASE("coordinate scaling homogeneity") {
  const std::vector<double> base = {0.0, 0.0, 0.0, 1.1, 0.1, 0.0, 1.0, 1.2, 0.1,
                                    -0.1, 0.9, 0.2, 0.0, 0.1, 1.0, 1.0, 0.0, 1.1,
                                    1.1, 1.0, 1.3, 0.0, 1.0, 1.2};
  const auto rule = quadrature_rule(ElementKind::hex8, 2);
  const auto g1 = isoparametric_update(ElementKind::hex8, base, rule);
  const double s = 2.5;
  std::vector<double> scaled = base;
  for (double& c : scaled) c *= s;
  const auto g2 = isoparametric_update(ElementKind::hex8, scaled, rule);
  for (int g = 0; g < g1.n_gauss; ++g) {
    CHECK(g2.det_jacobian[g] == doctest::Approx(g1.det_jacobian[g] * s * s * s).epsilon(1e-12));
    for (int k = 0; k < 24; ++k)
      CHECK(g2.grad_phys[g * 24 + k] == doctest::Approx(g1.grad_phys[g * 24 + k] / s).epsilon(1e-12));
  }
}

TEST_CASE("inverted element detection") {
  // Clockwise quad4 has negative detJ.
  const std::vector<double> cw = {0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0, 0.0};
  CHECK_THROWS_AS(
      isoparametric_update(ElementKind::quad4, cw, quadrature_rule(ElementKind::quad4, 2)), Error);
  try {
    isoparametric_update(ElementKind::quad4, cw, quadrature_rule(ElementKind::quad4, 2));
  } catch (const Error& err) {
    CHECK(err.code() == ErrorCode::InvertedElement);
  }
}

TEST_CASE("face tables") {
  CHECK(face_count(ElementKind::quad4) == 4);
  CHECK(face_count(ElementKind::hex8) == 6);
  CHECK(face_nodes(ElementKind::hex8, 1).size() == 4);
  CHECK_THROWS_AS(face_nodes(ElementKind::tri3, 5), Error);
}

TEST_CASE("quadrature-weighted volume equals the analytic domain volume") {
  struct CaseDef {
    ElementKind kind;
    std::vector<double> extents;
    std::vector<int> divisions;
    double volume;
  };
  for (const CaseDef& c : {CaseDef{ElementKind::quad4, {2.5, 1.5}, {5, 3}, 3.75},
                           CaseDef{ElementKind::tri3, {2.0, 1.0}, {4, 3}, 2.0},
                           CaseDef{ElementKind::hex8, {2.0, 1.5, 0.5}, {4, 3, 2}, 1.5},
                           CaseDef{ElementKind::tet4, {1.0, 1.0, 1.0}, {2, 2, 2}, 1.0}}) {
    const Mesh mesh = structured_mesh(c.kind, c.extents, c.divisions);
    double volume = 0.0;
    std::vector<double> xe;
    for (int e = 0; e < mesh.element_count(); ++e) {
      auto conn = mesh.nodes_of(e);
      const int dim = mesh.dim();
      xe.resize(conn.size() * dim);
      for (size_t j = 0; j < conn.size(); ++j)
        for (int a = 0; a < dim; ++a) xe[j * dim + a] = mesh.coords()[conn[j] * dim + a];
      const auto rule = quadrature_rule(c.kind, default_quadrature_order(c.kind));
      const auto geom = isoparametric_update(c.kind, xe, rule);
      for (double w : geom.scaled_weight) volume += w;
    }
    CHECK(volume == doctest::Approx(c.volume).epsilon(1e-10));
  }
}
