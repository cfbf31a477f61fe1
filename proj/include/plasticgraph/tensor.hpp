#pragma once

#include <array>
#include <cmath>

namespace plasticgraph {

// Symmetric second-order tensor in 3D, stored as the six independent
// components (xx, yy, zz, xy, yz, zx). Shear components are stored as
// tensor components; the engineering-shear convention (gamma = 2*eps_xy)
// appears only in the Voigt vectors used for stiffness assembly, see
// material.hpp. Contractions and norms below are full tensor operations,
// counting off-diagonal entries twice.
struct SymTensor3 {
  double xx = 0.0, yy = 0.0, zz = 0.0;
  double xy = 0.0, yz = 0.0, zx = 0.0;

  static SymTensor3 identity() { return {1.0, 1.0, 1.0, 0.0, 0.0, 0.0}; }

  double trace() const { return xx + yy + zz; }

  SymTensor3 deviator() const {
    const double p = trace() / 3.0;
    return {xx - p, yy - p, zz - p, xy, yz, zx};
  }

  // Full contraction a : b.
  double ddot(const SymTensor3& o) const {
    return xx * o.xx + yy * o.yy + zz * o.zz + 2.0 * (xy * o.xy + yz * o.yz + zx * o.zx);
  }

  // Frobenius norm of the tensor.
  double norm() const { return std::sqrt(ddot(*this)); }

  SymTensor3& operator+=(const SymTensor3& o) {
    xx += o.xx; yy += o.yy; zz += o.zz;
    xy += o.xy; yz += o.yz; zx += o.zx;
    return *this;
  }
  SymTensor3& operator-=(const SymTensor3& o) {
    xx -= o.xx; yy -= o.yy; zz -= o.zz;
    xy -= o.xy; yz -= o.yz; zx -= o.zx;
    return *this;
  }
  SymTensor3& operator*=(double s) {
    xx *= s; yy *= s; zz *= s;
    xy *= s; yz *= s; zx *= s;
    return *this;
  }

  friend SymTensor3 operator+(SymTensor3 a, const SymTensor3& b) { return a += b; }
  friend SymTensor3 operator-(SymTensor3 a, const SymTensor3& b) { return a -= b; }
  friend SymTensor3 operator*(double s, SymTensor3 a) { return a *= s; }
  friend SymTensor3 operator*(SymTensor3 a, double s) { return a *= s; }

  // Matrix-vector product sigma * v for a 3-vector.
  std::array<double, 3> apply(const std::array<double, 3>& v) const {
    return {xx * v[0] + xy * v[1] + zx * v[2],
            xy * v[0] + yy * v[1] + yz * v[2],
            zx * v[0] + yz * v[1] + zz * v[2]};
  }
};

inline double von_mises(const SymTensor3& sigma) {
  const SymTensor3 s = sigma.deviator();
  return std::sqrt(1.5 * s.ddot(s));
}

inline double equivalent_plastic_strain(const SymTensor3& eps_p) {
  return std::sqrt(2.0 / 3.0 * eps_p.ddot(eps_p));
}

}  // namespace plasticgraph
