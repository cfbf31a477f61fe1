#include "plasticgraph/vtk.hpp"

#include <cstdio>
#include <fstream>

#include "plasticgraph/error.hpp"

namespace plasticgraph {

int vtk_cell_type(ElementKind kind) {
  switch (kind) {
    case ElementKind::tri3: return 5;
    case ElementKind::quad4: return 9;
    case ElementKind::tet4: return 10;
    case ElementKind::hex8: return 12;
  }
  return 0;
}

namespace {

void print_number(std::ofstream& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out << buf;
}

}  // namespace

void write_vtk(const Mesh& mesh,
               const std::map<std::string, std::vector<double>>& point_vectors,
               const std::map<std::string, std::vector<double>>& cell_scalars,
               const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::IoError, "cannot write '" + path + "'");
  const int dim = mesh.dim();
  const int nn = mesh.node_count();
  const int ne = mesh.element_count();

  out << "# vtk DataFile Version 3.0\n";
  out << "plasticgraph fields\n";
  out << "ASCII\n";
  out << "DATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << nn << " double\n";
  for (int v = 0; v < nn; ++v) {
    for (int a = 0; a < 3; ++a) {
      if (a) out << ' ';
      print_number(out, a < dim ? mesh.coords()[v * dim + a] : 0.0);
    }
    out << '\n';
  }

  int list_size = 0;
  for (int e = 0; e < ne; ++e) list_size += 1 + static_cast<int>(mesh.nodes_of(e).size());
  out << "CELLS " << ne << ' ' << list_size << '\n';
  for (int e = 0; e < ne; ++e) {
    auto conn = mesh.nodes_of(e);
    out << conn.size();
    for (int v : conn) out << ' ' << v;
    out << '\n';
  }
  out << "CELL_TYPES " << ne << '\n';
  for (int e = 0; e < ne; ++e) out << vtk_cell_type(mesh.kind(e)) << '\n';

  if (!point_vectors.empty()) {
    out << "POINT_DATA " << nn << '\n';
    for (const auto& [name, values] : point_vectors) {
      if (static_cast<int>(values.size()) != nn * dim)
        fail(ErrorCode::LengthMismatch, "point field '" + name + "' has wrong length");
      out << "VECTORS " << name << " double\n";
      for (int v = 0; v < nn; ++v) {
        for (int a = 0; a < 3; ++a) {
          if (a) out << ' ';
          print_number(out, a < dim ? values[v * dim + a] : 0.0);
        }
        out << '\n';
      }
    }
  }

  if (!cell_scalars.empty()) {
    out << "CELL_DATA " << ne << '\n';
    for (const auto& [name, values] : cell_scalars) {
      if (static_cast<int>(values.size()) != ne)
        fail(ErrorCode::LengthMismatch, "cell field '" + name + "' has wrong length");
      out << "SCALARS " << name << " double 1\n";
      out << "LOOKUP_TABLE default\n";
      for (int e = 0; e < ne; ++e) {
        print_number(out, values[e]);
        out << '\n';
      }
    }
  }
}

std::vector<double> element_average(const Mesh& mesh, std::span<const int> gp_offsets,
                                    std::span<const double> gp_values) {
  std::vector<double> avg(mesh.element_count(), 0.0);
  for (int e = 0; e < mesh.element_count(); ++e) {
    const int ng = gp_offsets[e + 1] - gp_offsets[e];
    double s = 0.0;
    for (int g = gp_offsets[e]; g < gp_offsets[e + 1]; ++g) s += gp_values[g];
    avg[e] = s / ng;
  }
  return avg;
}

}  // namespace plasticgraph
