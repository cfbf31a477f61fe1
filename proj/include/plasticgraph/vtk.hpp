#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "plasticgraph/mesh.hpp"

namespace plasticgraph {

// Legacy ASCII VTK UNSTRUCTURED_GRID writer. Nodal vector fields become
// POINT_DATA VECTORS (padded to 3 components), per-element scalars become
// CELL_DATA. Numbers print with 17 significant digits so a reader recovers
// them bit for bit.
void write_vtk(const Mesh& mesh,
               const std::map<std::string, std::vector<double>>& point_vectors,
               const std::map<std::string, std::vector<double>>& cell_scalars,
               const std::string& path);

int vtk_cell_type(ElementKind kind);

// Element means of a per-Gauss-point scalar field.
std::vector<double> element_average(const Mesh& mesh, std::span<const int> gp_offsets,
                                    std::span<const double> gp_values);

}  // namespace plasticgraph
