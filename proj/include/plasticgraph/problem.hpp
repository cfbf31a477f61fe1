#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "plasticgraph/driver.hpp"

namespace plasticgraph {

struct OutputConfig {
  std::string directory = "out";
  std::vector<std::string> fields = {"u", "von_mises", "eqps"};
};

struct StructuredSpec {
  ElementKind kind = ElementKind::hex8;
  std::vector<double> extents;
  std::vector<int> divisions;
  std::vector<double> origin;
};

struct BoxSelection {
  std::vector<double> lo, hi;
};

// Axis-box selections over nodes / boundary facets (all face nodes inside).
std::vector<int> box_select_nodes(const Mesh& mesh, const BoxSelection& box);
std::vector<Facet> box_select_facets(const Mesh& mesh, const BoxSelection& box);

// Fully resolved problem definition: mesh, materials, load history,
// optimizer, outputs. Produced by the JSON parser after schema validation
// (strict: unknown keys are rejected) and cross-reference resolution.
struct ProblemConfig {
  Mesh mesh;
  std::optional<StructuredSpec> structured;  // present when the mesh block was structured
  // Box-defined sets, kept so mesh-variant studies can re-select them.
  std::map<std::string, BoxSelection> node_set_boxes;
  std::map<std::string, BoxSelection> facet_set_boxes;
  std::vector<std::string> material_names;
  std::vector<MaterialParams> materials;
  SolveSettings settings;
  std::vector<LoadStep> steps;
  OutputConfig output;
  std::map<std::string, std::string> references;  // step label -> fields file
  bool r_adapt_enabled = false;
  RAdaptConfig r_adapt;
  std::vector<std::string> warnings;

  std::string summary() const;
};

ProblemConfig parse_problem(const std::string& path);
ProblemConfig parse_problem_text(const std::string& text, const std::string& base_dir = ".");

// Flat named fields with a component count, the exchange format for
// reference solutions and the metrics command.
struct FieldData {
  std::map<std::string, std::pair<int, std::vector<double>>> fields;
};

FieldData read_fields(const std::string& path);
void write_fields(const FieldData& data, const std::string& path);

// Gauss-point and nodal fields of a solution, keyed by the output names
// ("u", "von_mises", "eqps", "stress", "plastic_strain").
FieldData collect_fields(const Mesh& mesh, const SolutionState& state,
                         std::span<const std::string> names);

std::vector<MetricsEntry> compare_fields(const FieldData& values, const FieldData& reference);
std::string metrics_report(std::span<const MetricsEntry> entries);

void write_trace_csv(const OptimTrace& trace, const std::string& path);

}  // namespace plasticgraph
