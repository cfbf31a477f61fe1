#include "plasticgraph/problem.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "plasticgraph/error.hpp"

namespace plasticgraph {

namespace {

using nlohmann::json;

[[noreturn]] void schema_fail(const std::string& path, const std::string& msg) {
  fail(ErrorCode::SchemaError, path + ": " + msg);
}

void check_keys(const json& obj, const std::string& path, const std::set<std::string>& allowed) {
  for (const auto& [key, value] : obj.items())
    if (!allowed.count(key)) schema_fail(path + "/" + key, "unknown key");
}

const json& require(const json& obj, const std::string& path, const std::string& key) {
  auto it = obj.find(key);
  if (it == obj.end()) schema_fail(path, "missing required key '" + key + "'");
  return *it;
}

double as_number(const json& v, const std::string& path) {
  if (!v.is_number()) schema_fail(path, "expected a number");
  return v.get<double>();
}

int as_int(const json& v, const std::string& path) {
  if (!v.is_number_integer()) schema_fail(path, "expected an integer");
  return v.get<int>();
}

std::string as_string(const json& v, const std::string& path) {
  if (!v.is_string()) schema_fail(path, "expected a string");
  return v.get<std::string>();
}

std::vector<double> as_vector(const json& v, const std::string& path, int size = -1) {
  if (!v.is_array()) schema_fail(path, "expected an array");
  std::vector<double> out;
  for (size_t i = 0; i < v.size(); ++i) out.push_back(as_number(v[i], path));
  if (size >= 0 && static_cast<int>(out.size()) != size)
    schema_fail(path, "expected " + std::to_string(size) + " entries");
  return out;
}

LbfgsConfig parse_optimizer(const json& obj, const std::string& path, LbfgsConfig base) {
  check_keys(obj, path,
             {"memory", "c1", "c2", "init_step", "max_iters", "tol_grad", "tol_loss",
              "max_line_search"});
  if (obj.contains("memory")) base.memory = as_int(obj["memory"], path + "/memory");
  if (obj.contains("c1")) base.c1 = as_number(obj["c1"], path + "/c1");
  if (obj.contains("c2")) base.c2 = as_number(obj["c2"], path + "/c2");
  if (obj.contains("init_step")) base.init_step = as_number(obj["init_step"], path + "/init_step");
  if (obj.contains("max_iters")) base.max_iters = as_int(obj["max_iters"], path + "/max_iters");
  if (obj.contains("tol_grad")) base.tol_grad = as_number(obj["tol_grad"], path + "/tol_grad");
  if (obj.contains("tol_loss")) base.tol_loss = as_number(obj["tol_loss"], path + "/tol_loss");
  if (obj.contains("max_line_search"))
    base.max_line_search = as_int(obj["max_line_search"], path + "/max_line_search");
  if (!(base.c1 > 0.0 && base.c1 < base.c2 && base.c2 < 1.0) || base.memory < 1)
    schema_fail(path, "need 0 < c1 < c2 < 1 and memory >= 1");
  return base;
}

Mesh parse_mesh(const json& obj, const std::string& path, ProblemConfig& config,
                const std::map<std::string, int>& material_index) {
  check_keys(obj, path,
             {"structured", "dim", "nodes", "elements", "node_sets", "facet_sets", "quadrature"});
  Mesh mesh;
  if (obj.contains("structured")) {
    const json& s = obj["structured"];
    const std::string spath = path + "/structured";
    check_keys(s, spath, {"kind", "extents", "divisions", "origin"});
    StructuredSpec spec;
    spec.kind = parse_element_kind(as_string(require(s, spath, "kind"), spath + "/kind"));
    const int dim = dimension(spec.kind);
    spec.extents = as_vector(require(s, spath, "extents"), spath + "/extents", dim);
    const json& divs = require(s, spath, "divisions");
    if (!divs.is_array() || static_cast<int>(divs.size()) != dim)
      schema_fail(spath + "/divisions", "expected " + std::to_string(dim) + " entries");
    for (const auto& d : divs) spec.divisions.push_back(as_int(d, spath + "/divisions"));
    if (s.contains("origin")) spec.origin = as_vector(s["origin"], spath + "/origin", dim);
    mesh = structured_mesh(spec.kind, spec.extents, spec.divisions, spec.origin);
    config.structured = spec;
  } else {
    const int dim = as_int(require(obj, path, "dim"), path + "/dim");
    const json& jnodes = require(obj, path, "nodes");
    if (!jnodes.is_array()) schema_fail(path + "/nodes", "expected an array");
    std::vector<double> coords;
    for (size_t i = 0; i < jnodes.size(); ++i) {
      const auto xyz =
          as_vector(jnodes[i], path + "/nodes/" + std::to_string(i), dim);
      coords.insert(coords.end(), xyz.begin(), xyz.end());
    }
    const json& jblocks = require(obj, path, "elements");
    if (!jblocks.is_array()) schema_fail(path + "/elements", "expected an array");
    std::vector<ElementRecord> elements;
    for (size_t b = 0; b < jblocks.size(); ++b) {
      const std::string bpath = path + "/elements/" + std::to_string(b);
      const json& block = jblocks[b];
      check_keys(block, bpath, {"kind", "connectivity", "material"});
      const ElementKind kind =
          parse_element_kind(as_string(require(block, bpath, "kind"), bpath + "/kind"));
      int material = 0;
      if (block.contains("material")) {
        const std::string name = as_string(block["material"], bpath + "/material");
        auto it = material_index.find(name);
        if (it == material_index.end())
          fail(ErrorCode::DanglingReference,
               bpath + "/material: material '" + name + "' is not declared");
        material = it->second;
      }
      const json& conn = require(block, bpath, "connectivity");
      if (!conn.is_array()) schema_fail(bpath + "/connectivity", "expected an array");
      for (size_t e = 0; e < conn.size(); ++e) {
        const std::string epath = bpath + "/connectivity/" + std::to_string(e);
        if (!conn[e].is_array()) schema_fail(epath, "expected an array of node ids");
        ElementRecord rec;
        rec.kind = kind;
        rec.material = material;
        for (const auto& v : conn[e]) rec.nodes.push_back(as_int(v, epath));
        elements.push_back(std::move(rec));
      }
    }
    mesh = Mesh::build(dim, std::move(coords), std::move(elements));
  }

  std::map<std::string, std::vector<int>> node_sets;
  std::map<std::string, std::vector<Facet>> facet_sets;
  if (obj.contains("node_sets")) {
    for (const auto& [name, body] : obj["node_sets"].items()) {
      const std::string npath = path + "/node_sets/" + name;
      check_keys(body, npath, {"box", "nodes"});
      if (body.contains("box")) {
        const json& box = body["box"];
        if (!box.is_array() || box.size() != 2) schema_fail(npath + "/box", "expected [lo, hi]");
        const BoxSelection sel{as_vector(box[0], npath, mesh.dim()),
                               as_vector(box[1], npath, mesh.dim())};
        node_sets[name] = box_select_nodes(mesh, sel);
        config.node_set_boxes[name] = sel;
      } else if (body.contains("nodes")) {
        for (const auto& v : body["nodes"])
          node_sets[name].push_back(as_int(v, npath + "/nodes"));
      } else {
        schema_fail(npath, "expected 'box' or 'nodes'");
      }
    }
  }
  if (obj.contains("facet_sets")) {
    for (const auto& [name, body] : obj["facet_sets"].items()) {
      const std::string fpath = path + "/facet_sets/" + name;
      check_keys(body, fpath, {"box", "facets"});
      if (body.contains("box")) {
        const json& box = body["box"];
        if (!box.is_array() || box.size() != 2) schema_fail(fpath + "/box", "expected [lo, hi]");
        const BoxSelection sel{as_vector(box[0], fpath, mesh.dim()),
                               as_vector(box[1], fpath, mesh.dim())};
        facet_sets[name] = box_select_facets(mesh, sel);
        config.facet_set_boxes[name] = sel;
      } else if (body.contains("facets")) {
        for (const auto& v : body["facets"]) {
          if (!v.is_array() || v.size() != 2) schema_fail(fpath + "/facets", "expected [element, face] pairs");
          facet_sets[name].push_back(
              {as_int(v[0], fpath + "/facets"), as_int(v[1], fpath + "/facets")});
        }
      } else {
        schema_fail(fpath, "expected 'box' or 'facets'");
      }
    }
  }
  if (!node_sets.empty() || !facet_sets.empty())
    mesh = mesh.with_sets(std::move(node_sets), std::move(facet_sets));
  return mesh;
}

}  // namespace

std::vector<int> box_select_nodes(const Mesh& mesh, const BoxSelection& box) {
  const int dim = mesh.dim();
  std::vector<int> nodes;
  const double tol = 1e-9;
  for (int v = 0; v < mesh.node_count(); ++v) {
    bool inside = true;
    for (int a = 0; a < dim && inside; ++a) {
      const double x = mesh.coords()[v * dim + a];
      inside = x >= box.lo[a] - tol && x <= box.hi[a] + tol;
    }
    if (inside) nodes.push_back(v);
  }
  return nodes;
}

std::vector<Facet> box_select_facets(const Mesh& mesh, const BoxSelection& box) {
  const int dim = mesh.dim();
  std::vector<Facet> facets;
  const double tol = 1e-9;
  for (const Facet& f : mesh.boundary_facets()) {
    auto conn = mesh.nodes_of(f.element);
    bool inside = true;
    for (int local : face_nodes(mesh.kind(f.element), f.face)) {
      for (int a = 0; a < dim; ++a) {
        const double x = mesh.coords()[conn[local] * dim + a];
        if (x < box.lo[a] - tol || x > box.hi[a] + tol) {
          inside = false;
          break;
        }
      }
      if (!inside) break;
    }
    if (inside) facets.push_back(f);
  }
  return facets;
}

ProblemConfig parse_problem_text(const std::string& text, const std::string& base_dir) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& err) {
    fail(ErrorCode::SchemaError, std::string("invalid JSON: ") + err.what());
  }
  if (!root.is_object()) fail(ErrorCode::SchemaError, "problem file must hold a JSON object");
  check_keys(root, "",
             {"mesh", "materials", "material", "hardening", "loss", "load_steps", "optimizer",
              "output", "reference", "r_adapt"});

  ProblemConfig config;

  // Materials first so element blocks can reference them.
  const json& jmaterials = require(root, "", "materials");
  if (!jmaterials.is_object() || jmaterials.empty())
    schema_fail("/materials", "expected a non-empty object");
  std::map<std::string, int> material_index;
  for (const auto& [name, body] : jmaterials.items()) {
    const std::string mpath = "/materials/" + name;
    check_keys(body, mpath, {"E", "nu", "sigma_y", "K_iso", "H_kin"});
    const double E = as_number(require(body, mpath, "E"), mpath + "/E");
    const double nu = as_number(require(body, mpath, "nu"), mpath + "/nu");
    const double sy = as_number(require(body, mpath, "sigma_y"), mpath + "/sigma_y");
    const double K = body.contains("K_iso") ? as_number(body["K_iso"], mpath + "/K_iso") : 0.0;
    const double H = body.contains("H_kin") ? as_number(body["H_kin"], mpath + "/H_kin") : 0.0;
    try {
      material_index[name] = static_cast<int>(config.materials.size());
      config.materials.push_back(MaterialParams::make(E, nu, sy, K, H));
      config.material_names.push_back(name);
    } catch (const Error& err) {
      fail(err.code(), mpath + ": " + err.what());
    }
  }

  config.mesh = parse_mesh(require(root, "", "mesh"), "/mesh", config, material_index);
  if (root["mesh"].contains("quadrature"))
    config.settings.quad_order = as_int(root["mesh"]["quadrature"], "/mesh/quadrature");

  // Default material assignment for meshes built without explicit blocks.
  if (root.contains("material")) {
    const std::string name = as_string(root["material"], "/material");
    auto it = material_index.find(name);
    if (it == material_index.end())
      fail(ErrorCode::DanglingReference, "/material: material '" + name + "' is not declared");
    if (it->second != 0) {
      // Rebuild with the requested default id on every element that kept 0.
      std::vector<ElementRecord> recs;
      for (int e = 0; e < config.mesh.element_count(); ++e)
        recs.push_back({config.mesh.kind(e),
                        {config.mesh.nodes_of(e).begin(), config.mesh.nodes_of(e).end()},
                        it->second});
      config.mesh = Mesh::build(config.mesh.dim(),
                                {config.mesh.coords().begin(), config.mesh.coords().end()},
                                std::move(recs), config.mesh.node_sets(),
                                config.mesh.facet_sets());
    }
  }

  const std::string hardening = as_string(require(root, "", "hardening"), "/hardening");
  if (hardening == "perfect")
    config.settings.hardening = HardeningMode::perfect;
  else if (hardening == "isotropic")
    config.settings.hardening = HardeningMode::isotropic;
  else if (hardening == "kinematic")
    config.settings.hardening = HardeningMode::kinematic;
  else
    schema_fail("/hardening", "expected perfect, isotropic or kinematic");

  const std::string loss = as_string(require(root, "", "loss"), "/loss");
  if (loss == "energy")
    config.settings.loss = LossMode::energy;
  else if (loss == "galerkin")
    config.settings.loss = LossMode::galerkin;
  else
    schema_fail("/loss", "expected energy or galerkin");

  if (root.contains("optimizer"))
    config.settings.optimizer = parse_optimizer(root["optimizer"], "/optimizer", LbfgsConfig{});

  const json& jsteps = require(root, "", "load_steps");
  if (!jsteps.is_array() || jsteps.empty())
    schema_fail("/load_steps", "expected a non-empty array");
  for (size_t i = 0; i < jsteps.size(); ++i) {
    const std::string spath = "/load_steps/" + std::to_string(i);
    const json& jstep = jsteps[i];
    check_keys(jstep, spath, {"label", "dirichlet", "tractions", "optimizer"});
    LoadStep step;
    step.label = jstep.contains("label") ? as_string(jstep["label"], spath + "/label")
                                         : "step_" + std::to_string(i + 1);
    if (jstep.contains("dirichlet")) {
      for (const auto& [set_name, comps] : jstep["dirichlet"].items()) {
        const std::string dpath = spath + "/dirichlet/" + set_name;
        check_keys(comps, dpath, {"ux", "uy", "uz"});
        std::array<std::optional<double>, 3> values;
        if (comps.contains("ux")) values[0] = as_number(comps["ux"], dpath + "/ux");
        if (comps.contains("uy")) values[1] = as_number(comps["uy"], dpath + "/uy");
        if (comps.contains("uz")) values[2] = as_number(comps["uz"], dpath + "/uz");
        if (!config.mesh.node_sets().count(set_name))
          fail(ErrorCode::DanglingReference, dpath + ": unknown node set '" + set_name + "'");
        step.dirichlet[set_name] = values;
      }
    }
    if (jstep.contains("tractions")) {
      for (const auto& [set_name, vec] : jstep["tractions"].items()) {
        const std::string tpath = spath + "/tractions/" + set_name;
        const auto t = as_vector(vec, tpath, config.mesh.dim());
        if (!config.mesh.facet_sets().count(set_name))
          fail(ErrorCode::DanglingReference, tpath + ": unknown facet set '" + set_name + "'");
        std::array<double, 3> traction = {0, 0, 0};
        for (int a = 0; a < config.mesh.dim(); ++a) traction[a] = t[a];
        step.tractions[set_name] = traction;
      }
    }
    if (jstep.contains("optimizer"))
      step.optimizer =
          parse_optimizer(jstep["optimizer"], spath + "/optimizer", config.settings.optimizer);
    config.steps.push_back(std::move(step));
  }

  // Surface every ConflictingBC at parse time.
  for (const LoadStep& step : config.steps) build_dof_field(config.mesh, step);

  if (root.contains("output")) {
    const json& jout = root["output"];
    check_keys(jout, "/output", {"directory", "fields"});
    if (jout.contains("directory"))
      config.output.directory = as_string(jout["directory"], "/output/directory");
    if (jout.contains("fields")) {
      config.output.fields.clear();
      for (const auto& f : jout["fields"]) {
        const std::string name = as_string(f, "/output/fields");
        if (name != "u" && name != "von_mises" && name != "eqps" && name != "stress" &&
            name != "plastic_strain")
          schema_fail("/output/fields", "unknown field '" + name + "'");
        config.output.fields.push_back(name);
      }
    }
  }

  if (root.contains("reference")) {
    for (const auto& [label, p] : root["reference"].items()) {
      bool known = false;
      for (const LoadStep& step : config.steps) known |= step.label == label;
      if (!known)
        fail(ErrorCode::DanglingReference, "/reference/" + label + ": no such load step");
      std::string ref_path = as_string(p, "/reference/" + label);
      if (!ref_path.empty() && ref_path[0] != '/') ref_path = base_dir + "/" + ref_path;
      config.references[label] = ref_path;
    }
  }

  if (root.contains("r_adapt")) {
    const json& ja = root["r_adapt"];
    check_keys(ja, "/r_adapt", {"enabled", "rounds", "coord_iters", "disp_iters", "fix_axes"});
    if (ja.contains("enabled")) {
      if (!ja["enabled"].is_boolean()) schema_fail("/r_adapt/enabled", "expected a boolean");
      config.r_adapt_enabled = ja["enabled"].get<bool>();
    }
    if (ja.contains("rounds")) config.r_adapt.rounds = as_int(ja["rounds"], "/r_adapt/rounds");
    if (ja.contains("coord_iters"))
      config.r_adapt.coord_iters = as_int(ja["coord_iters"], "/r_adapt/coord_iters");
    if (ja.contains("disp_iters"))
      config.r_adapt.disp_iters = as_int(ja["disp_iters"], "/r_adapt/disp_iters");
    if (ja.contains("fix_axes"))
      for (const auto& a : ja["fix_axes"])
        config.r_adapt.fix_axes.push_back(as_string(a, "/r_adapt/fix_axes"));
  }

  return config;
}

ProblemConfig parse_problem(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoError, "cannot open '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  std::string dir = ".";
  if (const auto slash = path.find_last_of('/'); slash != std::string::npos)
    dir = path.substr(0, slash);
  return parse_problem_text(buffer.str(), dir);
}

std::string ProblemConfig::summary() const {
  std::ostringstream os;
  os << "mesh: " << mesh.node_count() << " nodes, " << mesh.element_count() << " elements, "
     << mesh.dim() << "D\n";
  os << "materials:";
  for (size_t i = 0; i < materials.size(); ++i) {
    const MaterialParams& m = materials[i];
    os << (i ? "; " : " ") << material_names[i] << " (E=" << m.E << ", nu=" << m.nu
       << ", sigma_y=" << m.sigma_y << ", K=" << m.K_iso << ", H=" << m.H_kin << ")";
  }
  os << "\nloss: " << to_string(settings.loss) << ", hardening: " << to_string(settings.hardening)
     << "\n";
  os << "optimizer: memory=" << settings.optimizer.memory
     << ", max_iters=" << settings.optimizer.max_iters
     << ", tol_grad=" << settings.optimizer.tol_grad << "\n";
  os << "load steps: " << steps.size() << " (";
  for (size_t i = 0; i < steps.size(); ++i) os << (i ? ", " : "") << steps[i].label;
  os << ")\n";
  int free = 0;
  if (!steps.empty()) free = build_dof_field(mesh, steps.front()).free_count();
  os << "free DOFs (first step): " << free << " of " << mesh.node_count() * mesh.dim() << "\n";
  if (r_adapt_enabled)
    os << "r-adapt: rounds=" << r_adapt.rounds << ", coord_iters=" << r_adapt.coord_iters
       << ", disp_iters=" << r_adapt.disp_iters << "\n";
  return os.str();
}

FieldData read_fields(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoError, "cannot open '" + path + "'");
  json root;
  try {
    root = json::parse(in);
  } catch (const json::parse_error& err) {
    fail(ErrorCode::IoError, path + ": invalid JSON: " + err.what());
  }
  FieldData data;
  for (const auto& [name, body] : root.items()) {
    check_keys(body, "/" + name, {"components", "data"});
    const int comps = as_int(require(body, "/" + name, "components"), "/" + name + "/components");
    std::vector<double> values;
    for (const auto& v : require(body, "/" + name, "data"))
      values.push_back(as_number(v, "/" + name + "/data"));
    data.fields[name] = {comps, std::move(values)};
  }
  return data;
}

void write_fields(const FieldData& data, const std::string& path) {
  json root = json::object();
  for (const auto& [name, field] : data.fields) {
    root[name] = {{"components", field.first}, {"data", field.second}};
  }
  std::ofstream out(path);
  if (!out) fail(ErrorCode::IoError, "cannot write '" + path + "'");
  out << root.dump(1) << "\n";
}

FieldData collect_fields(const Mesh& mesh, const SolutionState& state,
                         std::span<const std::string> names) {
  FieldData data;
  const int n_gp = state.history.size();
  for (const std::string& name : names) {
    if (name == "u") {
      data.fields["u"] = {mesh.dim(), state.u};
    } else if (name == "von_mises") {
      std::vector<double> v(n_gp);
      for (int g = 0; g < n_gp; ++g) v[g] = von_mises(state.history.stress[g]);
      data.fields["von_mises"] = {1, std::move(v)};
    } else if (name == "eqps") {
      std::vector<double> v(n_gp);
      for (int g = 0; g < n_gp; ++g) v[g] = state.history.states[g].alpha;
      data.fields["eqps"] = {1, std::move(v)};
    } else if (name == "stress") {
      std::vector<double> v(static_cast<size_t>(n_gp) * 6);
      for (int g = 0; g < n_gp; ++g) {
        const SymTensor3& s = state.history.stress[g];
        const double comps[6] = {s.xx, s.yy, s.zz, s.xy, s.yz, s.zx};
        for (int c = 0; c < 6; ++c) v[g * 6 + c] = comps[c];
      }
      data.fields["stress"] = {6, std::move(v)};
    } else if (name == "plastic_strain") {
      std::vector<double> v(static_cast<size_t>(n_gp) * 6);
      for (int g = 0; g < n_gp; ++g) {
        const SymTensor3& s = state.history.states[g].eps_p;
        const double comps[6] = {s.xx, s.yy, s.zz, s.xy, s.yz, s.zx};
        for (int c = 0; c < 6; ++c) v[g * 6 + c] = comps[c];
      }
      data.fields["plastic_strain"] = {6, std::move(v)};
    } else {
      fail(ErrorCode::SchemaError, "unknown output field '" + name + "'");
    }
  }
  return data;
}

std::vector<MetricsEntry> compare_fields(const FieldData& values, const FieldData& reference) {
  std::vector<MetricsEntry> out;
  for (const auto& [name, field] : values.fields) {
    auto it = reference.fields.find(name);
    if (it == reference.fields.end()) continue;
    if (field.first != it->second.first)
      fail(ErrorCode::LengthMismatch, "field '" + name + "' component counts differ");
    auto entries = error_metrics(name, field.first, field.second, it->second.second);
    out.insert(out.end(), entries.begin(), entries.end());
  }
  if (out.empty()) fail(ErrorCode::LengthMismatch, "no common fields to compare");
  return out;
}

std::string metrics_report(std::span<const MetricsEntry> entries) {
  std::ostringstream os;
  os << "field,component,mae,rel_l2,zero_reference\n";
  os.precision(12);
  for (const MetricsEntry& e : entries) {
    os << e.field << ',';
    if (e.component < 0)
      os << '-';
    else
      os << e.component;
    os << ',' << e.mae << ',' << e.rel_l2 << ',' << (e.zero_reference ? 1 : 0) << '\n';
  }
  return os.str();
}

void write_trace_csv(const OptimTrace& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::IoError, "cannot write '" + path + "'");
  out << "iter,loss,grad_inf,step_len,fevals\n";
  char line[256];
  for (const IterationRecord& rec : trace.iterations) {
    std::snprintf(line, sizeof(line), "%d,%.17g,%.17g,%.17g,%d\n", rec.iter, rec.loss,
                  rec.grad_inf, rec.step, rec.fevals);
    out << line;
  }
}

}  // namespace plasticgraph
