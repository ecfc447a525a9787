#include "qgraph/io.hpp"

#include <cmath>
#include <fstream>

namespace qgraph {

namespace {

const json& field(const json& j, const std::string& ptr, const char* key) {
  if (!j.is_object()) throw SchemaError(ptr, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw SchemaError(ptr + "/" + key, "missing");
  return *it;
}

double number(const json& j, const std::string& ptr) {
  if (!j.is_number()) throw SchemaError(ptr, "expected a number");
  return j.get<double>();
}

int integer(const json& j, const std::string& ptr) {
  if (!j.is_number_integer()) throw SchemaError(ptr, "expected an integer");
  return j.get<int>();
}

int id_key(const std::string& key, const std::string& ptr) {
  try {
    std::size_t pos = 0;
    const int v = std::stoi(key, &pos);
    if (pos == key.size()) return v;
  } catch (const std::exception&) {
  }
  throw SchemaError(ptr, "key is not an integer id");
}

MatrixR matrix(const json& j, const std::string& ptr) {
  if (!j.is_array() || j.empty()) throw SchemaError(ptr, "expected a non-empty array of rows");
  const std::size_t n = j.size();
  MatrixR m(n, n);
  for (std::size_t r = 0; r < n; ++r) {
    const std::string rp = ptr + "/" + std::to_string(r);
    if (!j[r].is_array() || j[r].size() != n) throw SchemaError(rp, "expected a row of length " + std::to_string(n));
    for (std::size_t c = 0; c < n; ++c) m(r, c) = number(j[r][c], rp + "/" + std::to_string(c));
  }
  return m;
}

} // namespace

json complex_json(cplx z) { return json::array({z.real(), z.imag()}); }

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw GraphError("cannot read " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw SchemaError("", path + ": " + e.what());
  }
}

MetricTree tree_from_json(const json& j) {
  std::vector<Vertex> vs;
  std::vector<Edge> es;
  const json& jv = field(j, "", "vertices");
  if (!jv.is_array()) throw SchemaError("/vertices", "expected an array");
  for (std::size_t i = 0; i < jv.size(); ++i) {
    const std::string p = "/vertices/" + std::to_string(i);
    vs.push_back(Vertex{integer(field(jv[i], p, "id"), p + "/id"), number(field(jv[i], p, "alpha"), p + "/alpha")});
  }
  const json& je = field(j, "", "edges");
  if (!je.is_array()) throw SchemaError("/edges", "expected an array");
  for (std::size_t i = 0; i < je.size(); ++i) {
    const std::string p = "/edges/" + std::to_string(i);
    Edge e;
    e.id = integer(field(je[i], p, "id"), p + "/id");
    e.from = integer(field(je[i], p, "from"), p + "/from");
    const json& to = field(je[i], p, "to");
    if (!to.is_null()) e.to = integer(to, p + "/to");
    const json& len = field(je[i], p, "length");
    if (len.is_string()) {
      if (len.get<std::string>() != "inf") throw SchemaError(p + "/length", "expected a number or \"inf\"");
      e.length = kInf;
    } else {
      e.length = number(len, p + "/length");
    }
    if (e.infinite() != std::isinf(e.length))
      throw SchemaError(p, "rays need \"to\": null with length \"inf\", internal edges a finite length");
    es.push_back(e);
  }
  MetricTree tree(std::move(vs), std::move(es), integer(field(j, "", "root"), "/root"));
  if (auto b = j.find("build"); b != j.end()) {
    if (!b->is_array()) throw SchemaError("/build", "expected an array");
    for (std::size_t i = 0; i < b->size(); ++i) {
      const std::string p = "/build/" + std::to_string(i);
      const json& s = (*b)[i];
      try {
        tree = attach_vertex(tree, integer(field(s, p, "attach_on"), p + "/attach_on"), number(field(s, p, "a"), p + "/a"),
                             number(field(s, p, "alpha"), p + "/alpha"), integer(field(s, p, "n"), p + "/n"));
      } catch (const SchemaError&) {
        throw;
      } catch (const GraphError& e) {
        throw SchemaError(p, e.what());
      }
    }
  }
  return tree;
}

json tree_to_json(const MetricTree& tree) {
  json j;
  j["vertices"] = json::array();
  for (const Vertex& v : tree.vertices()) j["vertices"].push_back({{"id", v.id}, {"alpha", v.alpha}});
  j["edges"] = json::array();
  for (const Edge& e : tree.edges()) {
    json je{{"id", e.id}, {"from", e.from}};
    je["to"] = e.to ? json(*e.to) : json(nullptr);
    je["length"] = e.infinite() ? json("inf") : json(e.length);
    j["edges"].push_back(je);
  }
  j["root"] = tree.root_id();
  return j;
}

GraphFunction function_from_json(const json& j) {
  if (!j.is_object()) throw SchemaError("", "expected an object keyed by edge id");
  std::map<int, std::vector<Packet>> packets;
  for (const auto& [key, list] : j.items()) {
    const std::string p = "/" + key;
    const int id = id_key(key, p);
    if (!list.is_array()) throw SchemaError(p, "expected an array of packets");
    for (std::size_t i = 0; i < list.size(); ++i) {
      const std::string q = p + "/" + std::to_string(i);
      const json& pk = list[i];
      Packet k;
      k.amp = cplx(number(field(pk, q, "A_re"), q + "/A_re"), pk.contains("A_im") ? number(pk["A_im"], q + "/A_im") : 0.0);
      k.x0 = number(field(pk, q, "x0"), q + "/x0");
      k.sigma = number(field(pk, q, "sigma"), q + "/sigma");
      k.k = pk.contains("k") ? number(pk["k"], q + "/k") : 0.0;
      if (!(k.sigma > 0.0)) throw SchemaError(q + "/sigma", "must be positive");
      packets[id].push_back(k);
    }
  }
  return GraphFunction(std::move(packets));
}

CouplingSpec couplings_from_json(const json& j) {
  if (!j.is_object()) throw SchemaError("", "expected an object keyed by vertex id");
  CouplingSpec spec;
  for (const auto& [key, c] : j.items()) {
    const std::string p = "/" + key;
    const int id = id_key(key, p);
    const json& type = field(c, p, "type");
    if (type == "delta") {
      spec[id] = Coupling::delta(number(field(c, p, "alpha"), p + "/alpha"));
    } else if (type == "general") {
      MatrixR A = matrix(field(c, p, "A"), p + "/A"), B = matrix(field(c, p, "B"), p + "/B");
      if (A.rows() != B.rows()) throw SchemaError(p + "/B", "size differs from A");
      spec[id] = Coupling::general(std::move(A), std::move(B));
    } else {
      throw SchemaError(p + "/type", "expected \"delta\" or \"general\"");
    }
  }
  return spec;
}

json to_json(const ValidationReport& r) { return {{"valid", r.valid()}, {"violations", r.violations}}; }

json to_json(const ResonanceReport& r) {
  return {{"zero_order", r.zero_order},
          {"p", r.p},
          {"condition_holds", r.condition_holds},
          {"derivative_value", complex_json(r.derivative_value)},
          {"radius", r.radius},
          {"winding_raw", r.winding_raw}};
}

json to_json(const ScanReport& r) {
  json j{{"min_abs_det", r.min_abs_det}, {"argmin", complex_json(r.argmin)}, {"max_ratio", r.max_ratio},
         {"max_ratio_axis", r.max_ratio_axis}, {"points", r.points}, {"violation", r.violation}, {"note", r.note}};
  j["max_abs_ratio"] = json::object();
  for (const auto& [id, v] : r.max_abs_ratio) j["max_abs_ratio"][std::to_string(id)] = v;
  j["max_axis_ratio"] = json::object();
  for (const auto& [id, v] : r.max_axis_ratio) j["max_axis_ratio"][std::to_string(id)] = v;
  return j;
}

json to_json(const PropertyReport& r) {
  json stages = json::array();
  for (const StageProperties& s : r.stages)
    stages.push_back({{"stage", s.stage},
                      {"ratio_at_zero", complex_json(s.ratio_at_zero)},
                      {"ratio_derivative_at_zero", complex_json(s.ratio_derivative_at_zero)},
                      {"zero_order", s.zero_order},
                      {"ratio_one", s.ratio_one},
                      {"derivative_negative", s.derivative_negative},
                      {"order_ok", s.order_ok}});
  return {{"all_hold", r.all_hold}, {"stages", stages}};
}

json to_json(const SpectralData& s, const MetricTree& tree) {
  json efs = json::array();
  for (const Eigenfunction& f : s.eigenfunctions) {
    json per = json::object();
    for (std::size_t e = 0; e < tree.edge_count(); ++e)
      per[std::to_string(tree.edge(e).id)] = {{"c", complex_json(f.c[e])}, {"c_tilde", complex_json(f.ct[e])}};
    efs.push_back(per);
  }
  json eig = json::array();
  for (double w : s.omegas) eig.push_back(-w * w);
  return {{"omegas", s.omegas}, {"eigenvalues", eig}, {"eigenfunctions", efs}, {"l2_norms", s.l2_norms},
          {"simplicity", s.simplicity}};
}

json to_json(const DecayReport& r) {
  json table = json::array();
  for (std::size_t i = 0; i < r.times.size(); ++i)
    table.push_back({{"t", r.times[i]}, {"sup", r.sup[i]}, {"sqrt_t_sup", r.sqrt_t_sup[i]}, {"window", r.window[i]}});
  return {{"beta", r.beta}, {"C", r.C}, {"fit_residual", r.fit_residual}, {"l1_norm", r.l1_norm}, {"table", table}};
}

json to_json(const ConditionScan& r) {
  return {{"min_abs_det", r.min_abs_det}, {"tau_at_min", r.tau_at_min}, {"removed_power", r.removed_power},
          {"plausible", r.plausible},     {"points", r.points},         {"verdict", r.verdict}};
}

json to_json(const SelfAdjointReport& r) { return {{"ok", r.ok}, {"rank", r.rank}, {"commutator", r.commutator}}; }

} // namespace qgraph
