#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "qgraph/couplings.hpp"
#include "qgraph/determinant.hpp"
#include "qgraph/propagator.hpp"
#include "qgraph/spectral.hpp"

namespace qgraph {

using json = nlohmann::ordered_json;

/// Schema violation; `pointer` is a JSON pointer into the offending document.
class SchemaError : public GraphError {
public:
  SchemaError(std::string pointer, const std::string& what)
      : GraphError(pointer + ": " + what), pointer_(std::move(pointer)) {}
  const std::string& pointer() const { return pointer_; }

private:
  std::string pointer_;
};

json read_json_file(const std::string& path);

/// {"vertices":[{"id","alpha"}], "edges":[{"id","from","to"|null,"length"|"inf"}],
///  "root": id, "build":[{"attach_on","a","alpha","n"}]}. Build steps are applied
/// on top of the listed vertices and edges.
MetricTree tree_from_json(const json& j);
json tree_to_json(const MetricTree& tree);

/// {"edge_id":[{"A_re","A_im","x0","sigma","k"}]}
GraphFunction function_from_json(const json& j);

/// {"vertex_id": {"type":"delta","alpha":a} | {"type":"general","A":[[..]],"B":[[..]]}}
CouplingSpec couplings_from_json(const json& j);

json to_json(const ValidationReport& r);
json to_json(const ResonanceReport& r);
json to_json(const ScanReport& r);
json to_json(const PropertyReport& r);
json to_json(const SpectralData& s, const MetricTree& tree);
json to_json(const DecayReport& r);
json to_json(const ConditionScan& r);
json to_json(const SelfAdjointReport& r);

json complex_json(cplx z);

} // namespace qgraph
