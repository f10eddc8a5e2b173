#include "ciu/scenario.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#ifndef CIU_BUNDLED_SCENARIO_DIR
#define CIU_BUNDLED_SCENARIO_DIR "scenarios"
#endif

namespace ciu {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void allow_keys(const json& obj, std::initializer_list<const char*> keys, const std::string& where) {
  std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [k, v] : obj.items())
    if (!allowed.contains(k)) throw ValidationError("unknown key '" + k + "' in " + where);
}

const json& require(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) throw ValidationError(where + " is missing '" + key + "'");
  return obj[key];
}

double number_of(const json& v, const std::string& what) {
  if (!v.is_number()) throw ValidationError(what + " must be a number");
  return v.get<double>();
}

std::size_t count_of(const json& v, const std::string& what) {
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
    throw ValidationError(what + " must be a non-negative integer");
  return v.get<std::size_t>();
}

std::string string_of(const json& v, const std::string& what) {
  if (!v.is_string()) throw ValidationError(what + " must be a string");
  return v.get<std::string>();
}

FeatureSpace parse_features(const json& arr) {
  if (!arr.is_array()) throw ValidationError("'features' must be an array");
  std::vector<FeatureDescriptor> features;
  for (const auto& f : arr) {
    if (!f.is_object()) throw ValidationError("each feature must be an object");
    const auto name = string_of(require(f, "name", "feature"), "feature name");
    const std::string where = "feature '" + name + "'";
    const auto kind = f.contains("kind") ? string_of(f["kind"], where + " kind") : std::string("continuous");
    if (kind == "continuous") {
      allow_keys(f, {"name", "kind", "range", "description"}, where);
      const auto& range = require(f, "range", where);
      if (!range.is_array() || range.size() != 2) throw ValidationError(where + " range must be [lower, upper]");
      features.push_back(FeatureDescriptor::continuous(name, number_of(range[0], where + " lower bound"),
                                                       number_of(range[1], where + " upper bound")));
    } else if (kind == "categorical") {
      allow_keys(f, {"name", "kind", "levels", "description"}, where);
      const auto& levels = require(f, "levels", where);
      if (!levels.is_array()) throw ValidationError(where + " levels must be an array");
      std::vector<std::string> names;
      for (const auto& l : levels) names.push_back(string_of(l, where + " level"));
      features.push_back(FeatureDescriptor::categorical(name, std::move(names)));
    } else {
      throw ValidationError(where + " has unknown kind '" + kind + "'");
    }
  }
  return FeatureSpace(std::move(features));
}

ConceptTree parse_concepts(const json& obj, const FeatureSpace& space) {
  if (!obj.is_object()) throw ValidationError("'concepts' must map concept names to member lists");
  std::map<std::string, ConceptTree::Node> nodes;
  for (const auto& [name, members] : obj.items()) {
    if (space.index_of(name)) throw ValidationError("concept '" + name + "' has the same name as a feature");
    nodes.emplace(name, ConceptTree::Node{});
  }
  for (const auto& [name, members] : obj.items()) {
    if (!members.is_array()) throw ValidationError("concept '" + name + "' must list its members");
    auto& node = nodes.at(name);
    for (const auto& m : members) {
      const auto member = string_of(m, "concept '" + name + "' member");
      if (auto idx = space.index_of(member))
        node.features.push_back(*idx);
      else if (nodes.contains(member))
        node.children.push_back(member);
      else
        throw ValidationError("concept '" + name + "' references unknown member '" + member + "'");
    }
  }
  return ConceptTree(std::move(nodes), space.size());
}

LabelScale parse_scale(const json& arr, const std::string& which) {
  if (!arr.is_array()) throw ValidationError("label scale '" + which + "' must be an array of [threshold, label]");
  std::vector<LabelScale::Band> bands;
  for (const auto& b : arr) {
    if (!b.is_array() || b.size() != 2)
      throw ValidationError("label scale '" + which + "' bands must be [threshold, label] pairs");
    bands.push_back({number_of(b[0], "label threshold"), string_of(b[1], "label text")});
  }
  try {
    return LabelScale(std::move(bands));
  } catch (const ValidationError& e) {
    throw ValidationError("label scale '" + which + "': " + e.what());
  }
}

EstimatorConfig parse_estimator(const json& obj) {
  allow_keys(obj, {"strategy", "grid_levels", "mc_samples", "seed", "refinement", "probe_cap"}, "estimator");
  EstimatorConfig c;
  if (obj.contains("strategy")) c.strategy = parse_strategy(string_of(obj["strategy"], "estimator strategy"));
  if (obj.contains("grid_levels")) c.grid_levels = count_of(obj["grid_levels"], "grid_levels");
  if (obj.contains("mc_samples")) c.mc_samples = count_of(obj["mc_samples"], "mc_samples");
  if (obj.contains("seed")) c.seed = obj["seed"].get<std::uint64_t>();
  if (obj.contains("refinement")) c.refinement = count_of(obj["refinement"], "refinement");
  if (obj.contains("probe_cap")) c.probe_cap = count_of(obj["probe_cap"], "probe_cap");
  c.validate();
  return c;
}

// Catches table/linear arity problems without launching adapters.
void check_model_spec(const Scenario& s) {
  const auto& spec = s.model_spec;
  if (!spec.is_object() || !spec.contains("kind")) throw ValidationError("model description needs a 'kind'");
  const auto kind = string_of(spec["kind"], "model kind");
  if (kind == "external") {
    const auto& cmd = require(spec, "command", "external model");
    if (!cmd.is_array() || cmd.empty() || !cmd[0].is_string() || cmd[0].get<std::string>().empty())
      throw ValidationError("external model needs a non-empty 'command' array");
    if (spec.contains("n_outputs") && spec["n_outputs"].get<std::size_t>() < s.outputs.size())
      throw ValidationError("scenario declares more outputs than the external model");
    return;
  }
  auto model = ciu::load_model(spec, s.space, s.path.parent_path());
  for (const auto& o : s.outputs)
    if (o.index >= model->n_outputs())
      throw ValidationError("output '" + o.name + "' has index " + std::to_string(o.index) + " but the model has " +
                            std::to_string(model->n_outputs()) + " outputs");
}

}  // namespace

const OutputSpec& Scenario::output(const std::string& output_name) const {
  for (const auto& o : outputs)
    if (o.name == output_name) return o;
  std::string known;
  for (const auto& o : outputs) known += (known.empty() ? "" : ", ") + o.name;
  throw ValidationError("unknown output '" + output_name + "' (known: " + known + ")");
}

bool Scenario::is_external() const { return model_spec.value("kind", "") == "external"; }

std::unique_ptr<Predictor> Scenario::load_model(std::chrono::milliseconds timeout) const {
  auto model = ciu::load_model(model_spec, space, path.parent_path(), timeout);
  for (const auto& o : outputs)
    if (o.index >= model->n_outputs())
      throw ModelError("output '" + o.name + "' has index " + std::to_string(o.index) + " but the model reports " +
                       std::to_string(model->n_outputs()) + " outputs");
  return model;
}

Scenario parse_scenario(const json& doc, const fs::path& origin) {
  if (!doc.is_object()) throw ValidationError("scenario must be a JSON object");
  allow_keys(doc,
             {"name", "description", "features", "concepts", "model", "model_file", "outputs", "labels", "templates",
              "estimator"},
             "scenario");
  auto space = parse_features(require(doc, "features", "scenario"));
  Scenario s{.name = doc.contains("name") ? string_of(doc["name"], "scenario name") : origin.stem().string(),
             .description = doc.value("description", ""),
             .path = origin,
             .space = space,
             .concepts = {},
             .model_spec = {},
             .outputs = {},
             .style = {},
             .config = {}};

  if (doc.contains("concepts")) s.concepts = parse_concepts(doc["concepts"], s.space);

  if (doc.contains("model") == doc.contains("model_file"))
    throw ValidationError("scenario needs exactly one of 'model' or 'model_file'");
  if (doc.contains("model")) {
    s.model_spec = doc["model"];
  } else {
    fs::path file = string_of(doc["model_file"], "model_file");
    if (file.is_relative()) file = origin.parent_path() / file;
    std::ifstream in(file);
    if (!in) throw ValidationError("cannot open model_file '" + file.string() + "'");
    try {
      s.model_spec = json::parse(in);
    } catch (const json::parse_error& e) {
      throw ValidationError("model_file '" + file.string() + "' does not parse: " + e.what());
    }
  }

  const auto& outs = require(doc, "outputs", "scenario");
  if (!outs.is_array() || outs.empty()) throw ValidationError("'outputs' must be a non-empty array");
  std::set<std::string> out_names;
  for (std::size_t i = 0; i < outs.size(); ++i) {
    const auto& o = outs[i];
    if (!o.is_object()) throw ValidationError("each output must be an object");
    allow_keys(o, {"name", "index", "absmin", "absmax", "description"}, "output");
    const auto name = string_of(require(o, "name", "output"), "output name");
    if (!out_names.insert(name).second) throw ValidationError("duplicate output name '" + name + "'");
    const std::size_t index = o.contains("index") ? count_of(o["index"], "output index") : i;
    const double absmin = o.contains("absmin") ? number_of(o["absmin"], "absmin") : 0.0;
    const double absmax = o.contains("absmax") ? number_of(o["absmax"], "absmax") : 1.0;
    s.outputs.emplace_back(name, index, absmin, absmax);
  }

  if (doc.contains("labels")) {
    const auto& labels = doc["labels"];
    allow_keys(labels, {"importance", "utility"}, "labels");
    if (labels.contains("importance")) s.style.importance = parse_scale(labels["importance"], "importance");
    if (labels.contains("utility")) s.style.utility = parse_scale(labels["utility"], "utility");
  }
  if (doc.contains("templates")) {
    const auto& t = doc["templates"];
    allow_keys(t, {"entry", "targets"}, "templates");
    if (t.contains("entry")) s.style.templates.entry = string_of(t["entry"], "templates.entry");
    if (t.contains("targets")) {
      for (const auto& [target, text] : t["targets"].items()) {
        if (!s.space.index_of(target) && !s.concepts.contains(target))
          throw ValidationError("template for unknown target '" + target + "'");
        s.style.templates.per_target[target] = string_of(text, "template for '" + target + "'");
      }
    }
  }
  if (doc.contains("estimator")) s.config = parse_estimator(doc["estimator"]);

  check_model_spec(s);
  return s;
}

Scenario load_scenario(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open scenario '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ValidationError("scenario '" + path.string() + "' does not parse: " + e.what());
  }
  try {
    return parse_scenario(doc, path);
  } catch (const json::exception& e) {
    throw ValidationError("scenario '" + path.string() + "': " + e.what());
  }
}

fs::path bundled_scenario_dir() { return CIU_BUNDLED_SCENARIO_DIR; }

fs::path resolve_scenario_path(const std::string& arg) {
  std::vector<fs::path> candidates{arg, arg + ".json"};
  if (const char* env = std::getenv("CIU_SCENARIO_PATH")) {
    std::stringstream dirs(env);
    std::string dir;
    while (std::getline(dirs, dir, ':')) {
      if (dir.empty()) continue;
      candidates.push_back(fs::path(dir) / arg);
      candidates.push_back(fs::path(dir) / (arg + ".json"));
    }
  }
  candidates.push_back(bundled_scenario_dir() / (arg + ".json"));
  for (const auto& c : candidates) {
    std::error_code ec;
    if (fs::is_regular_file(c, ec)) return c;
  }
  throw ValidationError("scenario '" + arg + "' not found (looked for a file, CIU_SCENARIO_PATH and bundled demos)");
}

}  // namespace ciu
