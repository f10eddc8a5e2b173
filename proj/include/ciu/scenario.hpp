#pragma once

#include <chrono>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "ciu/core.hpp"
#include "ciu/estimator.hpp"
#include "ciu/model.hpp"
#include "ciu/narrative.hpp"
#include "json.hpp"

namespace ciu {

// A scenario bundles everything one explanation session needs: the feature
// space, optional concepts, the model description, named outputs, narrative
// style and estimator defaults. See docs/scenario-format.md.
struct Scenario {
  std::string name;
  std::string description;
  std::filesystem::path path;
  FeatureSpace space;
  ConceptTree concepts;
  nlohmann::json model_spec;
  std::vector<OutputSpec> outputs;
  NarrativeStyle style;
  EstimatorConfig config;

  const OutputSpec& output(const std::string& name) const;
  bool is_external() const;
  // Instantiates the model; external adapters run inside the scenario's
  // directory and are handshaken here.
  std::unique_ptr<Predictor> load_model(std::chrono::milliseconds timeout = default_external_timeout()) const;
};

Scenario parse_scenario(const nlohmann::json& doc, const std::filesystem::path& origin = {});
Scenario load_scenario(const std::filesystem::path& path);

// Accepts a file path, or the name of a bundled scenario (demo_linear, ...).
// Search order: the literal path, <path>.json, then each directory in
// CIU_SCENARIO_PATH, then the bundled scenario directory.
std::filesystem::path resolve_scenario_path(const std::string& arg);

std::filesystem::path bundled_scenario_dir();

}  // namespace ciu
