#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "ciu/core.hpp"
#include "ciu/estimator.hpp"
#include "ciu/model.hpp"

namespace ciu {

struct Importance {
  double ci = 0.0;
  bool clamped = false;  // estimate strayed outside [absmin, absmax]
};

struct Utility {
  double cu = 0.5;
  bool degenerate = false;
};

// (cmax - cmin) / (absmax - absmin), clamped to [0, 1].
Importance contextual_importance(const ExtremaEstimate& est, const OutputSpec& spec);

// (out - cmin) / (cmax - cmin); 0.5 with the degenerate flag when cmax == cmin.
// out outside [cmin, cmax] means the estimator lost the context probe and
// throws std::logic_error.
Utility contextual_utility(double out_value, const ExtremaEstimate& est);

struct CiuReport {
  Context context;
  OutputSpec output;
  std::vector<CiuResult> entries;  // descending ci, ties by target name
  EstimatorConfig config;
  std::string fingerprint;
  std::vector<std::string> warnings;
};

struct ContrastEntry {
  std::string target;
  FeatureSet feature_set;
  double ci_a = 0.0;
  double cu_a = 0.0;
  double ci_b = 0.0;
  double cu_b = 0.0;
  double cu_delta = 0.0;
  bool degenerate_a = false;
  bool degenerate_b = false;
};

struct ContrastReport {
  Context context;
  OutputSpec output_a;
  OutputSpec output_b;
  double out_a = 0.0;
  double out_b = 0.0;
  std::vector<ContrastEntry> entries;  // descending |cu_delta|, ties by target name
  EstimatorConfig config;
  std::string fingerprint;
};

struct ExplainOptions {
  // Worker threads for per-target estimation; ignored for models that are
  // not concurrent_safe().
  std::size_t jobs = 1;
};

// Resolves a target to its feature set: a feature name gives a singleton,
// a concept name gives its resolved set.
FeatureSet resolve_target(const FeatureSpace& space, const ConceptTree& tree, const std::string& target);

CiuReport explain(const Predictor& model, const FeatureSpace& space, const Context& context, const OutputSpec& spec,
                  const std::vector<std::string>& targets, const ConceptTree& tree, const EstimatorConfig& config,
                  const ExplainOptions& options = {});

ContrastReport contrast(const Predictor& model, const FeatureSpace& space, const Context& context,
                        const OutputSpec& spec_a, const OutputSpec& spec_b, const std::vector<std::string>& targets,
                        const ConceptTree& tree, const EstimatorConfig& config, const ExplainOptions& options = {});

// Mean absolute change of output j when one feature's column is shuffled
// across the reference contexts, averaged over `repeats` seeded shuffles and
// normalised to sum to 1 when any score is non-zero.
std::vector<double> permutation_importance(const Predictor& model, const FeatureSpace& space,
                                           const std::vector<Context>& references, const OutputSpec& spec,
                                           const EstimatorConfig& config, std::size_t repeats = 5);

// Canonical serialization: fixed key order, numbers as %.9g.
std::string to_json(const CiuReport& report, const FeatureSpace& space);
std::string to_json(const ContrastReport& report, const FeatureSpace& space);
CiuReport report_from_json(const std::string& text, const FeatureSpace& space);

std::string format_number(double v);  // %.9g

}  // namespace ciu
