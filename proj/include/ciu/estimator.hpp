#pragma once

#include <cstddef>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "ciu/core.hpp"
#include "ciu/model.hpp"

namespace ciu {

enum class Strategy { kGrid, kMonteCarlo };

std::string_view strategy_name(Strategy s);
Strategy parse_strategy(const std::string& text);  // "grid" | "mc" | "montecarlo"

struct EstimatorConfig {
  Strategy strategy = Strategy::kGrid;
  std::size_t grid_levels = 21;
  std::size_t mc_samples = 1000;
  std::uint64_t seed = 0;
  std::size_t refinement = 0;
  std::size_t probe_cap = 1000000;

  void validate() const;
};

struct ExtremaEstimate {
  double cmin = 0.0;
  double cmax = 0.0;
  std::vector<double> argmin;
  std::vector<double> argmax;
  std::size_t probes_used = 0;
};

// Level set a grid places on one feature: endpoint-inclusive equally spaced
// values for continuous features, every code for categorical ones.
std::vector<double> grid_levels_for(const FeatureDescriptor& feature, std::size_t levels);

// Probes that vary feature_set and clamp everything else at the context.
// The context itself is always the final row.
Matrix generate_probes(const FeatureSpace& space, const Context& context, const FeatureSet& feature_set,
                       const EstimatorConfig& config);

// Grid rows of every refinement round 0..config.refinement concatenated in
// round order (earlier rounds first), then the context. With refinement 0 or
// the montecarlo strategy this equals generate_probes().
Matrix collect_probes(const FeatureSpace& space, const Context& context, const FeatureSet& feature_set,
                      const EstimatorConfig& config);

// Extrema of one output column over precomputed predictions. Ties go to the
// earliest probe.
ExtremaEstimate extrema_from_outputs(const Matrix& probes, const Matrix& outputs, std::size_t output_index);

ExtremaEstimate estimate_extrema(const Predictor& model, const Matrix& probes, std::size_t output_index);

// Nested grids of 2^r * (levels - 1) + 1 points per continuous feature for
// r = 0..refinement. Round r evaluates every probe of rounds 0..r, so cmax
// never decreases and cmin never increases. Returns one estimate per round.
std::vector<ExtremaEstimate> refine_extrema_rounds(const Predictor& model, const FeatureSpace& space,
                                                   const Context& context, const FeatureSet& feature_set,
                                                   const EstimatorConfig& config, std::size_t output_index);

ExtremaEstimate refine_extrema(const Predictor& model, const FeatureSpace& space, const Context& context,
                               const FeatureSet& feature_set, const EstimatorConfig& config,
                               std::size_t output_index);

struct SweepSeries {
  bool categorical = false;
  std::vector<double> values;       // feature values (level codes when categorical)
  std::vector<std::string> labels;  // level names, categorical only
  Matrix outputs;                   // one row per value
};

// Continuous features only.
SweepSeries sweep_feature(const Predictor& model, const FeatureSpace& space, const Context& context,
                          std::size_t feature_index, std::size_t resolution);

// Categorical counterpart: one row per level, labeled.
SweepSeries sweep_levels(const Predictor& model, const FeatureSpace& space, const Context& context,
                         std::size_t feature_index);

// "value,out_0,...,out_{m-1}" (or "level,..." for labeled series), %.9g.
void write_sweep_csv(std::ostream& out, const SweepSeries& series);

}  // namespace ciu
