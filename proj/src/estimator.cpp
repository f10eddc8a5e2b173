#include "ciu/estimator.hpp"

#include <algorithm>
#include <cstdio>
#include <random>

#include "ciu/kernels.hpp"

namespace ciu {

std::string_view strategy_name(Strategy s) { return s == Strategy::kGrid ? "grid" : "montecarlo"; }

Strategy parse_strategy(const std::string& text) {
  if (text == "grid") return Strategy::kGrid;
  if (text == "mc" || text == "montecarlo") return Strategy::kMonteCarlo;
  throw ValidationError("unknown strategy '" + text + "' (expected grid or mc)");
}

void EstimatorConfig::validate() const {
  if (grid_levels < 2) throw ValidationError("grid_levels must be at least 2");
  if (mc_samples < 1) throw ValidationError("mc_samples must be at least 1");
  if (probe_cap < 1) throw ValidationError("probe cap must be at least 1");
}

std::vector<double> grid_levels_for(const FeatureDescriptor& feature, std::size_t levels) {
  std::vector<double> out;
  if (feature.is_categorical()) {
    for (std::size_t c = 0; c < feature.level_count(); ++c) out.push_back(static_cast<double>(c));
    return out;
  }
  const double span = feature.upper - feature.lower;
  const double denom = static_cast<double>(levels - 1);
  out.reserve(levels);
  for (std::size_t k = 0; k + 1 < levels; ++k) out.push_back(feature.lower + (span * static_cast<double>(k)) / denom);
  out.push_back(feature.upper);
  return out;
}

namespace {

void check_feature_set(const FeatureSpace& space, const Context& context, const FeatureSet& set) {
  if (set.empty()) throw ValidationError("feature set to vary is empty");
  if (context.size() != space.size()) throw ValidationError("context arity does not match the feature space");
  for (std::size_t i = 0; i < set.size(); ++i) {
    if (set[i] >= space.size()) throw ValidationError("feature index " + std::to_string(set[i]) + " is out of range");
    if (i > 0 && set[i] <= set[i - 1]) throw std::invalid_argument("feature set must be sorted and unique");
  }
}

// Appends the Cartesian product of the per-feature level sets, odometer order
// with the last feature of the set turning fastest.
void append_grid(Matrix& probes, const FeatureSpace& space, const Context& context, const FeatureSet& set,
                 std::size_t levels, std::size_t cap) {
  std::vector<std::vector<double>> axes;
  std::size_t total = 1;
  for (auto idx : set) {
    axes.push_back(grid_levels_for(space[idx], levels));
    const std::size_t n = axes.back().size();
    if (total > cap / n) {
      throw ValidationError("grid over " + std::to_string(set.size()) + " features exceeds the probe cap of " +
                            std::to_string(cap) + "; use the montecarlo strategy or fewer grid levels");
    }
    total *= n;
  }
  probes.data.reserve(probes.data.size() + total * space.size());
  std::vector<std::size_t> digit(set.size(), 0);
  std::vector<double> row = context.values;
  for (std::size_t n = 0; n < total; ++n) {
    for (std::size_t d = 0; d < set.size(); ++d) row[set[d]] = axes[d][digit[d]];
    probes.push_row(row);
    for (std::size_t d = set.size(); d-- > 0;) {
      if (++digit[d] < axes[d].size()) break;
      digit[d] = 0;
    }
  }
}

double unit_draw(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

void append_montecarlo(Matrix& probes, const FeatureSpace& space, const Context& context, const FeatureSet& set,
                       std::size_t samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<double> row = context.values;
  probes.data.reserve(probes.data.size() + samples * space.size());
  for (std::size_t s = 0; s < samples; ++s) {
    for (auto idx : set) {
      const auto& f = space[idx];
      const double u = unit_draw(rng);
      if (f.is_categorical()) {
        auto code = static_cast<std::size_t>(u * static_cast<double>(f.level_count()));
        row[idx] = static_cast<double>(std::min(code, f.level_count() - 1));
      } else {
        row[idx] = f.lower + u * (f.upper - f.lower);
      }
    }
    probes.push_row(row);
  }
}

std::size_t round_levels(std::size_t levels, std::size_t round) { return ((levels - 1) << round) + 1; }

}  // namespace

Matrix generate_probes(const FeatureSpace& space, const Context& context, const FeatureSet& feature_set,
                       const EstimatorConfig& config) {
  config.validate();
  check_feature_set(space, context, feature_set);
  Matrix probes;
  probes.cols = space.size();
  if (config.strategy == Strategy::kGrid)
    append_grid(probes, space, context, feature_set, config.grid_levels, config.probe_cap);
  else
    append_montecarlo(probes, space, context, feature_set, config.mc_samples, config.seed);
  probes.push_row(context.values);
  return probes;
}

Matrix collect_probes(const FeatureSpace& space, const Context& context, const FeatureSet& feature_set,
                      const EstimatorConfig& config) {
  if (config.strategy != Strategy::kGrid || config.refinement == 0)
    return generate_probes(space, context, feature_set, config);
  config.validate();
  check_feature_set(space, context, feature_set);
  Matrix probes;
  probes.cols = space.size();
  for (std::size_t r = 0; r <= config.refinement; ++r) {
    if (r >= 40) throw ValidationError("refinement depth is too large");
    append_grid(probes, space, context, feature_set, round_levels(config.grid_levels, r), config.probe_cap);
  }
  probes.push_row(context.values);
  return probes;
}

ExtremaEstimate extrema_from_outputs(const Matrix& probes, const Matrix& outputs, std::size_t output_index) {
  if (probes.rows == 0) throw std::invalid_argument("extrema over an empty probe list");
  if (outputs.rows != probes.rows) throw std::invalid_argument("outputs do not match probes");
  if (output_index >= outputs.cols)
    throw ValidationError("output index " + std::to_string(output_index) + " is out of range for a model with " +
                          std::to_string(outputs.cols) + " outputs");
  std::vector<double> column(outputs.rows);
  for (std::size_t r = 0; r < outputs.rows; ++r) column[r] = outputs(r, output_index);
  const auto mm = kernels::min_max(column);
  ExtremaEstimate est;
  est.cmin = mm.min;
  est.cmax = mm.max;
  auto lo = probes.row(mm.argmin);
  auto hi = probes.row(mm.argmax);
  est.argmin.assign(lo.begin(), lo.end());
  est.argmax.assign(hi.begin(), hi.end());
  est.probes_used = probes.rows;
  return est;
}

ExtremaEstimate estimate_extrema(const Predictor& model, const Matrix& probes, std::size_t output_index) {
  if (output_index >= model.n_outputs())
    throw ValidationError("output index " + std::to_string(output_index) + " is out of range for a model with " +
                          std::to_string(model.n_outputs()) + " outputs");
  return extrema_from_outputs(probes, model.batch_predict(probes), output_index);
}

std::vector<ExtremaEstimate> refine_extrema_rounds(const Predictor& model, const FeatureSpace& space,
                                                   const Context& context, const FeatureSet& feature_set,
                                                   const EstimatorConfig& config, std::size_t output_index) {
  if (config.refinement < 1) throw ValidationError("refinement needs at least one round");
  std::vector<ExtremaEstimate> rounds;
  EstimatorConfig round_config = config;
  round_config.strategy = Strategy::kGrid;
  for (std::size_t r = 0; r <= config.refinement; ++r) {
    round_config.refinement = r;
    rounds.push_back(estimate_extrema(model, collect_probes(space, context, feature_set, round_config), output_index));
  }
  return rounds;
}

ExtremaEstimate refine_extrema(const Predictor& model, const FeatureSpace& space, const Context& context,
                               const FeatureSet& feature_set, const EstimatorConfig& config,
                               std::size_t output_index) {
  return refine_extrema_rounds(model, space, context, feature_set, config, output_index).back();
}

SweepSeries sweep_feature(const Predictor& model, const FeatureSpace& space, const Context& context,
                          std::size_t feature_index, std::size_t resolution) {
  if (feature_index >= space.size()) throw ValidationError("sweep feature index is out of range");
  const auto& f = space[feature_index];
  if (f.is_categorical())
    throw ValidationError("feature '" + f.name + "' is categorical; sweep its levels instead");
  if (resolution < 2) throw ValidationError("sweep resolution must be at least 2");
  SweepSeries series;
  series.values = grid_levels_for(f, resolution);
  Matrix probes;
  probes.cols = space.size();
  std::vector<double> row = context.values;
  for (double v : series.values) {
    row[feature_index] = v;
    probes.push_row(row);
  }
  series.outputs = model.batch_predict(probes);
  return series;
}

SweepSeries sweep_levels(const Predictor& model, const FeatureSpace& space, const Context& context,
                         std::size_t feature_index) {
  if (feature_index >= space.size()) throw ValidationError("sweep feature index is out of range");
  const auto& f = space[feature_index];
  if (!f.is_categorical()) throw ValidationError("feature '" + f.name + "' is continuous; use a value sweep");
  SweepSeries series;
  series.categorical = true;
  series.values = grid_levels_for(f, 0);
  series.labels = f.levels;
  Matrix probes;
  probes.cols = space.size();
  std::vector<double> row = context.values;
  for (double v : series.values) {
    row[feature_index] = v;
    probes.push_row(row);
  }
  series.outputs = model.batch_predict(probes);
  return series;
}

void write_sweep_csv(std::ostream& out, const SweepSeries& series) {
  out << (series.categorical ? "level" : "value");
  for (std::size_t k = 0; k < series.outputs.cols; ++k) out << ",out_" << k;
  out << '\n';
  char buf[40];
  for (std::size_t r = 0; r < series.values.size(); ++r) {
    if (series.categorical) {
      out << series.labels[r];
    } else {
      std::snprintf(buf, sizeof buf, "%.9g", series.values[r]);
      out << buf;
    }
    for (std::size_t k = 0; k < series.outputs.cols; ++k) {
      std::snprintf(buf, sizeof buf, ",%.9g", series.outputs(r, k));
      out << buf;
    }
    out << '\n';
  }
}

}  // namespace ciu
