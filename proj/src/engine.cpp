#include "ciu/engine.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <random>
#include <set>
#include <thread>

#include "json.hpp"

namespace ciu {

Importance contextual_importance(const ExtremaEstimate& est, const OutputSpec& spec) {
  if (!(spec.absmin < spec.absmax)) throw std::invalid_argument("output bounds need absmin < absmax");
  Importance r;
  r.clamped = est.cmin < spec.absmin || est.cmax > spec.absmax;
  const double ci = (est.cmax - est.cmin) / (spec.absmax - spec.absmin);
  if (ci > 1.0) r.clamped = true;
  r.ci = std::clamp(ci, 0.0, 1.0);
  return r;
}

Utility contextual_utility(double out_value, const ExtremaEstimate& est) {
  if (out_value < est.cmin || out_value > est.cmax) {
    throw std::logic_error("context output " + format_number(out_value) + " lies outside the estimated interval [" +
                           format_number(est.cmin) + ", " + format_number(est.cmax) + "]");
  }
  if (!(est.cmax > est.cmin)) return {0.5, true};
  return {std::clamp((out_value - est.cmin) / (est.cmax - est.cmin), 0.0, 1.0), false};
}

FeatureSet resolve_target(const FeatureSpace& space, const ConceptTree& tree, const std::string& target) {
  if (auto idx = space.index_of(target)) return {*idx};
  if (tree.contains(target)) return tree.resolve(target);
  throw ValidationError("unknown target '" + target + "' (not a feature or concept)");
}

namespace {

void check_output(const Predictor& model, const OutputSpec& spec) {
  if (spec.index >= model.n_outputs())
    throw ValidationError("output '" + spec.name + "' has index " + std::to_string(spec.index) + " but the model has " +
                          std::to_string(model.n_outputs()) + " outputs");
}

std::vector<FeatureSet> resolve_targets(const FeatureSpace& space, const ConceptTree& tree,
                                        const std::vector<std::string>& targets) {
  std::set<std::string> seen;
  std::vector<FeatureSet> sets;
  for (const auto& t : targets) {
    if (!seen.insert(t).second) throw ValidationError("target '" + t + "' is listed twice");
    sets.push_back(resolve_target(space, tree, t));
  }
  return sets;
}

std::vector<double> predict_context(const Predictor& model, const Context& context) {
  Matrix one;
  one.cols = context.size();
  one.push_row(context.values);
  auto out = model.batch_predict(one);
  auto row = out.row(0);
  return {row.begin(), row.end()};
}

// Runs task(i) for i in [0, n). Results land in caller-owned slots by index,
// so the outcome does not depend on scheduling. The lowest-index failure is
// rethrown.
template <typename Task>
void for_each_target(std::size_t n, std::size_t jobs, Task task) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) task(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> workers;
  for (std::size_t w = 0; w < jobs; ++w) {
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          task(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : workers) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace

CiuReport explain(const Predictor& model, const FeatureSpace& space, const Context& context, const OutputSpec& spec,
                  const std::vector<std::string>& targets, const ConceptTree& tree, const EstimatorConfig& config,
                  const ExplainOptions& options) {
  config.validate();
  check_output(model, spec);
  const auto sets = resolve_targets(space, tree, targets);
  const double out_value = predict_context(model, context)[spec.index];

  CiuReport report;
  report.context = context;
  report.output = spec;
  report.config = config;
  report.fingerprint = model.fingerprint();
  report.entries.resize(targets.size());

  const std::size_t jobs = model.concurrent_safe() ? options.jobs : 1;
  for_each_target(targets.size(), jobs, [&](std::size_t i) {
    const auto probes = collect_probes(space, context, sets[i], config);
    const auto est = estimate_extrema(model, probes, spec.index);
    const auto imp = contextual_importance(est, spec);
    const auto util = contextual_utility(out_value, est);
    auto& e = report.entries[i];
    e.target = targets[i];
    e.output = spec.index;
    e.feature_set = sets[i];
    e.ci = imp.ci;
    e.ci_clamped = imp.clamped;
    e.cu = util.cu;
    e.degenerate = util.degenerate;
    e.cmin = est.cmin;
    e.cmax = est.cmax;
    e.out_value = out_value;
    e.probes_used = est.probes_used;
  });

  std::stable_sort(report.entries.begin(), report.entries.end(), [](const CiuResult& a, const CiuResult& b) {
    if (a.ci != b.ci) return a.ci > b.ci;
    return a.target < b.target;
  });
  for (const auto& e : report.entries)
    if (e.ci_clamped)
      report.warnings.push_back("contextual extrema of '" + e.target + "' exceed the declared bounds of '" +
                                spec.name + "'; CI clamped");
  return report;
}

ContrastReport contrast(const Predictor& model, const FeatureSpace& space, const Context& context,
                        const OutputSpec& spec_a, const OutputSpec& spec_b, const std::vector<std::string>& targets,
                        const ConceptTree& tree, const EstimatorConfig& config, const ExplainOptions& options) {
  config.validate();
  if (spec_a.index == spec_b.index) throw ValidationError("contrast needs two different outputs");
  check_output(model, spec_a);
  check_output(model, spec_b);
  const auto sets = resolve_targets(space, tree, targets);
  const auto out = predict_context(model, context);

  ContrastReport report;
  report.context = context;
  report.output_a = spec_a;
  report.output_b = spec_b;
  report.out_a = out[spec_a.index];
  report.out_b = out[spec_b.index];
  report.config = config;
  report.fingerprint = model.fingerprint();
  report.entries.resize(targets.size());

  const std::size_t jobs = model.concurrent_safe() ? options.jobs : 1;
  for_each_target(targets.size(), jobs, [&](std::size_t i) {
    // One probe set and one prediction pass serve both outputs.
    const auto probes = collect_probes(space, context, sets[i], config);
    const auto predictions = model.batch_predict(probes);
    const auto est_a = extrema_from_outputs(probes, predictions, spec_a.index);
    const auto est_b = extrema_from_outputs(probes, predictions, spec_b.index);
    const auto ua = contextual_utility(report.out_a, est_a);
    const auto ub = contextual_utility(report.out_b, est_b);
    auto& e = report.entries[i];
    e.target = targets[i];
    e.feature_set = sets[i];
    e.ci_a = contextual_importance(est_a, spec_a).ci;
    e.ci_b = contextual_importance(est_b, spec_b).ci;
    e.cu_a = ua.cu;
    e.cu_b = ub.cu;
    e.degenerate_a = ua.degenerate;
    e.degenerate_b = ub.degenerate;
    e.cu_delta = ua.cu - ub.cu;
  });

  std::stable_sort(report.entries.begin(), report.entries.end(), [](const ContrastEntry& a, const ContrastEntry& b) {
    const double da = std::abs(a.cu_delta);
    const double db = std::abs(b.cu_delta);
    if (da != db) return da > db;
    return a.target < b.target;
  });
  return report;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::vector<double> permutation_importance(const Predictor& model, const FeatureSpace& space,
                                           const std::vector<Context>& references, const OutputSpec& spec,
                                           const EstimatorConfig& config, std::size_t repeats) {
  if (references.size() < 2) throw ValidationError("permutation importance needs at least 2 reference contexts");
  if (repeats < 1) throw ValidationError("permutation importance needs at least one repeat");
  check_output(model, spec);
  Matrix base;
  base.cols = space.size();
  for (const auto& c : references) {
    if (c.size() != space.size()) throw ValidationError("reference context arity does not match the feature space");
    base.push_row(c.values);
  }
  const Matrix base_out = model.batch_predict(base);
  const std::size_t n = base.rows;

  std::vector<double> scores(space.size(), 0.0);
  std::vector<std::size_t> order(n);
  for (std::size_t f = 0; f < space.size(); ++f) {
    double total = 0.0;
    for (std::size_t rep = 0; rep < repeats; ++rep) {
      std::mt19937_64 rng(splitmix64(config.seed ^ splitmix64((f << 32) | rep)));
      for (std::size_t i = 0; i < n; ++i) order[i] = i;
      for (std::size_t i = n; i-- > 1;) std::swap(order[i], order[rng() % (i + 1)]);
      Matrix shuffled = base;
      for (std::size_t r = 0; r < n; ++r) shuffled(r, f) = base(order[r], f);
      const Matrix out = model.batch_predict(shuffled);
      double sum = 0.0;
      for (std::size_t r = 0; r < n; ++r) sum += std::abs(out(r, spec.index) - base_out(r, spec.index));
      total += sum / static_cast<double>(n);
    }
    scores[f] = total / static_cast<double>(repeats);
  }
  double sum = 0.0;
  for (double s : scores) sum += s;
  if (sum > 0.0)
    for (double& s : scores) s /= sum;
  return scores;
}

// ---------------------------------------------------------------------------

std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

namespace {

std::string quoted(const std::string& s) { return nlohmann::json(s).dump(); }

std::string context_json(const Context& context, const FeatureSpace& space) {
  std::string out = "{";
  for (std::size_t i = 0; i < context.size(); ++i) {
    if (i) out += ",";
    out += quoted(space[i].name) + ":";
    if (space[i].is_categorical())
      out += quoted(format_feature_value(space[i], context[i]));
    else
      out += format_number(context[i]);
  }
  return out + "}";
}

std::string output_json(const OutputSpec& o) {
  return "{\"name\":" + quoted(o.name) + ",\"index\":" + std::to_string(o.index) +
         ",\"absmin\":" + format_number(o.absmin) + ",\"absmax\":" + format_number(o.absmax) + "}";
}

std::string config_json(const EstimatorConfig& c) {
  return "{\"strategy\":" + quoted(std::string(strategy_name(c.strategy))) +
         ",\"grid_levels\":" + std::to_string(c.grid_levels) + ",\"mc_samples\":" + std::to_string(c.mc_samples) +
         ",\"seed\":" + std::to_string(c.seed) + ",\"refinement\":" + std::to_string(c.refinement) + "}";
}

const char* boolean(bool b) { return b ? "true" : "false"; }

}  // namespace

std::string to_json(const CiuReport& report, const FeatureSpace& space) {
  std::string out = "{\"context\":" + context_json(report.context, space) + ",\"output\":" + output_json(report.output) +
                    ",\"entries\":[";
  for (std::size_t i = 0; i < report.entries.size(); ++i) {
    const auto& e = report.entries[i];
    if (i) out += ",";
    out += "{\"target\":" + quoted(e.target) + ",\"ci\":" + format_number(e.ci) + ",\"cu\":" + format_number(e.cu) +
           ",\"cmin\":" + format_number(e.cmin) + ",\"cmax\":" + format_number(e.cmax) +
           ",\"out_value\":" + format_number(e.out_value) + ",\"degenerate\":" + boolean(e.degenerate) +
           ",\"probes_used\":" + std::to_string(e.probes_used) + "}";
  }
  out += "],\"config\":" + config_json(report.config) + ",\"fingerprint\":" + quoted(report.fingerprint);
  if (!report.warnings.empty()) {
    out += ",\"warnings\":[";
    for (std::size_t i = 0; i < report.warnings.size(); ++i) out += (i ? "," : "") + quoted(report.warnings[i]);
    out += "]";
  }
  return out + "}";
}

std::string to_json(const ContrastReport& report, const FeatureSpace& space) {
  std::string out = "{\"context\":" + context_json(report.context, space) +
                    ",\"output_a\":" + output_json(report.output_a) + ",\"output_b\":" + output_json(report.output_b) +
                    ",\"out_a\":" + format_number(report.out_a) + ",\"out_b\":" + format_number(report.out_b) +
                    ",\"entries\":[";
  for (std::size_t i = 0; i < report.entries.size(); ++i) {
    const auto& e = report.entries[i];
    if (i) out += ",";
    out += "{\"target\":" + quoted(e.target) + ",\"ci_a\":" + format_number(e.ci_a) +
           ",\"cu_a\":" + format_number(e.cu_a) + ",\"ci_b\":" + format_number(e.ci_b) +
           ",\"cu_b\":" + format_number(e.cu_b) + ",\"cu_delta\":" + format_number(e.cu_delta) + "}";
  }
  return out + "],\"config\":" + config_json(report.config) + ",\"fingerprint\":" + quoted(report.fingerprint) + "}";
}

CiuReport report_from_json(const std::string& text, const FeatureSpace& space) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(std::string("report does not parse: ") + e.what());
  }
  try {
    CiuReport r;
    // Not re-validated: %.9g rounding may nudge a value across a bound.
    for (const auto& f : space.features()) {
      const auto& v = j.at("context").at(f.name);
      if (f.is_categorical()) {
        auto code = f.level_code(v.get<std::string>());
        if (!code) throw ValidationError("report context uses unknown level for '" + f.name + "'");
        r.context.values.push_back(static_cast<double>(*code));
      } else {
        r.context.values.push_back(v.get<double>());
      }
    }
    const auto& o = j.at("output");
    r.output = OutputSpec(o.at("name").get<std::string>(), o.at("index").get<std::size_t>(), o.at("absmin").get<double>(),
                          o.at("absmax").get<double>());
    for (const auto& e : j.at("entries")) {
      CiuResult c;
      c.target = e.at("target").get<std::string>();
      c.output = r.output.index;
      c.ci = e.at("ci").get<double>();
      c.cu = e.at("cu").get<double>();
      c.cmin = e.at("cmin").get<double>();
      c.cmax = e.at("cmax").get<double>();
      c.out_value = e.at("out_value").get<double>();
      c.degenerate = e.at("degenerate").get<bool>();
      c.probes_used = e.at("probes_used").get<std::size_t>();
      r.entries.push_back(std::move(c));
    }
    const auto& c = j.at("config");
    r.config.strategy = parse_strategy(c.at("strategy").get<std::string>());
    r.config.grid_levels = c.at("grid_levels").get<std::size_t>();
    r.config.mc_samples = c.at("mc_samples").get<std::size_t>();
    r.config.seed = c.at("seed").get<std::uint64_t>();
    r.config.refinement = c.at("refinement").get<std::size_t>();
    r.fingerprint = j.at("fingerprint").get<std::string>();
    if (j.contains("warnings"))
      for (const auto& w : j["warnings"]) r.warnings.push_back(w.get<std::string>());
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("report is missing or mistypes a field: ") + e.what());
  }
}

}  // namespace ciu
