#include "ciu/cli.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <optional>

#include "CLI11.hpp"
#include "ciu/engine.hpp"
#include "ciu/narrative.hpp"
#include "ciu/scenario.hpp"

namespace ciu::cli {

namespace {

class UsageError : public Error {
 public:
  using Error::Error;
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

RawValue parse_raw(const std::string& text) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = first + text.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec == std::errc() && ptr == last && !text.empty()) return v;
  return text;
}

struct EstimatorFlags {
  std::optional<std::string> strategy;
  std::optional<std::size_t> grid_levels;
  std::optional<std::size_t> mc_samples;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> refine;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--strategy", strategy, "Extrema estimation strategy")->check(CLI::IsMember({"grid", "mc", "montecarlo"}));
    cmd->add_option("--grid-levels", grid_levels, "Grid points per continuous feature (>= 2)");
    cmd->add_option("--mc-samples", mc_samples, "Monte Carlo probes per target (>= 1)");
    cmd->add_option("--seed", seed, "Seed for all randomized behavior");
    cmd->add_option("--refine", refine, "Nested grid refinement rounds");
  }

  EstimatorConfig apply(EstimatorConfig c) const {
    if (strategy) c.strategy = parse_strategy(*strategy);
    if (grid_levels) c.grid_levels = *grid_levels;
    if (mc_samples) c.mc_samples = *mc_samples;
    if (seed) c.seed = *seed;
    if (refine) c.refinement = *refine;
    if (c.grid_levels < 2) throw UsageError("--grid-levels must be at least 2");
    if (c.mc_samples < 1) throw UsageError("--mc-samples must be at least 1");
    return c;
  }
};

std::vector<std::string> default_targets(const Scenario& s) {
  std::vector<std::string> targets;
  for (const auto& f : s.space.features()) targets.push_back(f.name);
  return targets;
}

}  // namespace

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> items;
  std::string item;
  std::stringstream ss(text);
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) items.push_back(item);
  }
  return items;
}

Context parse_context(const FeatureSpace& space, const std::string& text) {
  std::vector<std::optional<RawValue>> slots(space.size());
  std::vector<std::optional<RawValue>> named(space.size());
  std::size_t positional = 0;
  for (const auto& item : split_list(text)) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) {
      if (positional >= space.size())
        throw ValidationError("context has more than " + std::to_string(space.size()) +
                              " positional values but the feature space declares " + std::to_string(space.size()));
      slots[positional++] = parse_raw(item);
      continue;
    }
    const auto name = trim(item.substr(0, eq));
    auto idx = space.index_of(name);
    if (!idx) throw ValidationError("context names unknown feature '" + name + "'");
    named[*idx] = parse_raw(trim(item.substr(eq + 1)));
  }
  std::vector<RawValue> raw;
  for (std::size_t i = 0; i < space.size(); ++i) {
    if (named[i]) {
      raw.push_back(*named[i]);
    } else if (slots[i]) {
      raw.push_back(*slots[i]);
    } else {
      throw ValidationError("context is missing a value for feature '" + space[i].name + "'");
    }
  }
  return validate_context(space, raw);
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Contextual importance and utility explainer for black-box models", "ciu"};
  app.require_subcommand(1);

  std::string scenario_arg;
  std::string context_text;
  std::vector<std::string> output_names;
  std::string targets_text;
  bool json = false;
  std::size_t jobs = 1;
  std::size_t top_k = 3;
  std::string feature;
  std::size_t resolution = 21;
  std::string out_path;
  bool probe_model = false;
  EstimatorFlags flags;

  auto* explain_cmd = app.add_subcommand("explain", "Explain one output at a context");
  auto* contrast_cmd = app.add_subcommand("contrast", "Explain why one output was preferred over another");
  auto* sweep_cmd = app.add_subcommand("sweep", "Write a one-feature sweep as CSV");
  auto* validate_cmd = app.add_subcommand("validate", "Statically validate a scenario");

  for (auto* cmd : {explain_cmd, contrast_cmd, sweep_cmd, validate_cmd})
    cmd->add_option("scenario", scenario_arg, "Scenario file or bundled scenario name")->required();
  for (auto* cmd : {explain_cmd, contrast_cmd, sweep_cmd})
    cmd->add_option("--context", context_text, "Context values: v1,v2,... or name=value,...")->required();
  for (auto* cmd : {explain_cmd, contrast_cmd}) {
    cmd->add_option("--targets", targets_text, "Comma-separated feature and concept names");
    cmd->add_flag("--json", json, "Print the canonical JSON report");
    cmd->add_option("--jobs", jobs, "Parallel per-target workers (built-in models only)")->check(CLI::PositiveNumber);
    flags.add_to(cmd);
  }
  explain_cmd->add_option("--output", output_names, "Output to explain")->expected(1);
  contrast_cmd->add_option("--output", output_names, "Preferred output and the alternative: A,B")
      ->expected(2)
      ->delimiter(',')
      ->required();
  contrast_cmd->add_option("--top-k", top_k, "Entries to render")->check(CLI::PositiveNumber);
  sweep_cmd->add_option("--feature", feature, "Feature to sweep")->required();
  sweep_cmd->add_option("--resolution", resolution, "Points in the sweep (continuous features)");
  sweep_cmd->add_option("--out", out_path, "CSV destination")->required();
  validate_cmd->add_flag("--probe-model", probe_model, "Also launch and handshake external adapters");

  std::vector<std::string> argv_storage{"ciu"};
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_storage) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    err << "usage: ciu {explain|contrast|sweep|validate} SCENARIO --context VALUES [options]  (see --help)\n";
    return kUsage;
  }

  try {
    if (*contrast_cmd && output_names.size() == 2 && output_names[0] == output_names[1])
      throw UsageError("contrast needs two different outputs");
    if (*sweep_cmd && resolution < 2) throw UsageError("--resolution must be at least 2");
    flags.apply(EstimatorConfig{});  // flag errors are usage errors, reported before any file access

    const auto scenario = load_scenario(resolve_scenario_path(scenario_arg));

    if (*validate_cmd) {
      if (probe_model && scenario.is_external()) scenario.load_model();
      out << "ok: " << scenario.name << " (" << scenario.space.size() << " features, " << scenario.outputs.size()
          << " outputs, " << scenario.concepts.concepts().size() << " concepts)\n";
      return kOk;
    }

    const Context context = parse_context(scenario.space, context_text);
    const EstimatorConfig config = flags.apply(scenario.config);
    const auto targets = targets_text.empty() ? default_targets(scenario) : split_list(targets_text);
    ExplainOptions options{.jobs = jobs};

    if (*explain_cmd) {
      const auto& spec = output_names.empty() ? scenario.outputs.front() : scenario.output(output_names.front());
      for (const auto& t : targets) resolve_target(scenario.space, scenario.concepts, t);
      auto model = scenario.load_model();
      const auto report = explain(*model, scenario.space, context, spec, targets, scenario.concepts, config, options);
      if (json)
        out << to_json(report, scenario.space) << '\n';
      else
        out << render_explanation(report, scenario.space, scenario.style);
      for (const auto& w : report.warnings) err << "warning: " << w << '\n';
      return kOk;
    }

    if (*contrast_cmd) {
      const auto& spec_a = scenario.output(output_names[0]);
      const auto& spec_b = scenario.output(output_names[1]);
      for (const auto& t : targets) resolve_target(scenario.space, scenario.concepts, t);
      auto model = scenario.load_model();
      const auto report =
          contrast(*model, scenario.space, context, spec_a, spec_b, targets, scenario.concepts, config, options);
      if (json)
        out << to_json(report, scenario.space) << '\n';
      else
        out << render_contrast(report, top_k);
      return kOk;
    }

    // sweep
    const auto idx = scenario.space.index_of(feature);
    if (!idx) throw ValidationError("unknown feature '" + feature + "'");
    std::ofstream csv(out_path);
    if (!csv) throw ValidationError("cannot write '" + out_path + "'");
    auto model = scenario.load_model();
    const auto series = scenario.space[*idx].is_categorical()
                            ? sweep_levels(*model, scenario.space, context, *idx)
                            : sweep_feature(*model, scenario.space, context, *idx, resolution);
    write_sweep_csv(csv, series);
    csv.close();
    if (!csv) throw ValidationError("failed writing '" + out_path + "'");
    out << "wrote " << series.values.size() << " rows to " << out_path << '\n';
    return kOk;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kScenario;
  } catch (const ModelError& e) {
    err << "model error: " << e.what() << '\n';
    return kModel;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kInternal;
  }
}

}  // namespace ciu::cli
