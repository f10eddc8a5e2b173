#include "ciu/engine.hpp"
#include "json.hpp"
#include "test_support.hpp"

using namespace ciu;

namespace {

FeatureSpace unit_square() {
  return FeatureSpace({FeatureDescriptor::continuous("x1", 0, 1), FeatureDescriptor::continuous("x2", 0, 1)});
}

Context ctx(std::vector<double> v) { return Context{std::move(v)}; }

ExtremaEstimate extrema(double lo, double hi) {
  ExtremaEstimate e;
  e.cmin = lo;
  e.cmax = hi;
  return e;
}

const CiuResult& entry(const CiuReport& r, const std::string& target) {
  for (const auto& e : r.entries)
    if (e.target == target) return e;
  throw std::out_of_range(target);
}

const ContrastEntry& entry(const ContrastReport& r, const std::string& target) {
  for (const auto& e : r.entries)
    if (e.target == target) return e;
  throw std::out_of_range(target);
}

const LinearModel kHalfHalf({{0.5, 0.5}}, {0.0});
const OutputSpec kY("y", 0, 0.0, 1.0);

// Independent copy of the bundled ball model, for oracle use only.
std::vector<double> ball(double psi, double size, double grip) {
  const double z = (psi - 10.5) / 1.5;
  const double s = 2 * size - 1;
  return {std::exp(-z * z) * (0.6 + 0.4 * grip) * (1 - 0.5 * s * s), 1 / (1 + std::exp(-4 * (psi - 12.5)))};
}

}  // namespace

TEST_CASE("contextual importance") {
  // (0.80 - 0.30) / (1 - 0) by hand.
  CHECK_NEAR(contextual_importance(extrema(0.30, 0.80), kY).ci, 0.5, 1e-12);
  CHECK(contextual_importance(extrema(0.7, 0.7), kY).ci == 0.0);
  CHECK(contextual_importance(extrema(0.0, 1.0), kY).ci == 1.0);

  auto wide = contextual_importance(extrema(-0.5, 1.5), kY);
  CHECK(wide.ci == 1.0);
  CHECK(wide.clamped);
  CHECK_FALSE(contextual_importance(extrema(0.2, 0.4), kY).clamped);
}

TEST_CASE("contextual utility") {
  // (0.45 - 0.30) / (0.80 - 0.30) by hand.
  auto u = contextual_utility(0.45, extrema(0.30, 0.80));
  CHECK_NEAR(u.cu, 0.3, 1e-12);
  CHECK_FALSE(u.degenerate);
  CHECK(contextual_utility(0.80, extrema(0.30, 0.80)).cu == 1.0);
  auto d = contextual_utility(0.7, extrema(0.7, 0.7));
  CHECK(d.cu == 0.5);
  CHECK(d.degenerate);
  CHECK_THROWS_AS(contextual_utility(0.9, extrema(0.30, 0.80)), std::logic_error);
}

TEST_CASE("explain: singleton features and a joint concept on the linear demo") {
  // Oracle: dense brute force of the closed form.
  auto f = [](const std::vector<double>& x) { return 0.5 * x[0] + 0.5 * x[1]; };
  auto o1 = testing::brute_force([&](const std::vector<double>& x) { return f({x[0], 0.6}); }, {0}, {1}, 10000);
  auto o2 = testing::brute_force([&](const std::vector<double>& x) { return f({0.3, x[0]}); }, {0}, {1}, 10000);
  auto o12 = testing::brute_force(f, {0, 0}, {1, 1}, 100);
  const double out = f({0.3, 0.6});

  ConceptTree tree({{"both", {{0, 1}, {}}}}, 2);
  auto report = explain(kHalfHalf, unit_square(), ctx({0.3, 0.6}), kY, {"x1", "x2", "both"}, tree, EstimatorConfig{});
  const auto& x1 = entry(report, "x1");
  const auto& x2 = entry(report, "x2");
  const auto& both = entry(report, "both");
  CHECK_NEAR(x1.ci, 0.5, 1e-9);
  CHECK_NEAR(x1.cu, 0.3, 1e-9);
  CHECK_NEAR(x2.ci, 0.5, 1e-9);
  CHECK_NEAR(x2.cu, 0.6, 1e-9);
  CHECK_NEAR(both.ci, 1.0, 1e-9);
  CHECK_NEAR(both.cu, 0.45, 1e-9);
  CHECK_NEAR(x1.ci, o1.max - o1.min, 1e-9);
  CHECK_NEAR(x1.cu, (out - o1.min) / (o1.max - o1.min), 1e-9);
  CHECK_NEAR(x2.cu, (out - o2.min) / (o2.max - o2.min), 1e-9);
  CHECK_NEAR(both.cu, (out - o12.min) / (o12.max - o12.min), 1e-9);

  // Sorted by descending CI, ties by name.
  CHECK(report.entries[0].target == "both");
  CHECK(report.entries[1].target == "x1");
  CHECK(report.entries[2].target == "x2");
  CHECK(report.fingerprint == kHalfHalf.fingerprint());
}

TEST_CASE("explain: constant model is degenerate everywhere") {
  FunctionModel constant("c", 2, 1, [](auto) { return std::vector<double>{0.4}; });
  EstimatorConfig mc;
  mc.strategy = Strategy::kMonteCarlo;
  mc.mc_samples = 50;
  for (const auto& cfg : {EstimatorConfig{}, mc}) {
    auto report = explain(constant, unit_square(), ctx({0.5, 0.5}), kY, {"x2", "x1"}, {}, cfg);
    for (const auto& e : report.entries) {
      CHECK(e.ci == 0.0);
      CHECK(e.cu == 0.5);
      CHECK(e.degenerate);
    }
    CHECK(report.entries[0].target == "x1");
  }
}

TEST_CASE("explain: target errors and clamped importance") {
  CHECK_THROWS_AS(explain(kHalfHalf, unit_square(), ctx({0.3, 0.6}), kY, {"x9"}, {}, {}), ValidationError);
  CHECK_THROWS_AS(explain(kHalfHalf, unit_square(), ctx({0.3, 0.6}), kY, {"x1", "x1"}, {}, {}), ValidationError);
  CHECK_THROWS_AS(explain(kHalfHalf, unit_square(), ctx({0.3, 0.6}), OutputSpec("z", 3), {"x1"}, {}, {}),
                  ValidationError);

  auto narrow = explain(kHalfHalf, unit_square(), ctx({0.3, 0.6}), OutputSpec("y", 0, 0.0, 0.25), {"x1"}, {}, {});
  CHECK(narrow.entries[0].ci == 1.0);
  CHECK(narrow.entries[0].ci_clamped);
  CHECK(narrow.warnings.size() == 1);
}

TEST_CASE("explain: parallel workers give the same report") {
  testing::Rng rng(4);
  std::vector<FeatureDescriptor> fs;
  for (int k = 0; k < 5; ++k) fs.push_back(FeatureDescriptor::continuous("f" + std::to_string(k), 0, 1));
  FeatureSpace space(fs);
  FunctionModel wavy("w", 5, 1, [](std::span<const double> x) {
    return std::vector<double>{std::sin(3 * x[0]) * x[1] + x[2] * x[3] - 0.2 * x[4]};
  });
  ConceptTree tree({{"ab", {{0, 1}, {}}}, {"cde", {{2, 3, 4}, {}}}}, 5);
  const auto c = ctx({0.1, 0.7, 0.3, 0.9, 0.5});
  const std::vector<std::string> targets{"f0", "f1", "f2", "f3", "f4", "ab", "cde"};
  OutputSpec out("w", 0, -2, 2);
  auto serial = explain(wavy, space, c, out, targets, tree, {});
  auto parallel = explain(wavy, space, c, out, targets, tree, {}, {.jobs = 4});
  CHECK(to_json(serial, space) == to_json(parallel, space));
}

TEST_CASE("contrast: opposing linear outputs") {
  FeatureSpace line({FeatureDescriptor::continuous("x1", 0, 1)});
  LinearModel model({{1.0}, {-1.0}}, {0.0, 1.0});
  auto oracle_a = testing::brute_force([](const std::vector<double>& x) { return x[0]; }, {0}, {1}, 10000);
  auto oracle_b = testing::brute_force([](const std::vector<double>& x) { return 1 - x[0]; }, {0}, {1}, 10000);
  const double cu_a = (0.9 - oracle_a.min) / (oracle_a.max - oracle_a.min);
  const double cu_b = (0.1 - oracle_b.min) / (oracle_b.max - oracle_b.min);

  auto r = contrast(model, line, ctx({0.9}), OutputSpec("a", 0), OutputSpec("b", 1), {"x1"}, {}, {});
  const auto& e = entry(r, "x1");
  CHECK_NEAR(e.cu_a, 0.9, 1e-9);
  CHECK_NEAR(e.cu_b, 0.1, 1e-9);
  CHECK_NEAR(e.cu_delta, 0.8, 1e-9);
  CHECK_NEAR(e.cu_a, cu_a, 1e-9);
  CHECK_NEAR(e.cu_b, cu_b, 1e-9);
  CHECK_THROWS_AS(contrast(model, line, ctx({0.9}), OutputSpec("a", 0), OutputSpec("a2", 0), {"x1"}, {}, {}),
                  ValidationError);
}

TEST_CASE("contrast: duplicated outputs never differ") {
  LinearModel twin({{0.3, -0.8}, {0.3, -0.8}}, {0.1, 0.1});
  ConceptTree tree({{"all", {{0, 1}, {}}}}, 2);
  auto r = contrast(twin, unit_square(), ctx({0.2, 0.7}), OutputSpec("a", 0), OutputSpec("b", 1), {"x1", "x2", "all"},
                    tree, {});
  for (const auto& e : r.entries) CHECK(e.cu_delta == 0.0);
}

TEST_CASE("contrast: deflated ball inverts between 10.5 and 12.5 psi") {
  FeatureSpace space({FeatureDescriptor::continuous("psi", 8, 16), FeatureDescriptor::continuous("size", 0, 1),
                      FeatureDescriptor::continuous("grip", 0, 1)});
  auto model = builtin::make("deflategate");
  EstimatorConfig cfg;
  cfg.grid_levels = 41;

  for (double psi : {10.5, 12.5}) {
    // Oracle: dense sweep of psi with size and grip clamped at 0.5.
    auto ta = testing::brute_force([](const std::vector<double>& x) { return ball(x[0], 0.5, 0.5)[0]; }, {8}, {16}, 10000);
    auto tb = testing::brute_force([](const std::vector<double>& x) { return ball(x[0], 0.5, 0.5)[1]; }, {8}, {16}, 10000);
    const auto here = ball(psi, 0.5, 0.5);
    const double oracle_a = (here[0] - ta.min) / (std::max(ta.max, here[0]) - ta.min);
    const double oracle_b = (here[1] - tb.min) / (tb.max - tb.min);

    auto r = contrast(*model, space, ctx({psi, 0.5, 0.5}), OutputSpec("throwability", 0), OutputSpec("compliance", 1),
                      {"psi"}, {}, cfg);
    const auto& e = entry(r, "psi");
    CHECK_NEAR(e.cu_a, oracle_a, 1e-3);
    CHECK_NEAR(e.cu_b, oracle_b, 1e-3);
    if (psi == 10.5) {
      CHECK(e.cu_a > 0.99);
      CHECK(e.cu_b < 0.01);
      CHECK(e.cu_a > e.cu_b);
    } else {
      CHECK(e.cu_b >= 0.5 - 1e-6);
      CHECK(e.cu_a < 0.2);
      CHECK(e.cu_b > e.cu_a);
    }
  }
}

TEST_CASE("permutation importance baseline") {
  testing::Rng rng(31);
  EstimatorConfig cfg;
  cfg.seed = 99;

  std::vector<Context> varied;
  for (int i = 0; i < 50; ++i) varied.push_back(ctx({rng.uniform(0, 1), 0.4}));
  LinearModel first({{1.0, 0.0}}, {0.0});
  auto s = permutation_importance(first, unit_square(), varied, kY, cfg);
  CHECK(s[0] == 1.0);
  CHECK(s[1] == 0.0);

  FunctionModel constant("c", 2, 1, [](auto) { return std::vector<double>{0.4}; });
  auto z = permutation_importance(constant, unit_square(), varied, kY, cfg);
  CHECK(z == std::vector<double>{0.0, 0.0});

  std::vector<Context> iid;
  for (int i = 0; i < 200; ++i) iid.push_back(ctx({rng.uniform(0, 1), rng.uniform(0, 1)}));
  auto h = permutation_importance(kHalfHalf, unit_square(), iid, kY, cfg);
  CHECK_NEAR(h[0], 0.5, 0.1);
  CHECK_NEAR(h[1], 0.5, 0.1);
  CHECK_NEAR(h[0] + h[1], 1.0, 1e-12);

  CHECK(permutation_importance(kHalfHalf, unit_square(), iid, kY, cfg) == h);
  CHECK_THROWS_AS(permutation_importance(kHalfHalf, unit_square(), {iid[0]}, kY, cfg), ValidationError);
}

TEST_CASE("canonical JSON parses and round-trips") {
  testing::Rng rng(55);
  FeatureSpace space({FeatureDescriptor::continuous("a", -3, 3), FeatureDescriptor::categorical("kind", {"p", "q", "r"}),
                      FeatureDescriptor::continuous("b", 0, 10)});
  ConceptTree tree({{"a_and_kind", {{0, 1}, {}}}}, 3);
  for (int trial = 0; trial < 40; ++trial) {
    LinearModel model({{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)}}, {rng.uniform(-1, 1)});
    EstimatorConfig cfg;
    cfg.strategy = trial % 2 ? Strategy::kMonteCarlo : Strategy::kGrid;
    cfg.mc_samples = 64;
    cfg.seed = static_cast<std::uint64_t>(trial) * 7919u;
    const auto c = ctx({rng.uniform(-3, 3), static_cast<double>(rng.index(3)), rng.uniform(0, 10)});
    auto report = explain(model, space, c, OutputSpec("y", 0, -20, 20), {"a", "kind", "b", "a_and_kind"}, tree, cfg);
    const auto text = to_json(report, space);
    auto parsed = nlohmann::json::parse(text);
    CHECK(parsed["entries"].size() == 4);
    CHECK(to_json(report_from_json(text, space), space) == text);
  }
}
