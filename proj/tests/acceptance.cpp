// Acceptance suite: one line per criterion, non-zero exit if any fails.
// Every expected value comes from an oracle that does not use the estimator
// (closed forms, dense brute force, exhaustive enumeration).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ciu/engine.hpp"
#include "ciu/kernels.hpp"

using namespace ciu;

namespace {

struct Check {
  bool ok = true;
  std::string detail;
  void expect(bool cond, const std::string& what) {
    if (!cond && ok) {
      ok = false;
      detail = what;
    }
  }
};

int failures = 0;

void criterion(const std::string& name, const std::function<void(Check&)>& body) {
  Check c;
  try {
    body(c);
  } catch (const std::exception& e) {
    c.ok = false;
    c.detail = std::string("exception: ") + e.what();
  }
  std::cout << (c.ok ? "[PASS] " : "[FAIL] ") << name;
  if (!c.ok) std::cout << ": " << c.detail;
  std::cout << '\n';
  if (!c.ok) ++failures;
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

bool near(double a, double b, double tol) { return std::abs(a - b) <= tol; }

// Endpoint-inclusive dense lattice over a box, independent of the estimator.
std::pair<double, double> dense_extrema(const std::function<double(const std::vector<double>&)>& f,
                                        const std::vector<double>& lo, const std::vector<double>& hi,
                                        std::size_t per_axis) {
  const std::size_t d = lo.size();
  std::vector<std::size_t> digit(d, 0);
  std::vector<double> x(d);
  double mn = INFINITY, mx = -INFINITY;
  for (;;) {
    for (std::size_t k = 0; k < d; ++k)
      x[k] = digit[k] + 1 == per_axis ? hi[k] : lo[k] + (hi[k] - lo[k]) * double(digit[k]) / double(per_axis - 1);
    const double y = f(x);
    mn = std::min(mn, y);
    mx = std::max(mx, y);
    std::size_t k = 0;
    while (k < d && ++digit[k] == per_axis) digit[k++] = 0;
    if (k == d) break;
  }
  return {mn, mx};
}

FeatureSpace unit_box(std::size_t n) {
  std::vector<FeatureDescriptor> fs;
  for (std::size_t i = 0; i < n; ++i) fs.push_back(FeatureDescriptor::continuous("x" + std::to_string(i + 1), 0, 1));
  return FeatureSpace(fs);
}

const CiuResult& find(const CiuReport& r, const std::string& target) {
  for (const auto& e : r.entries)
    if (e.target == target) return e;
  throw std::out_of_range("missing entry " + target);
}

std::string run_cli(const std::string& args) {
  const std::string cmd = std::string(CIU_CLI_BINARY) + " " + args + " 2>/dev/null";
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) throw std::runtime_error("popen failed");
  std::string out;
  std::array<char, 4096> buf;
  std::size_t n;
  while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) out.append(buf.data(), n);
  const int status = ::pclose(pipe);
  if (status != 0) throw std::runtime_error("cli exited with status " + std::to_string(status) + ": " + cmd);
  return out;
}

void closed_form(Check& c) {
  LinearModel model({{0.5, 0.5}}, {0.0});
  const auto space = unit_box(2);
  const Context ctx{{0.3, 0.6}};
  const OutputSpec spec("y", 0, 0.0, 1.0);
  ConceptTree tree({{"x1x2", {{0, 1}, {}}}}, 2);
  auto report = explain(model, space, ctx, spec, {"x1", "x2", "x1x2"}, tree, EstimatorConfig{});

  auto f = [](const std::vector<double>& x) { return 0.5 * x[0] + 0.5 * x[1]; };
  const double out = f({0.3, 0.6});
  const auto o1 = dense_extrema([&](const std::vector<double>& x) { return f({x[0], 0.6}); }, {0}, {1}, 10000);
  const auto o2 = dense_extrema([&](const std::vector<double>& x) { return f({0.3, x[0]}); }, {0}, {1}, 10000);
  const auto o12 = dense_extrema(f, {0, 0}, {1, 1}, 100);  // 10^4 points over the pair

  struct Want {
    std::string target;
    double ci, cu;
    std::pair<double, double> oracle;
  };
  for (const auto& w : {Want{"x1", 0.5, 0.3, o1}, Want{"x2", 0.5, 0.6, o2}, Want{"x1x2", 1.0, 0.45, o12}}) {
    const auto& e = find(report, w.target);
    const double oci = w.oracle.second - w.oracle.first;
    const double ocu = (out - w.oracle.first) / oci;
    c.expect(near(e.ci, w.ci, 1e-9) && near(e.ci, oci, 1e-9), w.target + " CI " + num(e.ci));
    c.expect(near(e.cu, w.cu, 1e-9) && near(e.cu, ocu, 1e-9), w.target + " CU " + num(e.cu));
  }
}

void additivity(Check& c) {
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> u(-2, 2);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + trial % 3;  // 2..4 features
    std::vector<FeatureDescriptor> fs;
    std::vector<double> w(n);
    double span_total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double lo = u(rng), hi = lo + 0.5 + std::abs(u(rng));
      fs.push_back(FeatureDescriptor::continuous("f" + std::to_string(i), lo, hi));
      w[i] = u(rng);
      span_total += std::abs(w[i]) * (hi - lo);
    }
    FeatureSpace space(fs);
    LinearModel model({w}, {u(rng)});
    Context ctx;
    for (const auto& f : fs) ctx.values.push_back(std::uniform_real_distribution<double>(f.lower, f.upper)(rng));
    // The global range of a linear model over a box is known in closed form.
    const double base = model.batch_predict(Matrix::from_rows({ctx.values}, n))(0, 0);
    OutputSpec spec("y", 0, base - span_total, base + span_total);

    // Random split into two disjoint non-empty sets.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    const std::size_t cut = 1 + rng() % (n - 1);
    FeatureSet s(order.begin(), order.begin() + cut), t(order.begin() + cut, order.end());
    std::sort(s.begin(), s.end());
    std::sort(t.begin(), t.end());
    FeatureSet st = s;
    st.insert(st.end(), t.begin(), t.end());
    std::sort(st.begin(), st.end());
    ConceptTree tree({{"S", {s, {}}}, {"T", {t, {}}}, {"ST", {st, {}}}}, n);

    EstimatorConfig cfg;
    cfg.grid_levels = 2 + trial % 5;
    auto r = explain(model, space, ctx, spec, {"S", "T", "ST"}, tree, cfg);
    const double gap = find(r, "ST").ci - find(r, "S").ci - find(r, "T").ci;
    c.expect(std::abs(gap) <= 1e-9, "trial " + std::to_string(trial) + " gap " + num(gap));
  }
}

void position_law(Check& c) {
  std::mt19937_64 rng(202);
  std::uniform_real_distribution<double> u(-5, 5);
  for (int trial = 0; trial < 100; ++trial) {
    const double lo = u(rng), hi = lo + 0.1 + std::abs(u(rng));
    FeatureSpace space({FeatureDescriptor::continuous("x", lo, hi)});
    const double w = 0.01 + std::abs(u(rng));
    LinearModel model({{w}}, {u(rng)});
    EstimatorConfig cfg;
    cfg.grid_levels = 2 + rng() % 40;
    const auto levels = grid_levels_for(space[0], cfg.grid_levels);
    const std::size_t k = rng() % levels.size();
    const Context ctx{{levels[k]}};
    auto r = explain(model, space, ctx, OutputSpec("y", 0, -1e3, 1e3), {"x"}, {}, cfg);
    const double position = (levels[k] - lo) / (hi - lo);
    c.expect(near(r.entries[0].cu, position, 1e-9),
             "trial " + std::to_string(trial) + " cu " + num(r.entries[0].cu) + " vs " + num(position));
  }
}

void bounds_and_degeneracy(Check& c) {
  std::mt19937_64 rng(303);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng() % 4;
    std::vector<FeatureDescriptor> fs;
    for (std::size_t i = 0; i < n; ++i) {
      if (rng() % 4 == 0)
        fs.push_back(FeatureDescriptor::categorical("f" + std::to_string(i), {"a", "b", "c"}));
      else
        fs.push_back(FeatureDescriptor::continuous("f" + std::to_string(i), -1, 1));
    }
    FeatureSpace space(fs);
    std::vector<double> coef(3 * n);
    for (auto& v : coef) v = u(rng);
    const bool constant = trial % 5 == 0;
    FunctionModel model("fuzz", n, 1, [&, constant](std::span<const double> x) {
      if (constant) return std::vector<double>{coef[0]};
      double y = 0;
      for (std::size_t i = 0; i < x.size(); ++i)
        y += coef[3 * i] * std::sin(3 * coef[3 * i + 1] * x[i]) + coef[3 * i + 2] * x[i] * x[(i + 1) % x.size()];
      return std::vector<double>{y};
    });
    Context ctx;
    for (const auto& f : fs)
      ctx.values.push_back(f.kind == FeatureKind::kCategorical ? double(rng() % 3) : u(rng));
    std::vector<std::string> targets;
    for (const auto& f : fs)
      if (rng() % 2 == 0) targets.push_back(f.name);
    if (targets.empty()) targets.push_back(fs[0].name);
    ConceptTree tree({{"all", {[&] {
                                 FeatureSet all(n);
                                 std::iota(all.begin(), all.end(), 0);
                                 return all;
                               }(),
                               {}}}},
                     n);
    targets.push_back("all");

    EstimatorConfig cfg;
    cfg.strategy = trial % 2 ? Strategy::kMonteCarlo : Strategy::kGrid;
    cfg.grid_levels = 2 + rng() % 9;
    cfg.mc_samples = 1 + rng() % 200;
    cfg.seed = rng();
    // A deliberately tight absolute range exercises the clamp.
    const double half = trial % 3 == 0 ? 0.5 : 2.0 * double(n);
    auto r = explain(model, space, ctx, OutputSpec("y", 0, -half, half), targets, tree, cfg);
    for (const auto& e : r.entries) {
      const std::string where = "trial " + std::to_string(trial) + " " + e.target;
      c.expect(e.ci >= 0.0 && e.ci <= 1.0, where + " ci " + num(e.ci));
      c.expect(e.cu >= 0.0 && e.cu <= 1.0, where + " cu " + num(e.cu));
      if (constant) c.expect(e.ci == 0.0 && e.cu == 0.5 && e.degenerate, where + " constant model not degenerate");
    }
  }
}

void nonlinear_utility(Check& c) {
  FeatureSpace space({FeatureDescriptor::continuous("x1", 0, 1)});
  FunctionModel tent("tent", 1, 1, [](std::span<const double> x) {
    return std::vector<double>{1 - 2 * std::abs(x[0] - 0.5)};
  });
  EstimatorConfig cfg;
  const double tol = 1.0 / double(cfg.grid_levels - 1);
  auto cu = [&](double x) {
    return explain(tent, space, Context{{x}}, OutputSpec("y", 0), {"x1"}, {}, cfg).entries[0].cu;
  };
  const double lo = cu(0.1), hi = cu(0.9), mid = cu(0.5);
  c.expect(near(lo, hi, tol), "CU(0.1)=" + num(lo) + " CU(0.9)=" + num(hi));
  c.expect(lo < mid && hi < mid, "edges not below the centre");
  c.expect(mid == 1.0, "CU(0.5)=" + num(mid));
}

void refinement_monotone(Check& c) {
  FeatureSpace space({FeatureDescriptor::continuous("x1", 0, 1)});
  FunctionModel peak("peak", 1, 1, [](std::span<const double> x) {
    return std::vector<double>{1 - std::abs(x[0] - 0.5)};
  });
  EstimatorConfig cfg;
  cfg.grid_levels = 2;
  cfg.refinement = 6;
  auto rounds = refine_extrema_rounds(peak, space, Context{{0.0}}, {0}, cfg, 0);
  c.expect(rounds.size() == 7, "rounds " + std::to_string(rounds.size()));
  c.expect(rounds[1].cmax > rounds[0].cmax, "round 1 cmax " + num(rounds[1].cmax) + " vs " + num(rounds[0].cmax));
  for (std::size_t r = 1; r < rounds.size(); ++r) {
    c.expect(rounds[r].cmax >= rounds[r - 1].cmax, "cmax fell at round " + std::to_string(r));
    c.expect(rounds[r].cmin <= rounds[r - 1].cmin, "cmin rose at round " + std::to_string(r));
  }
}

std::vector<std::size_t> descending(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] > v[b]; });
  return idx;
}

void baseline_agreement(Check& c) {
  std::mt19937_64 rng(404);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 2 + trial % 3;
    const auto space = unit_box(n);
    // Well separated magnitudes: 1, 2, 3, ... shuffled, with random signs.
    std::vector<double> mag(n);
    std::iota(mag.begin(), mag.end(), 1.0);
    std::shuffle(mag.begin(), mag.end(), rng);
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i) w[i] = (rng() % 2 ? 1 : -1) * mag[i] * (0.9 + 0.2 * u(rng));
    LinearModel model({w}, {0.0});
    const double total = std::accumulate(w.begin(), w.end(), 0.0, [](double a, double b) { return a + std::abs(b); });
    OutputSpec spec("y", 0, -total, total);

    std::vector<std::string> names;
    for (std::size_t i = 0; i < n; ++i) names.push_back(space[i].name);
    Context ctx;
    for (std::size_t i = 0; i < n; ++i) ctx.values.push_back(u(rng));
    auto report = explain(model, space, ctx, spec, names, {}, EstimatorConfig{});

    std::vector<double> absw(n);
    for (std::size_t i = 0; i < n; ++i) absw[i] = std::abs(w[i]);
    const auto want = descending(absw);
    for (std::size_t k = 0; k < n; ++k)
      c.expect(report.entries[k].target == names[want[k]], "trial " + std::to_string(trial) + " CI order");

    std::vector<Context> refs;
    for (int i = 0; i < 200; ++i) {
      Context r;
      for (std::size_t j = 0; j < n; ++j) r.values.push_back(u(rng));
      refs.push_back(r);
    }
    EstimatorConfig cfg;
    cfg.seed = rng();
    const auto perm = descending(permutation_importance(model, space, refs, spec, cfg));
    c.expect(perm == want, "trial " + std::to_string(trial) + " permutation order");
  }
}

void determinism(Check& c) {
  const std::vector<std::string> invocations{
      "explain demo_deflategate --context 10.5,0.5,0.5 --targets psi,size,grip,throwability,catchability --json",
      "explain demo_deflategate --context 11,0.3,0.8 --output compliance --strategy mc --seed 42 --json",
      "contrast demo_deflategate --context 12.5,0.5,0.5 --output throwability,compliance --seed 7 --json",
  };
  for (const auto& args : invocations) {
    const auto a = run_cli(args);
    const auto b = run_cli(args);
    c.expect(!a.empty() && a.front() == '{', "no JSON from: " + args);
    c.expect(a == b, "reports differ for: " + args);
  }
}

void categorical_oracle(Check& c) {
  FeatureSpace space({FeatureDescriptor::categorical("a", {"a0", "a1", "a2"}),
                      FeatureDescriptor::categorical("b", {"b0", "b1", "b2", "b3"})});
  std::mt19937_64 rng(505);
  std::uniform_real_distribution<double> u(-3, 3);
  std::map<std::vector<std::size_t>, std::vector<double>> rows;
  double table[3][4];
  double gmin = INFINITY, gmax = -INFINITY;
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 4; ++j) {
      table[i][j] = u(rng);
      rows[{i, j}] = {table[i][j]};
      gmin = std::min(gmin, table[i][j]);
      gmax = std::max(gmax, table[i][j]);
    }
  TableModel model({3, 4}, rows);
  OutputSpec spec("y", 0, gmin, gmax);
  ConceptTree tree({{"ab", {{0, 1}, {}}}}, 2);

  for (std::size_t ci = 0; ci < 3; ++ci)
    for (std::size_t cj = 0; cj < 4; ++cj) {
      auto r = explain(model, space, Context{{double(ci), double(cj)}}, spec, {"a", "b", "ab"}, tree, {});
      const double out = table[ci][cj];
      auto check = [&](const std::string& target, bool vary_a, bool vary_b) {
        double mn = INFINITY, mx = -INFINITY;
        for (std::size_t i = 0; i < 3; ++i)
          for (std::size_t j = 0; j < 4; ++j) {
            if ((!vary_a && i != ci) || (!vary_b && j != cj)) continue;
            mn = std::min(mn, table[i][j]);
            mx = std::max(mx, table[i][j]);
          }
        const auto& e = find(r, target);
        const double want_ci = (mx - mn) / (gmax - gmin);
        const double want_cu = mx == mn ? 0.5 : (out - mn) / (mx - mn);
        const std::string where = target + " at (" + std::to_string(ci) + "," + std::to_string(cj) + ")";
        c.expect(e.cmin == mn && e.cmax == mx, where + " extrema");
        c.expect(e.ci == want_ci, where + " CI " + num(e.ci) + " vs " + num(want_ci));
        c.expect(e.cu == want_cu, where + " CU " + num(e.cu) + " vs " + num(want_cu));
      };
      check("a", true, false);
      check("b", false, true);
      check("ab", true, true);
    }
}

}  // namespace

int main() {
  std::cout << "kernels: " << kernels::isa_name(kernels::active_isa()) << '\n';
  criterion("closed-form CI/CU on the linear demo vs dense-grid oracle (1e-9)", closed_form);
  criterion("CI additivity over disjoint sets, 100 random linear models (1e-9)", additivity);
  criterion("CU equals normalized grid position, 100 monotone cases (1e-9)", position_law);
  criterion("CI, CU within [0,1] and constant models degenerate, 1000 fuzz cases", bounds_and_degeneracy);
  criterion("non-linear utility: CU(0.1) == CU(0.9) < CU(0.5) == 1", nonlinear_utility);
  criterion("refinement: cmax strictly up at round 1, never down after", refinement_monotone);
  criterion("baseline agreement: CI and permutation order follow |w|", baseline_agreement);
  criterion("determinism: identical CLI runs give byte-identical JSON", determinism);
  criterion("exhaustive categorical oracle on a 3x4 table (exact)", categorical_oracle);
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << '\n';
  return failures == 0 ? 0 : 1;
}
