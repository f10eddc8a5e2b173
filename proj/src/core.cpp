#include "ciu/core.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

namespace ciu {

FeatureDescriptor FeatureDescriptor::continuous(std::string name, double lower, double upper) {
  FeatureDescriptor f;
  f.name = std::move(name);
  f.kind = FeatureKind::kContinuous;
  f.lower = lower;
  f.upper = upper;
  return f;
}

FeatureDescriptor FeatureDescriptor::categorical(std::string name, std::vector<std::string> levels) {
  FeatureDescriptor f;
  f.name = std::move(name);
  f.kind = FeatureKind::kCategorical;
  f.levels = std::move(levels);
  f.lower = 0.0;
  f.upper = f.levels.empty() ? 0.0 : static_cast<double>(f.levels.size() - 1);
  return f;
}

std::optional<std::size_t> FeatureDescriptor::level_code(const std::string& level) const {
  auto it = std::find(levels.begin(), levels.end(), level);
  if (it == levels.end()) return std::nullopt;
  return static_cast<std::size_t>(it - levels.begin());
}

FeatureSpace::FeatureSpace(std::vector<FeatureDescriptor> features) : features_(std::move(features)) {
  if (features_.empty()) throw ValidationError("feature space must declare at least one feature");
  std::set<std::string> names;
  for (const auto& f : features_) {
    if (f.name.empty()) throw ValidationError("feature with empty name");
    if (!names.insert(f.name).second) throw ValidationError("duplicate feature name '" + f.name + "'");
    if (f.is_categorical()) {
      std::set<std::string> distinct(f.levels.begin(), f.levels.end());
      if (distinct.size() != f.levels.size())
        throw ValidationError("feature '" + f.name + "' declares duplicate levels");
      if (distinct.size() < 2) throw ValidationError("feature '" + f.name + "' needs at least 2 distinct levels");
    } else {
      if (!std::isfinite(f.lower) || !std::isfinite(f.upper) || !(f.lower < f.upper))
        throw ValidationError("feature '" + f.name + "' needs finite bounds with lower < upper");
    }
  }
}

std::optional<std::size_t> FeatureSpace::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < features_.size(); ++i)
    if (features_[i].name == name) return i;
  return std::nullopt;
}

namespace {

std::string number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

double check_numeric(const FeatureDescriptor& f, double v) {
  if (f.is_categorical()) {
    double code = 0.0;
    if (!std::isfinite(v) || std::modf(v, &code) != 0.0 || v < 0 || v >= static_cast<double>(f.levels.size()))
      throw ValidationError("unknown level code " + number(v) + " for categorical feature '" + f.name + "'");
    return v;
  }
  if (!std::isfinite(v) || v < f.lower || v > f.upper)
    throw ValidationError("value " + number(v) + " for feature '" + f.name + "' is outside [" + number(f.lower) +
                          ", " + number(f.upper) + "]");
  return v;
}

void check_length(const FeatureSpace& space, std::size_t n) {
  if (n != space.size())
    throw ValidationError("context has " + std::to_string(n) + " values but the feature space declares " +
                          std::to_string(space.size()));
}

}  // namespace

Context validate_context(const FeatureSpace& space, std::span<const RawValue> raw) {
  check_length(space, raw.size());
  Context ctx;
  ctx.values.reserve(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const auto& f = space[i];
    if (const auto* text = std::get_if<std::string>(&raw[i])) {
      if (!f.is_categorical())
        throw ValidationError("feature '" + f.name + "' is continuous but got non-numeric value '" + *text + "'");
      auto code = f.level_code(*text);
      if (!code) throw ValidationError("unknown level '" + *text + "' for categorical feature '" + f.name + "'");
      ctx.values.push_back(static_cast<double>(*code));
    } else {
      ctx.values.push_back(check_numeric(f, std::get<double>(raw[i])));
    }
  }
  return ctx;
}

Context validate_context(const FeatureSpace& space, std::span<const double> raw) {
  check_length(space, raw.size());
  Context ctx;
  ctx.values.reserve(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) ctx.values.push_back(check_numeric(space[i], raw[i]));
  return ctx;
}

std::string format_feature_value(const FeatureDescriptor& feature, double value) {
  if (feature.is_categorical()) {
    auto code = static_cast<std::size_t>(value);
    if (code < feature.levels.size()) return feature.levels[code];
  }
  return number(value);
}

OutputSpec::OutputSpec(std::string name_, std::size_t index_, double absmin_, double absmax_)
    : name(std::move(name_)), index(index_), absmin(absmin_), absmax(absmax_) {
  if (!std::isfinite(absmin) || !std::isfinite(absmax) || !(absmin < absmax))
    throw ValidationError("output '" + name + "' needs finite bounds with absmin < absmax");
}

ConceptTree::ConceptTree(std::map<std::string, Node> concepts, std::size_t feature_count)
    : concepts_(std::move(concepts)), feature_count_(feature_count) {
  std::set<std::string> referenced;
  for (auto& [name, node] : concepts_) {
    std::sort(node.features.begin(), node.features.end());
    node.features.erase(std::unique(node.features.begin(), node.features.end()), node.features.end());
    for (auto idx : node.features)
      if (idx >= feature_count_)
        throw ValidationError("concept '" + name + "' references feature index " + std::to_string(idx) +
                              " outside the feature space");
    for (const auto& child : node.children) {
      if (!concepts_.contains(child))
        throw ValidationError("concept '" + name + "' references unknown concept '" + child + "'");
      referenced.insert(child);
    }
    if (node.features.empty() && node.children.empty())
      throw ValidationError("concept '" + name + "' is empty");
  }

  // Depth-first cycle check; the reported path names the cycle.
  enum class Mark { kNone, kActive, kDone };
  std::map<std::string, Mark> marks;
  std::vector<std::string> path;
  auto visit = [&](auto&& self, const std::string& name) -> void {
    auto& mark = marks[name];
    if (mark == Mark::kDone) return;
    if (mark == Mark::kActive) {
      std::string cycle;
      auto start = std::find(path.begin(), path.end(), name);
      for (auto it = start; it != path.end(); ++it) cycle += *it + " -> ";
      throw ValidationError("concept cycle: " + cycle + name);
    }
    mark = Mark::kActive;
    path.push_back(name);
    for (const auto& child : concepts_.at(name).children) self(self, child);
    path.pop_back();
    marks[name] = Mark::kDone;
  };
  for (const auto& [name, node] : concepts_) visit(visit, name);

  for (const auto& [name, node] : concepts_)
    if (!referenced.contains(name)) roots_.push_back(name);
}

void ConceptTree::resolve_into(const std::string& name, std::vector<bool>& seen,
                               std::vector<std::string>& stack) const {
  // Construction rejects cycles, so hitting one here means the invariant broke.
  if (std::find(stack.begin(), stack.end(), name) != stack.end())
    throw std::logic_error("concept cycle through '" + name + "' escaped construction");
  const auto& node = concepts_.at(name);
  for (auto idx : node.features) seen[idx] = true;
  stack.push_back(name);
  for (const auto& child : node.children) resolve_into(child, seen, stack);
  stack.pop_back();
}

FeatureSet ConceptTree::resolve(const std::string& name) const {
  if (!contains(name)) throw ValidationError("unknown concept '" + name + "'");
  std::vector<bool> seen(feature_count_, false);
  std::vector<std::string> stack;
  resolve_into(name, seen, stack);
  FeatureSet out;
  for (std::size_t i = 0; i < seen.size(); ++i)
    if (seen[i]) out.push_back(i);
  return out;
}

FeatureSet resolve_concept(const ConceptTree& tree, const std::string& name) { return tree.resolve(name); }

}  // namespace ciu
