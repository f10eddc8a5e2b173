#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace ciu {

// Error classes map onto the CLI exit-code contract: ValidationError -> 2,
// ModelError -> 3. Anything else escaping the engine is a bug.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class ModelError : public Error {
 public:
  using Error::Error;
};

enum class FeatureKind { kContinuous, kCategorical };

struct FeatureDescriptor {
  std::string name;
  FeatureKind kind = FeatureKind::kContinuous;
  double lower = 0.0;
  double upper = 1.0;
  std::vector<std::string> levels;  // categorical only, declaration order = code

  static FeatureDescriptor continuous(std::string name, double lower, double upper);
  static FeatureDescriptor categorical(std::string name, std::vector<std::string> levels);

  bool is_categorical() const { return kind == FeatureKind::kCategorical; }
  std::size_t level_count() const { return levels.size(); }

  // Code of a named level, or nullopt.
  std::optional<std::size_t> level_code(const std::string& level) const;
};

class FeatureSpace {
 public:
  explicit FeatureSpace(std::vector<FeatureDescriptor> features);

  std::size_t size() const { return features_.size(); }
  const FeatureDescriptor& operator[](std::size_t i) const { return features_.at(i); }
  const std::vector<FeatureDescriptor>& features() const { return features_; }
  std::optional<std::size_t> index_of(const std::string& name) const;

 private:
  std::vector<FeatureDescriptor> features_;
};

// One concrete input instance. Categorical components hold their level code.
struct Context {
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  double operator[](std::size_t i) const { return values[i]; }
  friend bool operator==(const Context&, const Context&) = default;
};

// A raw context component as typed by a user: a number, or a level name.
using RawValue = std::variant<double, std::string>;

Context validate_context(const FeatureSpace& space, std::span<const RawValue> raw);
Context validate_context(const FeatureSpace& space, std::span<const double> raw);

// Human rendering of one context component (level name for categoricals).
std::string format_feature_value(const FeatureDescriptor& feature, double value);

struct OutputSpec {
  std::string name;
  std::size_t index = 0;
  double absmin = 0.0;
  double absmax = 1.0;

  OutputSpec() = default;
  OutputSpec(std::string name, std::size_t index, double absmin = 0.0, double absmax = 1.0);
};

using FeatureSet = std::vector<std::size_t>;  // sorted ascending, unique

// Named intermediate concepts. A concept lists basic features directly,
// child concepts, or both. Cycles are rejected at construction.
class ConceptTree {
 public:
  struct Node {
    FeatureSet features;
    std::vector<std::string> children;
  };

  ConceptTree() = default;
  ConceptTree(std::map<std::string, Node> concepts, std::size_t feature_count);

  bool contains(const std::string& name) const { return concepts_.contains(name); }
  bool empty() const { return concepts_.empty(); }
  const std::map<std::string, Node>& concepts() const { return concepts_; }
  // Concepts not referenced as a child of any other concept.
  const std::vector<std::string>& roots() const { return roots_; }

  FeatureSet resolve(const std::string& name) const;

 private:
  void resolve_into(const std::string& name, std::vector<bool>& seen, std::vector<std::string>& stack) const;

  std::map<std::string, Node> concepts_;
  std::vector<std::string> roots_;
  std::size_t feature_count_ = 0;
};

FeatureSet resolve_concept(const ConceptTree& tree, const std::string& name);

struct CiuResult {
  std::string target;
  std::size_t output = 0;
  FeatureSet feature_set;
  double ci = 0.0;
  double cu = 0.0;
  double cmin = 0.0;
  double cmax = 0.0;
  double out_value = 0.0;
  bool degenerate = false;
  bool ci_clamped = false;  // contextual extrema strayed outside [absmin, absmax]
  std::size_t probes_used = 0;
};

}  // namespace ciu
