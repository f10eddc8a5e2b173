#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "ciu/core.hpp"
#include "ciu/engine.hpp"

namespace ciu {

// Verbal bands over [0, 1]. Band k covers [threshold[k-1], threshold[k]),
// the last band is closed at 1.0.
class LabelScale {
 public:
  struct Band {
    double upper;
    std::string label;
  };

  explicit LabelScale(std::vector<Band> bands);

  static LabelScale default_importance();
  static LabelScale default_utility();

  std::size_t band_index(double value) const;
  const std::string& label(double value) const { return bands_[band_index(value)].label; }
  const std::vector<Band>& bands() const { return bands_; }

 private:
  std::vector<Band> bands_;
};

inline constexpr const char* kNeutralUtility = "neutral (feature has no effect here)";

std::string label_importance(double ci, const LabelScale& scale);
std::string label_utility(double cu, bool degenerate, const LabelScale& scale);

// Sentence templates with {target} {ci} {cu} {value} {output} {importance}
// {utility} placeholders. `per_target` overrides `entry` for named targets.
struct Templates {
  std::string entry =
      "{target} is {importance} (CI={ci}) and its current value {value} is {utility} (CU={cu}) for {output}.";
  std::map<std::string, std::string> per_target;
};

struct NarrativeStyle {
  LabelScale importance = LabelScale::default_importance();
  LabelScale utility = LabelScale::default_utility();
  Templates templates;
};

// Two decimals with trailing zeros dropped: 0.50 -> "0.5", 1.00 -> "1".
std::string format_score(double v);

std::string render_explanation(const CiuReport& report, const FeatureSpace& space, const NarrativeStyle& style = {});
// Entries with a zero CU delta are skipped; top_k clamps to what remains.
std::string render_contrast(const ContrastReport& report, std::size_t top_k);

}  // namespace ciu
