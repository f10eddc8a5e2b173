#include "ciu/narrative.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>

namespace ciu {

LabelScale::LabelScale(std::vector<Band> bands) : bands_(std::move(bands)) {
  if (bands_.empty()) throw ValidationError("label scale needs at least one band");
  for (std::size_t i = 0; i < bands_.size(); ++i) {
    if (!std::isfinite(bands_[i].upper) || bands_[i].upper <= 0.0)
      throw ValidationError("label scale thresholds must be positive and finite");
    if (i > 0 && !(bands_[i].upper > bands_[i - 1].upper))
      throw ValidationError("label scale thresholds must be strictly increasing");
    if (bands_[i].label.empty()) throw ValidationError("label scale band with an empty label");
  }
  if (bands_.back().upper != 1.0) throw ValidationError("label scale must end at threshold 1.0");
}

LabelScale LabelScale::default_importance() {
  return LabelScale({{0.25, "not important"}, {0.5, "somewhat important"}, {0.75, "important"}, {1.0, "highly important"}});
}

LabelScale LabelScale::default_utility() {
  return LabelScale({{0.2, "very bad"}, {0.4, "bad"}, {0.6, "acceptable"}, {0.8, "good"}, {1.0, "very good"}});
}

std::size_t LabelScale::band_index(double value) const {
  if (!(value >= 0.0 && value <= 1.0)) throw std::out_of_range("label value outside [0, 1]: " + format_number(value));
  for (std::size_t i = 0; i + 1 < bands_.size(); ++i)
    if (value < bands_[i].upper) return i;
  return bands_.size() - 1;
}

std::string label_importance(double ci, const LabelScale& scale) { return scale.label(ci); }

std::string label_utility(double cu, bool degenerate, const LabelScale& scale) {
  if (!(cu >= 0.0 && cu <= 1.0)) throw std::out_of_range("utility outside [0, 1]: " + format_number(cu));
  if (degenerate) return kNeutralUtility;
  return scale.label(cu);
}

std::string format_score(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  std::string s = buf;
  if (s.find('.') != std::string::npos) {
    while (s.back() == '0') s.pop_back();
    if (s.back() == '.') s.pop_back();
  }
  if (s == "-0") s = "0";
  return s;
}

namespace {

std::string substitute(std::string text, const std::map<std::string, std::string>& vars) {
  std::string out;
  for (std::size_t i = 0; i < text.size();) {
    if (text[i] == '{') {
      auto close = text.find('}', i);
      if (close != std::string::npos) {
        auto it = vars.find(text.substr(i + 1, close - i - 1));
        if (it != vars.end()) {
          out += it->second;
          i = close + 1;
          continue;
        }
      }
    }
    out += text[i++];
  }
  return out;
}

std::string target_value(const CiuResult& e, const Context& context, const FeatureSpace& space) {
  if (e.feature_set.size() == 1) return format_feature_value(space[e.feature_set[0]], context[e.feature_set[0]]);
  std::string out = "(";
  for (std::size_t i = 0; i < e.feature_set.size(); ++i) {
    const auto idx = e.feature_set[i];
    out += (i ? ", " : "") + space[idx].name + "=" + format_feature_value(space[idx], context[idx]);
  }
  return out + ")";
}

// Labels are chosen from the value as serialized (%.9g), so the band agrees
// with the number the reader sees in reports.
double as_reported(double v) { return std::strtod(format_number(v).c_str(), nullptr); }

std::string context_text(const Context& context, const FeatureSpace& space) {
  std::string out;
  for (std::size_t i = 0; i < context.size(); ++i)
    out += (i ? ", " : "") + space[i].name + "=" + format_feature_value(space[i], context[i]);
  return out;
}

}  // namespace

std::string render_explanation(const CiuReport& report, const FeatureSpace& space, const NarrativeStyle& style) {
  std::string out = "Explanation of " + report.output.name;
  if (!report.entries.empty()) out += " = " + format_score(report.entries.front().out_value);
  out += " for context " + context_text(report.context, space) + ":\n";
  for (const auto& e : report.entries) {
    auto it = style.templates.per_target.find(e.target);
    const std::string& tmpl = it != style.templates.per_target.end() ? it->second : style.templates.entry;
    out += substitute(tmpl, {{"target", e.target},
                             {"ci", format_score(e.ci)},
                             {"cu", format_score(e.cu)},
                             {"value", target_value(e, report.context, space)},
                             {"output", report.output.name},
                             {"importance", label_importance(as_reported(e.ci), style.importance)},
                             {"utility", label_utility(as_reported(e.cu), e.degenerate, style.utility)}});
    out += '\n';
  }
  return out;
}

std::string render_contrast(const ContrastReport& report, std::size_t top_k) {
  if (top_k < 1) throw ValidationError("top-k must be at least 1");
  const auto& a = report.output_a.name;
  const auto& b = report.output_b.name;
  std::string out = "Output " + a + " was preferred over " + b + " mainly because:\n";
  std::size_t shown = 0;
  for (const auto& e : report.entries) {
    if (shown == top_k) break;
    if (std::abs(e.cu_delta) <= 1e-12) continue;
    out += "  for " + e.target + ", the context favors " + (e.cu_delta > 0 ? a : b) + " (CU " + format_score(e.cu_a) +
           " vs " + format_score(e.cu_b) + ").\n";
    ++shown;
  }
  if (shown == 0) out += "  no target meaningfully distinguishes the outputs.\n";
  return out;
}

}  // namespace ciu
