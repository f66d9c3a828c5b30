#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>

#include "focus/errors.hpp"
#include "focus/types.hpp"
#include "json.hpp"

namespace focus {

namespace {

bool strictly_increasing(const std::vector<std::uint64_t>& v) {
  return std::adjacent_find(v.begin(), v.end(), std::greater_equal<>()) == v.end();
}

}  // namespace

void FeatureBag::validate() const {
  if (features.rows() == 0 || features.cols() == 0) {
    throw Error("bag '" + id + "' is empty");
  }
  if (!features.all_finite()) throw NonFiniteValue("bag '" + id + "' has non-finite features");
  if (patch_indices.size() != features.rows()) {
    throw ShapeMismatch("bag '" + id + "': patch index count differs from token count");
  }
  if (!strictly_increasing(patch_indices)) {
    throw Error("bag '" + id + "': patch indices are not strictly increasing");
  }
}

FeatureBag FeatureBag::subset(std::span<const std::size_t> positions) const {
  FeatureBag out;
  out.id = id;
  out.label = label;
  out.features = features.select_rows(positions);
  out.patch_indices.reserve(positions.size());
  for (std::size_t p : positions) out.patch_indices.push_back(patch_indices[p]);
  return out;
}

void PromptSet::validate() const {
  if (knowledge.rows() == 0) throw Error("prompt set needs at least one knowledge row");
  if (learnable.rows() > 0 && learnable.cols() != knowledge.cols()) {
    throw ShapeMismatch("learnable and knowledge prompts differ in width");
  }
}

void CompressionTrace::check_subset_chain() const {
  if (!strictly_increasing(input_indices)) throw Error("trace input indices not increasing");
  const std::vector<std::uint64_t>* prev = &input_indices;
  for (const auto& rec : stage_records) {
    const auto& cur = rec.retained_original_indices;
    if (!strictly_increasing(cur)) {
      throw Error("trace stage '" + rec.stage_name + "' indices not strictly increasing");
    }
    if (!std::includes(prev->begin(), prev->end(), cur.begin(), cur.end())) {
      throw Error("trace stage '" + rec.stage_name + "' is not a subset of its input");
    }
    if (rec.input_size != prev->size()) {
      throw Error("trace stage '" + rec.stage_name + "' records a wrong input size");
    }
    prev = &cur;
  }
}

double CompressionTrace::overall_ratio() const noexcept {
  if (input_indices.empty()) return 0.0;
  return static_cast<double>(final_size()) / static_cast<double>(input_indices.size());
}

namespace {

// Thresholds are derived statistics; nine significant digits keeps trace
// files stable across summation orders.
double round_significant(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return std::strtod(buf, nullptr);
}

}  // namespace

std::string CompressionTrace::to_json(int indent) const {
  nlohmann::ordered_json j;
  j["input_size"] = input_indices.size();
  j["overall_ratio"] = overall_ratio();
  auto stages = nlohmann::ordered_json::array();
  for (const auto& rec : stage_records) {
    nlohmann::ordered_json s;
    s["stage"] = rec.stage_name;
    s["bypassed"] = rec.bypassed;
    if (std::isfinite(rec.threshold_used)) {
      s["threshold"] = round_significant(rec.threshold_used);
    } else {
      s["threshold"] = nullptr;
    }
    s["input_size"] = rec.input_size;
    s["retained"] = rec.retained_original_indices.size();
    s["ratio"] = rec.ratio();
    s["retained_indices"] = rec.retained_original_indices;
    stages.push_back(std::move(s));
  }
  j["stages"] = std::move(stages);
  return j.dump(indent) + "\n";
}

}  // namespace focus
