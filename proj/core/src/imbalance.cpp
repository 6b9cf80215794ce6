#include "actdet/imbalance.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "actdet/error.hpp"

namespace actdet {

namespace {

void check_beta(double beta) {
  if (!(beta >= 0.0 && beta < 1.0)) throw Error("beta must lie in [0, 1)");
}

void check_alpha(double alpha) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw Error("alpha must be a finite value > 0");
}

}  // namespace

ImbalanceParams::ImbalanceParams(double alpha_, double beta_) : alpha(alpha_), beta(beta_) {
  check_alpha(alpha);
  check_beta(beta);
}

const ClassWeight& ClassWeights::at(ClassId class_id) const {
  const auto it = std::lower_bound(entries.begin(), entries.end(), class_id,
                                   [](const ClassWeight& w, ClassId id) { return w.class_id < id; });
  if (it == entries.end() || it->class_id != class_id) {
    throw Error("no weight for class " + std::to_string(class_id));
  }
  return *it;
}

double focal_weight(double p, double alpha) {
  check_alpha(alpha);
  if (!(p >= 0.0 && p <= 1.0)) throw Error("probability must lie in [0, 1]");
  return std::pow(1.0 - p, alpha);
}

double effective_number_weight(std::int64_t n, double beta, WeightDirection direction) {
  check_beta(beta);
  if (n < 0) throw Error("negative frame count");
  if (n == 0) return 0.0;
  const double effective = (1.0 - std::pow(beta, double(n))) / (1.0 - beta);
  return direction == WeightDirection::kAsPrinted ? effective : 1.0 / effective;
}

ClassWeights effective_number_weights(std::span<const ClassStats> counts,
                                      const ImbalanceParams& params, WeightDirection direction) {
  check_alpha(params.alpha);
  check_beta(params.beta);
  ClassWeights out;
  out.params = params;
  out.direction = direction;
  out.entries.reserve(counts.size());
  for (const auto& c : counts) {
    out.entries.push_back(ClassWeight{c.class_id, c.frame_count,
                                      effective_number_weight(c.frame_count, params.beta, direction)});
  }
  std::sort(out.entries.begin(), out.entries.end(),
            [](const ClassWeight& a, const ClassWeight& b) { return a.class_id < b.class_id; });
  const auto dup = std::adjacent_find(out.entries.begin(), out.entries.end(),
                                      [](const ClassWeight& a, const ClassWeight& b) {
                                        return a.class_id == b.class_id;
                                      });
  if (dup != out.entries.end()) throw Error("class " + std::to_string(dup->class_id) + " listed twice");
  return out;
}

ClassWeights weights_from_stats(const DatasetStats& stats, const ImbalanceParams& params,
                                WeightDirection direction) {
  return effective_number_weights(stats.classes, params, direction);
}

double combined_weight(double p, ClassId class_id, const ClassWeights& weights) {
  const double w2 = weights.at(class_id).w2;
  return focal_weight(p, weights.params.alpha) * w2;
}

double weighted_focal_ce(std::span<const double> probs, ClassId target, const ClassWeights& weights) {
  double sum = 0.0;
  for (const double p : probs) {
    if (!(p >= 0.0 && p <= 1.0)) throw Error("probabilities must lie in [0, 1]");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-6) throw Error("probabilities must sum to 1 (got " + std::to_string(sum) + ")");
  if (target < 0 || static_cast<std::size_t>(target) >= probs.size()) {
    throw Error("target class " + std::to_string(target) + " outside the probability vector");
  }
  const double p = probs[static_cast<std::size_t>(target)];
  const double w = combined_weight(p, target, weights);
  if (w == 0.0) return 0.0;
  return -w * std::log(std::max(p, 1e-12));
}

std::string weights_csv(const ClassWeights& weights) {
  std::string out = "action_index,n_frames,w2\n";
  for (const auto& e : weights.entries) {
    nlohmann::json v = e.w2;
    out += std::to_string(e.class_id + 1) + "," + std::to_string(e.n_frames) + "," + v.dump() + "\n";
  }
  return out;
}

}  // namespace actdet
