#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "actdet/annot.hpp"

namespace actdet {

/// Focal exponent alpha > 0 and effective-number base beta in [0, 1).
struct ImbalanceParams {
  double alpha = 2.0;
  double beta = 0.7;

  ImbalanceParams() = default;
  ImbalanceParams(double alpha, double beta);
};

enum class WeightDirection {
  kAsPrinted,  // (1 - beta^n) / (1 - beta): grows with n
  kInverted,   // (1 - beta) / (1 - beta^n): the usual class-balanced direction
};

struct ClassWeight {
  ClassId class_id = 0;
  std::int64_t n_frames = 0;
  double w2 = 0.0;
};

struct ClassWeights {
  std::vector<ClassWeight> entries;  // sorted by class id
  ImbalanceParams params;
  WeightDirection direction = WeightDirection::kAsPrinted;

  // Throws Error for a class without an entry.
  const ClassWeight& at(ClassId class_id) const;
};

/// (1 - p)^alpha. Throws Error unless p is in [0, 1] and alpha > 0.
double focal_weight(double p, double alpha);

/// Effective-number weight for a single count; n = 0 gives 0 in both directions.
double effective_number_weight(std::int64_t n, double beta,
                               WeightDirection direction = WeightDirection::kAsPrinted);

/// One entry per (class_id, frame count) pair. Throws Error for beta outside
/// [0, 1), negative counts or repeated class ids.
ClassWeights effective_number_weights(std::span<const ClassStats> counts,
                                      const ImbalanceParams& params,
                                      WeightDirection direction = WeightDirection::kAsPrinted);

ClassWeights weights_from_stats(const DatasetStats& stats, const ImbalanceParams& params,
                                WeightDirection direction = WeightDirection::kAsPrinted);

/// focal_weight(p, alpha) * w2(class_id).
double combined_weight(double p, ClassId class_id, const ClassWeights& weights);

/// w1(p_t) * w2(t) * -ln(max(p_t, 1e-12)) for target t. `probs` must lie in
/// [0, 1] and sum to 1 within 1e-6.
double weighted_focal_ce(std::span<const double> probs, ClassId target, const ClassWeights& weights);

// CSV "action_index,n_frames,w2" ordered by class id, action_index = id + 1.
std::string weights_csv(const ClassWeights& weights);

}  // namespace actdet
