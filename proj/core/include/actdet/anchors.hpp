#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "actdet/annot.hpp"

namespace actdet {

/// Box shape normalized by image size: 0 < w <= 1, 0 < h <= 1.
struct ShapeSample {
  double w;
  double h;

  ShapeSample(double w, double h);

  friend bool operator==(const ShapeSample&, const ShapeSample&) = default;
};

/// Shape samples of every ground-truth box, normalized by the image size.
/// Throws Error if a box does not fit inside the image.
std::vector<ShapeSample> shapes_from_annotations(std::span<const FrameAnnotation> frames,
                                                 double image_w, double image_h);

enum class AnchorMetric {
  kEuclidean,  // squared distance on (w, h)
  kIou,        // 1 - IoU of corner-aligned boxes, as in YOLOv2
};

struct KMeansOptions {
  int k = 5;
  std::uint64_t seed = 42;
  double tol = 1e-6;  // relative inertia improvement
  int max_iter = 100;
  AnchorMetric metric = AnchorMetric::kEuclidean;
  int restarts = 1;  // >1 re-runs with derived seeds and keeps the lowest inertia
};

struct AnchorSet {
  std::vector<ShapeSample> centroids;
  std::vector<int> assignment;  // cluster index per input sample
  // Sum over samples of the metric distance to the assigned centroid.
  double inertia = 0.0;
  int k = 0;
  std::uint64_t seed = 0;
  int iterations = 0;
  // Objective after seeding and after every update step; non-increasing for
  // the Euclidean metric.
  std::vector<double> inertia_history;
};

/// K-means over box shapes.
///
/// Seeding is farthest-first: the first centroid is a sample picked by
/// `seed`, each further one the sample with the largest distance to its
/// nearest chosen centroid (lowest index on ties). Lloyd iterations run until
/// the relative inertia improvement drops below `tol` or `max_iter` is hit. A
/// cluster that empties is moved onto the sample farthest from its centroid.
/// With the Euclidean metric a final pass moves single points between
/// clusters while that lowers the inertia, so the result is stable under any
/// one-point reassignment.
///
/// Throws Error when samples.size() < k, k < 1, tol <= 0 or max_iter < 1.
AnchorSet kmeans_anchors(std::span<const ShapeSample> samples, const KMeansOptions& options);

/// Same refinement, started from caller-provided centroids instead of the
/// seeded initialization.
AnchorSet kmeans_anchors_from(std::span<const ShapeSample> samples,
                              std::span<const ShapeSample> initial, const KMeansOptions& options);

double anchor_distance(const ShapeSample& a, const ShapeSample& b, AnchorMetric metric) noexcept;

struct InertiaPoint {
  int k = 0;
  double inertia = 0.0;
  bool reran = false;  // true when warm-started from k-1 to keep the profile monotone
};

struct KSelection {
  int chosen_k = 0;
  std::vector<InertiaPoint> profile;
  std::vector<AnchorSet> runs;  // parallel to profile
};

/// Runs kmeans_anchors for every k in [k_min, k_max] and picks the elbow: the
/// k with the largest second difference I(k-1) - 2 I(k) + I(k+1), smaller k
/// on ties. Without an interior point (k_max = k_min + 1) k_min is chosen.
/// If some I(k) exceeds I(k-1), that k is re-run from the k-1 centroids plus
/// the worst-fit sample, which makes the profile non-increasing.
KSelection select_k(std::span<const ShapeSample> samples, int k_min, int k_max,
                    const KMeansOptions& options);

// {"k": K, "inertia": x, "seed": s, "anchors": [[w, h], ...]} with anchors
// sorted by area ascending.
std::string anchors_json(const AnchorSet& anchors);
AnchorSet parse_anchors_json(std::string_view text);

// CSV "k,inertia".
std::string inertia_profile_csv(std::span<const InertiaPoint> profile);

}  // namespace actdet
