#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "actdet/annot.hpp"
#include "actdet/geom.hpp"

namespace actdet {

struct Detection {
  std::string video_id;
  FrameIndex frame_index = 0;
  ClassId class_id = 0;
  double confidence = 0.0;  // in [0, 1]
  BBox bbox;

  friend bool operator==(const Detection&, const Detection&) = default;
};

// Throws Error if confidence is outside [0, 1] or the class id is negative.
void validate(const Detection& det);

// Detections JSONL, one detection per line:
//   {"video_id": str, "frame": int, "class": int, "conf": float,
//    "x_min": float, "y_min": float, "x_max": float, "y_max": float}
std::vector<Detection> parse_detections(std::istream& in);
std::vector<Detection> parse_detections(std::string_view text);
std::string serialize_detections(std::span<const Detection> dets);

// ---------------------------------------------------------------------------
// Matching

struct DetectionMatch {
  bool true_positive = false;
  std::optional<std::size_t> gt_index;  // index into the ground-truth list
  // IoU with the matched box for a TP; best IoU against any same-class box
  // for an FP (0 when the frame has none).
  double iou = 0.0;
};

struct MatchOutcome {
  std::vector<DetectionMatch> matches;  // parallel to the detection list
};

/// Greedy matching for one frame. Detections are visited in descending
/// confidence (ties keep input order); each takes the highest-IoU unmatched
/// ground-truth box of its own class (ties to the lower index) if that IoU
/// reaches `iou_threshold`, and is a false positive otherwise. Duplicate
/// detections of an already matched box are false positives.
///
/// Throws Error when the detections span more than one (video, frame) or the
/// threshold is outside (0, 1].
MatchOutcome match_frame(std::span<const GroundTruthBox> gt, std::span<const Detection> dets,
                         double iou_threshold);

// ---------------------------------------------------------------------------
// Precision / recall

struct RankedFlag {
  double confidence = 0.0;
  bool true_positive = false;
};

struct PRPoint {
  double recall = 0.0;
  double precision = 0.0;

  friend bool operator==(const PRPoint&, const PRPoint&) = default;
};

struct PRCurve {
  std::vector<PRPoint> points;  // one per ranked detection
  std::int64_t total_gt = 0;
};

/// Point k (1-based) has precision TP@k / k and recall TP@k / total_gt.
/// `flags` must be sorted by confidence, descending. total_gt == 0 yields an
/// empty curve. Throws Error on unsorted input, negative total_gt, or more
/// true positives than total_gt.
PRCurve pr_curve(std::span<const RankedFlag> flags, std::int64_t total_gt);

/// All-point interpolated AP: the integral over recall of the precision
/// envelope max{precision_j : recall_j >= r}. Empty curve gives 0.
double average_precision(const PRCurve& curve);

// ---------------------------------------------------------------------------
// Full evaluation

struct EvalConfig {
  double iou_threshold = 0.5;
  double conf_floor = 0.0;  // detections below it are ignored
  // Size of the class space; inferred from the annotations (max id + 1) when unset.
  std::optional<ClassId> num_classes;
  // Worker threads for per-frame matching; 0 = hardware concurrency. The
  // report does not depend on this value.
  unsigned threads = 1;
};

struct ClassResult {
  ClassId class_id = 0;
  double ap = 0.0;  // NaN when the class has no ground truth
  std::int64_t true_positives = 0;
  std::int64_t false_positives = 0;
  std::int64_t num_gt = 0;
};

struct EvalReport {
  std::vector<ClassResult> classes;  // indexed by class id
  double frame_map = 0.0;            // mean AP over classes with ground truth
  double localization_recall = 0.0;  // class-agnostic matches / GT boxes
  double classification_accuracy = 0.0;  // label agreement among those matches; NaN if none
  std::int64_t total_gt = 0;
  std::int64_t localized = 0;
  std::int64_t correctly_classified = 0;
  double iou_threshold = 0.5;
};

/// Frame-level evaluation. Per class, detections are matched frame by frame
/// (match_frame), pooled over all frames in (video_id, frame_index, input)
/// order, ranked by confidence and turned into an AP. Detections on frames
/// that have no annotation line count as false positives.
///
/// Throws Error for duplicate annotation frames, invalid detections, class
/// ids outside the class space, or an invalid config.
EvalReport evaluate(std::span<const FrameAnnotation> annotations,
                    std::span<const Detection> detections, const EvalConfig& config = {});

// CSV: "action_index,ap_percent" rows (action_index = class id + 1), a blank
// line, then "map,loc_recall,cls_acc" and one summary row.
std::string report_csv(const EvalReport& report);

// Per-action AP table: "action_index,<model_name>" with AP in percent.
std::string table3_csv(const EvalReport& report, std::string_view model_name);

// Fixed-point rendering used by the report writers; NaN prints as "nan".
std::string format_fixed(double value, int precision);

}  // namespace actdet
