#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "actdet/geom.hpp"

namespace actdet {

using ClassId = std::int32_t;
using FrameIndex = std::int64_t;

struct GroundTruthBox {
  ClassId class_id;
  BBox bbox;

  friend bool operator==(const GroundTruthBox&, const GroundTruthBox&) = default;
};

struct FrameAnnotation {
  std::string video_id;
  FrameIndex frame_index = 0;
  std::vector<GroundTruthBox> boxes;  // may be empty: unlabeled frame

  friend bool operator==(const FrameAnnotation&, const FrameAnnotation&) = default;
};

/// A contiguous run of frames in one video carrying one action label.
/// `start` and `end` are inclusive.
struct ClipRecord {
  std::string video_id;
  ClassId class_id = 0;
  FrameIndex start = 0;
  FrameIndex end = 0;

  FrameIndex length() const noexcept { return end - start + 1; }

  friend bool operator==(const ClipRecord&, const ClipRecord&) = default;
};

struct AnnotationSet {
  std::vector<FrameAnnotation> frames;  // input order
  std::vector<ClipRecord> clips;
};

/// Parses the annotation JSONL format, one frame per line:
///   {"video_id": str, "frame": int, "boxes": [{"class": int, "x_min": ..., ...}]}
/// Blank lines are skipped. Throws ParseError carrying the 1-based line number
/// on malformed JSON, missing fields, invalid boxes, negative class/frame, or a
/// duplicate (video_id, frame).
///
/// Clips are rebuilt from the frames: for each (video_id, class_id), maximal
/// runs of consecutive frame indices that carry at least one box of that
/// class. Clips are ordered by video first appearance, then start frame, then
/// class id.
AnnotationSet parse_annotations(std::istream& in);
AnnotationSet parse_annotations(std::string_view text);

std::vector<ClipRecord> reconstruct_clips(std::span<const FrameAnnotation> frames);

/// Inverse of parse_annotations: one JSON object per line, input order.
std::string serialize_annotations(std::span<const FrameAnnotation> frames);

// Clip list JSONL: {"video_id": str, "class": int, "start": int, "end": int}
std::string serialize_clips(std::span<const ClipRecord> clips);
std::vector<ClipRecord> parse_clips(std::istream& in);

// Optional id -> name sidecar: one label per line, line i names class i.
std::vector<std::string> parse_labels(std::istream& in);
std::string label_for(std::span<const std::string> labels, ClassId class_id);

// ---------------------------------------------------------------------------
// Statistics

struct ClassStats {
  ClassId class_id = 0;
  std::int64_t clip_count = 0;
  std::int64_t frame_count = 0;

  friend bool operator==(const ClassStats&, const ClassStats&) = default;
};

struct DatasetStats {
  std::vector<ClassStats> classes;  // clip_count descending, ties by class_id ascending
  std::int64_t total_clips = 0;
  std::int64_t total_frames = 0;
};

DatasetStats dataset_stats(std::span<const ClipRecord> clips);

// CSV with header action_index,label,clips,frames; action_index is the
// 1-based rank.
std::string stats_csv(const DatasetStats& stats, std::span<const std::string> labels);

// ---------------------------------------------------------------------------
// Class filtering

struct ClassRemap {
  ClassId old_id = 0;
  ClassId new_id = 0;
  std::int64_t clip_count = 0;
};

struct FilterResult {
  std::vector<ClipRecord> clips;  // surviving clips, class ids rewritten
  std::vector<ClassRemap> remap;  // ordered by new_id
};

/// Keeps classes with clip_count >= min_clips and re-indexes them densely
/// 0..C-1 in rank order (clip count descending, ties by old id). Throws Error
/// if min_clips < 1 or nothing survives.
FilterResult filter_top_classes(std::span<const ClipRecord> clips, std::int64_t min_clips);

// Applies a remap to frame annotations: boxes of dropped classes are removed,
// the rest get their new ids. Frames are kept even if they end up empty.
std::vector<FrameAnnotation> apply_remap(std::span<const FrameAnnotation> frames,
                                         std::span<const ClassRemap> remap);

// ---------------------------------------------------------------------------
// Train/test split

/// Train fraction as an exact rational, e.g. 7:3 -> train 7, test 3.
struct SplitRatio {
  std::int64_t train = 7;
  std::int64_t test = 3;

  // Accepts "7:3" or a decimal fraction such as "0.7".
  static SplitRatio parse(std::string_view text);
  double fraction() const noexcept { return double(train) / double(train + test); }
  std::string to_string() const;

  // round-half-up(n * train / (train + test)), clamped to [1, n - 1]. n >= 2.
  std::int64_t train_count(std::int64_t n) const noexcept;
};

struct SplitResult {
  std::vector<ClipRecord> train;  // input order
  std::vector<ClipRecord> test;   // input order
  std::uint64_t seed = 0;
  SplitRatio ratio;
};

/// Per-class split: each class's clips are shuffled with a stream derived from
/// (seed, class_id) and the first ratio.train_count(n) go to train. Every class
/// needs at least 2 clips, otherwise Error naming the class is thrown.
SplitResult stratified_split(std::span<const ClipRecord> clips, SplitRatio ratio,
                             std::uint64_t seed);

std::string split_manifest_json(const SplitResult& split);

}  // namespace actdet
