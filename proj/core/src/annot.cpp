#include "actdet/annot.hpp"

#include <algorithm>
#include <charconv>
#include <istream>
#include <limits>
#include <map>
#include <set>
#include <numeric>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "actdet/error.hpp"
#include "jsonl.hpp"
#include "random.hpp"

namespace actdet {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

GroundTruthBox parse_box(const json& j, std::size_t line) {
  if (!j.is_object()) throw ParseError(line, "box entry is not an object");
  const auto cls = detail::require_int(j, "class", line);
  if (cls < 0) throw ParseError(line, "negative class id");
  if (cls > std::numeric_limits<ClassId>::max()) throw ParseError(line, "class id out of range");
  try {
    return GroundTruthBox{static_cast<ClassId>(cls),
                          BBox(detail::require_number(j, "x_min", line),
                               detail::require_number(j, "y_min", line),
                               detail::require_number(j, "x_max", line),
                               detail::require_number(j, "y_max", line))};
  } catch (const InvalidBox& e) {
    throw ParseError(line, e.what());
  }
}

}  // namespace

AnnotationSet parse_annotations(std::istream& in) {
  AnnotationSet out;
  std::unordered_map<std::string, std::unordered_set<FrameIndex>> seen;
  detail::for_each_json_line(in, [&](const json& j, std::size_t line) {
    if (!j.is_object()) throw ParseError(line, "expected a JSON object");
    FrameAnnotation frame;
    frame.video_id = detail::require_string(j, "video_id", line);
    frame.frame_index = detail::require_int(j, "frame", line);
    if (frame.frame_index < 0) throw ParseError(line, "negative frame index");
    const auto it = j.find("boxes");
    if (it == j.end() || !it->is_array()) throw ParseError(line, "missing or non-array \"boxes\"");
    frame.boxes.reserve(it->size());
    for (const auto& b : *it) frame.boxes.push_back(parse_box(b, line));
    if (!seen[frame.video_id].insert(frame.frame_index).second) {
      throw ParseError(line, "duplicate frame " + std::to_string(frame.frame_index) +
                                 " in video \"" + frame.video_id + "\"");
    }
    out.frames.push_back(std::move(frame));
  });
  out.clips = reconstruct_clips(out.frames);
  return out;
}

AnnotationSet parse_annotations(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_annotations(in);
}

std::vector<ClipRecord> reconstruct_clips(std::span<const FrameAnnotation> frames) {
  std::vector<std::string> video_order;
  std::unordered_map<std::string, std::map<ClassId, std::vector<FrameIndex>>> labelled;
  for (const auto& f : frames) {
    auto [it, inserted] = labelled.try_emplace(f.video_id);
    if (inserted) video_order.push_back(f.video_id);
    for (const auto& b : f.boxes) it->second[b.class_id].push_back(f.frame_index);
  }

  std::vector<ClipRecord> clips;
  for (const auto& video : video_order) {
    const auto first = clips.size();
    for (auto& [cls, idx] : labelled[video]) {
      std::sort(idx.begin(), idx.end());
      idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
      std::size_t run = 0;
      for (std::size_t i = 1; i <= idx.size(); ++i) {
        if (i == idx.size() || idx[i] != idx[i - 1] + 1) {
          clips.push_back(ClipRecord{video, cls, idx[run], idx[i - 1]});
          run = i;
        }
      }
    }
    std::sort(clips.begin() + static_cast<std::ptrdiff_t>(first), clips.end(),
              [](const ClipRecord& a, const ClipRecord& b) {
                return a.start != b.start ? a.start < b.start : a.class_id < b.class_id;
              });
  }
  return clips;
}

std::string serialize_annotations(std::span<const FrameAnnotation> frames) {
  std::string out;
  for (const auto& f : frames) {
    ordered_json j;
    j["video_id"] = f.video_id;
    j["frame"] = f.frame_index;
    j["boxes"] = ordered_json::array();
    for (const auto& b : f.boxes) {
      ordered_json box;
      box["class"] = b.class_id;
      box["x_min"] = b.bbox.x_min();
      box["y_min"] = b.bbox.y_min();
      box["x_max"] = b.bbox.x_max();
      box["y_max"] = b.bbox.y_max();
      j["boxes"].push_back(std::move(box));
    }
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::string serialize_clips(std::span<const ClipRecord> clips) {
  std::string out;
  for (const auto& c : clips) {
    ordered_json j;
    j["video_id"] = c.video_id;
    j["class"] = c.class_id;
    j["start"] = c.start;
    j["end"] = c.end;
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::vector<ClipRecord> parse_clips(std::istream& in) {
  std::vector<ClipRecord> clips;
  detail::for_each_json_line(in, [&](const json& j, std::size_t line) {
    if (!j.is_object()) throw ParseError(line, "expected a JSON object");
    ClipRecord c;
    c.video_id = detail::require_string(j, "video_id", line);
    const auto cls = detail::require_int(j, "class", line);
    if (cls < 0 || cls > std::numeric_limits<ClassId>::max()) {
      throw ParseError(line, "class id out of range");
    }
    c.class_id = static_cast<ClassId>(cls);
    c.start = detail::require_int(j, "start", line);
    c.end = detail::require_int(j, "end", line);
    if (c.start < 0 || c.start > c.end) throw ParseError(line, "need 0 <= start <= end");
    clips.push_back(std::move(c));
  });
  return clips;
}

std::vector<std::string> parse_labels(std::istream& in) {
  std::vector<std::string> labels;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    labels.push_back(line);
  }
  return labels;
}

std::string label_for(std::span<const std::string> labels, ClassId class_id) {
  if (class_id >= 0 && static_cast<std::size_t>(class_id) < labels.size() &&
      !labels[static_cast<std::size_t>(class_id)].empty()) {
    return labels[static_cast<std::size_t>(class_id)];
  }
  return "class_" + std::to_string(class_id);
}

DatasetStats dataset_stats(std::span<const ClipRecord> clips) {
  std::map<ClassId, ClassStats> per_class;
  DatasetStats stats;
  for (const auto& c : clips) {
    auto& s = per_class[c.class_id];
    s.class_id = c.class_id;
    s.clip_count += 1;
    s.frame_count += c.length();
    stats.total_clips += 1;
    stats.total_frames += c.length();
  }
  stats.classes.reserve(per_class.size());
  for (const auto& [_, s] : per_class) stats.classes.push_back(s);
  // per_class iterates by ascending id, so a stable sort keeps the tie order.
  std::stable_sort(stats.classes.begin(), stats.classes.end(),
                   [](const ClassStats& a, const ClassStats& b) { return a.clip_count > b.clip_count; });
  return stats;
}

std::string stats_csv(const DatasetStats& stats, std::span<const std::string> labels) {
  std::string out = "action_index,label,clips,frames\n";
  std::size_t rank = 1;
  for (const auto& s : stats.classes) {
    out += std::to_string(rank++) + "," + detail::csv_field(label_for(labels, s.class_id)) + "," +
           std::to_string(s.clip_count) + "," + std::to_string(s.frame_count) + "\n";
  }
  return out;
}

FilterResult filter_top_classes(std::span<const ClipRecord> clips, std::int64_t min_clips) {
  if (min_clips < 1) throw Error("min_clips must be >= 1");
  const auto stats = dataset_stats(clips);
  FilterResult result;
  std::unordered_map<ClassId, ClassId> lookup;
  for (const auto& s : stats.classes) {
    if (s.clip_count < min_clips) continue;
    const auto new_id = static_cast<ClassId>(result.remap.size());
    result.remap.push_back(ClassRemap{s.class_id, new_id, s.clip_count});
    lookup.emplace(s.class_id, new_id);
  }
  if (result.remap.empty()) {
    throw Error("no class has at least " + std::to_string(min_clips) + " clips");
  }
  for (const auto& c : clips) {
    const auto it = lookup.find(c.class_id);
    if (it == lookup.end()) continue;
    auto kept = c;
    kept.class_id = it->second;
    result.clips.push_back(std::move(kept));
  }
  return result;
}

std::vector<FrameAnnotation> apply_remap(std::span<const FrameAnnotation> frames,
                                         std::span<const ClassRemap> remap) {
  std::unordered_map<ClassId, ClassId> lookup;
  for (const auto& r : remap) lookup.emplace(r.old_id, r.new_id);
  std::vector<FrameAnnotation> out;
  out.reserve(frames.size());
  for (const auto& f : frames) {
    FrameAnnotation g{f.video_id, f.frame_index, {}};
    for (const auto& b : f.boxes) {
      const auto it = lookup.find(b.class_id);
      if (it != lookup.end()) g.boxes.push_back(GroundTruthBox{it->second, b.bbox});
    }
    out.push_back(std::move(g));
  }
  return out;
}

SplitRatio SplitRatio::parse(std::string_view text) {
  const auto bad = [&] { return Error("invalid split ratio \"" + std::string(text) + "\""); };
  const auto parse_int = [&](std::string_view s) {
    std::int64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) throw bad();
    return v;
  };

  SplitRatio r;
  if (const auto colon = text.find(':'); colon != std::string_view::npos) {
    r.train = parse_int(text.substr(0, colon));
    r.test = parse_int(text.substr(colon + 1));
  } else {
    // Decimal fraction "0.d1d2..." read exactly as d1d2.../10^k.
    if (!text.starts_with("0.") && !text.starts_with(".")) throw bad();
    const auto digits = text.substr(text.find('.') + 1);
    if (digits.empty() || digits.size() > 15) throw bad();
    std::int64_t scale = 1;
    for (std::size_t i = 0; i < digits.size(); ++i) scale *= 10;
    r.train = parse_int(digits);
    r.test = scale - r.train;
  }
  if (r.train <= 0 || r.test <= 0) throw bad();
  const auto g = std::gcd(r.train, r.test);
  r.train /= g;
  r.test /= g;
  return r;
}

std::string SplitRatio::to_string() const {
  return std::to_string(train) + ":" + std::to_string(test);
}

std::int64_t SplitRatio::train_count(std::int64_t n) const noexcept {
  const std::int64_t total = train + test;
  const std::int64_t rounded = (2 * n * train + total) / (2 * total);
  return std::clamp<std::int64_t>(rounded, 1, n - 1);
}

SplitResult stratified_split(std::span<const ClipRecord> clips, SplitRatio ratio,
                             std::uint64_t seed) {
  if (ratio.train <= 0 || ratio.test <= 0) throw Error("split ratio must lie strictly in (0, 1)");

  std::map<ClassId, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < clips.size(); ++i) by_class[clips[i].class_id].push_back(i);

  std::vector<bool> to_train(clips.size(), false);
  for (auto& [cls, members] : by_class) {
    const auto n = static_cast<std::int64_t>(members.size());
    if (n < 2) {
      throw Error("class " + std::to_string(cls) + " has " + std::to_string(n) +
                  " clip(s); at least 2 are needed to place it in both train and test");
    }
    detail::Rng rng(detail::derive_seed(seed, static_cast<std::uint64_t>(cls)));
    rng.shuffle(std::span<std::size_t>(members));
    const auto k = ratio.train_count(n);
    for (std::int64_t i = 0; i < k; ++i) to_train[members[static_cast<std::size_t>(i)]] = true;
  }

  SplitResult result;
  result.seed = seed;
  result.ratio = ratio;
  for (std::size_t i = 0; i < clips.size(); ++i) {
    (to_train[i] ? result.train : result.test).push_back(clips[i]);
  }
  return result;
}

std::string split_manifest_json(const SplitResult& split) {
  std::set<ClassId> classes;
  for (const auto& c : split.train) classes.insert(c.class_id);
  ordered_json j;
  j["seed"] = split.seed;
  j["ratio"] = split.ratio.to_string();
  j["train_fraction"] = split.ratio.fraction();
  j["classes"] = classes.size();
  j["train_clips"] = split.train.size();
  j["test_clips"] = split.test.size();
  return j.dump(2) + "\n";
}

}  // namespace actdet
