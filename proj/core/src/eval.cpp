#include "actdet/eval.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <sstream>
#include <thread>
#include <unordered_map>

#include <json.hpp>

#include "actdet/error.hpp"
#include "jsonl.hpp"

namespace actdet {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Unevaluated sum hi + lo carrying about 106 bits.
struct DoubleDouble {
  double hi = 0.0;
  double lo = 0.0;

  // Adds num / den for integers below 2^53.
  void add_ratio(std::int64_t num, std::int64_t den) {
    const double n = double(num), d = double(den);
    const double q = n / d;
    const double r = std::fma(-q, d, n) / d;
    const double s = hi + q;
    const double bb = s - hi;
    const double e = (hi - (s - bb)) + (q - bb);
    lo += e + r;
    hi = s + lo;
    lo -= hi - s;
  }

  double divided_by(std::int64_t den) const {
    const double d = double(den);
    const double q = hi / d;
    const double rem = std::fma(-q, d, hi) + lo;
    return q + rem / d;
  }
};

void check_threshold(double thr) {
  if (!(thr > 0.0 && thr <= 1.0)) throw Error("IoU threshold must lie in (0, 1]");
}

// Greedy matching over the detections dets[idx[0..]] of one frame. When
// class_aware is false, every detection may match every box.
std::vector<DetectionMatch> greedy_match(std::span<const GroundTruthBox> gt,
                                         std::span<const Detection> dets,
                                         std::span<const std::size_t> idx, double thr,
                                         bool class_aware) {
  std::vector<std::size_t> order(idx.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return dets[idx[a]].confidence > dets[idx[b]].confidence;
  });

  std::vector<DetectionMatch> out(idx.size());
  std::vector<bool> taken(gt.size(), false);
  for (const auto o : order) {
    const auto& d = dets[idx[o]];
    double best_free = -1.0;
    std::size_t best_idx = 0;
    double best_any = 0.0;
    for (std::size_t g = 0; g < gt.size(); ++g) {
      if (class_aware && gt[g].class_id != d.class_id) continue;
      const double v = iou(gt[g].bbox, d.bbox);
      best_any = std::max(best_any, v);
      if (!taken[g] && v > best_free) {
        best_free = v;
        best_idx = g;
      }
    }
    auto& m = out[o];
    if (best_free >= thr) {
      taken[best_idx] = true;
      m.true_positive = true;
      m.gt_index = best_idx;
      m.iou = best_free;
    } else {
      m.iou = best_any;
    }
  }
  return out;
}

struct FrameSlot {
  const std::string* video_id = nullptr;
  FrameIndex frame_index = 0;
  const FrameAnnotation* annotation = nullptr;
  std::vector<std::size_t> dets;  // input order
};

struct FrameOutcome {
  std::vector<DetectionMatch> class_matches;  // parallel to FrameSlot::dets
  std::int64_t localized = 0;
  std::int64_t correct = 0;
};

struct FrameKeyHash {
  std::size_t operator()(const std::pair<std::string_view, FrameIndex>& k) const noexcept {
    return std::hash<std::string_view>{}(k.first) * 1000003u ^ std::hash<FrameIndex>{}(k.second);
  }
};

FrameOutcome process_frame(const FrameSlot& slot, std::span<const Detection> dets, double thr) {
  FrameOutcome out;
  const std::span<const GroundTruthBox> gt =
      slot.annotation ? std::span<const GroundTruthBox>(slot.annotation->boxes)
                      : std::span<const GroundTruthBox>();
  out.class_matches = greedy_match(gt, dets, slot.dets, thr, true);
  if (!gt.empty() && !slot.dets.empty()) {
    const auto agnostic = greedy_match(gt, dets, slot.dets, thr, false);
    for (std::size_t i = 0; i < agnostic.size(); ++i) {
      if (!agnostic[i].true_positive) continue;
      ++out.localized;
      if (gt[*agnostic[i].gt_index].class_id == dets[slot.dets[i]].class_id) ++out.correct;
    }
  }
  return out;
}

}  // namespace

void validate(const Detection& det) {
  if (!(det.confidence >= 0.0 && det.confidence <= 1.0)) {
    throw Error("detection confidence must lie in [0, 1]");
  }
  if (det.class_id < 0) throw Error("negative detection class id");
  if (det.frame_index < 0) throw Error("negative detection frame index");
}

std::vector<Detection> parse_detections(std::istream& in) {
  std::vector<Detection> dets;
  detail::for_each_json_line(in, [&](const json& j, std::size_t line) {
    if (!j.is_object()) throw ParseError(line, "expected a JSON object");
    try {
      const auto cls = detail::require_int(j, "class", line);
      if (cls < 0 || cls > std::numeric_limits<ClassId>::max()) {
        throw ParseError(line, "class id out of range");
      }
      Detection d{detail::require_string(j, "video_id", line),
                  detail::require_int(j, "frame", line),
                  static_cast<ClassId>(cls),
                  detail::require_number(j, "conf", line),
                  BBox(detail::require_number(j, "x_min", line), detail::require_number(j, "y_min", line),
                       detail::require_number(j, "x_max", line), detail::require_number(j, "y_max", line))};
      validate(d);
      dets.push_back(std::move(d));
    } catch (const ParseError&) {
      throw;
    } catch (const Error& e) {
      throw ParseError(line, e.what());
    }
  });
  return dets;
}

std::vector<Detection> parse_detections(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_detections(in);
}

std::string serialize_detections(std::span<const Detection> dets) {
  std::string out;
  for (const auto& d : dets) {
    ordered_json j;
    j["video_id"] = d.video_id;
    j["frame"] = d.frame_index;
    j["class"] = d.class_id;
    j["conf"] = d.confidence;
    j["x_min"] = d.bbox.x_min();
    j["y_min"] = d.bbox.y_min();
    j["x_max"] = d.bbox.x_max();
    j["y_max"] = d.bbox.y_max();
    out += j.dump();
    out += '\n';
  }
  return out;
}

MatchOutcome match_frame(std::span<const GroundTruthBox> gt, std::span<const Detection> dets,
                         double iou_threshold) {
  check_threshold(iou_threshold);
  for (const auto& d : dets) {
    if (d.video_id != dets.front().video_id || d.frame_index != dets.front().frame_index) {
      throw Error("match_frame: detections from more than one frame");
    }
  }
  std::vector<std::size_t> idx(dets.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return MatchOutcome{greedy_match(gt, dets, idx, iou_threshold, true)};
}

PRCurve pr_curve(std::span<const RankedFlag> flags, std::int64_t total_gt) {
  if (total_gt < 0) throw Error("pr_curve: negative ground-truth count");
  for (std::size_t i = 1; i < flags.size(); ++i) {
    if (flags[i].confidence > flags[i - 1].confidence) {
      throw Error("pr_curve: flags are not sorted by descending confidence");
    }
  }
  PRCurve curve;
  curve.total_gt = total_gt;
  if (total_gt == 0) return curve;
  curve.points.reserve(flags.size());
  std::int64_t tp = 0;
  for (std::size_t k = 0; k < flags.size(); ++k) {
    if (flags[k].true_positive) ++tp;
    if (tp > total_gt) throw Error("pr_curve: more true positives than ground-truth boxes");
    curve.points.push_back(PRPoint{double(tp) / double(total_gt), double(tp) / double(k + 1)});
  }
  return curve;
}

double average_precision(const PRCurve& curve) {
  const auto& pts = curve.points;
  if (pts.empty()) return 0.0;

  // Curves produced by pr_curve are TP@k / k and TP@k / total_gt; for those
  // the integral is (1 / total_gt) * sum over TP ranks of max_{j >= k} TP@j / j,
  // accumulated exactly and rounded once.
  const auto g = curve.total_gt;
  std::vector<std::int64_t> tp(pts.size());
  bool rational = g > 0 && g < (std::int64_t{1} << 26) && pts.size() < (std::size_t{1} << 26);
  for (std::size_t k = 0; rational && k < pts.size(); ++k) {
    tp[k] = std::llround(pts[k].recall * double(g));
    rational = tp[k] >= 0 && tp[k] <= std::int64_t(k + 1) &&
               pts[k].recall == double(tp[k]) / double(g) &&
               pts[k].precision == double(tp[k]) / double(k + 1) && (k == 0 || tp[k] >= tp[k - 1]);
  }
  if (rational) {
    // envelope as a fraction env_num[k] / env_den[k]
    std::vector<std::int64_t> env_num(pts.size()), env_den(pts.size());
    std::int64_t best_num = 0, best_den = 1;
    for (std::size_t k = pts.size(); k-- > 0;) {
      const std::int64_t num = tp[k], den = std::int64_t(k + 1);
      if (static_cast<__int128>(num) * best_den > static_cast<__int128>(best_num) * den) {
        best_num = num;
        best_den = den;
      }
      env_num[k] = best_num;
      env_den[k] = best_den;
    }
    DoubleDouble sum;
    std::int64_t prev = 0;
    for (std::size_t k = 0; k < pts.size(); ++k) {
      if (tp[k] > prev) sum.add_ratio((tp[k] - prev) * env_num[k], env_den[k]);
      prev = tp[k];
    }
    return sum.divided_by(g);
  }

  std::vector<double> envelope(pts.size());
  double running = 0.0;
  for (std::size_t k = pts.size(); k-- > 0;) {
    running = std::max(running, pts[k].precision);
    envelope[k] = running;
  }
  double ap = 0.0;
  double prev_recall = 0.0;
  for (std::size_t k = 0; k < pts.size(); ++k) {
    if (pts[k].recall > prev_recall) {
      ap += (pts[k].recall - prev_recall) * envelope[k];
      prev_recall = pts[k].recall;
    }
  }
  return ap;
}

EvalReport evaluate(std::span<const FrameAnnotation> annotations,
                    std::span<const Detection> detections, const EvalConfig& config) {
  check_threshold(config.iou_threshold);
  if (!(config.conf_floor >= 0.0 && config.conf_floor <= 1.0)) {
    throw Error("confidence floor must lie in [0, 1]");
  }

  ClassId num_classes = 0;
  for (const auto& f : annotations) {
    for (const auto& b : f.boxes) num_classes = std::max(num_classes, b.class_id + 1);
  }
  if (config.num_classes) {
    if (*config.num_classes < 0) throw Error("negative class count");
    if (num_classes > *config.num_classes) {
      throw Error("annotation class id " + std::to_string(num_classes - 1) +
                  " outside the configured class space");
    }
    num_classes = *config.num_classes;
  }

  std::unordered_map<std::pair<std::string_view, FrameIndex>, std::size_t, FrameKeyHash> lookup;
  std::vector<FrameSlot> slots;
  slots.reserve(annotations.size());
  for (const auto& f : annotations) {
    const auto [it, inserted] = lookup.try_emplace({f.video_id, f.frame_index}, slots.size());
    if (!inserted) {
      throw Error("duplicate annotation for video \"" + f.video_id + "\" frame " +
                  std::to_string(f.frame_index));
    }
    slots.push_back(FrameSlot{&f.video_id, f.frame_index, &f, {}});
  }
  for (std::size_t i = 0; i < detections.size(); ++i) {
    const auto& d = detections[i];
    validate(d);
    if (d.class_id >= num_classes) {
      throw Error("detection class id " + std::to_string(d.class_id) + " is not in the class space (" +
                  std::to_string(num_classes) + " classes)");
    }
    if (d.confidence < config.conf_floor) continue;
    const auto [it, inserted] = lookup.try_emplace({d.video_id, d.frame_index}, slots.size());
    if (inserted) slots.push_back(FrameSlot{&d.video_id, d.frame_index, nullptr, {}});
    slots[it->second].dets.push_back(i);
  }

  std::vector<std::size_t> order(slots.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (*slots[a].video_id != *slots[b].video_id) return *slots[a].video_id < *slots[b].video_id;
    return slots[a].frame_index < slots[b].frame_index;
  });

  // Per-frame matching writes into a slot-indexed buffer; merging below walks
  // the sorted order, so the result does not depend on scheduling.
  std::vector<FrameOutcome> outcomes(slots.size());
  unsigned threads = config.threads == 0 ? std::max(1u, std::thread::hardware_concurrency())
                                         : config.threads;
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(1, slots.size())));
  const auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t s = begin; s < end; ++s) {
      outcomes[s] = process_frame(slots[s], detections, config.iou_threshold);
    }
  };
  if (threads <= 1) {
    work(0, slots.size());
  } else {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (slots.size() + threads - 1) / threads;
    for (std::size_t begin = 0; begin < slots.size(); begin += chunk) {
      pool.emplace_back(work, begin, std::min(slots.size(), begin + chunk));
    }
  }

  EvalReport report;
  report.iou_threshold = config.iou_threshold;
  report.classes.resize(static_cast<std::size_t>(num_classes));
  for (ClassId c = 0; c < num_classes; ++c) report.classes[static_cast<std::size_t>(c)].class_id = c;

  std::vector<std::vector<RankedFlag>> flags(static_cast<std::size_t>(num_classes));
  for (const auto s : order) {
    const auto& slot = slots[s];
    if (slot.annotation) {
      for (const auto& b : slot.annotation->boxes) {
        ++report.classes[static_cast<std::size_t>(b.class_id)].num_gt;
        ++report.total_gt;
      }
    }
    const auto& outcome = outcomes[s];
    report.localized += outcome.localized;
    report.correctly_classified += outcome.correct;
    for (std::size_t i = 0; i < slot.dets.size(); ++i) {
      const auto& d = detections[slot.dets[i]];
      const bool tp = outcome.class_matches[i].true_positive;
      auto& cls = report.classes[static_cast<std::size_t>(d.class_id)];
      (tp ? cls.true_positives : cls.false_positives) += 1;
      flags[static_cast<std::size_t>(d.class_id)].push_back(RankedFlag{d.confidence, tp});
    }
  }

  double ap_sum = 0.0;
  std::int64_t with_gt = 0;
  for (auto& cls : report.classes) {
    if (cls.num_gt == 0) {
      cls.ap = kNaN;
      continue;
    }
    auto& f = flags[static_cast<std::size_t>(cls.class_id)];
    std::stable_sort(f.begin(), f.end(),
                     [](const RankedFlag& a, const RankedFlag& b) { return a.confidence > b.confidence; });
    cls.ap = average_precision(pr_curve(f, cls.num_gt));
    ap_sum += cls.ap;
    ++with_gt;
  }
  report.frame_map = with_gt > 0 ? ap_sum / double(with_gt) : kNaN;
  report.localization_recall =
      report.total_gt > 0 ? double(report.localized) / double(report.total_gt) : kNaN;
  report.classification_accuracy =
      report.localized > 0 ? double(report.correctly_classified) / double(report.localized) : kNaN;
  return report;
}

std::string format_fixed(double value, int precision) {
  if (std::isnan(value)) return "nan";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::fixed, precision);
  return std::string(buf, res.ptr);
}

std::string report_csv(const EvalReport& report) {
  std::string out = "action_index,ap_percent\n";
  for (const auto& c : report.classes) {
    out += std::to_string(c.class_id + 1) + "," + format_fixed(100.0 * c.ap, 4) + "\n";
  }
  out += "\nmap,loc_recall,cls_acc\n";
  out += format_fixed(report.frame_map, 6) + "," + format_fixed(report.localization_recall, 6) + "," +
         format_fixed(report.classification_accuracy, 6) + "\n";
  return out;
}

std::string table3_csv(const EvalReport& report, std::string_view model_name) {
  std::string out = "action_index," + detail::csv_field(std::string(model_name)) + "\n";
  for (const auto& c : report.classes) {
    out += std::to_string(c.class_id + 1) + "," + format_fixed(100.0 * c.ap, 1) + "\n";
  }
  return out;
}

}  // namespace actdet
