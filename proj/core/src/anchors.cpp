#include "actdet/anchors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include <json.hpp>

#include "actdet/error.hpp"
#include "random.hpp"

namespace actdet {

using ordered_json = nlohmann::ordered_json;

ShapeSample::ShapeSample(double w_, double h_) : w(w_), h(h_) {
  if (!(w > 0.0 && w <= 1.0) || !(h > 0.0 && h <= 1.0)) {
    throw Error("shape sample needs 0 < w <= 1 and 0 < h <= 1, got (" + std::to_string(w) + ", " +
                std::to_string(h) + ")");
  }
}

std::vector<ShapeSample> shapes_from_annotations(std::span<const FrameAnnotation> frames,
                                                 double image_w, double image_h) {
  if (!(image_w > 0.0) || !(image_h > 0.0)) throw Error("image size must be positive");
  std::vector<ShapeSample> out;
  for (const auto& f : frames) {
    for (const auto& b : f.boxes) {
      const double w = b.bbox.width() / image_w;
      const double h = b.bbox.height() / image_h;
      if (w > 1.0 || h > 1.0) {
        throw Error("box in video \"" + f.video_id + "\" frame " + std::to_string(f.frame_index) +
                    " is larger than the " + std::to_string(image_w) + "x" + std::to_string(image_h) +
                    " image");
      }
      out.emplace_back(w, h);
    }
  }
  return out;
}

double anchor_distance(const ShapeSample& a, const ShapeSample& b, AnchorMetric metric) noexcept {
  if (metric == AnchorMetric::kEuclidean) {
    const double dw = a.w - b.w;
    const double dh = a.h - b.h;
    return dw * dw + dh * dh;
  }
  const double inter = std::min(a.w, b.w) * std::min(a.h, b.h);
  return 1.0 - inter / (a.w * a.h + b.w * b.h - inter);
}

namespace {

void validate_options(std::size_t n, const KMeansOptions& o) {
  if (o.k < 1) throw Error("k must be >= 1");
  if (n < static_cast<std::size_t>(o.k)) {
    throw Error("k-means needs at least k samples (k = " + std::to_string(o.k) + ", got " +
                std::to_string(n) + ")");
  }
  if (!(o.tol > 0.0)) throw Error("tolerance must be > 0");
  if (o.max_iter < 1) throw Error("max_iter must be >= 1");
  if (o.restarts < 1) throw Error("restarts must be >= 1");
}

struct Clustering {
  std::vector<ShapeSample> centroids;
  std::vector<int> assignment;
  std::vector<double> dist;  // distance of each sample to its centroid
};

double assign(std::span<const ShapeSample> samples, Clustering& c, AnchorMetric metric) {
  c.assignment.resize(samples.size());
  c.dist.resize(samples.size());
  double total = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    int best = 0;
    double best_d = anchor_distance(samples[i], c.centroids[0], metric);
    for (std::size_t j = 1; j < c.centroids.size(); ++j) {
      const double d = anchor_distance(samples[i], c.centroids[j], metric);
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(j);
      }
    }
    c.assignment[i] = best;
    c.dist[i] = best_d;
    total += best_d;
  }
  return total;
}

// Moves empty clusters onto the worst-fit sample and reassigns. Each move
// strictly lowers the objective, so this terminates.
double reseed_empty(std::span<const ShapeSample> samples, Clustering& c, AnchorMetric metric,
                    double inertia) {
  for (std::size_t guard = 0; guard < c.centroids.size(); ++guard) {
    std::vector<int> counts(c.centroids.size(), 0);
    for (const int a : c.assignment) ++counts[static_cast<std::size_t>(a)];
    const auto empty = std::find(counts.begin(), counts.end(), 0);
    if (empty == counts.end()) break;
    const auto far = static_cast<std::size_t>(
        std::max_element(c.dist.begin(), c.dist.end()) - c.dist.begin());
    if (!(c.dist[far] > 0.0)) break;  // every sample sits on a centroid already
    c.centroids[static_cast<std::size_t>(empty - counts.begin())] = samples[far];
    inertia = assign(samples, c, metric);
  }
  return inertia;
}

std::vector<std::size_t> cluster_sizes(const Clustering& c) {
  std::vector<std::size_t> n(c.centroids.size(), 0);
  for (const int a : c.assignment) ++n[static_cast<std::size_t>(a)];
  return n;
}

void update_means(std::span<const ShapeSample> samples, Clustering& c) {
  std::vector<double> sw(c.centroids.size(), 0.0);
  std::vector<double> sh(c.centroids.size(), 0.0);
  const auto n = cluster_sizes(c);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto a = static_cast<std::size_t>(c.assignment[i]);
    sw[a] += samples[i].w;
    sh[a] += samples[i].h;
  }
  for (std::size_t j = 0; j < c.centroids.size(); ++j) {
    if (n[j] == 0) continue;
    // Means of values in (0, 1] stay in (0, 1] up to rounding; clamp the rounding.
    const double w = std::min(1.0, sw[j] / double(n[j]));
    const double h = std::min(1.0, sh[j] / double(n[j]));
    c.centroids[j] = ShapeSample(w, h);
  }
}

double inertia_of(std::span<const ShapeSample> samples, const Clustering& c, AnchorMetric metric) {
  double total = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    total += anchor_distance(samples[i], c.centroids[static_cast<std::size_t>(c.assignment[i])], metric);
  }
  return total;
}

// Single-point moves with mean recomputation (Euclidean objective only).
// Moving x from cluster a (size n_a > 1) to b changes the inertia by
//   n_b / (n_b + 1) |x - mu_b|^2 - n_a / (n_a - 1) |x - mu_a|^2.
bool single_point_pass(std::span<const ShapeSample> samples, Clustering& c) {
  auto n = cluster_sizes(c);
  std::vector<double> mw(c.centroids.size()), mh(c.centroids.size());
  for (std::size_t j = 0; j < c.centroids.size(); ++j) {
    mw[j] = c.centroids[j].w;
    mh[j] = c.centroids[j].h;
  }
  bool moved = false;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto a = static_cast<std::size_t>(c.assignment[i]);
    if (n[a] <= 1) continue;
    const auto sq = [&](std::size_t j) {
      const double dw = samples[i].w - mw[j];
      const double dh = samples[i].h - mh[j];
      return dw * dw + dh * dh;
    };
    const double remove_gain = double(n[a]) / double(n[a] - 1) * sq(a);
    std::size_t best = a;
    double best_cost = remove_gain * (1.0 - 1e-12);
    for (std::size_t b = 0; b < c.centroids.size(); ++b) {
      if (b == a) continue;
      const double add_cost = double(n[b]) / double(n[b] + 1) * sq(b);
      if (add_cost < best_cost) {
        best_cost = add_cost;
        best = b;
      }
    }
    if (best == a) continue;
    const double x = samples[i].w, y = samples[i].h;
    mw[a] = (double(n[a]) * mw[a] - x) / double(n[a] - 1);
    mh[a] = (double(n[a]) * mh[a] - y) / double(n[a] - 1);
    mw[best] = (double(n[best]) * mw[best] + x) / double(n[best] + 1);
    mh[best] = (double(n[best]) * mh[best] + y) / double(n[best] + 1);
    --n[a];
    ++n[best];
    c.assignment[i] = static_cast<int>(best);
    moved = true;
  }
  return moved;
}

AnchorSet refine(std::span<const ShapeSample> samples, std::vector<ShapeSample> init,
                 const KMeansOptions& o) {
  Clustering c{std::move(init), {}, {}};
  AnchorSet out;
  double inertia = reseed_empty(samples, c, o.metric, assign(samples, c, o.metric));
  out.inertia_history.push_back(inertia);

  int iter = 0;
  while (iter < o.max_iter) {
    ++iter;
    update_means(samples, c);
    const double next = reseed_empty(samples, c, o.metric, assign(samples, c, o.metric));
    out.inertia_history.push_back(next);
    const double prev = inertia;
    inertia = next;
    if (prev == 0.0 || (prev - next) / prev < o.tol) break;
  }

  if (o.metric == AnchorMetric::kEuclidean && c.centroids.size() > 1) {
    const Clustering lloyd = c;
    for (int pass = 0; pass < 1000; ++pass) {
      update_means(samples, c);
      if (!single_point_pass(samples, c)) break;
    }
    update_means(samples, c);
    const double refined = inertia_of(samples, c, o.metric);
    if (refined < inertia) {
      inertia = refined;
      out.inertia_history.push_back(inertia);
    } else {
      c = lloyd;
    }
  }

  out.centroids = std::move(c.centroids);
  out.assignment = std::move(c.assignment);
  out.inertia = inertia;
  out.k = static_cast<int>(out.centroids.size());
  out.seed = o.seed;
  out.iterations = iter;
  return out;
}

std::vector<ShapeSample> farthest_first(std::span<const ShapeSample> samples, int k,
                                        std::uint64_t seed, AnchorMetric metric) {
  detail::Rng rng(seed);
  std::vector<ShapeSample> centroids;
  centroids.reserve(static_cast<std::size_t>(k));
  centroids.push_back(samples[rng.below(samples.size())]);
  std::vector<double> nearest(samples.size(), std::numeric_limits<double>::infinity());
  while (centroids.size() < static_cast<std::size_t>(k)) {
    std::size_t far = 0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      nearest[i] = std::min(nearest[i], anchor_distance(samples[i], centroids.back(), metric));
      if (nearest[i] > nearest[far]) far = i;
    }
    centroids.push_back(samples[far]);
  }
  return centroids;
}

}  // namespace

AnchorSet kmeans_anchors(std::span<const ShapeSample> samples, const KMeansOptions& options) {
  validate_options(samples.size(), options);
  AnchorSet best;
  for (int r = 0; r < options.restarts; ++r) {
    const std::uint64_t run_seed =
        r == 0 ? options.seed : detail::derive_seed(options.seed, static_cast<std::uint64_t>(r));
    auto run = refine(samples, farthest_first(samples, options.k, run_seed, options.metric), options);
    if (r == 0 || run.inertia < best.inertia) best = std::move(run);
  }
  return best;
}

AnchorSet kmeans_anchors_from(std::span<const ShapeSample> samples,
                              std::span<const ShapeSample> initial, const KMeansOptions& options) {
  auto o = options;
  o.k = static_cast<int>(initial.size());
  validate_options(samples.size(), o);
  return refine(samples, std::vector<ShapeSample>(initial.begin(), initial.end()), o);
}

KSelection select_k(std::span<const ShapeSample> samples, int k_min, int k_max,
                    const KMeansOptions& options) {
  if (k_min < 1 || k_min >= k_max) throw Error("need 1 <= k_min < k_max");
  std::set<std::pair<double, double>> distinct;
  for (const auto& s : samples) distinct.emplace(s.w, s.h);
  if (static_cast<std::size_t>(k_max) > distinct.size()) {
    throw Error("k_max = " + std::to_string(k_max) + " exceeds the " +
                std::to_string(distinct.size()) + " distinct shapes");
  }

  KSelection sel;
  for (int k = k_min; k <= k_max; ++k) {
    auto o = options;
    o.k = k;
    auto run = kmeans_anchors(samples, o);
    bool reran = false;
    if (!sel.runs.empty() && run.inertia > sel.runs.back().inertia) {
      const auto& prev = sel.runs.back();
      std::vector<ShapeSample> init = prev.centroids;
      std::size_t worst = 0;
      double worst_d = -1.0;
      for (std::size_t i = 0; i < samples.size(); ++i) {
        const double d = anchor_distance(
            samples[i], prev.centroids[static_cast<std::size_t>(prev.assignment[i])], o.metric);
        if (d > worst_d) {
          worst_d = d;
          worst = i;
        }
      }
      init.push_back(samples[worst]);
      auto warm = kmeans_anchors_from(samples, init, o);
      warm.seed = o.seed;
      if (warm.inertia < run.inertia) run = std::move(warm);
      reran = true;
    }
    sel.profile.push_back(InertiaPoint{k, run.inertia, reran});
    sel.runs.push_back(std::move(run));
  }

  sel.chosen_k = k_min;
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i + 1 < sel.profile.size(); ++i) {
    const double d2 =
        sel.profile[i - 1].inertia - 2.0 * sel.profile[i].inertia + sel.profile[i + 1].inertia;
    if (d2 > best) {
      best = d2;
      sel.chosen_k = sel.profile[i].k;
    }
  }
  return sel;
}

std::string anchors_json(const AnchorSet& anchors) {
  auto sorted = anchors.centroids;
  std::stable_sort(sorted.begin(), sorted.end(), [](const ShapeSample& a, const ShapeSample& b) {
    const double aa = a.w * a.h, ba = b.w * b.h;
    return aa != ba ? aa < ba : a.w < b.w;
  });
  ordered_json j;
  j["k"] = anchors.k;
  j["inertia"] = anchors.inertia;
  j["seed"] = anchors.seed;
  j["anchors"] = ordered_json::array();
  for (const auto& s : sorted) j["anchors"].push_back({s.w, s.h});
  return j.dump() + "\n";
}

AnchorSet parse_anchors_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(std::string("malformed anchors JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("anchors") || !j["anchors"].is_array()) {
    throw Error("anchors JSON needs an \"anchors\" array");
  }
  AnchorSet out;
  for (const auto& a : j["anchors"]) {
    if (!a.is_array() || a.size() != 2 || !a[0].is_number() || !a[1].is_number()) {
      throw Error("each anchor must be a [w, h] pair");
    }
    out.centroids.emplace_back(a[0].get<double>(), a[1].get<double>());
  }
  if (out.centroids.empty()) throw Error("anchors JSON has no anchors");
  out.k = static_cast<int>(out.centroids.size());
  if (j.contains("k") && (!j["k"].is_number_integer() || j["k"].get<int>() != out.k)) {
    throw Error("anchors JSON \"k\" disagrees with the number of anchors");
  }
  if (j.contains("inertia") && j["inertia"].is_number()) out.inertia = j["inertia"].get<double>();
  if (j.contains("seed") && j["seed"].is_number_unsigned()) out.seed = j["seed"].get<std::uint64_t>();
  return out;
}

std::string inertia_profile_csv(std::span<const InertiaPoint> profile) {
  std::string out = "k,inertia\n";
  for (const auto& p : profile) {
    ordered_json v = p.inertia;  // shortest round-trip representation
    out += std::to_string(p.k) + "," + v.dump() + "\n";
  }
  return out;
}

}  // namespace actdet
