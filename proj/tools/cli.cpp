#include "cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "actdet/anchors.hpp"
#include "actdet/annot.hpp"
#include "actdet/decode.hpp"
#include "actdet/error.hpp"
#include "actdet/eval.hpp"
#include "actdet/imbalance.hpp"

namespace actdet::cli {

namespace fs = std::filesystem;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open \"" + path + "\" for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Writes to `path`, or to `out` when path is empty or "-". Refuses to write
// over any of the command's input files.
void write_output(const std::string& path, const std::string& content, std::ostream& out,
                  const std::vector<std::string>& inputs) {
  if (path.empty() || path == "-") {
    out << content;
    out.flush();
    return;
  }
  for (const auto& in : inputs) {
    std::error_code ec;
    if (!in.empty() && fs::exists(path, ec) && fs::equivalent(path, in, ec)) {
      throw Error("refusing to overwrite input file \"" + in + "\"");
    }
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot open \"" + path + "\" for writing");
  f << content;
  if (!f) throw Error("write to \"" + path + "\" failed");
}

AnnotationSet load_annotations(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open \"" + path + "\" for reading");
  try {
    return parse_annotations(in);
  } catch (const ParseError& e) {
    throw Error(path + ":" + e.what());
  }
}

std::vector<std::string> load_labels(const std::string& path) {
  if (path.empty()) return {};
  std::istringstream in(read_file(path));
  return parse_labels(in);
}

// --config files hold "key = value" lines naming long options of the
// subcommand. Keys already given on the command line are left alone.
std::vector<std::string> config_args(const std::string& path, const CLI::App& sub,
                                     const std::vector<std::string>& given) {
  std::istringstream in(read_file(path));
  std::vector<std::string> extra;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    line = trim(line);
    if (line.empty() || line[0] == '#' || line[0] == '[') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(path + ": line " + std::to_string(lineno) + ": expected key=value");
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
      value = value.substr(1, value.size() - 2);
    }
    std::replace(key.begin(), key.end(), '_', '-');
    const std::string flag = "--" + key;
    const auto* opt = sub.get_option_no_throw(flag);
    if (opt == nullptr || key == "config") {
      throw Error(path + ": line " + std::to_string(lineno) + ": unknown key \"" + key + "\"");
    }
    const bool on_command_line = std::any_of(given.begin(), given.end(), [&](const std::string& a) {
      return a == flag || a.rfind(flag + "=", 0) == 0;
    });
    if (on_command_line) continue;
    if (opt->get_expected_max() == 0) {
      if (value == "true" || value == "1" || value == "yes") extra.push_back(flag);
    } else {
      extra.push_back(flag);
      extra.push_back(value);
    }
  }
  return extra;
}

struct Options {
  std::string config;
  std::string ann;
  std::string det;
  std::string labels;
  std::string out;
  std::string remap;
  std::string out_dir;
  std::string profile;
  std::string grid;
  std::string anchors;
  std::string video = "video";
  std::string ratio = "7:3";
  std::string metric = "euclidean";
  std::string report = "csv";
  std::string model_name = "model";
  std::uint64_t seed = 42;
  std::int64_t min_clips = 10;
  std::int64_t frame = 0;
  int k = 0;
  int k_min = 2;
  int k_max = 9;
  int max_iter = 100;
  int restarts = 1;
  int num_classes = -1;
  unsigned threads = 1;
  double tol = 1e-6;
  double iou = 0.5;
  double conf_floor = 0.0;
  double nms_iou = 0.45;
  double alpha = 2.0;
  double beta = 0.7;
  double image_w = 1280.0;
  double image_h = 720.0;
  bool invert_enf = false;
  bool no_nms = false;
};

int cmd_stats(const Options& o, std::ostream& out) {
  const auto set = load_annotations(o.ann);
  write_output(o.out, stats_csv(dataset_stats(set.clips), load_labels(o.labels)), out, {o.ann});
  return 0;
}

int cmd_filter(const Options& o, std::ostream& out, std::ostream& err) {
  const auto set = load_annotations(o.ann);
  const auto filtered = filter_top_classes(set.clips, o.min_clips);
  const auto frames = apply_remap(set.frames, filtered.remap);
  write_output(o.out, serialize_annotations(frames), out, {o.ann});
  std::string remap = "old_class,new_class,action_index,clips\n";
  for (const auto& r : filtered.remap) {
    remap += std::to_string(r.old_id) + "," + std::to_string(r.new_id) + "," +
             std::to_string(r.new_id + 1) + "," + std::to_string(r.clip_count) + "\n";
  }
  if (!o.remap.empty()) write_output(o.remap, remap, out, {o.ann});
  err << "kept " << filtered.remap.size() << " classes with >= " << o.min_clips << " clips\n";
  return 0;
}

int cmd_split(const Options& o, std::ostream& out, std::ostream& err) {
  const auto set = load_annotations(o.ann);
  const auto split = stratified_split(set.clips, SplitRatio::parse(o.ratio), o.seed);
  std::error_code ec;
  fs::create_directories(o.out_dir, ec);
  if (ec) throw Error("cannot create \"" + o.out_dir + "\": " + ec.message());
  const fs::path dir(o.out_dir);
  write_output((dir / "train_clips.jsonl").string(), serialize_clips(split.train), out, {o.ann});
  write_output((dir / "test_clips.jsonl").string(), serialize_clips(split.test), out, {o.ann});
  write_output((dir / "split_manifest.json").string(), split_manifest_json(split), out, {o.ann});
  err << "train " << split.train.size() << " clips, test " << split.test.size() << " clips\n";
  return 0;
}

int cmd_anchors(const Options& o, std::ostream& out, std::ostream& err) {
  const auto set = load_annotations(o.ann);
  const auto samples = shapes_from_annotations(set.frames, o.image_w, o.image_h);
  KMeansOptions km;
  km.seed = o.seed;
  km.tol = o.tol;
  km.max_iter = o.max_iter;
  km.restarts = o.restarts;
  km.metric = o.metric == "iou" ? AnchorMetric::kIou : AnchorMetric::kEuclidean;

  std::optional<KSelection> selection;
  if (o.k == 0 || !o.profile.empty()) {
    selection = select_k(samples, o.k_min, o.k_max, km);
    if (!o.profile.empty()) {
      write_output(o.profile, inertia_profile_csv(selection->profile), out, {o.ann});
    }
  }

  AnchorSet result;
  if (o.k > 0) {
    km.k = o.k;
    result = kmeans_anchors(samples, km);
  } else {
    const auto i = static_cast<std::size_t>(selection->chosen_k - o.k_min);
    result = selection->runs[i];
    err << "elbow selected k = " << selection->chosen_k << "\n";
  }
  write_output(o.out, anchors_json(result), out, {o.ann});
  return 0;
}

int cmd_weights(const Options& o, std::ostream& out) {
  const ImbalanceParams params(o.alpha, o.beta);
  const auto set = load_annotations(o.ann);
  auto stats = dataset_stats(set.clips);
  const auto weights = weights_from_stats(
      stats, params, o.invert_enf ? WeightDirection::kInverted : WeightDirection::kAsPrinted);
  write_output(o.out, weights_csv(weights), out, {o.ann});
  return 0;
}

int cmd_eval(const Options& o, std::ostream& out) {
  const auto set = load_annotations(o.ann);
  std::vector<Detection> dets;
  {
    std::ifstream in(o.det, std::ios::binary);
    if (!in) throw Error("cannot open \"" + o.det + "\" for reading");
    try {
      dets = parse_detections(in);
    } catch (const ParseError& e) {
      throw Error(o.det + ":" + e.what());
    }
  }
  EvalConfig config;
  config.iou_threshold = o.iou;
  config.conf_floor = o.conf_floor;
  config.threads = o.threads;
  if (o.num_classes >= 0) config.num_classes = o.num_classes;
  const auto report = evaluate(set.frames, dets, config);
  const auto text = o.report == "table3" ? table3_csv(report, o.model_name) : report_csv(report);
  write_output(o.out, text, out, {o.ann, o.det});
  return 0;
}

int cmd_decode(const Options& o, std::ostream& out, std::ostream& err) {
  std::ifstream in(o.grid, std::ios::binary);
  if (!in) throw Error("cannot open \"" + o.grid + "\" for reading");
  const auto grid = read_grid(in);
  const auto anchors = parse_anchors_json(read_file(o.anchors));
  auto dets = decode_grid(grid, anchors, o.image_w, o.image_h, o.conf_floor, {o.video, o.frame});
  const auto decoded = dets.size();
  if (!o.no_nms) dets = nms(dets, o.nms_iou);
  write_output(o.out, serialize_detections(dets), out, {o.grid, o.anchors});
  err << "decoded " << decoded << " boxes, " << dets.size() << " after suppression\n";
  return 0;
}

void add_config(CLI::App* sub, Options& o) {
  sub->add_option("--config", o.config, "key=value file with defaults for this command");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"actdet: frame-level action detection evaluation and dataset tooling", "actdet"};
  app.require_subcommand(1);

  const auto in_range01 = CLI::Range(0.0, 1.0);

  auto* stats = app.add_subcommand("stats", "Per-class clip and frame counts, ranked by clips");
  stats->add_option("--ann", o.ann, "Annotation JSONL")->required();
  stats->add_option("--labels", o.labels, "Class names, one per line");
  stats->add_option("--out", o.out, "Output CSV (default stdout)");
  add_config(stats, o);

  auto* filter = app.add_subcommand("filter", "Keep classes with enough clips and re-index them");
  filter->add_option("--ann", o.ann, "Annotation JSONL")->required();
  filter->add_option("--min-clips", o.min_clips, "Minimum clips per class")->check(CLI::PositiveNumber);
  filter->add_option("--out", o.out, "Filtered annotation JSONL (default stdout)");
  filter->add_option("--remap", o.remap, "Class remap CSV");
  add_config(filter, o);

  auto* split = app.add_subcommand("split", "Per-class seeded train/test split");
  split->add_option("--ann", o.ann, "Annotation JSONL")->required();
  split->add_option("--ratio", o.ratio, "Train:test ratio, e.g. 7:3 or 0.7");
  split->add_option("--seed", o.seed, "Random seed");
  split->add_option("--out-dir", o.out_dir, "Directory for clip lists and manifest")->required();
  add_config(split, o);

  auto* anchors = app.add_subcommand("anchors", "K-means anchor boxes from ground-truth shapes");
  anchors->add_option("--ann", o.ann, "Annotation JSONL")->required();
  anchors->add_option("--image-w", o.image_w, "Image width in pixels")->check(CLI::PositiveNumber);
  anchors->add_option("--image-h", o.image_h, "Image height in pixels")->check(CLI::PositiveNumber);
  anchors->add_option("--k", o.k, "Number of anchors (default: elbow over --k-min..--k-max)")
      ->check(CLI::PositiveNumber);
  anchors->add_option("--k-min", o.k_min, "Smallest k for the elbow search")->check(CLI::PositiveNumber);
  anchors->add_option("--k-max", o.k_max, "Largest k for the elbow search")->check(CLI::PositiveNumber);
  anchors->add_option("--seed", o.seed, "Random seed");
  anchors->add_option("--tol", o.tol, "Relative inertia improvement to stop at")->check(CLI::PositiveNumber);
  anchors->add_option("--max-iter", o.max_iter, "Lloyd iteration cap")->check(CLI::PositiveNumber);
  anchors->add_option("--restarts", o.restarts, "Runs with derived seeds")->check(CLI::PositiveNumber);
  anchors->add_option("--metric", o.metric, "euclidean or iou")
      ->check(CLI::IsMember({"euclidean", "iou"}));
  anchors->add_option("--out", o.out, "Anchors JSON (default stdout)");
  anchors->add_option("--profile", o.profile, "Inertia profile CSV over --k-min..--k-max");
  add_config(anchors, o);

  auto* weights = app.add_subcommand("weights", "Effective-number class weights");
  weights->add_option("--ann", o.ann, "Annotation JSONL")->required();
  weights->add_option("--alpha", o.alpha, "Focal exponent (> 0)");
  weights->add_option("--beta", o.beta, "Effective-number base in [0, 1)");
  weights->add_flag("--invert-enf", o.invert_enf, "Use (1 - beta) / (1 - beta^n)");
  weights->add_option("--out", o.out, "Output CSV (default stdout)");
  add_config(weights, o);

  auto* eval = app.add_subcommand("eval", "Frame-mAP, localization recall, classification accuracy");
  eval->add_option("--ann", o.ann, "Annotation JSONL")->required();
  eval->add_option("--det", o.det, "Detections JSONL")->required();
  eval->add_option("--iou", o.iou, "IoU threshold in (0, 1]")->check(in_range01);
  eval->add_option("--conf-floor", o.conf_floor, "Ignore detections below this confidence")
      ->check(in_range01);
  eval->add_option("--num-classes", o.num_classes, "Class space size (default: from annotations)")
      ->check(CLI::NonNegativeNumber);
  eval->add_option("--threads", o.threads, "Worker threads, 0 = all cores");
  eval->add_option("--report", o.report, "csv or table3")->check(CLI::IsMember({"csv", "table3"}));
  eval->add_option("--model-name", o.model_name, "Column name for --report table3");
  eval->add_option("--out", o.out, "Output CSV (default stdout)");
  add_config(eval, o);

  auto* decode = app.add_subcommand("decode", "Decode a grid output file into detections");
  decode->add_option("--grid", o.grid, "Grid binary file")->required();
  decode->add_option("--anchors", o.anchors, "Anchors JSON")->required();
  decode->add_option("--image-w", o.image_w, "Image width in pixels")->check(CLI::PositiveNumber);
  decode->add_option("--image-h", o.image_h, "Image height in pixels")->check(CLI::PositiveNumber);
  decode->add_option("--video", o.video, "video_id for the output detections");
  decode->add_option("--frame", o.frame, "frame index for the output detections")
      ->check(CLI::NonNegativeNumber);
  decode->add_option("--conf-floor", o.conf_floor, "Drop boxes below this confidence")->check(in_range01);
  decode->add_option("--nms", o.nms_iou, "Suppression IoU threshold")->check(in_range01);
  decode->add_flag("--no-nms", o.no_nms, "Skip non-maximum suppression");
  decode->add_option("--out", o.out, "Detections JSONL (default stdout)");
  add_config(decode, o);

  std::vector<std::string> argv = args;
  try {
    // Splice config defaults in front of the explicit flags.
    const auto cfg = std::find_if(argv.begin(), argv.end(), [](const std::string& a) {
      return a == "--config" || a.rfind("--config=", 0) == 0;
    });
    if (!argv.empty() && cfg != argv.end()) {
      std::string path;
      if (*cfg == "--config") {
        if (std::next(cfg) == argv.end()) throw CLI::ArgumentMismatch("--config needs a value");
        path = *std::next(cfg);
      } else {
        path = cfg->substr(std::string("--config=").size());
      }
      const auto* sub = app.get_subcommand_no_throw(argv.front());
      if (sub != nullptr) {
        const auto extra = config_args(path, *sub, argv);
        argv.insert(argv.begin() + 1, extra.begin(), extra.end());
      }
    }
    std::vector<std::string> reversed(argv.rbegin(), argv.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    err << "\n" << app.help();
    return 1;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }

  try {
    if (*stats) return cmd_stats(o, out);
    if (*filter) return cmd_filter(o, out, err);
    if (*split) return cmd_split(o, out, err);
    if (*anchors) {
      if (o.k == 0 && o.k_min >= o.k_max) throw Error("need --k-min < --k-max");
      return cmd_anchors(o, out, err);
    }
    if (*weights) return cmd_weights(o, out);
    if (*eval) return cmd_eval(o, out);
    if (*decode) return cmd_decode(o, out, err);
    err << app.help();
    return 1;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace actdet::cli
