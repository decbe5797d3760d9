#pragma once

// Command-line front end. Exit codes: 0 success, 1 usage error, 2 data error.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lesionseg/augment.hpp"
#include "lesionseg/checkpoint.hpp"
#include "lesionseg/error.hpp"
#include "lesionseg/imgio.hpp"
#include "lesionseg/metrics.hpp"
#include "lesionseg/nn/train.hpp"
#include "lesionseg/postprocess.hpp"
#include "lesionseg/stats.hpp"
#include "lesionseg/synth.hpp"

namespace lesionseg::cli {

namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::string indexed_name(const char* prefix, std::size_t i, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%04zu.%s", prefix, i, ext);
  return buf;
}

// Regular files in `dir` with the given extension (and optional stem
// prefix), sorted by name.
inline std::vector<fs::path> list_files(const fs::path& dir, const std::string& ext,
                                        const std::string& prefix = "") {
  if (!fs::is_directory(dir)) throw DataError("not a directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto& p = entry.path();
    if (p.extension() != ext) continue;
    if (!prefix.empty() && p.stem().string().rfind(prefix, 0) != 0) continue;
    out.push_back(p);
  }
  std::sort(out.begin(), out.end());
  return out;
}

// Replaces a "<from>" stem prefix with "<to>": img_0003 -> mask_0003.
inline std::string swap_prefix(const std::string& stem, const std::string& from, const std::string& to) {
  if (stem.rfind(from, 0) != 0) return stem;
  return to + stem.substr(from.size());
}

struct LabeledImage {
  std::string stem;
  RgbImage image;
  Mask mask;
};

// img_*.ppm paired with mask_*.pgm of the same suffix.
inline std::vector<LabeledImage> load_labeled_dir(const fs::path& dir) {
  std::vector<LabeledImage> out;
  for (const auto& img_path : list_files(dir, ".ppm", "img_")) {
    const std::string stem = img_path.stem().string();
    const fs::path mask_path = dir / (swap_prefix(stem, "img_", "mask_") + ".pgm");
    if (!fs::exists(mask_path)) throw DataError("missing mask for " + img_path.string());
    LabeledImage li{stem, read_ppm(img_path), read_mask(mask_path)};
    if (!same_size(li.image, li.mask)) throw DataError("image and mask sizes differ for " + stem);
    out.push_back(std::move(li));
  }
  if (out.empty()) throw DataError("no img_*.ppm files in " + dir.string());
  return out;
}

inline nlohmann::json stats_json(const ChannelStats& s) {
  return {{"mean", {s.mean[0], s.mean[1], s.mean[2]}}, {"std", {s.std[0], s.std[1], s.std[2]}}};
}

inline PostprocessMode parse_mode(const std::string& m) {
  if (m == "naive") return PostprocessMode::naive;
  if (m == "otsu") return PostprocessMode::otsu;
  throw UsageError("--mode must be naive or otsu");
}

// ---------------------------------------------------------------- stats

struct StatsArgs {
  std::string img_dir, mask_dir, prior_out;
  std::size_t prior_size = 0;
};

inline int run_stats(const StatsArgs& a, std::ostream& out) {
  std::vector<RgbImage> images;
  for (const auto& p : list_files(a.img_dir, ".ppm")) images.push_back(read_ppm(p));
  std::vector<Mask> masks;
  for (const auto& p : list_files(a.mask_dir, ".pgm")) masks.push_back(read_mask(p));
  if (images.empty()) throw DataError("no .ppm images in " + a.img_dir);
  if (masks.empty()) throw DataError("no .pgm masks in " + a.mask_dir);

  const ChannelStats st = dataset_stats(images);
  double prop = 0.0;
  for (const auto& m : masks) prop += mask_proportion(m);
  prop /= static_cast<double>(masks.size());

  nlohmann::json j = stats_json(st);
  j["mole_proportion"] = prop;
  j["n_images"] = images.size();
  out << j.dump() << "\n";

  if (!a.prior_out.empty()) {
    const std::size_t w = a.prior_size ? a.prior_size : masks.front().width;
    const std::size_t h = a.prior_size ? a.prior_size : masks.front().height;
    write_file(a.prior_out, encode_smf(spatial_prior(masks, w, h)));
  }
  return kExitOk;
}

// ---------------------------------------------------------------- synth

inline int run_synth(const SynthConfig& cfg, const std::string& out_dir) {
  fs::create_directories(out_dir);
  for (std::size_t i = 0; i < cfg.n_images; ++i) {
    const SynthSample s = synth_sample(cfg, i);
    write_file(fs::path(out_dir) / indexed_name("img", i, "ppm"), encode_ppm(s.image));
    write_file(fs::path(out_dir) / indexed_name("mask", i, "pgm"), encode_pgm(s.mask));
  }
  return kExitOk;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::string data, out, history;
  double val_frac = 0.2;
  bool center_only = false;
  bool quiet = false;
};

inline int run_train(const TrainArgs& a, nn::TrainConfig tcfg, const nn::UNetConfig& ucfg,
                     std::ostream& err) {
  const auto labeled = load_labeled_dir(a.data);
  const std::size_t n_val = nn::validation_count(labeled.size(), a.val_frac);
  const std::size_t n_train = labeled.size() - n_val;

  // Normalization and class balance come from the training split only.
  std::vector<RgbImage> train_images;
  double prop = 0.0;
  for (std::size_t i = 0; i < n_train; ++i) {
    train_images.push_back(labeled[i].image);
    prop += mask_proportion(labeled[i].mask);
  }
  prop /= static_cast<double>(n_train);
  ChannelStats norm = dataset_stats(train_images);
  if (a.center_only) norm.std = {1.0f, 1.0f, 1.0f};
  if (!(prop > 0.0 && prop < 1.0)) throw DataError("training masks are all background or all lesion");
  tcfg.class_weights = nn::class_weights_from_proportion(prop);

  std::vector<Sample> samples;
  samples.reserve(labeled.size());
  for (const auto& li : labeled) samples.push_back({normalize_image(li.image, norm), li.mask});

  const auto result = nn::train(samples, a.val_frac, tcfg, ucfg, norm, [&](const nn::EpochRecord& r) {
    if (!a.quiet) {
      err << "epoch " << r.epoch << " loss " << r.loss << " val_jaccard " << r.val_jaccard << " lr "
          << r.lr << "\n";
    }
  });
  write_file(a.out, encode_checkpoint(result.checkpoint));
  const std::string csv = nn::history_csv(result.history);
  const std::string history = a.history.empty() ? a.out + ".history.csv" : a.history;
  write_file(history, std::span(reinterpret_cast<const std::uint8_t*>(csv.data()), csv.size()));
  return kExitOk;
}

// -------------------------------------------------------------- predict

struct PredictArgs {
  std::string checkpoint, in, out_scores;
  std::size_t start = 0;
  std::optional<std::size_t> count;
};

inline ScoreMap predict_image(const Checkpoint& c, const RgbImage& img) {
  const std::size_t m = c.config.size_multiple();
  if (img.width % m != 0 || img.height % m != 0) {
    throw DataError("image size is not divisible by 2^depth = " + std::to_string(m));
  }
  return nn::predict_scores(c.params, c.config, normalize_image(img, c.normalization));
}

inline int run_predict(const PredictArgs& a) {
  const Checkpoint c = decode_checkpoint(read_file(a.checkpoint));
  if (!fs::is_directory(a.in)) {
    write_file(a.out_scores, encode_smf(predict_image(c, read_ppm(a.in))));
    return kExitOk;
  }
  fs::create_directories(a.out_scores);
  const auto files = list_files(a.in, ".ppm");
  const std::size_t end = a.count ? std::min(files.size(), a.start + *a.count) : files.size();
  for (std::size_t i = a.start; i < end; ++i) {
    const std::string stem = files[i].stem().string();
    const fs::path dst = fs::path(a.out_scores) / (swap_prefix(stem, "img_", "scores_") + ".smf");
    write_file(dst, encode_smf(predict_image(c, read_ppm(files[i]))));
  }
  return kExitOk;
}

// ---------------------------------------------------------- postprocess

struct PostprocessArgs {
  std::string scores, out_mask, mode = "otsu";
  double sigma = 5.0;
  std::size_t bins = 256;
};

inline nlohmann::json otsu_json(const std::string& id, const PostprocessConfig& cfg,
                                const PostprocessResult& r) {
  return {{"id", id},
          {"mode", cfg.mode == PostprocessMode::naive ? "naive" : "otsu"},
          {"threshold", r.otsu.threshold},
          {"between_class_variance", r.otsu.between_class_variance},
          {"degenerate", r.otsu.degenerate},
          {"threshold_used", r.threshold_used}};
}

inline int run_postprocess(const PostprocessArgs& a, std::ostream& out) {
  PostprocessConfig cfg;
  cfg.mode = parse_mode(a.mode);
  cfg.sigma = a.sigma;
  cfg.bins = a.bins;
  auto one = [&](const fs::path& src, const fs::path& dst) {
    const auto r = postprocess_pipeline(decode_score_map(read_file(src)), cfg);
    write_file(dst, encode_pgm(r.mask));
    out << otsu_json(src.stem().string(), cfg, r).dump() << "\n";
  };
  if (!fs::is_directory(a.scores)) {
    one(a.scores, a.out_mask);
    return kExitOk;
  }
  fs::create_directories(a.out_mask);
  for (const auto& p : list_files(a.scores, ".smf")) {
    one(p, fs::path(a.out_mask) / (swap_prefix(p.stem().string(), "scores_", "mask_") + ".pgm"));
  }
  return kExitOk;
}

// ------------------------------------------------------------- evaluate

struct EvaluateArgs {
  std::string pred, truth, csv;
  double cutoff = kDefaultJaccardCutoff;
};

inline std::string eval_csv(const EvalReport& r) {
  std::string s = "id,raw,thresholded\n";
  char line[256];
  for (const auto& row : r.per_image) {
    std::snprintf(line, sizeof line, ",%.6f,%.6f\n", row.raw, row.thresholded);
    s += row.id + line;
  }
  return s;
}

inline int run_evaluate(const EvaluateArgs& a, std::ostream& out) {
  std::vector<EvalPair> pairs;
  for (const auto& p : list_files(a.pred, ".pgm")) {
    const fs::path truth = fs::path(a.truth) / p.filename();
    if (!fs::exists(truth)) throw DataError("no ground truth for " + p.filename().string());
    pairs.push_back({read_mask(p), read_mask(truth), p.stem().string()});
  }
  if (pairs.empty()) throw DataError("no .pgm predictions in " + a.pred);
  const EvalReport report = evaluate_dataset(pairs, a.cutoff);
  const std::string csv = eval_csv(report);
  out << csv;
  if (!a.csv.empty()) {
    write_file(a.csv, std::span(reinterpret_cast<const std::uint8_t*>(csv.data()), csv.size()));
  }
  const nlohmann::json summary = {{"n", report.per_image.size()},
                                  {"mean_raw", report.mean_raw},
                                  {"mean_thresholded", report.mean_thresholded},
                                  {"cutoff", report.cutoff}};
  out << summary.dump() << "\n";
  return kExitOk;
}

// -------------------------------------------------------------- augment

struct AugmentArgs {
  std::string image, mask, out;
  std::uint64_t seed = 0;
  std::size_t count = 1;
  AugmentConfig cfg;
};

inline int run_augment(const AugmentArgs& a, std::ostream& out) {
  const BasicSample<RgbImage> s{read_ppm(a.image), read_mask(a.mask)};
  if (!same_size(s.image, s.mask)) throw DataError("image and mask sizes differ");
  fs::create_directories(a.out);
  for (std::size_t i = 0; i < a.count; ++i) {
    Rng rng(derive_seed(a.seed, i));
    const AugmentDraw d = draw_augment(rng, a.cfg);
    const auto t = apply_augment(s, d);
    write_file(fs::path(a.out) / indexed_name("aug", i, "ppm"), encode_ppm(t.image));
    write_file(fs::path(a.out) / indexed_name("aug", i, "pgm"), encode_pgm(t.mask));
    out << nlohmann::json{{"index", i}, {"flip_h", d.flip_h}, {"flip_v", d.flip_v}, {"k", d.k}}.dump()
        << "\n";
  }
  return kExitOk;
}

// ------------------------------------------------------------- dispatch

inline int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Skin lesion segmentation pipeline: synthetic data, U-Net training, "
               "score post-processing and Jaccard evaluation",
               "lesionseg"};
  app.require_subcommand(1);
  app.fallthrough(false);

  StatsArgs stats_args;
  auto* stats = app.add_subcommand("stats", "Channel statistics, lesion proportion and spatial prior");
  stats->add_option("img_dir", stats_args.img_dir, "Directory of .ppm images")->required();
  stats->add_option("mask_dir", stats_args.mask_dir, "Directory of .pgm masks")->required();
  stats->add_option("--prior-out", stats_args.prior_out, "Write the spatial prior as 1-plane SMF");
  stats->add_option("--prior-size", stats_args.prior_size, "Square side of the prior map (default: first mask)");

  SynthConfig synth_cfg;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "Generate the synthetic ellipse dataset");
  synth->add_option("--n", synth_cfg.n_images, "Number of images")->required()->check(CLI::PositiveNumber);
  synth->add_option("--size", synth_cfg.size, "Square image side")->required()->check(CLI::PositiveNumber);
  synth->add_option("--seed", synth_cfg.seed, "Random seed")->required();
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--noise-std", synth_cfg.noise_std, "Additive Gaussian noise level")->check(CLI::NonNegativeNumber);

  TrainArgs train_args;
  nn::TrainConfig tcfg;
  nn::UNetConfig ucfg;
  auto* train = app.add_subcommand("train", "Train the U-Net on img_*/mask_* pairs");
  train->add_option("--data", train_args.data, "Dataset directory")->required();
  train->add_option("--out", train_args.out, "Checkpoint path")->required();
  train->add_option("--epochs", tcfg.epochs, "Epochs")->capture_default_str();
  train->add_option("--lr", tcfg.learning_rate, "Initial learning rate")->capture_default_str()->check(CLI::PositiveNumber);
  train->add_option("--batch", tcfg.batch_size, "Mini-batch size")->capture_default_str()->check(CLI::PositiveNumber);
  train->add_option("--depth", ucfg.depth, "Down-sampling stages")->capture_default_str()->check(CLI::Range(1, 8));
  train->add_option("--base", ucfg.base_channels, "Channels at the top level")->capture_default_str()->check(CLI::Range(1, 256));
  train->add_option("--seed", tcfg.seed, "Random seed")->required();
  train->add_option("--val-frac", train_args.val_frac, "Trailing fraction held out for validation")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
  train->add_option("--history", train_args.history, "History CSV path (default <out>.history.csv)");
  train->add_option("--threads", tcfg.threads, "Worker threads per batch")->capture_default_str()->check(CLI::PositiveNumber);
  train->add_option("--patience", tcfg.plateau_patience, "Plateau patience in epochs")->capture_default_str();
  train->add_flag("--center-only", train_args.center_only, "Subtract channel means without dividing by std");
  train->add_flag("--quiet", train_args.quiet, "No per-epoch progress lines");

  PredictArgs predict_args;
  auto* predict = app.add_subcommand("predict", "Write SMF score maps for one image or a directory");
  predict->add_option("--checkpoint", predict_args.checkpoint, "Checkpoint path")->required();
  predict->add_option("--in", predict_args.in, "PPM image or directory")->required();
  predict->add_option("--out-scores", predict_args.out_scores, "SMF file or directory")->required();
  predict->add_option("--start", predict_args.start, "First image index in directory mode");
  predict->add_option("--count", predict_args.count, "Number of images in directory mode");

  PostprocessArgs pp_args;
  auto* postprocess = app.add_subcommand("postprocess", "Turn SMF score maps into PGM masks");
  postprocess->add_option("--scores", pp_args.scores, "SMF file or directory")->required();
  postprocess->add_option("--out-mask", pp_args.out_mask, "PGM file or directory")->required();
  postprocess->add_option("--mode", pp_args.mode, "naive or otsu")->capture_default_str()->check(CLI::IsMember({"naive", "otsu"}));
  postprocess->add_option("--sigma", pp_args.sigma, "Gaussian sigma in pixels")->capture_default_str()->check(CLI::NonNegativeNumber);
  postprocess->add_option("--bins", pp_args.bins, "Histogram bins")->capture_default_str()->check(CLI::Range(std::size_t{2}, std::size_t{1} << 20));

  EvaluateArgs eval_args;
  auto* evaluate = app.add_subcommand("evaluate", "Jaccard report for predicted vs. ground-truth masks");
  evaluate->add_option("--pred", eval_args.pred, "Directory of predicted .pgm masks")->required();
  evaluate->add_option("--truth", eval_args.truth, "Directory of ground-truth .pgm masks")->required();
  evaluate->add_option("--cutoff", eval_args.cutoff, "Per-image zeroing cutoff")->capture_default_str()->check(CLI::Range(0.0, 1.0));
  evaluate->add_option("--csv", eval_args.csv, "Also write the CSV report here");

  AugmentArgs aug_args;
  auto* augment = app.add_subcommand("augment", "Write randomly flipped/rotated copies of an image and mask");
  augment->add_option("--image", aug_args.image, "Input PPM")->required();
  augment->add_option("--mask", aug_args.mask, "Input PGM mask")->required();
  augment->add_option("--out", aug_args.out, "Output directory")->required();
  augment->add_option("--seed", aug_args.seed, "Random seed")->required();
  augment->add_option("--count", aug_args.count, "Number of augmented copies")->capture_default_str();
  augment->add_option("--p-flip-h", aug_args.cfg.p_flip_h, "Horizontal flip probability")->capture_default_str()->check(CLI::Range(0.0, 1.0));
  augment->add_option("--p-flip-v", aug_args.cfg.p_flip_v, "Vertical flip probability")->capture_default_str()->check(CLI::Range(0.0, 1.0));
  augment->add_option("--rot90", aug_args.cfg.rot90, "Random quarter-turn rotations (true/false)")->capture_default_str();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    if (stats->parsed()) return run_stats(stats_args, out);
    if (synth->parsed()) return run_synth(synth_cfg, synth_out);
    if (train->parsed()) return run_train(train_args, tcfg, ucfg, err);
    if (predict->parsed()) return run_predict(predict_args);
    if (postprocess->parsed()) return run_postprocess(pp_args, out);
    if (evaluate->parsed()) return run_evaluate(eval_args, out);
    if (augment->parsed()) return run_augment(aug_args, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  }
  err << app.help();
  return kExitUsage;
}

inline int dispatch(int argc, const char* const* argv, std::ostream& out = std::cout,
                    std::ostream& err = std::cerr) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return dispatch(args, out, err);
}

}  // namespace lesionseg::cli
