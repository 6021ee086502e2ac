#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "safmn/safmn.hpp"

namespace safmn::cli {

namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitRuntime = 3;

// --- helpers ------------------------------------------------------------------------

/// PNG files of a directory, sorted by name.
inline std::vector<fs::path> list_pngs(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("not a directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::string ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".png") out.push_back(e.path());
  }
  if (out.empty()) throw DataError("no PNG images in " + dir.string());
  std::sort(out.begin(), out.end());
  return out;
}

inline std::pair<std::size_t, std::size_t> parse_hw(const std::string& s) {
  const auto x = s.find_first_of("xX");
  try {
    if (x == std::string::npos) throw std::invalid_argument(s);
    std::size_t used = 0;
    const auto h = std::stoull(s.substr(0, x), &used);
    if (used != x) throw std::invalid_argument(s);
    const auto w = std::stoull(s.substr(x + 1), &used);
    if (used != s.size() - x - 1 || h == 0 || w == 0) throw std::invalid_argument(s);
    return {h, w};
  } catch (const std::logic_error&) {
    throw UsageError("input size must look like HxW with positive integers, got '" + s + "'");
  }
}

inline VariantSpec variant_or_throw(const std::string& name) {
  const auto v = find_variant(name);
  if (!v) throw UsageError("unknown variant '" + name + "'; known variants: " + variant_names());
  return *v;
}

inline std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(std::numeric_limits<double>::max_digits10) << v;
  return os.str();
}

// Values from an INI file fill options not given on the command line. Each
// section lists the keys it may hold; anything else is an error.
inline void apply_config_file(const fs::path& path, CLI::App& cmd,
                              const std::map<std::string, std::set<std::string>>& sections) {
  if (!fs::is_regular_file(path)) throw ConfigError("config file not found: " + path.string());
  std::vector<CLI::ConfigItem> items;
  try {
    items = CLI::ConfigINI().from_file(path.string());
  } catch (const CLI::ParseError& e) {
    throw ConfigError("cannot parse " + path.string() + ": " + e.what());
  }
  for (const auto& it : items) {
    if (it.name == "++" || it.name == "--") continue;
    if (it.parents.size() != 1) {
      throw ConfigError("config key '" + it.name + "' must be inside one of the sections [model], [loss], "
                        "[optim], [data], [run]");
    }
    const std::string& sec = it.parents.front();
    const auto s = sections.find(sec);
    if (s == sections.end()) throw ConfigError("unknown config section [" + sec + "]");
    if (!s->second.contains(it.name)) throw ConfigError("unknown config key '" + it.name + "' in [" + sec + "]");
    CLI::Option* opt = cmd.get_option_no_throw("--" + it.name);
    if (opt == nullptr) throw ConfigError("config key '" + it.name + "' has no matching option");
    if (opt->count() > 0) continue;  // command line wins
    try {
      for (const auto& v : it.inputs) opt->add_result(v);
      opt->run_callback();
    } catch (const CLI::Error& e) {
      throw ConfigError("[" + sec + "] " + it.name + ": " + e.what());
    }
  }
}

// --- profile ------------------------------------------------------------------------

struct ProfileArgs {
  std::size_t scale = 4;
  std::string variant = "baseline";
  std::string input_size = "180x320";
  std::size_t blocks = 8;
  std::size_t channels = 36;
  std::string format = "table";
  std::string convention = "conv-only";
};

inline int cmd_profile(const ProfileArgs& a, std::ostream& out) {
  // both of these parse before any counting so bad flags never half-print
  const auto [h, w] = parse_hw(a.input_size);
  const ReportFormat fmt = report_format_from_string(a.format);
  FlopConvention conv;
  if (a.convention == "conv-only") {
    conv = FlopConvention::conv_only;
  } else if (a.convention == "reference-tool") {
    conv = FlopConvention::reference_tool;
  } else {
    throw UsageError("--flops-convention must be conv-only or reference-tool");
  }
  const ModelConfig cfg{a.blocks, a.channels, a.scale, variant_or_throw(a.variant)};
  out << emit_report(profile_model(cfg, h, w, conv), fmt);
  return kExitOk;
}

// --- degrade ------------------------------------------------------------------------

struct DegradeArgs {
  std::size_t scale = 4;
  fs::path hr_dir;
  fs::path out_dir;
};

inline int cmd_degrade(const DegradeArgs& a, std::ostream& out, std::ostream& err) {
  if (a.scale < 1) throw UsageError("--scale must be >= 1");
  const auto files = list_pngs(a.hr_dir);
  fs::create_directories(a.out_dir);
  for (const auto& f : files) {
    const ImageBuffer img = decode_png(f);
    if (img.width < a.scale || img.height < a.scale) {
      throw DataError(f.filename().string() + " is smaller than the scale factor");
    }
    const auto hr = to_tensor<double>(img);
    const auto cropped = crop_to_multiple(hr, a.scale);
    const Shape cs = cropped.shape();
    if (cs.h != img.height || cs.w != img.width) {
      err << "warning: " << f.filename().string() << " is " << img.width << "x" << img.height
          << ", center-cropped to " << cs.w << "x" << cs.h << "\n";
    }
    const ImageBuffer lr = to_image(degrade(cropped, a.scale));
    encode_png(lr, a.out_dir / (f.stem().string() + ".png"));
    out << f.filename().string() << " " << cs.w << "x" << cs.h << " -> " << lr.width << "x" << lr.height << "\n";
  }
  return kExitOk;
}

// --- train --------------------------------------------------------------------------

struct TrainArgs {
  std::optional<fs::path> config;
  fs::path hr_dir;
  fs::path out;
  std::optional<fs::path> log;
  std::uint64_t iters = 1000;
  std::uint64_t seed = 0;
  std::size_t scale = 4;
  std::string variant = "baseline";
  std::size_t blocks = 8;
  std::size_t channels = 36;
  double lambda = 0.05;
  double lr_max = 1e-3;
  double lr_min = 1e-5;
  std::size_t patch_size = 64;
  std::size_t batch_size = 64;
  bool augment = true;
  std::uint64_t log_every = 10;
  std::uint64_t checkpoint_every = 0;
  std::string precision = "float";
};

inline const std::map<std::string, std::set<std::string>>& train_config_sections() {
  static const std::map<std::string, std::set<std::string>> s{
      {"model", {"scale", "variant", "blocks", "channels"}},
      {"loss", {"lambda"}},
      {"optim", {"lr-max", "lr-min", "iters"}},
      {"data", {"hr-dir", "patch-size", "batch-size", "augment"}},
      {"run", {"seed", "precision", "log-every", "checkpoint-every", "out", "log"}},
  };
  return s;
}

inline TrainConfig to_train_config(const TrainArgs& a) {
  TrainConfig cfg;
  cfg.model = ModelConfig{a.blocks, a.channels, a.scale, variant_or_throw(a.variant)};
  cfg.loss.lambda = a.lambda;
  cfg.lr_max = a.lr_max;
  cfg.lr_min = a.lr_min;
  cfg.sampler = PatchSampler{a.patch_size, a.batch_size, a.seed, a.augment};
  cfg.iters = a.iters;
  cfg.seed = a.seed;
  cfg.log_every = a.log_every;
  cfg.checkpoint_every = a.checkpoint_every;
  cfg.checkpoint = a.out;
  validate(cfg);
  return cfg;
}

template <class T>
void train_with(const TrainConfig& cfg, std::vector<TrainingPair> data, std::ostream& log) {
  Trainer<T> trainer(cfg, std::move(data));
  trainer.run(&log);
}

inline int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  if (a.hr_dir.empty()) throw UsageError("train needs --hr-dir (flag or [data] hr-dir)");
  if (a.out.empty()) throw UsageError("train needs --out (flag or [run] out)");
  if (a.precision != "float" && a.precision != "double") {
    throw UsageError("--precision must be float or double");
  }
  const TrainConfig cfg = to_train_config(a);

  std::vector<TrainingPair> data;
  for (const auto& f : list_pngs(a.hr_dir)) {
    data.push_back(make_training_pair(to_tensor<double>(decode_png(f)), cfg.model.scale));
  }
  std::ofstream log_file;
  if (a.log) {
    log_file.open(*a.log, std::ios::trunc);
    if (!log_file) throw DataError("cannot open log file " + a.log->string());
  }
  std::ostream& log = a.log ? static_cast<std::ostream&>(log_file) : out;
  if (!a.out.parent_path().empty()) fs::create_directories(a.out.parent_path());

  try {
    if (a.precision == "double") {
      train_with<double>(cfg, std::move(data), log);
    } else {
      train_with<float>(cfg, std::move(data), log);
    }
  } catch (const TrainingError&) {
    if (fs::exists(a.out)) {
      err << "note: keeping last checkpoint " << a.out.string() << " (iteration "
          << read_checkpoint_file(a.out).iteration << ")\n";
    }
    throw;
  }
  return kExitOk;
}

// --- infer --------------------------------------------------------------------------

struct InferArgs {
  fs::path checkpoint;
  std::optional<fs::path> input;
  std::optional<fs::path> lr_dir;
  fs::path out_dir;
  std::size_t scale = 0;  // 0: take the checkpoint's
  std::string precision = "float";
};

template <class T>
void infer_with(const Checkpoint& ck, const std::vector<fs::path>& files, const fs::path& out_dir,
                std::ostream& out) {
  const SafmnModel<T> model = model_from_checkpoint<T>(ck);
  for (const auto& f : files) {
    const ImageBuffer lr = decode_png(f);
    const auto t0 = std::chrono::steady_clock::now();
    const Tensor<T> sr = model.forward(to_tensor<T>(lr), Mode::eval);
    const auto t1 = std::chrono::steady_clock::now();
    const ImageBuffer img = to_image(sr);
    encode_png(img, out_dir / (f.stem().string() + ".png"));
    const double ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    out << f.filename().string() << " " << lr.width << "x" << lr.height << " -> " << img.width << "x"
        << img.height << " " << std::fixed << std::setprecision(1) << ms << " ms\n"
        << std::defaultfloat;
  }
}

inline int cmd_infer(const InferArgs& a, std::ostream& out) {
  if (a.input.has_value() == a.lr_dir.has_value()) throw UsageError("infer needs exactly one of --input, --lr-dir");
  if (a.precision != "float" && a.precision != "double") {
    throw UsageError("--precision must be float or double");
  }
  const Checkpoint ck = read_checkpoint_file(a.checkpoint);
  if (a.scale != 0 && a.scale != ck.config.scale) {
    throw UsageError("checkpoint is a x" + std::to_string(ck.config.scale) + " model but --scale " +
                     std::to_string(a.scale) + " was requested");
  }
  std::vector<fs::path> files;
  if (a.input) {
    if (!fs::is_regular_file(*a.input)) throw DataError("no such file: " + a.input->string());
    files.push_back(*a.input);
  } else {
    files = list_pngs(*a.lr_dir);
  }
  fs::create_directories(a.out_dir);
  if (a.precision == "double") {
    infer_with<double>(ck, files, a.out_dir, out);
  } else {
    infer_with<float>(ck, files, a.out_dir, out);
  }
  return kExitOk;
}

// --- eval ---------------------------------------------------------------------------

struct EvalArgs {
  fs::path sr_dir;
  fs::path hr_dir;
  std::size_t scale = 4;
  std::optional<std::size_t> border_crop;  // unset: crop `scale` pixels
  std::optional<fs::path> csv;
};

struct EvalRow {
  std::string stem;
  double psnr = 0.0;
  double ssim = 0.0;
};

inline std::vector<EvalRow> evaluate_dirs(const fs::path& sr_dir, const fs::path& hr_dir, std::size_t crop,
                                          std::ostream& err) {
  std::map<std::string, fs::path> sr, hr;
  for (const auto& f : list_pngs(sr_dir)) sr[f.stem().string()] = f;
  for (const auto& f : list_pngs(hr_dir)) hr[f.stem().string()] = f;
  std::vector<std::string> unmatched;
  for (const auto& [stem, p] : sr) {
    if (!hr.contains(stem)) unmatched.push_back(p.string());
  }
  for (const auto& [stem, p] : hr) {
    if (!sr.contains(stem)) unmatched.push_back(p.string());
  }
  if (!unmatched.empty()) {
    for (const auto& u : unmatched) err << "unmatched: " << u << "\n";
    throw DataError(std::to_string(unmatched.size()) + " image(s) without a counterpart");
  }
  std::vector<EvalRow> rows;
  for (const auto& [stem, p] : sr) {
    const ImageBuffer a = decode_png(p), b = decode_png(hr.at(stem));
    if (a.width != b.width || a.height != b.height) {
      throw DimensionError(stem + ": SR is " + std::to_string(a.width) + "x" + std::to_string(a.height) +
                           " but HR is " + std::to_string(b.width) + "x" + std::to_string(b.height));
    }
    rows.push_back({stem, psnr_y(a, b, crop), ssim_y(a, b, crop)});
  }
  return rows;
}

inline void write_eval_csv(const std::vector<EvalRow>& rows, std::ostream& os) {
  double ps = 0.0, ss = 0.0;
  os << "image,psnr_y,ssim_y\n";
  for (const auto& r : rows) {
    os << r.stem << "," << format_double(r.psnr) << "," << format_double(r.ssim) << "\n";
    ps += r.psnr;
    ss += r.ssim;
  }
  const double n = static_cast<double>(rows.size());
  os << "mean," << format_double(ps / n) << "," << format_double(ss / n) << "\n";
}

inline int cmd_eval(const EvalArgs& a, std::ostream& out, std::ostream& err) {
  const std::size_t crop = a.border_crop.value_or(a.scale);
  err << "border crop: " << crop << "\n";
  const auto rows = evaluate_dirs(a.sr_dir, a.hr_dir, crop, err);
  if (a.csv) {
    std::ofstream f(*a.csv, std::ios::trunc);
    if (!f) throw DataError("cannot open " + a.csv->string());
    write_eval_csv(rows, f);
  } else {
    write_eval_csv(rows, out);
  }
  return kExitOk;
}

// --- entry point --------------------------------------------------------------------

inline int run(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"SAFMN super-resolution toolkit: profile, degrade, train, infer, eval"};
  app.name("safmn");
  app.require_subcommand(1, 1);

  ProfileArgs pa;
  auto* profile = app.add_subcommand("profile", "Count parameters, FLOPs and activations per layer");
  profile->add_option("--scale", pa.scale, "Upscaling factor")->capture_default_str();
  profile->add_option("--variant", pa.variant, "Architecture variant (see --list-variants)")->capture_default_str();
  profile->add_option("--input-size", pa.input_size, "LR input size HxW")->capture_default_str();
  profile->add_option("--blocks", pa.blocks, "Number of feature mixing modules")->capture_default_str();
  profile->add_option("--channels", pa.channels, "Feature channels")->capture_default_str();
  profile->add_option("--format", pa.format, "table, csv or json-lines")->capture_default_str();
  profile->add_option("--flops-convention", pa.convention, "conv-only or reference-tool")->capture_default_str();
  bool list_variants = false;
  profile->add_flag("--list-variants", list_variants, "Print the variant names and exit");

  DegradeArgs da;
  auto* degrade_cmd = app.add_subcommand("degrade", "Bicubic-downscale a directory of HR PNGs");
  degrade_cmd->add_option("--scale", da.scale, "Downscaling factor")->capture_default_str();
  degrade_cmd->add_option("--hr-dir", da.hr_dir, "Directory of HR PNGs")->required();
  degrade_cmd->add_option("--out-dir", da.out_dir, "Where LR PNGs are written")->required();

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Train a model on a directory of HR PNGs");
  std::string config_path;
  train->add_option("--config", config_path, "INI file with [model] [loss] [optim] [data] [run] sections");
  train->add_option("--hr-dir", ta.hr_dir, "Directory of HR PNGs");
  train->add_option("--out", ta.out, "Checkpoint path");
  train->add_option("--log", ta.log, "JSON-lines log file (default: stdout)");
  train->add_option("--iters", ta.iters, "Iterations")->capture_default_str()->check(CLI::PositiveNumber);
  train->add_option("--seed", ta.seed, "Seed for initialisation and sampling")->capture_default_str();
  train->add_option("--scale", ta.scale, "Upscaling factor")->capture_default_str();
  train->add_option("--variant", ta.variant, "Architecture variant")->capture_default_str();
  train->add_option("--blocks", ta.blocks, "Number of feature mixing modules")->capture_default_str();
  train->add_option("--channels", ta.channels, "Feature channels")->capture_default_str();
  train->add_option("--lambda", ta.lambda, "Frequency loss weight")->capture_default_str();
  train->add_option("--lr-max", ta.lr_max, "Initial learning rate")->capture_default_str();
  train->add_option("--lr-min", ta.lr_min, "Final learning rate")->capture_default_str();
  train->add_option("--patch-size", ta.patch_size, "LR patch side")->capture_default_str();
  train->add_option("--batch-size", ta.batch_size, "Patches per batch")->capture_default_str();
  train->add_flag("--augment,!--no-augment", ta.augment, "Random flips and rotations")->capture_default_str();
  train->add_option("--log-every", ta.log_every, "Log interval")->capture_default_str();
  train->add_option("--checkpoint-every", ta.checkpoint_every, "Checkpoint interval, 0 for final only")
      ->capture_default_str();
  train->add_option("--precision", ta.precision, "float, or double for bit-reproducible runs")
      ->capture_default_str();

  InferArgs ia;
  auto* infer = app.add_subcommand("infer", "Super-resolve LR PNGs with a checkpoint");
  infer->add_option("--checkpoint", ia.checkpoint, "Checkpoint file")->required();
  auto* in_opt = infer->add_option("--input", ia.input, "Single LR PNG");
  infer->add_option("--lr-dir", ia.lr_dir, "Directory of LR PNGs")->excludes(in_opt);
  infer->add_option("--out-dir", ia.out_dir, "Where SR PNGs are written")->required();
  infer->add_option("--scale", ia.scale, "Expected model scale (checked against the checkpoint)");
  infer->add_option("--precision", ia.precision, "float or double")->capture_default_str();

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "Y-channel PSNR/SSIM of SR images against HR references");
  eval->add_option("--sr-dir", ea.sr_dir, "Directory of SR PNGs")->required();
  eval->add_option("--hr-dir", ea.hr_dir, "Directory of HR PNGs with matching names")->required();
  eval->add_option("--scale", ea.scale, "Scale factor; sets the default border crop")->capture_default_str();
  eval->add_option("--border-crop", ea.border_crop, "Pixels ignored on each side (default: the scale factor)");
  eval->add_option("--csv", ea.csv, "Write the CSV here instead of stdout");

  try {
    std::reverse(args.begin(), args.end());  // CLI11 consumes from the back
    app.parse(args);
    if (*profile) {
      if (list_variants) {
        for (const auto& v : variant_registry()) out << v.name << "  " << v.label << "\n";
        return kExitOk;
      }
      return cmd_profile(pa, out);
    }
    if (*degrade_cmd) return cmd_degrade(da, out, err);
    if (*train) {
      if (!config_path.empty()) apply_config_file(config_path, *train, train_config_sections());
      return cmd_train(ta, out, err);
    }
    if (*infer) return cmd_infer(ia, out);
    return cmd_eval(ea, out, err);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const TrainingError& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const Error& e) {
    // usage, config, data, format and dimension errors
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

inline int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(std::move(args), std::cout, std::cerr);
}

}  // namespace safmn::cli
