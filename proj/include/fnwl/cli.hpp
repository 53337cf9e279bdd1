// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "fnwl/baselines.hpp"
#include "fnwl/dataio.hpp"
#include "fnwl/error.hpp"
#include "fnwl/evaluation.hpp"
#include "fnwl/gradcheck_suite.hpp"
#include "fnwl/model.hpp"
#include "fnwl/model_io.hpp"
#include "fnwl/preprocessing.hpp"
#include "fnwl/training.hpp"
#include "fnwl/version.hpp"

namespace fnwl::cli {

/// Process exit codes; a stable contract.
enum ExitCode : int {
  kSuccess = 0,
  kCheckFailed = 1,
  kUsage = 2,
  kNumeric = 3,
  kFormat = 4,
};

inline int exit_code_for(const Error& e) {
  const std::string& k = e.kind();
  if (k == "numeric" || k == "metric") return kNumeric;
  if (k == "format" || k == "parse" || k == "schema" || k == "io" || k == "dimension" || k == "label") return kFormat;
  return kUsage;
}

inline constexpr const char* kSeedEnv = "FNWL_SEED";

struct PreprocessOptions {
  std::filesystem::path input, output;
  std::optional<double> sample_rate_hz;
  double low_hz = 0.001;
  double high_hz = 0.2;
  int order = 3;
  std::size_t window = 150;
  std::size_t stride = 3;
  std::optional<double> window_seconds, stride_seconds;
  bool pure_only = true;
};

struct SplitOptions {
  std::optional<std::filesystem::path> test_data;
  double test_fraction = 0.2;
  std::string mode = "random";
  std::optional<std::uint64_t> seed;  // defaults to the run seed
};

struct TrainOptions {
  std::filesystem::path data, out;
  std::optional<std::filesystem::path> log;
  std::string model = "cnn-lstm";
  std::string lstm_mode = "flat";
  std::size_t epochs = 1000;
  double learning_rate = 0.001;
  std::size_t batch = 64;
  std::uint64_t seed = 42;
  std::optional<double> clip_norm;
  bool standardize = false;
  bool record_time = true;
  std::size_t progress_every = 0;
  SplitOptions split;
};

struct EvalOptions {
  std::filesystem::path data, weights, report;
  std::optional<std::filesystem::path> confusion;
  std::string subset = "all";
};

struct BaselineCliOptions {
  std::filesystem::path data, report;
  std::optional<std::filesystem::path> confusion;
  std::string algo = "knn";
  std::size_t k = 5;
  std::optional<std::size_t> max_depth;
  bool standardize = false;
  std::uint64_t seed = 42;
  SplitOptions split;
};

struct GradcheckOptions {
  std::uint64_t seed = 42;
  std::optional<double> tolerance;
};

struct SynthOptions {
  std::filesystem::path out;
  SynthConfig config;
};

namespace detail {

inline nlohmann::ordered_json optional_json(const auto& v) {
  if (!v) return nullptr;
  if constexpr (std::is_same_v<std::decay_t<decltype(*v)>, std::filesystem::path>) return v->string();
  else return *v;
}

inline nlohmann::ordered_json to_json(const SplitOptions& s, std::uint64_t run_seed) {
  nlohmann::ordered_json j;
  j["test_data"] = optional_json(s.test_data);
  j["test_fraction"] = s.test_fraction;
  j["mode"] = s.mode;
  j["seed"] = s.seed.value_or(run_seed);
  return j;
}

inline nlohmann::ordered_json to_json(const PreprocessOptions& o, double fs, std::size_t window, std::size_t stride) {
  nlohmann::ordered_json j;
  j["command"] = "preprocess";
  j["input"] = o.input.string();
  j["sample_rate_hz"] = fs;
  j["low_hz"] = o.low_hz;
  j["high_hz"] = o.high_hz;
  j["order"] = o.order;
  j["window"] = window;
  j["stride"] = stride;
  j["pure_only"] = o.pure_only;
  return j;
}

inline nlohmann::ordered_json to_json(const TrainOptions& o) {
  nlohmann::ordered_json j;
  j["command"] = "train";
  j["data"] = o.data.string();
  j["model"] = o.model;
  j["lstm_mode"] = o.lstm_mode;
  j["epochs"] = o.epochs;
  j["learning_rate"] = o.learning_rate;
  j["batch"] = o.batch;
  j["seed"] = o.seed;
  j["clip_norm"] = optional_json(o.clip_norm);
  j["standardize"] = o.standardize;
  j["split"] = to_json(o.split, o.seed);
  return j;
}

inline nlohmann::ordered_json to_json(const BaselineCliOptions& o) {
  nlohmann::ordered_json j;
  j["command"] = "baseline";
  j["data"] = o.data.string();
  j["algo"] = o.algo;
  j["k"] = o.k;
  j["max_depth"] = optional_json(o.max_depth);
  j["standardize"] = o.standardize;
  j["seed"] = o.seed;
  j["split"] = to_json(o.split, o.seed);
  return j;
}

inline nlohmann::ordered_json to_json(const SynthConfig& c) {
  nlohmann::ordered_json j;
  j["command"] = "synth";
  j["classes"] = c.classes;
  j["windows_per_class"] = c.windows_per_class;
  j["length"] = c.length;
  j["channels"] = c.channels;
  j["sample_rate_hz"] = c.sample_rate_hz;
  j["seed"] = c.seed;
  j["snr_db"] = std::isfinite(c.snr_db) ? nlohmann::ordered_json(c.snr_db)
                                        : nlohmann::ordered_json(c.snr_db > 0 ? "inf" : "-inf");
  j["base_hz"] = c.base_hz;
  j["bandpass"] = c.bandpass;
  j["filter_order"] = c.filter_order;
  j["low_hz"] = c.low_hz;
  j["high_hz"] = c.high_hz;
  return j;
}

inline SplitMode split_mode(const std::string& name) {
  if (name == "random") return SplitMode::random;
  if (name == "subject") return SplitMode::by_subject;
  throw ConfigError("unknown split mode '" + name + "'");
}

inline std::size_t seconds_to_samples(double seconds, double fs, const char* what) {
  const double samples = std::round(seconds * fs);
  if (!(samples >= 1.0)) throw ConfigError(std::string(what) + " of " + std::to_string(seconds) + " s is under one sample");
  return static_cast<std::size_t>(samples);
}

struct TrainTest {
  WindowDataset train;
  std::optional<WindowDataset> test;
};

/// An explicit test file wins; otherwise a seeded split, or none at fraction 0.
inline TrainTest make_split(WindowDataset data, const SplitOptions& s, std::uint64_t run_seed) {
  if (s.test_data) return {std::move(data), read_windows(*s.test_data)};
  if (s.test_fraction == 0.0) return {std::move(data), std::nullopt};
  auto parts = split_dataset(data, s.test_fraction, s.seed.value_or(run_seed), split_mode(s.mode));
  return {std::move(parts.train), std::move(parts.test)};
}

inline nlohmann::ordered_json stats_json(const ChannelStats& s) {
  nlohmann::ordered_json j;
  j["mean"] = s.mean;
  j["stddev"] = s.stddev;
  return j;
}

inline std::string fixed(double v, int digits = 4) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

inline void print_summary(std::ostream& out, const EvaluationReport& r) {
  out << "accuracy " << fixed(r.accuracy) << '\n';
  out << "weighted precision " << fixed(r.weighted.precision) << " recall " << fixed(r.weighted.recall) << " f1 "
      << fixed(r.weighted.f1) << '\n';
  if (r.auc) out << "macro auc " << fixed(r.auc->macro) << '\n';
}

inline void write_report_files(const EvaluationReport& r, const nlohmann::ordered_json& config,
                               const std::filesystem::path& report,
                               const std::optional<std::filesystem::path>& confusion) {
  auto j = to_json(r);
  j["config"] = config;
  write_json_file(j, report);
  auto csv = confusion.value_or(std::filesystem::path(report).replace_extension(".confusion.csv"));
  write_confusion_csv(r.confusion, csv);
}

}  // namespace detail

// ------------------------------------------------------------- subcommands

inline int run_preprocess(const PreprocessOptions& o, std::ostream& out) {
  if (!(o.low_hz < o.high_hz))
    throw ConfigError("--low (" + std::to_string(o.low_hz) + ") must be below --high (" + std::to_string(o.high_hz) + ")");
  auto recordings = read_raw_csv(o.input);
  if (recordings.empty()) throw SchemaError(o.input.string() + " holds no recordings");

  const double fs = o.sample_rate_hz.value_or(recordings.front().sample_rate_hz);
  for (const auto& r : recordings)
    if (!o.sample_rate_hz && std::abs(r.sample_rate_hz - fs) > kSamplingTolerance * fs)
      throw SchemaError("subject '" + r.subject + "' is sampled at " + std::to_string(r.sample_rate_hz) +
                        " Hz, others at " + std::to_string(fs) + " Hz; pass --fs to override");
  SegmentOptions seg;
  seg.window_length = o.window_seconds ? detail::seconds_to_samples(*o.window_seconds, fs, "window") : o.window;
  seg.stride = o.stride_seconds ? detail::seconds_to_samples(*o.stride_seconds, fs, "stride") : o.stride;
  seg.pure_only = o.pure_only;
  if (seg.window_length < 1 || seg.stride < 1) throw ConfigError("--window and --stride must be at least 1");

  const SosFilter filter = design_butterworth_bandpass(o.order, o.low_hz, o.high_hz, fs);
  WindowDataset all;
  all.channels = kRawChannels;
  all.length = seg.window_length;
  all.stride = seg.stride;
  all.sample_rate_hz = fs;
  for (auto& r : recordings) {
    r.sample_rate_hz = fs;
    const auto windows = segment_windows(filter_recording(std::move(r), filter), seg);
    for (std::size_t i = 0; i < windows.size(); ++i)
      all.push_back(windows.window(i), windows.labels[i], windows.subjects[i]);
  }
  nlohmann::ordered_json extra;
  extra["config"] = detail::to_json(o, fs, seg.window_length, seg.stride);
  write_windows(all, o.output, extra);
  out << "wrote " << all.size() << " windows of " << all.channels << " x " << all.length << " to " << o.output.string()
      << '\n';
  return kSuccess;
}

inline int run_train(const TrainOptions& o, std::ostream& out) {
  auto [train_set, test_set] = detail::make_split(read_windows(o.data), o.split, o.seed);

  nlohmann::ordered_json extra;
  extra["train_config"] = detail::to_json(o);
  if (o.standardize) {
    const auto stats = compute_channel_stats(train_set);
    train_set = standardize_channels(std::move(train_set), stats).dataset;
    if (test_set) test_set = standardize_channels(std::move(*test_set), stats).dataset;
    extra["standardization"] = detail::stats_json(stats);
  }

  ModelConfig model_cfg;
  model_cfg.input_channels = train_set.channels;
  model_cfg.input_length = train_set.length;
  model_cfg.variant = o.model == "cnn" ? ModelVariant::cnn_only : ModelVariant::cnn_lstm;
  model_cfg.lstm_input_mode = o.lstm_mode == "seq" ? LstmInputMode::sequence : LstmInputMode::flat_single_step;

  TrainConfig cfg;
  cfg.learning_rate = o.learning_rate;
  cfg.epochs = o.epochs;
  cfg.batch_size = o.batch;
  cfg.seed = o.seed;
  cfg.clip_norm = o.clip_norm;
  cfg.record_time = o.record_time;

  auto progress = [&](const EpochRecord& r) {
    if (o.progress_every == 0 || r.epoch % o.progress_every != 0) return;
    out << "epoch " << r.epoch << " loss " << detail::fixed(r.train_loss) << " train " << detail::fixed(r.train_accuracy);
    if (!std::isnan(r.test_accuracy)) out << " test " << detail::fixed(r.test_accuracy);
    out << '\n' << std::flush;
  };
  const WindowDataset* test_ptr = test_set ? &*test_set : nullptr;
  auto result = train(model_cfg, build_model(model_cfg, o.seed), train_set, test_ptr, cfg, progress);

  const double train_acc = accuracy(predict_dataset(result.weights, model_cfg, train_set), train_set.labels);
  extra["final"]["train_accuracy"] = train_acc;
  std::optional<double> test_acc;
  if (test_set) {
    test_acc = accuracy(predict_dataset(result.weights, model_cfg, *test_set), test_set->labels);
    extra["final"]["test_accuracy"] = *test_acc;
  }
  save_weights(result.weights, model_cfg, o.out, extra);
  if (o.log) write_train_log(*o.log, result.log, extra["train_config"].dump());

  out << "train accuracy " << detail::fixed(train_acc) << '\n';
  if (test_acc) out << "test accuracy " << detail::fixed(*test_acc) << '\n';
  return kSuccess;
}

inline int run_eval(const EvalOptions& o, std::ostream& out) {
  auto model = load_weights(o.weights);
  WindowDataset data = read_windows(o.data);
  if (data.channels != model.config.input_channels || data.length != model.config.input_length)
    throw FormatError(o.data.string() + " holds " + std::to_string(data.channels) + " x " + std::to_string(data.length) +
                          " windows, " + o.weights.string() + " expects " +
                          std::to_string(model.config.input_channels) + " x " +
                          std::to_string(model.config.input_length),
                      0);

  std::optional<std::uint64_t> split_seed;
  if (o.subset != "all") {
    const auto& tc = model.metadata.at("train_config");
    const auto& split = tc.at("split");
    if (!split.at("test_data").is_null() || split.at("test_fraction").get<double>() == 0.0)
      throw ConfigError("--subset " + o.subset + " needs a model trained with a seeded split");
    SplitOptions s;
    s.test_fraction = split.at("test_fraction").get<double>();
    s.mode = split.at("mode").get<std::string>();
    s.seed = split.at("seed").get<std::uint64_t>();
    split_seed = s.seed;
    auto parts = detail::make_split(std::move(data), s, *s.seed);
    data = o.subset == "test" ? std::move(*parts.test) : std::move(parts.train);
  }
  if (model.metadata.contains("standardization")) {
    const auto& st = model.metadata.at("standardization");
    ChannelStats stats{st.at("mean").get<std::vector<double>>(), st.at("stddev").get<std::vector<double>>()};
    data = standardize_channels(std::move(data), stats).dataset;
  }

  const auto scored = predict_scored(model.weights, model.config, data);
  const auto cm = confusion_matrix(data.labels, scored.labels, model.config.classes);
  const auto report = build_report(cm, scored.probabilities, data.labels,
                                   {to_string(model.config.variant), o.data.string(), split_seed});
  nlohmann::ordered_json config;
  config["command"] = "eval";
  config["data"] = o.data.string();
  config["weights"] = o.weights.string();
  config["subset"] = o.subset;
  detail::write_report_files(report, config, o.report, o.confusion);
  detail::print_summary(out, report);
  return kSuccess;
}

inline int run_baseline_command(const BaselineCliOptions& o, std::ostream& out) {
  const BaselineKind kind = baseline_kind_from_string(o.algo);
  auto [train_set, test_set] = detail::make_split(read_windows(o.data), o.split, o.seed);
  const WindowDataset& evaluated = test_set ? *test_set : train_set;

  BaselineOptions opt;
  opt.k = o.k;
  opt.max_depth = o.max_depth;
  opt.standardize = o.standardize;
  const auto pred = run_baseline(kind, FlatDataset::from_windows(train_set), evaluated.values, opt);

  const auto cm = confusion_matrix(evaluated.labels, pred.labels, opt.classes);
  std::optional<std::uint64_t> split_seed;
  if (!o.split.test_data && o.split.test_fraction > 0.0) split_seed = o.split.seed.value_or(o.seed);
  const auto report = build_report(cm, pred.scores, evaluated.labels, {to_string(kind), o.data.string(), split_seed});
  detail::write_report_files(report, detail::to_json(o), o.report, o.confusion);
  detail::print_summary(out, report);
  return kSuccess;
}

inline int run_gradcheck(const GradcheckOptions& o, std::ostream& out) {
  const auto reports = o.tolerance ? gradcheck_suite::run_all(o.seed, *o.tolerance, *o.tolerance)
                                   : gradcheck_suite::run_all(o.seed);
  bool all_passed = true;
  for (const auto& r : reports) {
    const bool passed = r.report.passed();
    all_passed = all_passed && passed;
    out << (passed ? "PASS " : "FAIL ") << r.check << " max_rel_error " << std::scientific << std::setprecision(3)
        << r.report.max_rel_error() << " tol " << r.report.tolerance << std::defaultfloat << '\n';
    for (const auto& p : r.report.params)
      if (!p.passed)
        out << "  " << p.name << "[" << p.worst_index << "] rel_error " << std::scientific << std::setprecision(3)
            << p.max_rel_error << " analytic " << p.worst_analytic << " numeric " << p.worst_numeric
            << std::defaultfloat << '\n';
  }
  return all_passed ? kSuccess : kCheckFailed;
}

inline int run_synth(const SynthOptions& o, std::ostream& out) {
  const auto data = synth_generate(o.config);
  nlohmann::ordered_json extra;
  extra["config"] = detail::to_json(o.config);
  write_windows(data, o.out, extra);
  out << "wrote " << data.size() << " synthetic windows to " << o.out.string() << '\n';
  return kSuccess;
}

// ------------------------------------------------------------------ parser

namespace detail {

inline void add_split_flags(CLI::App* cmd, SplitOptions& s) {
  cmd->add_option("--test-data", s.test_data, "Separate evaluation windows file (disables the split)");
  cmd->add_option("--test-fraction", s.test_fraction, "Held-out fraction; 0 trains on everything")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 0.999999));
  cmd->add_option("--split", s.mode, "Split mode")->capture_default_str()->check(CLI::IsMember({"random", "subject"}));
  cmd->add_option("--split-seed", s.seed, "Split seed (defaults to --seed)");
}

}  // namespace detail

/// Parses and runs one subcommand. `args` includes the program name.
inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"fNIRS n-back workload classification pipeline", kToolName};
  app.set_version_flag("--version", std::string(kToolName) + " " + kVersion);
  app.set_config("--config", "", "INI/TOML key=value file; [subcommand] sections hold subcommand settings");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.require_subcommand(1);

  PreprocessOptions pre;
  auto* pre_cmd = app.add_subcommand("preprocess", "Raw CSV to filtered, windowed binary file");
  pre_cmd->add_option("--input", pre.input, "Raw CSV")->required();
  pre_cmd->add_option("--out", pre.output, "Windows file to write")->required();
  pre_cmd->add_option("--fs", pre.sample_rate_hz, "Sample rate override in Hz (default: inferred)");
  pre_cmd->add_option("--low", pre.low_hz, "Pass-band low edge, Hz")->capture_default_str();
  pre_cmd->add_option("--high", pre.high_hz, "Pass-band high edge, Hz")->capture_default_str();
  pre_cmd->add_option("--order", pre.order, "Butterworth order")->capture_default_str()->check(CLI::PositiveNumber);
  pre_cmd->add_option("--window", pre.window, "Window length in samples")->capture_default_str();
  pre_cmd->add_option("--stride", pre.stride, "Stride in samples")->capture_default_str();
  pre_cmd->add_option("--window-seconds", pre.window_seconds, "Window length in seconds (overrides --window)");
  pre_cmd->add_option("--stride-seconds", pre.stride_seconds, "Stride in seconds (overrides --stride)");
  pre_cmd->add_flag("--pure-only,!--allow-mixed", pre.pure_only, "Drop windows spanning a label change")
      ->capture_default_str();

  TrainOptions tr;
  auto* train_cmd = app.add_subcommand("train", "Train the network");
  train_cmd->add_option("--data", tr.data, "Windows file")->required();
  train_cmd->add_option("--out", tr.out, "Weight file to write")->required();
  train_cmd->add_option("--log", tr.log, "Training log CSV");
  train_cmd->add_option("--model", tr.model, "Architecture")->capture_default_str()->check(
      CLI::IsMember({"cnn-lstm", "cnn"}));
  train_cmd->add_option("--lstm-mode", tr.lstm_mode, "LSTM input layout")->capture_default_str()->check(
      CLI::IsMember({"flat", "seq"}));
  train_cmd->add_option("--epochs", tr.epochs, "Epochs")->capture_default_str();
  train_cmd->add_option("--lr", tr.learning_rate, "Adam learning rate")->capture_default_str();
  train_cmd->add_option("--batch", tr.batch, "Mini-batch size")->capture_default_str();
  train_cmd->add_option("--seed", tr.seed, "Initialisation, shuffle and split seed")
      ->capture_default_str()
      ->envname(kSeedEnv);
  train_cmd->add_option("--clip-norm", tr.clip_norm, "Global gradient-norm ceiling");
  train_cmd->add_flag("--standardize", tr.standardize, "Z-score channels with training-split statistics");
  train_cmd->add_flag("!--no-time", tr.record_time, "Write zero seconds so logs compare byte-for-byte");
  train_cmd->add_option("--progress", tr.progress_every, "Print a line every N epochs (0: off)");
  detail::add_split_flags(train_cmd, tr.split);

  EvalOptions ev;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate trained weights");
  eval_cmd->add_option("--data", ev.data, "Windows file")->required();
  eval_cmd->add_option("--weights", ev.weights, "Weight file")->required();
  eval_cmd->add_option("--report", ev.report, "Report JSON to write")->required();
  eval_cmd->add_option("--confusion", ev.confusion, "Confusion CSV (default: next to the report)");
  eval_cmd->add_option("--subset", ev.subset, "Evaluate all windows or one side of the training split")
      ->capture_default_str()
      ->check(CLI::IsMember({"all", "train", "test"}));

  BaselineCliOptions bl;
  auto* base_cmd = app.add_subcommand("baseline", "Fit and evaluate a classical classifier");
  base_cmd->add_option("--data", bl.data, "Windows file")->required();
  base_cmd->add_option("--report", bl.report, "Report JSON to write")->required();
  base_cmd->add_option("--confusion", bl.confusion, "Confusion CSV (default: next to the report)");
  base_cmd->add_option("--algo", bl.algo, "Classifier")->capture_default_str()->check(
      CLI::IsMember({"nb", "centroid", "tree", "knn"}));
  base_cmd->add_option("--k", bl.k, "Neighbours for knn")->capture_default_str();
  base_cmd->add_option("--max-depth", bl.max_depth, "Depth cap for tree");
  base_cmd->add_flag("--standardize", bl.standardize, "Z-score features with training statistics");
  base_cmd->add_option("--seed", bl.seed, "Split seed")->capture_default_str()->envname(kSeedEnv);
  detail::add_split_flags(base_cmd, bl.split);

  GradcheckOptions gc;
  auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference gradient suite");
  grad_cmd->add_option("--seed", gc.seed, "Seed for random inputs")->capture_default_str()->envname(kSeedEnv);
  grad_cmd->add_option("--tol", gc.tolerance, "Relative-error tolerance for every check");

  SynthOptions sy;
  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic windows file");
  synth_cmd->add_option("--out", sy.out, "Windows file to write")->required();
  synth_cmd->add_option("--n", sy.config.windows_per_class, "Windows per class")->capture_default_str();
  synth_cmd->add_option("--snr", sy.config.snr_db, "Signal-to-noise ratio in dB (inf, -inf allowed)")
      ->capture_default_str();
  synth_cmd->add_option("--seed", sy.config.seed, "Generator seed")->capture_default_str()->envname(kSeedEnv);
  synth_cmd->add_option("--length", sy.config.length, "Samples per window")->capture_default_str();
  synth_cmd->add_option("--fs", sy.config.sample_rate_hz, "Sample rate in Hz")->capture_default_str();
  synth_cmd->add_flag("!--no-filter", sy.config.bandpass, "Skip the bandpass");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kSuccess : kUsage;
  }

  try {
    if (*pre_cmd) return run_preprocess(pre, out);
    if (*train_cmd) return run_train(tr, out);
    if (*eval_cmd) return run_eval(ev, out);
    if (*base_cmd) return run_baseline_command(bl, out);
    if (*grad_cmd) return run_gradcheck(gc, out);
    if (*synth_cmd) return run_synth(sy, out);
  } catch (const Error& e) {
    err << kToolName << ": " << e.kind() << " error: " << e.what() << '\n';
    return exit_code_for(e);
  } catch (const nlohmann::json::exception& e) {
    err << kToolName << ": format error: " << e.what() << '\n';
    return kFormat;
  } catch (const std::exception& e) {
    err << kToolName << ": error: " << e.what() << '\n';
    return kFormat;
  }
  return kUsage;
}

}  // namespace fnwl::cli
