/**
 * Copyright 2026 The SludgeVision Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include "sludgevision/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <set>
#include <vector>

#include "json.hpp"
#include "sludgevision/checkpoint.hpp"
#include "sludgevision/common.hpp"
#include "sludgevision/io_util.hpp"
#include "sludgevision/rng.hpp"
#include "sludgevision/synth.hpp"

namespace svx {

namespace {

const std::set<std::string>& known_config_keys() {
  static const std::set<std::string> keys{
      "data.width", "data.height", "data.mean_r", "data.mean_g", "data.mean_b",
      "data.std_r", "data.std_g", "data.std_b",
      "augment.enabled", "augment.flip_horizontal", "augment.flip_vertical",
      "augment.rotation_min", "augment.rotation_max", "augment.brightness_min",
      "augment.brightness_max", "augment.erase_probability",
      "augment.erase_fraction_min", "augment.erase_fraction_max",
      "model.pretrained", "model.stochastic_depth",
      "train.epochs", "train.batch_size", "train.initial_lr", "train.min_lr",
      "train.weight_decay", "train.layerwise_lr_decay", "train.checkpoint_rule",
      "train.seed", "train.calibrate_output", "train.adam_beta1",
      "train.adam_beta2", "train.adam_eps",
      "eval.validation_fraction", "eval.fold_mode", "eval.save_checkpoints",
      "monitor.threshold", "monitor.persistence", "monitor.trend_window",
      "monitor.trend_slope_min"};
  return keys;
}

std::filesystem::path ensure_out_dir(const std::string& out_dir) {
  SVX_CHECK(!out_dir.empty(), ErrorKind::validation, "output directory must be given");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  SVX_CHECK(!ec, ErrorKind::io,
            "cannot create output directory '" + out_dir + "': " + ec.message());
  return std::filesystem::path(out_dir);
}

// Deterministic day-group carve-out used by run_train (cross_validate has
// its own per-fold variant).
void carve_validation_days(const DatasetManifest& manifest, double fraction,
                           uint64_t seed, std::vector<int>& train_idx,
                           std::vector<int>& val_idx) {
  std::vector<DayGroup> groups = group_by_day(manifest);
  SVX_CHECK(groups.size() >= 2, ErrorKind::validation,
            "need at least 2 day groups to carve a validation split");
  std::vector<Date> days;
  for (const DayGroup& g : groups) days.push_back(g.day);
  Rng rng(derive_seed(seed, "train_val_carve", 0));
  for (size_t i = days.size(); i > 1; --i) {
    const size_t j = size_t(rng.uniform_int(0, int64_t(i) - 1));
    std::swap(days[i - 1], days[j]);
  }
  size_t n_val = size_t(std::ceil(fraction * double(days.size())));
  n_val = std::min(std::max<size_t>(n_val, 1), days.size() - 1);
  const std::set<Date> val_days(days.begin(), days.begin() + long(n_val));
  for (size_t i = 0; i < manifest.samples.size(); ++i) {
    (val_days.count(manifest.samples[i].day) ? val_idx : train_idx).push_back(int(i));
  }
}

} // namespace

AugmentPolicy PipelineConfig::effective_policy() const {
  return augment_enabled ? augment : AugmentPolicy::identity();
}

TrainConfig PipelineConfig::train_config(TrainMode mode) const {
  TrainConfig c = TrainConfig::defaults_for(mode);
  c.epochs = int(raw.get_int("train.epochs", c.epochs));
  c.batch_size = int(raw.get_int("train.batch_size", c.batch_size));
  c.initial_lr = raw.get_double("train.initial_lr", c.initial_lr);
  c.min_lr = raw.get_double("train.min_lr", c.min_lr);
  c.weight_decay = raw.get_double("train.weight_decay", c.weight_decay);
  if (raw.has("train.layerwise_lr_decay")) {
    c.layerwise_lr_decay = raw.get_double("train.layerwise_lr_decay", 1.0);
  }
  c.checkpoint_rule = parse_checkpoint_rule(
      raw.get_string("train.checkpoint_rule", checkpoint_rule_name(c.checkpoint_rule)));
  c.seed = uint64_t(raw.get_int("train.seed", int64_t(c.seed)));
  c.calibrate_output = raw.get_bool("train.calibrate_output", c.calibrate_output);
  c.adam_beta1 = raw.get_double("train.adam_beta1", c.adam_beta1);
  c.adam_beta2 = raw.get_double("train.adam_beta2", c.adam_beta2);
  c.adam_eps = raw.get_double("train.adam_eps", c.adam_eps);
  c.validate();
  return c;
}

ModelSpec PipelineConfig::model_spec(Arch arch, TrainMode mode) const {
  ModelSpec spec;
  spec.arch = arch;
  spec.stochastic_depth_rate = raw.get_double(
      "model.stochastic_depth", ModelSpec::default_stochastic_depth(arch));
  Pretrained dflt = Pretrained::none;
  if (mode == TrainMode::transfer_learning) {
    if (arch == Arch::convnext_s) {
      dflt = Pretrained::imagenet_21k;
    } else if (arch != Arch::tiny_cnn) {
      dflt = Pretrained::imagenet_1k;
    }
  }
  spec.pretrained =
      parse_pretrained(raw.get_string("model.pretrained", pretrained_name(dflt)));
  spec.validate();
  return spec;
}

PipelineConfig load_pipeline_config(const std::string& path) {
  PipelineConfig cfg;
  if (path.empty()) return cfg;
  cfg.raw = KeyValueDoc::parse_file(path);
  for (const auto& [key, value] : cfg.raw.values()) {
    SVX_CHECK(known_config_keys().count(key), ErrorKind::parse,
              "unknown config key '" + key + "'");
  }
  cfg.width = int(cfg.raw.get_int("data.width", cfg.width));
  cfg.height = int(cfg.raw.get_int("data.height", cfg.height));
  SVX_CHECK(cfg.width > 0 && cfg.height > 0, ErrorKind::validation,
            "data.width and data.height must be positive");
  cfg.normalization.mean[0] = cfg.raw.get_double("data.mean_r", cfg.normalization.mean[0]);
  cfg.normalization.mean[1] = cfg.raw.get_double("data.mean_g", cfg.normalization.mean[1]);
  cfg.normalization.mean[2] = cfg.raw.get_double("data.mean_b", cfg.normalization.mean[2]);
  cfg.normalization.stddev[0] = cfg.raw.get_double("data.std_r", cfg.normalization.stddev[0]);
  cfg.normalization.stddev[1] = cfg.raw.get_double("data.std_g", cfg.normalization.stddev[1]);
  cfg.normalization.stddev[2] = cfg.raw.get_double("data.std_b", cfg.normalization.stddev[2]);
  cfg.normalization.validate();

  cfg.augment_enabled = cfg.raw.get_bool("augment.enabled", cfg.augment_enabled);
  AugmentPolicy& p = cfg.augment;
  p.flip_horizontal = cfg.raw.get_double("augment.flip_horizontal", p.flip_horizontal);
  p.flip_vertical = cfg.raw.get_double("augment.flip_vertical", p.flip_vertical);
  p.rotation_degrees.lo = cfg.raw.get_double("augment.rotation_min", p.rotation_degrees.lo);
  p.rotation_degrees.hi = cfg.raw.get_double("augment.rotation_max", p.rotation_degrees.hi);
  p.brightness_delta.lo = cfg.raw.get_double("augment.brightness_min", p.brightness_delta.lo);
  p.brightness_delta.hi = cfg.raw.get_double("augment.brightness_max", p.brightness_delta.hi);
  p.erase_probability = cfg.raw.get_double("augment.erase_probability", p.erase_probability);
  p.erase_area_fraction.lo =
      cfg.raw.get_double("augment.erase_fraction_min", p.erase_area_fraction.lo);
  p.erase_area_fraction.hi =
      cfg.raw.get_double("augment.erase_fraction_max", p.erase_area_fraction.hi);
  p.validate();

  cfg.validation_fraction =
      cfg.raw.get_double("eval.validation_fraction", cfg.validation_fraction);
  SVX_CHECK(cfg.validation_fraction > 0.0 && cfg.validation_fraction < 1.0,
            ErrorKind::validation, "eval.validation_fraction must lie in (0,1)");
  const std::string fold_mode = cfg.raw.get_string("eval.fold_mode", "per_day");
  if (fold_mode == "per_day") {
    cfg.fold_mode = FoldMode::per_day;
  } else if (fold_mode == "per_image") {
    cfg.fold_mode = FoldMode::per_image;
  } else {
    throw ParseError("eval.fold_mode must be per_day or per_image, got '" + fold_mode + "'");
  }
  cfg.save_fold_checkpoints =
      cfg.raw.get_bool("eval.save_checkpoints", cfg.save_fold_checkpoints);

  cfg.monitor.threshold = cfg.raw.get_double("monitor.threshold", cfg.monitor.threshold);
  cfg.monitor.persistence =
      int(cfg.raw.get_int("monitor.persistence", cfg.monitor.persistence));
  cfg.monitor.trend_window =
      int(cfg.raw.get_int("monitor.trend_window", cfg.monitor.trend_window));
  cfg.monitor.trend_slope_min =
      cfg.raw.get_double("monitor.trend_slope_min", cfg.monitor.trend_slope_min);
  cfg.monitor.validate();
  return cfg;
}

SynthGenResult run_synth_gen(int days, int per_day, uint64_t seed,
                             const std::string& out_dir) {
  ensure_out_dir(out_dir);
  const DatasetManifest manifest = generate_dataset(days, per_day, seed, out_dir);
  SynthGenResult result;
  result.manifest_path = (std::filesystem::path(out_dir) / "manifest.csv").string();
  result.n_images = int(manifest.samples.size());
  return result;
}

TrainRunResult run_train(const std::string& manifest_path, const std::string& arch,
                         const std::string& mode, const std::string& config_path,
                         const std::string& out_dir) {
  const PipelineConfig cfg = load_pipeline_config(config_path);
  const Arch a = parse_arch(arch);
  const TrainMode m = parse_train_mode(mode);
  const DatasetManifest manifest =
      load_manifest(manifest_path, cfg.width, cfg.height, cfg.normalization);
  const TrainConfig tc = cfg.train_config(m);
  const ModelSpec spec = cfg.model_spec(a, m);

  std::vector<int> train_idx, val_idx;
  carve_validation_days(manifest, cfg.validation_fraction, tc.seed, train_idx, val_idx);

  auto model = build_model(spec, derive_seed(tc.seed, "model_init", 0));
  const TrainHistory history =
      train(*model, manifest, train_idx, val_idx, cfg.effective_policy(), tc);

  const std::filesystem::path out = ensure_out_dir(out_dir);
  TrainRunResult result;
  result.history_path = (out / "history.json").string();
  write_file_atomic(result.history_path, history.to_json());

  nlohmann::json extra{{"train_config", train_config_json(tc)},
                       {"seed", tc.seed},
                       {"manifest_hash", manifest_content_hash(manifest)},
                       {"data", {{"width", manifest.width}, {"height", manifest.height}}},
                       {"selected_epoch", history.selected_checkpoint_epoch}};
  result.checkpoint_path =
      (out / checkpoint_filename(a, train_mode_name(m), 0,
                                 history.selected_checkpoint_epoch))
          .string();
  save_checkpoint(result.checkpoint_path, *model, extra);

  result.selected_epoch = history.selected_checkpoint_epoch;
  result.best_val_mse =
      history.epochs[size_t(history.selected_checkpoint_epoch)].val_mse;
  return result;
}

CrossValidateRunResult run_cross_validate(const std::string& manifest_path,
                                          const std::string& arch,
                                          const std::string& mode, int k, uint64_t seed,
                                          const std::string& config_path,
                                          const std::string& out_dir) {
  const PipelineConfig cfg = load_pipeline_config(config_path);
  const Arch a = parse_arch(arch);
  const TrainMode m = parse_train_mode(mode);
  const DatasetManifest manifest =
      load_manifest(manifest_path, cfg.width, cfg.height, cfg.normalization);
  const TrainConfig tc = cfg.train_config(m);
  const ModelSpec spec = cfg.model_spec(a, m);
  const std::filesystem::path out = ensure_out_dir(out_dir);

  CrossValOptions options;
  options.fold_mode = cfg.fold_mode;
  options.validation_fraction = cfg.validation_fraction;
  if (cfg.save_fold_checkpoints) {
    options.checkpoint_dir = (out / "checkpoints").string();
  }

  const CrossValResult cv =
      cross_validate(spec, manifest, tc, cfg.effective_policy(), k, seed, options);

  CrossValidateRunResult result;
  result.report_path = (out / "cv_report.json").string();
  emit_report(result.report_path, cv, arch_name(a), train_mode_name(m));
  result.aggregate = cv.aggregate;
  return result;
}

CompareRunResult run_compare(const std::string& manifest_path, const std::string& specs,
                             int k, uint64_t seed, const std::string& config_path,
                             const std::string& out_dir) {
  const PipelineConfig cfg = load_pipeline_config(config_path);
  const DatasetManifest manifest =
      load_manifest(manifest_path, cfg.width, cfg.height, cfg.normalization);

  std::vector<CompareSpec> entries;
  std::string current;
  auto flush = [&](const std::string& token) {
    if (token.empty()) return;
    const size_t colon = token.find(':');
    SVX_CHECK(colon != std::string::npos, ErrorKind::validation,
              "compare spec '" + token + "' must look like arch:mode");
    const Arch a = parse_arch(token.substr(0, colon));
    const TrainMode m = parse_train_mode(token.substr(colon + 1));
    CompareSpec entry;
    entry.model = cfg.model_spec(a, m);
    entry.config = cfg.train_config(m);
    entry.policy = cfg.effective_policy();
    entries.push_back(std::move(entry));
  };
  for (char c : specs) {
    if (c == ',') {
      flush(current);
      current.clear();
    } else if (!std::isspace(static_cast<unsigned char>(c))) {
      current.push_back(c);
    }
  }
  flush(current);

  CrossValOptions options;
  options.fold_mode = cfg.fold_mode;
  options.validation_fraction = cfg.validation_fraction;

  const Leaderboard board = compare_models(entries, manifest, k, seed, options);

  const std::filesystem::path out = ensure_out_dir(out_dir);
  CompareRunResult result;
  result.report_path = (out / "leaderboard.json").string();
  result.table_path = (out / "leaderboard.txt").string();
  write_file_atomic(result.report_path, board.to_json());
  write_file_atomic(result.table_path, board.to_text());
  return result;
}

PredictRunResult run_predict(const std::string& checkpoint_path,
                             const std::string& manifest_path,
                             const std::string& out_dir) {
  LoadedCheckpoint loaded = load_checkpoint(checkpoint_path);
  int width = 512, height = 384;
  if (loaded.extra.contains("data")) {
    width = loaded.extra["data"].value("width", width);
    height = loaded.extra["data"].value("height", height);
  }
  const DatasetManifest manifest =
      load_manifest(manifest_path, width, height, NormalizationStats{});

  std::vector<int> indices(manifest.samples.size());
  for (size_t i = 0; i < indices.size(); ++i) indices[i] = int(i);
  const std::vector<double> preds =
      predict_samples(*loaded.model, manifest, indices, 32);

  std::vector<PredictionRow> rows;
  rows.reserve(preds.size());
  for (size_t i = 0; i < preds.size(); ++i) {
    const ImageSample& s = manifest.samples[i];
    PredictionRow row;
    row.sample_id = s.sample_id;
    row.day = s.day;
    row.replicate_index = s.replicate_index;
    row.measured_svi = s.svi;
    row.predicted_svi = preds[i];
    rows.push_back(std::move(row));
  }

  const std::filesystem::path out = ensure_out_dir(out_dir);
  PredictRunResult result;
  result.predictions_path = (out / "predictions.csv").string();
  write_predictions_csv(result.predictions_path, rows);
  result.n_predictions = int(rows.size());
  return result;
}

MonitorRunResult run_monitor(const std::string& predictions_path, double threshold,
                             int persistence, const std::string& plot_path,
                             const std::string& report_path,
                             const std::string& config_path) {
  const PipelineConfig cfg = load_pipeline_config(config_path);
  MonitorConfig mc = cfg.monitor;
  if (threshold > 0.0) mc.threshold = threshold;
  if (persistence > 0) mc.persistence = persistence;
  mc.validate();

  const std::vector<PredictionRow> rows = read_predictions_csv(predictions_path);
  const std::vector<DailyPrediction> series = aggregate_daily(rows);
  const std::vector<WarningEvent> warnings = detect_warnings(series, mc);

  MonitorRunResult result;
  result.n_days = int(series.size());
  result.n_warnings = int(warnings.size());
  if (!report_path.empty()) {
    emit_report(report_path, series, warnings, mc);
    result.report_path = report_path;
  }
  if (!plot_path.empty()) {
    emit_plot(plot_path, series, warnings, mc);
    result.plot_path = plot_path;
  }
  return result;
}

} // namespace svx
