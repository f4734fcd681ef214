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
#include "sludgevision/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <utility>

#include "json.hpp"
#include "sludgevision/common.hpp"
#include "sludgevision/rng.hpp"

namespace svx {

TrainMode parse_train_mode(const std::string& name) {
  if (name == "tl" || name == "transfer_learning") return TrainMode::transfer_learning;
  if (name == "tfs" || name == "from_scratch") return TrainMode::from_scratch;
  throw ValidationError("unknown training mode '" + name + "' (expected tl or tfs)");
}

std::string train_mode_name(TrainMode mode) {
  return mode == TrainMode::transfer_learning ? "tl" : "tfs";
}

CheckpointRule parse_checkpoint_rule(const std::string& name) {
  if (name == "best_validation_mse") return CheckpointRule::best_validation_mse;
  if (name == "paper_faithful_best_eval_mse") return CheckpointRule::paper_faithful_best_eval_mse;
  throw ValidationError("unknown checkpoint rule '" + name + "'");
}

std::string checkpoint_rule_name(CheckpointRule rule) {
  return rule == CheckpointRule::best_validation_mse ? "best_validation_mse"
                                                     : "paper_faithful_best_eval_mse";
}

TrainConfig TrainConfig::defaults_for(TrainMode mode) {
  TrainConfig c;
  c.mode = mode;
  c.epochs = mode == TrainMode::transfer_learning ? 30 : 95;
  return c;
}

void TrainConfig::validate() const {
  SVX_CHECK(epochs >= 1, ErrorKind::validation, "epochs must be >= 1");
  SVX_CHECK(batch_size >= 1, ErrorKind::validation, "batch_size must be >= 1");
  SVX_CHECK(std::isfinite(initial_lr) && std::isfinite(min_lr), ErrorKind::validation,
            "learning rates must be finite");
  SVX_CHECK(initial_lr >= min_lr && min_lr >= 0.0, ErrorKind::validation,
            "learning rates must satisfy initial_lr >= min_lr >= 0");
  SVX_CHECK(weight_decay >= 0.0 && std::isfinite(weight_decay), ErrorKind::validation,
            "weight_decay must be >= 0");
  if (layerwise_lr_decay.has_value()) {
    SVX_CHECK(*layerwise_lr_decay > 0.0 && *layerwise_lr_decay <= 1.0,
              ErrorKind::validation, "layerwise_lr_decay must lie in (0,1]");
  }
  SVX_CHECK(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0,
            ErrorKind::validation, "Adam betas must lie in [0,1)");
  SVX_CHECK(adam_eps > 0.0, ErrorKind::validation, "Adam epsilon must be positive");
}

nlohmann::json train_config_json(const TrainConfig& config) {
  nlohmann::json doc{{"mode", train_mode_name(config.mode)},
                     {"epochs", config.epochs},
                     {"batch_size", config.batch_size},
                     {"initial_lr", config.initial_lr},
                     {"min_lr", config.min_lr},
                     {"weight_decay", config.weight_decay},
                     {"checkpoint_rule", checkpoint_rule_name(config.checkpoint_rule)},
                     {"seed", config.seed},
                     {"calibrate_output", config.calibrate_output},
                     {"adam_beta1", config.adam_beta1},
                     {"adam_beta2", config.adam_beta2},
                     {"adam_eps", config.adam_eps}};
  if (config.layerwise_lr_decay.has_value()) {
    doc["layerwise_lr_decay"] = *config.layerwise_lr_decay;
  }
  return doc;
}

TrainConfig train_config_from_json(const nlohmann::json& doc) {
  TrainConfig c;
  try {
    c.mode = parse_train_mode(doc.at("mode").get<std::string>());
    c.epochs = doc.at("epochs").get<int>();
    c.batch_size = doc.at("batch_size").get<int>();
    c.initial_lr = doc.at("initial_lr").get<double>();
    c.min_lr = doc.at("min_lr").get<double>();
    c.weight_decay = doc.at("weight_decay").get<double>();
    c.checkpoint_rule = parse_checkpoint_rule(doc.at("checkpoint_rule").get<std::string>());
    c.seed = doc.at("seed").get<uint64_t>();
    c.calibrate_output = doc.at("calibrate_output").get<bool>();
    c.adam_beta1 = doc.at("adam_beta1").get<double>();
    c.adam_beta2 = doc.at("adam_beta2").get<double>();
    c.adam_eps = doc.at("adam_eps").get<double>();
    if (doc.contains("layerwise_lr_decay")) {
      c.layerwise_lr_decay = doc["layerwise_lr_decay"].get<double>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed train config JSON: ") + e.what());
  }
  c.validate();
  return c;
}

std::string TrainHistory::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& e : epochs) {
    rows.push_back({{"epoch", e.epoch},
                    {"train_mse", e.train_mse},
                    {"val_mse", e.val_mse},
                    {"lr", e.lr}});
  }
  nlohmann::json doc{{"epochs", rows},
                     {"selected_checkpoint_epoch", selected_checkpoint_epoch}};
  return doc.dump(2) + "\n";
}

double mse(const std::vector<double>& predictions, const std::vector<double>& targets) {
  SVX_CHECK(!predictions.empty(), ErrorKind::validation, "mse of empty lists");
  SVX_CHECK(predictions.size() == targets.size(), ErrorKind::validation,
            "mse length mismatch: " + std::to_string(predictions.size()) + " vs " +
                std::to_string(targets.size()));
  double sum = 0.0;
  for (size_t i = 0; i < predictions.size(); ++i) {
    const double d = predictions[i] - targets[i];
    sum += d * d;
  }
  return sum / double(predictions.size());
}

double lr_at(int epoch, const TrainConfig& config) {
  config.validate();
  SVX_CHECK(epoch >= 0 && epoch <= config.epochs, ErrorKind::validation,
            "epoch " + std::to_string(epoch) + " outside schedule range [0, " +
                std::to_string(config.epochs) + "]");
  constexpr double kPi = 3.14159265358979323846;
  const double amplitude = config.initial_lr - config.min_lr;
  return config.min_lr +
         0.5 * amplitude * (1.0 + std::cos(kPi * double(epoch) / double(config.epochs)));
}

// ---------------------------------------------------------------------------
// AdamW

AdamW::AdamW(std::vector<nn::Param*> params, const TrainConfig& config)
    : params_(std::move(params)),
      beta1_(config.adam_beta1),
      beta2_(config.adam_beta2),
      eps_(config.adam_eps),
      weight_decay_(config.weight_decay) {
  config.validate();
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  lr_mult_.assign(params_.size(), 1.0);
  for (const nn::Param* p : params_) {
    m_.push_back(p->value.shaped_like());
    v_.push_back(p->value.shaped_like());
  }
  if (config.layerwise_lr_decay.has_value()) {
    // Group backbone parameters by their top-level module index; earlier
    // groups get geometrically smaller learning rates, the head gets 1.
    int n_top = 0;
    std::vector<int> group(params_.size(), -1);
    for (size_t i = 0; i < params_.size(); ++i) {
      const std::string& name = params_[i]->name;
      constexpr const char* kPrefix = "backbone.";
      if (name.rfind(kPrefix, 0) != 0) continue;
      size_t pos = std::string(kPrefix).size();
      int idx = 0;
      while (pos < name.size() && name[pos] >= '0' && name[pos] <= '9') {
        idx = idx * 10 + (name[pos] - '0');
        ++pos;
      }
      group[i] = idx;
      n_top = std::max(n_top, idx + 1);
    }
    for (size_t i = 0; i < params_.size(); ++i) {
      if (group[i] >= 0) {
        lr_mult_[i] = std::pow(*config.layerwise_lr_decay, double(n_top - group[i]));
      }
    }
  }
}

void AdamW::step(double lr) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, double(t_));
  const double bc2 = 1.0 - std::pow(beta2_, double(t_));
  for (size_t i = 0; i < params_.size(); ++i) {
    nn::Param& p = *params_[i];
    SVX_CHECK(p.grad.allocated() && p.grad.numel() == p.value.numel(), ErrorKind::train,
              "missing gradient for parameter '" + p.name + "'");
    const double step_lr = lr * lr_mult_[i];
    double* w = p.value.data();
    const double* g = p.grad.data();
    double* m = m_[i].data();
    double* v = v_[i].data();
    const int64_t n = p.value.numel();
    for (int64_t k = 0; k < n; ++k) {
      w[k] *= 1.0 - step_lr * weight_decay_;
      m[k] = beta1_ * m[k] + (1.0 - beta1_) * g[k];
      v[k] = beta2_ * v[k] + (1.0 - beta2_) * g[k] * g[k];
      const double mhat = m[k] / bc1;
      const double vhat = v[k] / bc2;
      w[k] -= step_lr * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

// ---------------------------------------------------------------------------
// Training loop

namespace {

void check_indices(const DatasetManifest& manifest, const std::vector<int>& idx,
                   const char* what) {
  SVX_CHECK(!idx.empty(), ErrorKind::validation,
            std::string(what) + " split must not be empty");
  for (int i : idx) {
    SVX_CHECK(i >= 0 && size_t(i) < manifest.samples.size(), ErrorKind::validation,
              std::string(what) + " index " + std::to_string(i) + " out of range");
  }
}

std::set<Date> day_set(const DatasetManifest& manifest, const std::vector<int>& idx) {
  std::set<Date> days;
  for (int i : idx) days.insert(manifest.samples[size_t(i)].day);
  return days;
}

// Lazily populated per-sample image cache, resized to manifest resolution,
// values in [0,1] (normalization happens at batch assembly).
class ImageCache {
public:
  explicit ImageCache(const DatasetManifest& manifest)
      : manifest_(manifest), images_(manifest.samples.size()), loaded_(manifest.samples.size(), 0) {}

  const Image& get(int index) {
    if (!loaded_[size_t(index)]) {
      const ImageSample& s = manifest_.samples[size_t(index)];
      images_[size_t(index)] =
          load_image(manifest_.resolve_path(s), manifest_.width, manifest_.height);
      loaded_[size_t(index)] = 1;
    }
    return images_[size_t(index)];
  }

private:
  const DatasetManifest& manifest_;
  std::vector<Image> images_;
  std::vector<char> loaded_;
};

void fill_batch_slot(Tensor& batch, int slot, const Image& img,
                     const NormalizationStats& stats) {
  const int h = img.height;
  const int w = img.width;
  for (int c = 0; c < 3; ++c) {
    const double mean = stats.mean[size_t(c)];
    const double inv_std = 1.0 / stats.stddev[size_t(c)];
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        batch.at4(slot, c, y, x) = (double(img.at(y, x, c)) - mean) * inv_std;
      }
    }
  }
}

double eval_mse_over(RegressionModel& model, const DatasetManifest& manifest,
                     ImageCache& cache, const std::vector<int>& indices, int batch_size) {
  double sum_sq = 0.0;
  for (size_t start = 0; start < indices.size(); start += size_t(batch_size)) {
    const size_t count = std::min(size_t(batch_size), indices.size() - start);
    Tensor batch({int64_t(count), 3, manifest.height, manifest.width});
    for (size_t k = 0; k < count; ++k) {
      fill_batch_slot(batch, int(k), cache.get(indices[start + k]), manifest.normalization);
    }
    const std::vector<double> preds = model.forward(batch, /*training=*/false, nullptr);
    for (size_t k = 0; k < count; ++k) {
      const double d = preds[k] - manifest.samples[size_t(indices[start + k])].svi;
      sum_sq += d * d;
    }
  }
  return sum_sq / double(indices.size());
}

} // namespace

TrainHistory train(RegressionModel& model,
                   const DatasetManifest& manifest,
                   const std::vector<int>& train_indices,
                   const std::vector<int>& val_indices,
                   const AugmentPolicy& policy,
                   const TrainConfig& config) {
  config.validate();
  policy.validate();
  check_indices(manifest, train_indices, "training");
  check_indices(manifest, val_indices, "validation");
  {
    const std::set<Date> train_days = day_set(manifest, train_indices);
    for (const Date& d : day_set(manifest, val_indices)) {
      SVX_CHECK(!train_days.count(d), ErrorKind::validation,
                "day " + to_iso(d) + " appears in both training and validation splits");
    }
  }

  ImageCache cache(manifest);
  const int h = manifest.height;
  const int w = manifest.width;

  if (config.calibrate_output) {
    double mean = 0.0;
    for (int i : train_indices) mean += manifest.samples[size_t(i)].svi;
    mean /= double(train_indices.size());
    double var = 0.0;
    for (int i : train_indices) {
      const double d = manifest.samples[size_t(i)].svi - mean;
      var += d * d;
    }
    double sd = train_indices.size() > 1
                    ? std::sqrt(var / double(train_indices.size() - 1))
                    : 0.0;
    model.set_output_calibration(mean, sd > 1e-12 ? sd : 1.0);
  }

  AdamW optimizer(model.params(), config);
  TrainHistory history;
  double best_val = std::numeric_limits<double>::infinity();
  int best_epoch = 0;
  std::map<std::string, Tensor> best_state;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = lr_at(epoch, config);
    std::vector<int> order = train_indices;
    {
      Rng shuffle_rng(derive_seed(config.seed, "epoch_shuffle", epoch));
      for (size_t i = order.size(); i > 1; --i) {
        const size_t j = size_t(shuffle_rng.uniform_int(0, int64_t(i) - 1));
        std::swap(order[i - 1], order[j]);
      }
    }

    double sum_sq = 0.0;
    int64_t batch_index = 0;
    for (size_t start = 0; start < order.size(); start += size_t(config.batch_size)) {
      const size_t count = std::min(size_t(config.batch_size), order.size() - start);
      Tensor batch({int64_t(count), 3, h, w});
      std::vector<double> targets(count);
      for (size_t k = 0; k < count; ++k) {
        const int idx = order[start + k];
        const ImageSample& s = manifest.samples[size_t(idx)];
        Rng aug_rng(derive_seed(config.seed, s.sample_id, epoch));
        const Image augmented = apply_policy(cache.get(idx), policy, aug_rng);
        ++history.train_augment_calls;
        fill_batch_slot(batch, int(k), augmented, manifest.normalization);
        targets[k] = s.svi;
      }

      Rng model_rng(derive_seed(config.seed, "model", int64_t(epoch) * 1000003 + batch_index));
      const std::vector<double> preds = model.forward(batch, /*training=*/true, &model_rng);

      double batch_sq = 0.0;
      std::vector<double> grads(count);
      for (size_t k = 0; k < count; ++k) {
        const double d = preds[k] - targets[k];
        batch_sq += d * d;
        grads[k] = 2.0 * d / double(count);
      }
      if (!std::isfinite(batch_sq)) {
        throw TrainError("non-finite training loss at epoch " + std::to_string(epoch) +
                         ", batch " + std::to_string(batch_index));
      }
      sum_sq += batch_sq;

      model.zero_grad();
      model.backward(grads);
      optimizer.step(lr);
      ++batch_index;
    }

    const double train_mse = sum_sq / double(order.size());
    const double val_mse =
        eval_mse_over(model, manifest, cache, val_indices, config.batch_size);
    if (!std::isfinite(val_mse)) {
      throw TrainError("non-finite validation loss at epoch " + std::to_string(epoch));
    }
    history.epochs.push_back({epoch, train_mse, val_mse, lr});

    if (val_mse < best_val) {
      best_val = val_mse;
      best_epoch = epoch;
      best_state = model.state_dict();
    }
  }

  model.load_state_dict(best_state);
  history.selected_checkpoint_epoch = best_epoch;
  return history;
}

std::vector<double> predict_samples(RegressionModel& model,
                                    const DatasetManifest& manifest,
                                    const std::vector<int>& indices,
                                    int batch_size) {
  SVX_CHECK(batch_size >= 1, ErrorKind::validation, "batch_size must be >= 1");
  check_indices(manifest, indices, "prediction");
  ImageCache cache(manifest);
  std::vector<double> preds;
  preds.reserve(indices.size());
  for (size_t start = 0; start < indices.size(); start += size_t(batch_size)) {
    const size_t count = std::min(size_t(batch_size), indices.size() - start);
    Tensor batch({int64_t(count), 3, manifest.height, manifest.width});
    for (size_t k = 0; k < count; ++k) {
      fill_batch_slot(batch, int(k), cache.get(indices[start + k]), manifest.normalization);
    }
    const std::vector<double> out = model.forward(batch, /*training=*/false, nullptr);
    preds.insert(preds.end(), out.begin(), out.end());
  }
  return preds;
}

} // namespace svx
