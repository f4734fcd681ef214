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
#include "sludgevision/model.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <utility>

#include "json.hpp"
#include "sludgevision/checkpoint.hpp"
#include "sludgevision/common.hpp"
#include "sludgevision/io_util.hpp"
#include "sludgevision/sha256.hpp"

namespace svx {

namespace {

constexpr double kHeadInitStd = 0.01;
constexpr const char* kLockfileName = "weights.lock.json";

} // namespace

Pretrained parse_pretrained(const std::string& name) {
  if (name == "none") return Pretrained::none;
  if (name == "imagenet_1k") return Pretrained::imagenet_1k;
  if (name == "imagenet_21k") return Pretrained::imagenet_21k;
  throw ValidationError("unknown pretraining source '" + name + "'");
}

std::string pretrained_name(Pretrained p) {
  switch (p) {
    case Pretrained::none: return "none";
    case Pretrained::imagenet_1k: return "imagenet_1k";
    case Pretrained::imagenet_21k: return "imagenet_21k";
  }
  throw ValidationError("unknown pretraining enum value");
}

void ModelSpec::validate() const {
  SVX_CHECK(stochastic_depth_rate >= 0.0 && stochastic_depth_rate < 1.0,
            ErrorKind::validation, "stochastic depth rate must lie in [0,1)");
  if (arch == Arch::tiny_cnn) {
    SVX_CHECK(pretrained == Pretrained::none, ErrorKind::validation,
              "tiny_cnn supports only pretrained=none");
  }
  if (pretrained == Pretrained::imagenet_21k) {
    SVX_CHECK(arch == Arch::convnext_s, ErrorKind::validation,
              "imagenet_21k weights exist only for convnext_s");
  }
  if (pretrained == Pretrained::imagenet_1k) {
    SVX_CHECK(arch != Arch::convnext_s, ErrorKind::validation,
              "convnext_s pairs with imagenet_21k, not imagenet_1k");
  }
}

double ModelSpec::default_stochastic_depth(Arch arch) {
  switch (arch) {
    case Arch::convnext_nano:
    case Arch::convnext_s:
      return 0.1;
    default:
      return 0.0;
  }
}

RegressionModel::RegressionModel(const ModelSpec& spec, uint64_t seed, bool materialize)
    : spec_(spec) {
  spec_.validate();
  Rng init_rng(seed);
  nn::BuildContext ctx{materialize, materialize ? &init_rng : nullptr};
  build_ = build_backbone(spec_.arch, spec_.stochastic_depth_rate, ctx);
  head_ = std::make_unique<nn::Linear>(ctx, build_.feature_dim, 1, true);
  if (materialize) {
    // Small-variance head on top of the generic Linear init.
    for (auto& v : head_->weight().value.vec()) v = init_rng.normal(0.0, kHeadInitStd);
    head_->bias_param().value.fill(0.0);
  }
}

std::vector<double> RegressionModel::forward(const Tensor& batch, bool training, Rng* rng) {
  SVX_CHECK(batch.rank() == 4 && batch.dim(1) == 3, ErrorKind::validation,
            "model forward expects a [N,3,H,W] batch");
  Tensor features = build_.features->forward(batch, training, rng);
  Tensor raw = head_->forward(features, training, rng);
  std::vector<double> preds(size_t(raw.dim(0)));
  for (size_t i = 0; i < preds.size(); ++i) {
    preds[i] = output_offset_ + output_scale_ * raw[int64_t(i)];
  }
  return preds;
}

void RegressionModel::backward(const std::vector<double>& grad_pred) {
  Tensor draw({int64_t(grad_pred.size()), 1});
  for (size_t i = 0; i < grad_pred.size(); ++i) {
    draw[int64_t(i)] = grad_pred[i] * output_scale_;
  }
  Tensor dfeat = head_->backward(draw);
  build_.features->backward(dfeat);
}

std::vector<nn::Param*> RegressionModel::params() {
  std::vector<nn::Param*> out;
  build_.features->collect_params("backbone", out);
  head_->collect_params("head", out);
  return out;
}

std::vector<nn::BufferRef> RegressionModel::buffers() {
  std::vector<nn::BufferRef> out;
  build_.features->collect_buffers("backbone", out);
  return out;
}

void RegressionModel::zero_grad() {
  for (nn::Param* p : params()) {
    if (!p->grad.allocated() || p->grad.shape() != p->value.shape()) {
      p->grad = p->value.shaped_like();
    } else {
      p->grad.zero();
    }
  }
}

int64_t RegressionModel::parameter_count() {
  int64_t total = 0;
  for (nn::Param* p : params()) total += p->value.numel();
  return total;
}

void RegressionModel::set_output_calibration(double offset, double scale) {
  SVX_CHECK(std::isfinite(offset) && std::isfinite(scale) && scale != 0.0,
            ErrorKind::validation, "calibration must be finite with nonzero scale");
  output_offset_ = offset;
  output_scale_ = scale;
}

void RegressionModel::reinit_head(uint64_t seed, std::optional<double> warm_start) {
  Rng rng(seed);
  for (auto& v : head_->weight().value.vec()) v = rng.normal(0.0, kHeadInitStd);
  double bias = 0.0;
  if (warm_start.has_value()) {
    // With zero(ish) features the prediction is offset + scale * bias; aim it
    // at the requested warm-start value.
    bias = (*warm_start - output_offset_) / output_scale_;
  }
  head_->bias_param().value.fill(bias);
}

std::string RegressionModel::backbone_checksum() {
  std::vector<nn::Param*> out;
  build_.features->collect_params("backbone", out);
  Sha256 h;
  for (nn::Param* p : out) {
    h.update(p->value.data(), size_t(p->value.numel()) * sizeof(double));
  }
  std::vector<nn::BufferRef> bufs;
  build_.features->collect_buffers("backbone", bufs);
  for (const auto& b : bufs) {
    h.update(b.value->data(), size_t(b.value->numel()) * sizeof(double));
  }
  return h.hex_digest();
}

std::map<std::string, Tensor> RegressionModel::state_dict() {
  std::map<std::string, Tensor> state;
  for (nn::Param* p : params()) state.emplace(p->name, p->value);
  for (const auto& b : buffers()) state.emplace(b.name, *b.value);
  return state;
}

void RegressionModel::load_state_dict(const std::map<std::string, Tensor>& state,
                                      bool strict) {
  size_t used = 0;
  for (nn::Param* p : params()) {
    auto it = state.find(p->name);
    if (it == state.end()) {
      if (strict) throw IntegrityError("state dict missing parameter '" + p->name + "'");
      continue;
    }
    SVX_CHECK(it->second.shape() == p->value.shape(), ErrorKind::integrity,
              "state dict shape mismatch for '" + p->name + "'");
    p->value = it->second;
    ++used;
  }
  for (auto& b : buffers()) {
    auto it = state.find(b.name);
    if (it == state.end()) {
      if (strict) throw IntegrityError("state dict missing buffer '" + b.name + "'");
      continue;
    }
    SVX_CHECK(it->second.shape() == b.value->shape(), ErrorKind::integrity,
              "state dict shape mismatch for '" + b.name + "'");
    *b.value = it->second;
    ++used;
  }
  if (strict && used != state.size()) {
    throw IntegrityError("state dict has unexpected entries (" + std::to_string(state.size()) +
                         " given, " + std::to_string(used) + " consumed)");
  }
}

std::map<std::string, Tensor> RegressionModel::backbone_state_dict() {
  std::map<std::string, Tensor> state;
  std::vector<nn::Param*> ps;
  build_.features->collect_params("backbone", ps);
  for (nn::Param* p : ps) state.emplace(p->name, p->value);
  std::vector<nn::BufferRef> bufs;
  build_.features->collect_buffers("backbone", bufs);
  for (const auto& b : bufs) state.emplace(b.name, *b.value);
  return state;
}

void RegressionModel::load_backbone_state_dict(const std::map<std::string, Tensor>& state) {
  std::vector<nn::Param*> ps;
  build_.features->collect_params("backbone", ps);
  std::vector<nn::BufferRef> bufs;
  build_.features->collect_buffers("backbone", bufs);
  size_t expected = ps.size() + bufs.size();
  SVX_CHECK(state.size() == expected, ErrorKind::integrity,
            "pretrained weights entry count mismatch: " + std::to_string(state.size()) +
                " given, " + std::to_string(expected) + " expected");
  for (nn::Param* p : ps) {
    auto it = state.find(p->name);
    SVX_CHECK(it != state.end(), ErrorKind::integrity,
              "pretrained weights missing '" + p->name + "'");
    SVX_CHECK(it->second.shape() == p->value.shape(), ErrorKind::integrity,
              "pretrained weight shape mismatch for '" + p->name + "'");
    p->value = it->second;
  }
  for (auto& b : bufs) {
    auto it = state.find(b.name);
    SVX_CHECK(it != state.end(), ErrorKind::integrity,
              "pretrained weights missing '" + b.name + "'");
    *b.value = it->second;
  }
}

std::string pretrained_cache_dir() {
  if (const char* env = std::getenv("SLUDGEVISION_CACHE"); env && *env) return env;
  if (const char* home = std::getenv("HOME"); home && *home) {
    return std::string(home) + "/.cache/sludgevision";
  }
  return ".sludgevision_cache";
}

std::string pretrained_weights_path(Arch arch, Pretrained p) {
  return (std::filesystem::path(pretrained_cache_dir()) /
          (arch_name(arch) + "_" + pretrained_name(p) + ".weights"))
      .string();
}

namespace {

std::string lockfile_path() {
  return (std::filesystem::path(pretrained_cache_dir()) / kLockfileName).string();
}

nlohmann::json read_lockfile() {
  const std::string path = lockfile_path();
  if (!std::filesystem::exists(path)) return nlohmann::json::object();
  try {
    return nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("weight lockfile '" + path + "' is malformed: " + e.what());
  }
}

void load_pretrained_into(RegressionModel& model, const ModelSpec& spec) {
  const std::string path = pretrained_weights_path(spec.arch, spec.pretrained);
  if (!std::filesystem::exists(path)) {
    throw UnavailableError(
        "pretrained weights for " + arch_name(spec.arch) + " (" +
        pretrained_name(spec.pretrained) + ") not found at '" + path +
        "'; stage them into the cache (SLUDGEVISION_CACHE) before transfer learning");
  }
  const nlohmann::json lock = read_lockfile();
  const std::string file_name = std::filesystem::path(path).filename().string();
  if (lock.contains("files") && lock["files"].contains(file_name)) {
    const std::string expected = lock["files"][file_name].get<std::string>();
    const std::string actual = Sha256::of_file(path);
    if (actual != expected) {
      throw IntegrityError("pretrained weights '" + path + "' hash " + actual +
                           " does not match lockfile entry " + expected);
    }
  }
  TensorStore store = load_tensor_store(path);
  SVX_CHECK(store.meta.value("kind", "") == "pretrained_weights", ErrorKind::parse,
            "'" + path + "' is not a pretrained weight file");
  SVX_CHECK(store.meta.value("arch", "") == arch_name(spec.arch), ErrorKind::integrity,
            "pretrained weight file '" + path + "' was built for a different architecture");
  model.load_backbone_state_dict(store.tensors);
}

} // namespace

std::unique_ptr<RegressionModel> build_model(const ModelSpec& spec, uint64_t seed) {
  spec.validate();
  auto model = std::make_unique<RegressionModel>(spec, seed);
  if (spec.pretrained != Pretrained::none) {
    load_pretrained_into(*model, spec);
  }
  return model;
}

ComplexityReport complexity_report(const ModelSpec& spec) {
  spec.validate();
  // Published complexity tables use one shared 224x224 reference for every
  // backbone, Inception included; its 299x299 resize is a runtime concern.
  if (spec.arch == Arch::tiny_cnn) {
    RegressionModel probe(spec, 0, /*materialize=*/false);
    return complexity_report(spec, probe.canonical_h(), probe.canonical_w());
  }
  return complexity_report(spec, 224, 224);
}

ComplexityReport complexity_report(const ModelSpec& spec, int height, int width) {
  spec.validate();
  SVX_CHECK(height > 0 && width > 0, ErrorKind::validation,
            "reference resolution must be positive");
  nn::BuildContext ctx{false, nullptr};
  BackboneBuild build =
      build_backbone(spec.arch, spec.stochastic_depth_rate, ctx, /*input_resize=*/false);

  const std::vector<int64_t> in{1, 3, height, width};
  const int64_t backbone_macs = build.features->macs(in);
  const int64_t backbone_params = nn::param_count(*build.features);
  const int64_t f = build.feature_dim;

  ComplexityReport r;
  r.reference_h = height;
  r.reference_w = width;
  r.parameter_count = backbone_params + f + 1;
  r.parameter_count_classifier = backbone_params + f * 1000 + 1000;
  r.gflops = double(backbone_macs + f * 1000) / 1e9;
  r.gflops_regression = double(backbone_macs + f) / 1e9;
  return r;
}

void stage_pretrained(RegressionModel& model, Pretrained p) {
  ModelSpec effective = model.spec();
  effective.pretrained = p;
  effective.validate();

  TensorStore store;
  store.meta["kind"] = "pretrained_weights";
  store.meta["arch"] = arch_name(model.spec().arch);
  store.meta["pretrained"] = pretrained_name(p);
  store.tensors = model.backbone_state_dict();

  const std::string path = pretrained_weights_path(model.spec().arch, p);
  save_tensor_store(path, store);

  nlohmann::json lock = read_lockfile();
  lock["files"][std::filesystem::path(path).filename().string()] = Sha256::of_file(path);
  write_file_atomic(lockfile_path(), lock.dump(2) + "\n");
}

} // namespace svx
