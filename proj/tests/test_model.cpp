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
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "sludgevision/checkpoint.hpp"
#include "sludgevision/common.hpp"
#include "sludgevision/io_util.hpp"
#include "sludgevision/model.hpp"
#include "sludgevision/rng.hpp"
#include "sludgevision/tensor.hpp"

namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / "svx_test_model" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

svx::ModelSpec tiny_spec() {
  svx::ModelSpec spec;
  spec.arch = svx::Arch::tiny_cnn;
  return spec;
}

svx::Tensor canonical_batch(const svx::RegressionModel& m, int n, uint64_t seed) {
  svx::Tensor batch({n, 3, m.canonical_h(), m.canonical_w()});
  svx::Rng rng(seed);
  for (double& v : batch.vec()) v = rng.uniform(-1.0, 1.0);
  return batch;
}

bool state_dicts_equal(const std::map<std::string, svx::Tensor>& a,
                       const std::map<std::string, svx::Tensor>& b) {
  if (a.size() != b.size()) return false;
  for (const auto& [name, t] : a) {
    auto it = b.find(name);
    if (it == b.end()) return false;
    if (t.shape() != it->second.shape()) return false;
    if (t.vec() != it->second.vec()) return false;
  }
  return true;
}

// Scoped override of the pretrained weight cache location.
struct CacheEnvGuard {
  std::string saved;
  bool had = false;

  explicit CacheEnvGuard(const std::string& dir) {
    if (const char* v = std::getenv("SLUDGEVISION_CACHE")) {
      had = true;
      saved = v;
    }
    setenv("SLUDGEVISION_CACHE", dir.c_str(), 1);
  }
  ~CacheEnvGuard() {
    if (had) {
      setenv("SLUDGEVISION_CACHE", saved.c_str(), 1);
    } else {
      unsetenv("SLUDGEVISION_CACHE");
    }
  }
};

void flip_byte(const fs::path& path, int64_t offset_from_start) {
  std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
  REQUIRE(f.good());
  f.seekg(offset_from_start);
  char c = 0;
  f.read(&c, 1);
  c = char(c ^ 0x5a);
  f.seekp(offset_from_start);
  f.write(&c, 1);
}

} // namespace

TEST_CASE("model: construction is seed-deterministic with a small zero-bias head") {
  svx::RegressionModel a(tiny_spec(), 42);
  svx::RegressionModel b(tiny_spec(), 42);
  CHECK(state_dicts_equal(a.state_dict(), b.state_dict()));

  svx::RegressionModel c(tiny_spec(), 43);
  CHECK_FALSE(state_dicts_equal(a.state_dict(), c.state_dict()));

  auto sd = a.state_dict();
  const auto& hw = sd.at("head.weight");
  const auto& hb = sd.at("head.bias");
  REQUIRE(hw.numel() == a.feature_dim());
  REQUIRE(hb.numel() == 1);
  CHECK(hb[0] == 0.0);
  double mean = 0.0, var = 0.0;
  for (double v : hw.vec()) mean += v;
  mean /= double(hw.numel());
  for (double v : hw.vec()) var += (v - mean) * (v - mean);
  var /= double(hw.numel() - 1);
  CHECK(std::fabs(mean) < 0.005);
  CHECK(std::sqrt(var) > 0.004);
  CHECK(std::sqrt(var) < 0.02);

  // The materialized parameter count matches the weight-free accounting.
  CHECK(a.parameter_count() == svx::complexity_report(tiny_spec()).parameter_count);
}

TEST_CASE("model: forward applies the output calibration affinely") {
  svx::RegressionModel m(tiny_spec(), 7);
  auto batch = canonical_batch(m, 2, 11);

  m.set_output_calibration(0.0, 1.0);
  auto raw = m.forward(batch, false, nullptr);
  REQUIRE(raw.size() == 2);

  m.set_output_calibration(10.0, 2.0);
  auto scaled = m.forward(batch, false, nullptr);
  for (size_t i = 0; i < raw.size(); ++i) {
    CHECK(scaled[i] == doctest::Approx(10.0 + 2.0 * raw[i]).epsilon(1e-12));
  }

  CHECK_THROWS_AS(m.set_output_calibration(0.0, 0.0), svx::ValidationError);
  CHECK_THROWS_AS(m.set_output_calibration(std::nan(""), 1.0), svx::ValidationError);

  svx::Tensor bad({2, 1, 4, 4});
  bad.fill(0.0);
  CHECK_THROWS_AS(m.forward(bad, false, nullptr), svx::ValidationError);
}

TEST_CASE("model: reinit_head leaves the backbone untouched and warm-starts the bias") {
  svx::RegressionModel m(tiny_spec(), 3);
  const std::string checksum = m.backbone_checksum();
  auto before = m.state_dict();

  m.reinit_head(99);
  CHECK(m.backbone_checksum() == checksum);
  auto after = m.state_dict();
  CHECK(after.at("head.weight").vec() != before.at("head.weight").vec());
  CHECK(after.at("backbone.0.weight").vec() == before.at("backbone.0.weight").vec());

  // Same reinit seed reproduces the same head.
  m.reinit_head(99);
  CHECK(m.state_dict().at("head.weight").vec() == after.at("head.weight").vec());

  // Warm start aims the zero-feature prediction at the requested value.
  m.set_output_calibration(200.0, 50.0);
  m.reinit_head(5, 230.0);
  CHECK(m.state_dict().at("head.bias")[0] == doctest::Approx(0.6).epsilon(1e-15));

  m.set_output_calibration(0.0, 1.0);
  m.reinit_head(5, 230.0);
  CHECK(m.state_dict().at("head.bias")[0] == doctest::Approx(230.0).epsilon(1e-15));
}

TEST_CASE("model: state dict round-trips and strict loading rejects mismatches") {
  svx::RegressionModel src(tiny_spec(), 1);
  svx::RegressionModel dst(tiny_spec(), 2);
  auto batch = canonical_batch(src, 2, 21);

  dst.load_state_dict(src.state_dict());
  CHECK(state_dicts_equal(src.state_dict(), dst.state_dict()));
  CHECK(src.forward(batch, false, nullptr) == dst.forward(batch, false, nullptr));

  auto missing = src.state_dict();
  missing.erase("head.bias");
  CHECK_THROWS_AS(dst.load_state_dict(missing), svx::IntegrityError);

  auto extra = src.state_dict();
  extra.emplace("backbone.bogus", svx::Tensor({1}));
  CHECK_THROWS_AS(dst.load_state_dict(extra), svx::IntegrityError);

  auto bad_shape = src.state_dict();
  bad_shape.at("head.weight") = svx::Tensor({3});
  CHECK_THROWS_AS(dst.load_state_dict(bad_shape), svx::IntegrityError);

  // Non-strict loading applies the overlap and ignores the rest.
  svx::RegressionModel partial(tiny_spec(), 4);
  const auto own_head = partial.state_dict().at("head.weight").vec();
  partial.load_state_dict(src.backbone_state_dict(), /*strict=*/false);
  CHECK(partial.backbone_checksum() == src.backbone_checksum());
  CHECK(partial.state_dict().at("head.weight").vec() == own_head);
}

TEST_CASE("model: checkpoint files round-trip weights, calibration, and metadata") {
  auto dir = fresh_dir("ckpt");
  CHECK(svx::checkpoint_filename(svx::Arch::tiny_cnn, "tl", 3, 12) ==
        "tiny_cnn_tl_fold3_epoch12.ckpt");
  CHECK(svx::checkpoint_filename(svx::Arch::resnet18, "tfs", 0, 94) ==
        "resnet18_tfs_fold0_epoch94.ckpt");

  svx::RegressionModel m(tiny_spec(), 17);
  m.set_output_calibration(120.0, 37.5);
  nlohmann::json extra = {{"fold", 3}, {"mode", "tl"}, {"manifest_hash", "abc123"}};

  const std::string path =
      (dir / svx::checkpoint_filename(svx::Arch::tiny_cnn, "tl", 3, 12)).string();
  svx::save_checkpoint(path, m, extra);

  auto loaded = svx::load_checkpoint(path);
  CHECK(loaded.model->spec().arch == svx::Arch::tiny_cnn);
  CHECK(loaded.model->spec().pretrained == svx::Pretrained::none);
  CHECK(loaded.model->output_offset() == 120.0);
  CHECK(loaded.model->output_scale() == 37.5);
  CHECK(loaded.extra == extra);
  CHECK(state_dicts_equal(m.state_dict(), loaded.model->state_dict()));

  auto batch = canonical_batch(m, 2, 33);
  CHECK(m.forward(batch, false, nullptr) == loaded.model->forward(batch, false, nullptr));
}

TEST_CASE("model: tensor store detects corruption, bad magic, and wrong kinds") {
  auto dir = fresh_dir("store");

  svx::TensorStore store;
  store.meta["kind"] = "checkpoint_probe";
  svx::Tensor t({2, 3});
  for (int64_t i = 0; i < 6; ++i) t[i] = 0.5 * double(i);
  store.tensors.emplace("alpha", t);
  svx::Tensor u({4});
  u.fill(-1.25);
  store.tensors.emplace("beta", u);

  const std::string path = (dir / "probe.bin").string();
  svx::save_tensor_store(path, store);
  auto back = svx::load_tensor_store(path);
  CHECK(back.meta.at("kind") == "checkpoint_probe");
  REQUIRE(back.tensors.size() == 2);
  CHECK(back.tensors.at("alpha").shape() == std::vector<int64_t>({2, 3}));
  CHECK(back.tensors.at("alpha").vec() == t.vec());
  CHECK(back.tensors.at("beta").vec() == u.vec());

  // A flipped payload byte trips the integrity hash.
  const auto size = fs::file_size(path);
  flip_byte(path, int64_t(size) - 80);
  CHECK_THROWS_AS(svx::load_tensor_store(path), svx::IntegrityError);

  svx::save_tensor_store(path, store);
  flip_byte(path, 2); // corrupt the magic
  CHECK_THROWS_AS(svx::load_tensor_store(path), svx::ParseError);

  svx::write_file_atomic(path, "short");
  CHECK_THROWS_AS(svx::load_tensor_store(path), svx::ParseError);

  // Unallocated tensors cannot be serialized.
  svx::TensorStore bad;
  bad.tensors.emplace("ghost", svx::Tensor({2, 2}, /*materialize=*/false));
  CHECK_THROWS_AS(svx::save_tensor_store((dir / "bad.bin").string(), bad),
                  svx::ValidationError);

  // A store of the wrong kind is not a checkpoint.
  svx::TensorStore other;
  other.meta["kind"] = "pretrained_weights";
  other.tensors.emplace("x", t);
  const std::string other_path = (dir / "other.bin").string();
  svx::save_tensor_store(other_path, other);
  CHECK_THROWS_AS(svx::load_checkpoint(other_path), svx::ParseError);
}

TEST_CASE("model: pretrained weights flow through the local cache with integrity checks") {
  auto cache = fresh_dir("cache");
  CacheEnvGuard guard(cache.string());
  CHECK(svx::pretrained_cache_dir() == cache.string());

  svx::ModelSpec spec;
  spec.arch = svx::Arch::resnet18;
  spec.pretrained = svx::Pretrained::imagenet_1k;

  // Nothing staged yet: transfer learning is unavailable.
  CHECK_THROWS_AS(svx::build_model(spec, 1), svx::UnavailableError);

  // Stage a donor backbone, then build from the cache.
  svx::ModelSpec donor_spec = spec;
  donor_spec.pretrained = svx::Pretrained::none;
  svx::RegressionModel donor(donor_spec, 7);
  svx::stage_pretrained(donor, svx::Pretrained::imagenet_1k);

  const std::string weights =
      svx::pretrained_weights_path(svx::Arch::resnet18, svx::Pretrained::imagenet_1k);
  REQUIRE(fs::exists(weights));
  REQUIRE(fs::exists(fs::path(cache.string()) / "weights.lock.json"));

  auto model = svx::build_model(spec, 9);
  CHECK(model->backbone_checksum() == donor.backbone_checksum());
  // The head is freshly drawn from the build seed, not copied from the donor.
  CHECK(model->state_dict().at("head.weight").vec() !=
        donor.state_dict().at("head.weight").vec());

  // Tampering with the cached file is caught.
  flip_byte(weights, int64_t(fs::file_size(weights)) / 2);
  CHECK_THROWS_AS(svx::build_model(spec, 9), svx::IntegrityError);

  // Re-staging repairs the cache; a corrupt lockfile is a parse failure.
  svx::stage_pretrained(donor, svx::Pretrained::imagenet_1k);
  CHECK_NOTHROW(svx::build_model(spec, 9));
  svx::write_file_atomic((fs::path(cache.string()) / "weights.lock.json").string(),
                         "not json");
  CHECK_THROWS_AS(svx::build_model(spec, 9), svx::ParseError);

  // Without a lockfile entry the store's own hash still protects the load.
  fs::remove(fs::path(cache.string()) / "weights.lock.json");
  CHECK_NOTHROW(svx::build_model(spec, 9));
}
