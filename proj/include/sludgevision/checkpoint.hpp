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
#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>

#include "json.hpp"
#include "sludgevision/model.hpp"
#include "sludgevision/tensor.hpp"

namespace svx {

// Named-tensor container: magic, JSON header, raw little-endian doubles,
// SHA-256 trailer. Used for full checkpoints and pretrained weight files.
struct TensorStore {
  nlohmann::json meta;
  std::map<std::string, Tensor> tensors;
};

void save_tensor_store(const std::string& path, const TensorStore& store);
// Verifies the integrity hash; throws IntegrityError on corruption.
TensorStore load_tensor_store(const std::string& path);

// `{arch}_{mode}_fold{K}_epoch{E}.ckpt`
std::string checkpoint_filename(Arch arch, const std::string& mode, int fold, int64_t epoch);

// extra: caller metadata (train config, seed, manifest hash, epoch, ...).
void save_checkpoint(const std::string& path, RegressionModel& model,
                     const nlohmann::json& extra);

struct LoadedCheckpoint {
  std::unique_ptr<RegressionModel> model;
  nlohmann::json extra;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

} // namespace svx
