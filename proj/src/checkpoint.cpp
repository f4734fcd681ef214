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
#include "sludgevision/checkpoint.hpp"

#include <cstring>
#include <sstream>

#include "sludgevision/common.hpp"
#include "sludgevision/io_util.hpp"
#include "sludgevision/sha256.hpp"

namespace svx {

namespace {

constexpr char kMagic[8] = {'S', 'V', 'X', 'C', 'K', 'P', 'T', '1'};

void append_u64(std::string& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

uint64_t read_u64(const std::string& buf, size_t off) {
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= uint64_t(uint8_t(buf[off + i])) << (8 * i);
  return v;
}

} // namespace

void save_tensor_store(const std::string& path, const TensorStore& store) {
  nlohmann::json header;
  header["meta"] = store.meta;

  std::string payload;
  nlohmann::json table = nlohmann::json::array();
  for (const auto& [name, t] : store.tensors) {
    SVX_CHECK(t.allocated(), ErrorKind::validation,
              "tensor store: unallocated tensor '" + name + "'");
    nlohmann::json entry;
    entry["name"] = name;
    entry["shape"] = t.shape();
    entry["offset"] = payload.size();
    const size_t bytes = size_t(t.numel()) * sizeof(double);
    payload.append(reinterpret_cast<const char*>(t.data()), bytes);
    table.push_back(std::move(entry));
  }
  header["tensors"] = std::move(table);

  const std::string header_str = header.dump();
  std::string out;
  out.append(kMagic, sizeof(kMagic));
  append_u64(out, header_str.size());
  out += header_str;
  out += payload;
  out += Sha256::of_string(out);
  write_file_atomic(path, out);
}

TensorStore load_tensor_store(const std::string& path) {
  const std::string buf = read_file(path);
  SVX_CHECK(buf.size() >= sizeof(kMagic) + 8 + 64, ErrorKind::parse,
            "tensor store '" + path + "' truncated");
  SVX_CHECK(std::memcmp(buf.data(), kMagic, sizeof(kMagic)) == 0, ErrorKind::parse,
            "tensor store '" + path + "' has wrong magic");

  const std::string stored_hash = buf.substr(buf.size() - 64);
  const std::string body = buf.substr(0, buf.size() - 64);
  if (Sha256::of_string(body) != stored_hash) {
    throw IntegrityError("tensor store '" + path + "' failed its integrity hash");
  }

  const uint64_t header_len = read_u64(buf, sizeof(kMagic));
  const size_t header_off = sizeof(kMagic) + 8;
  SVX_CHECK(header_off + header_len <= body.size(), ErrorKind::parse,
            "tensor store '" + path + "' header overruns file");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(buf.substr(header_off, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("tensor store '" + path + "': bad header: " + e.what());
  }

  TensorStore store;
  store.meta = header.value("meta", nlohmann::json::object());
  const size_t payload_off = header_off + header_len;
  for (const auto& entry : header.at("tensors")) {
    const std::string name = entry.at("name").get<std::string>();
    const std::vector<int64_t> shape = entry.at("shape").get<std::vector<int64_t>>();
    const size_t offset = entry.at("offset").get<size_t>();
    Tensor t(shape);
    const size_t bytes = size_t(t.numel()) * sizeof(double);
    SVX_CHECK(payload_off + offset + bytes <= body.size(), ErrorKind::parse,
              "tensor store '" + path + "': tensor '" + name + "' overruns file");
    std::memcpy(t.data(), buf.data() + payload_off + offset, bytes);
    store.tensors.emplace(name, std::move(t));
  }
  return store;
}

std::string checkpoint_filename(Arch arch, const std::string& mode, int fold, int64_t epoch) {
  std::ostringstream name;
  name << arch_name(arch) << "_" << mode << "_fold" << fold << "_epoch" << epoch << ".ckpt";
  return name.str();
}

void save_checkpoint(const std::string& path, RegressionModel& model,
                     const nlohmann::json& extra) {
  TensorStore store;
  store.tensors = model.state_dict();
  store.meta["kind"] = "checkpoint";
  store.meta["spec"] = {
      {"arch", arch_name(model.spec().arch)},
      {"pretrained", pretrained_name(model.spec().pretrained)},
      {"stochastic_depth_rate", model.spec().stochastic_depth_rate},
  };
  store.meta["calibration"] = {{"offset", model.output_offset()},
                               {"scale", model.output_scale()}};
  store.meta["extra"] = extra;
  save_tensor_store(path, store);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  TensorStore store = load_tensor_store(path);
  SVX_CHECK(store.meta.value("kind", "") == "checkpoint", ErrorKind::parse,
            "'" + path + "' is not a model checkpoint");

  ModelSpec spec;
  const auto& js = store.meta.at("spec");
  spec.arch = parse_arch(js.at("arch").get<std::string>());
  spec.pretrained = parse_pretrained(js.at("pretrained").get<std::string>());
  spec.stochastic_depth_rate = js.at("stochastic_depth_rate").get<double>();

  LoadedCheckpoint out;
  // Weights come from the file; no pretrained-cache access here.
  out.model = std::make_unique<RegressionModel>(spec, /*seed=*/0);
  out.model->load_state_dict(store.tensors);
  const auto& cal = store.meta.at("calibration");
  out.model->set_output_calibration(cal.at("offset").get<double>(),
                                    cal.at("scale").get<double>());
  out.extra = store.meta.value("extra", nlohmann::json::object());
  return out;
}

} // namespace svx
