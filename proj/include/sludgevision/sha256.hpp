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

#include <cstddef>
#include <cstdint>
#include <string>

namespace svx {

// Incremental SHA-256 (FIPS 180-4). Checkpoint and lockfile integrity only;
// no secrets involved.
class Sha256 {
public:
  Sha256() { reset(); }

  void reset();
  void update(const void* data, size_t len);
  // Finalizes and returns the lowercase hex digest; object must be reset
  // before reuse.
  std::string hex_digest();

  static std::string of_bytes(const void* data, size_t len) {
    Sha256 h;
    h.update(data, len);
    return h.hex_digest();
  }
  static std::string of_string(const std::string& s) {
    return of_bytes(s.data(), s.size());
  }
  static std::string of_file(const std::string& path);

private:
  void process_block(const uint8_t* p);

  uint32_t state_[8];
  uint64_t bitlen_;
  uint8_t buf_[64];
  size_t buflen_;
};

} // namespace svx
