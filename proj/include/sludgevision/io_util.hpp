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

#include <string>

namespace svx {

// Writes via a sibling temp file and renames into place, so readers never
// observe partial content.
void write_file_atomic(const std::string& path, const std::string& content);

std::string read_file(const std::string& path);

// Shortest decimal string that round-trips to the same double.
std::string format_double(double v);

} // namespace svx
