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

#include <compare>
#include <cstdint>
#include <string>

namespace svx {

// Calendar date (proleptic Gregorian). Stored as days since 1970-01-01 so
// day arithmetic and ordering are trivial.
class Date {
public:
  Date() : days_(0) {}
  explicit Date(int64_t days_since_epoch) : days_(days_since_epoch) {}
  Date(int year, int month, int day);

  static Date parse_iso(const std::string& s); // YYYY-MM-DD, strict
  std::string to_iso() const;

  int64_t days_since_epoch() const { return days_; }
  Date add_days(int64_t d) const { return Date(days_ + d); }
  int64_t operator-(const Date& o) const { return days_ - o.days_; }

  auto operator<=>(const Date&) const = default;

private:
  int64_t days_;
};

inline std::string to_iso(const Date& d) { return d.to_iso(); }
inline Date parse_iso(const std::string& s) { return Date::parse_iso(s); }

} // namespace svx
