// Copyright 2026 The MiniRay Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <string>

namespace miniray {

// Exact nonnegative rational; resource quantities (e.g. cpu -> 1, gpu -> 1/2)
// must add and compare without float drift.
class Rational {
 public:
  Rational() : num_(0), den_(1) {}
  Rational(int64_t num, int64_t den);
  static Rational FromInt(int64_t v) { return Rational(v, 1); }

  int64_t num() const { return num_; }
  int64_t den() const { return den_; }
  bool IsZero() const { return num_ == 0; }
  double ToDouble() const { return static_cast<double>(num_) / den_; }
  std::string ToString() const;

  Rational operator+(const Rational &o) const;
  Rational operator-(const Rational &o) const;
  std::strong_ordering operator<=>(const Rational &o) const;
  bool operator==(const Rational &o) const = default;

 private:
  int64_t num_;
  int64_t den_;  // > 0, gcd(num, den) == 1
};

using ResourceMap = std::map<std::string, Rational>;

// True iff have[k] >= need[k] for every demanded resource.
bool ResourcesSatisfy(const ResourceMap &have, const ResourceMap &need);
// have -= need / have += need, clamping is the caller's problem.
void ResourcesSubtract(ResourceMap &have, const ResourceMap &need);
void ResourcesAdd(ResourceMap &have, const ResourceMap &need);

}  // namespace miniray
