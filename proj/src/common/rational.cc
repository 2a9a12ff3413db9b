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

#include "common/rational.h"

#include <numeric>
#include <stdexcept>

namespace miniray {

Rational::Rational(int64_t num, int64_t den) {
  if (den == 0) throw std::invalid_argument("rational with zero denominator");
  if (den < 0) {
    num = -num;
    den = -den;
  }
  int64_t g = std::gcd(num < 0 ? -num : num, den);
  if (g == 0) g = 1;
  num_ = num / g;
  den_ = den / g;
}

std::string Rational::ToString() const {
  if (den_ == 1) return std::to_string(num_);
  return std::to_string(num_) + "/" + std::to_string(den_);
}

Rational Rational::operator+(const Rational &o) const {
  return Rational(num_ * o.den_ + o.num_ * den_, den_ * o.den_);
}

Rational Rational::operator-(const Rational &o) const {
  return Rational(num_ * o.den_ - o.num_ * den_, den_ * o.den_);
}

std::strong_ordering Rational::operator<=>(const Rational &o) const {
  // den > 0 on both sides, cross-multiplication preserves order.
  return num_ * o.den_ <=> o.num_ * den_;
}

bool ResourcesSatisfy(const ResourceMap &have, const ResourceMap &need) {
  for (const auto &[name, amount] : need) {
    if (amount.IsZero()) continue;
    auto it = have.find(name);
    if (it == have.end() || it->second < amount) return false;
  }
  return true;
}

void ResourcesSubtract(ResourceMap &have, const ResourceMap &need) {
  for (const auto &[name, amount] : need) {
    if (amount.IsZero()) continue;
    have[name] = have[name] - amount;
  }
}

void ResourcesAdd(ResourceMap &have, const ResourceMap &need) {
  for (const auto &[name, amount] : need) {
    if (amount.IsZero()) continue;
    have[name] = have[name] + amount;
  }
}

}  // namespace miniray
