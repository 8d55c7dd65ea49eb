//
// Copyright 2026 The isvc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#include "isvc/noise.h"

#include <cmath>
#include <numbers>
#include <string>

#include "isvc/errors.h"

namespace isvc {
namespace {

uint64_t Rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

void CheckScale(double scale, const char* name) {
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw InvalidParameterError(std::string(name) +
                                " must be positive and finite, got " +
                                std::to_string(scale));
  }
}

}  // namespace

uint64_t SplitMix64(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

uint64_t DeriveSeed(uint64_t master, uint64_t a, uint64_t b) {
  uint64_t state = master;
  uint64_t h = SplitMix64(state);
  state = h ^ a;
  h = SplitMix64(state);
  state = h ^ b;
  return SplitMix64(state);
}

Xoshiro256StarStar::Xoshiro256StarStar(uint64_t seed, uint64_t stream) {
  uint64_t state = seed;
  uint64_t mix = SplitMix64(state) ^ stream;
  for (auto& word : s_) word = SplitMix64(mix);
  // All-zero state is a fixed point; SplitMix64 never emits four zeros in a
  // row, but guard anyway.
  if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 1;
}

uint64_t Xoshiro256StarStar::operator()() {
  const uint64_t result = Rotl(s_[1] * 5, 7) * 9;
  const uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = Rotl(s_[3], 45);
  return result;
}

NoiseSource::NoiseSource(uint64_t seed, uint64_t stream, NoiseMode mode)
    : seed_(seed), stream_(stream), mode_(mode), engine_(seed, stream) {}

double NoiseSource::Uniform() {
  // Midpoints of the 2^53 grid: never 0, never 1.
  return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
}

std::size_t NoiseSource::UniformIndex(std::size_t n) {
  if (n == 0) throw InvalidParameterError("UniformIndex requires n >= 1");
  // Lemire's multiply-and-reject.
  const uint64_t bound = n;
  unsigned __int128 product =
      static_cast<unsigned __int128>(engine_()) * bound;
  auto low = static_cast<uint64_t>(product);
  if (low < bound) {
    const uint64_t threshold = -bound % bound;
    while (low < threshold) {
      product = static_cast<unsigned __int128>(engine_()) * bound;
      low = static_cast<uint64_t>(product);
    }
  }
  return static_cast<std::size_t>(product >> 64);
}

double NoiseSource::Laplace(double scale) {
  CheckScale(scale, "Laplace scale");
  if (zero()) return 0.0;
  const double u = Uniform();
  if (u < 0.5) return scale * std::log(2.0 * u);
  return -scale * std::log(2.0 * (1.0 - u));
}

double NoiseSource::Gaussian(double sigma) {
  CheckScale(sigma, "Gaussian sigma");
  if (zero()) return 0.0;
  const double u1 = Uniform();
  const double u2 = Uniform();
  return sigma * std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

std::vector<std::size_t> NoiseSource::Permutation(std::size_t k) {
  if (k == 0) throw InvalidParameterError("permutation size must be >= 1");
  std::vector<std::size_t> result;
  result.reserve(k);
  LazyPermutation lazy(k, *this);
  while (lazy.has_next()) result.push_back(lazy.Next());
  return result;
}

NoiseSource NoiseSource::Fork() {
  const uint64_t child_seed = engine_();
  return NoiseSource(child_seed, 0, mode_);
}

LazyPermutation::LazyPermutation(std::size_t k, NoiseSource& source)
    : k_(k), source_(source) {
  if (k == 0) throw InvalidParameterError("permutation size must be >= 1");
}

std::size_t LazyPermutation::Lookup(std::size_t slot) const {
  auto it = swapped_.find(slot);
  return it == swapped_.end() ? slot : it->second;
}

std::size_t LazyPermutation::Next() {
  const std::size_t j = position_++;
  if (source_.zero()) return j;
  const std::size_t r = j + source_.UniformIndex(k_ - j);
  const std::size_t value = Lookup(r);
  if (r != j) swapped_[r] = Lookup(j);
  swapped_.erase(j);
  return value;
}

}  // namespace isvc
