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

// Seedable randomness for the mechanisms and the Monte Carlo harness.
//
// The generator is xoshiro256** whose 256-bit state is filled by SplitMix64
// from (seed, stream). Uniform doubles take the top 53 bits. Laplace draws use
// the inverse CDF on the open interval (0, 1); Gaussian draws use Box-Muller.
// None of this goes through <random> distributions, so a given
// (seed, stream, call sequence) yields the same values on every platform
// with IEEE doubles and a conforming libm.
//
// Not cryptographically secure, and no floating-point side-channel
// mitigation: this is an experimentation library.

#ifndef ISVC_NOISE_H_
#define ISVC_NOISE_H_

#include <array>
#include <cstddef>
#include <cstdint>
#include <unordered_map>
#include <vector>

namespace isvc {

enum class NoiseMode {
  kRandom,
  // Every Laplace/Gaussian draw is exactly 0 and permutations are identity.
  kZero,
};

// SplitMix64 finalizer step; also used to derive child seeds.
uint64_t SplitMix64(uint64_t& state);

// Mixes a master seed with up to two coordinates (e.g. cell and trial
// index) into a per-trial seed. Pure function; safe from any thread.
uint64_t DeriveSeed(uint64_t master, uint64_t a, uint64_t b = 0);

class Xoshiro256StarStar {
 public:
  Xoshiro256StarStar(uint64_t seed, uint64_t stream);

  uint64_t operator()();

 private:
  std::array<uint64_t, 4> s_;
};

class NoiseSource {
 public:
  explicit NoiseSource(uint64_t seed, uint64_t stream = 0,
                       NoiseMode mode = NoiseMode::kRandom);

  static NoiseSource Zero(uint64_t seed = 0) {
    return NoiseSource(seed, 0, NoiseMode::kZero);
  }

  // Laplace(0, scale). Throws InvalidParameterError unless scale is positive
  // and finite.
  double Laplace(double scale);

  // Normal(0, sigma^2). Throws InvalidParameterError unless sigma is positive
  // and finite.
  double Gaussian(double sigma);

  // Uniformly random permutation of {0, ..., k-1} (identity in zero mode).
  std::vector<std::size_t> Permutation(std::size_t k);

  // Uniform on the open interval (0, 1). Not affected by zero mode.
  double Uniform();

  // Uniform on {0, ..., n-1}, n >= 1. Not affected by zero mode.
  std::size_t UniformIndex(std::size_t n);

  uint64_t NextU64() { return engine_(); }

  // Independent child source seeded from this source's stream. Zero mode is
  // inherited.
  NoiseSource Fork();

  bool zero() const { return mode_ == NoiseMode::kZero; }
  NoiseMode mode() const { return mode_; }
  uint64_t seed() const { return seed_; }
  uint64_t stream() const { return stream_; }

 private:
  uint64_t seed_;
  uint64_t stream_;
  NoiseMode mode_;
  Xoshiro256StarStar engine_;
};

// Creates per-trial sources from a master seed; the stream id is the trial
// index. Holds no mutable state, so concurrent use is fine.
class NoiseSourceFactory {
 public:
  explicit NoiseSourceFactory(uint64_t master_seed,
                              NoiseMode mode = NoiseMode::kRandom)
      : master_seed_(master_seed), mode_(mode) {}

  NoiseSource ForTrial(uint64_t trial) const {
    return NoiseSource(master_seed_, trial, mode_);
  }

 private:
  uint64_t master_seed_;
  NoiseMode mode_;
};

// Fisher-Yates shuffle materialized one position at a time, so a scan that
// stops after j positions costs O(j) work and j uniform draws. Draining it
// yields exactly NoiseSource::Permutation's output for the same source state.
class LazyPermutation {
 public:
  LazyPermutation(std::size_t k, NoiseSource& source);

  // Value at the next position; requires has_next().
  std::size_t Next();
  bool has_next() const { return position_ < k_; }

 private:
  std::size_t Lookup(std::size_t slot) const;

  std::size_t k_;
  std::size_t position_ = 0;
  NoiseSource& source_;
  std::unordered_map<std::size_t, std::size_t> swapped_;
};

}  // namespace isvc

#endif  // ISVC_NOISE_H_
