// Copyright 2026 The resim Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace resim {

// Base class for every error thrown by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define RESIM_ERROR_TYPE(name)       \
  class name : public Error {        \
   public:                           \
    using Error::Error;              \
  };

RESIM_ERROR_TYPE(ShapeMismatch)
RESIM_ERROR_TYPE(FlipMismatch)
RESIM_ERROR_TYPE(EmptyRegion)
RESIM_ERROR_TYPE(KernelTooLarge)
RESIM_ERROR_TYPE(DegenerateBatch)
RESIM_ERROR_TYPE(NotScalar)
RESIM_ERROR_TYPE(GraphConsumed)
RESIM_ERROR_TYPE(EmptyPairs)
RESIM_ERROR_TYPE(VariantMismatch)
RESIM_ERROR_TYPE(NonUnitNorm)
RESIM_ERROR_TYPE(DegenerateNorm)
RESIM_ERROR_TYPE(NonFiniteValue)
RESIM_ERROR_TYPE(NonFiniteLoss)
RESIM_ERROR_TYPE(ConfigError)
RESIM_ERROR_TYPE(IoError)

#undef RESIM_ERROR_TYPE

// Extra runtime validation (finite values, unit norms). Off by default;
// tests and the check-gradients command switch it on.
inline std::atomic<bool>& debug_checks_flag() {
  static std::atomic<bool> flag{false};
  return flag;
}
inline bool debug_checks() { return debug_checks_flag().load(std::memory_order_relaxed); }
inline void set_debug_checks(bool on) { debug_checks_flag().store(on, std::memory_order_relaxed); }

// Deterministic RNG. mt19937_64 has a standard-pinned bit stream and all
// value conversions are done by hand, so identical seeds give identical
// draws on every platform.
class Rng {
 public:
  explicit Rng(uint64_t seed = 0x9e3779b97f4a7c15ull) : gen_(seed) {}

  uint64_t next_u64() { return gen_(); }

  // [0, 1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // [0, n)
  int64_t uniform_int(int64_t n) {
    return static_cast<int64_t>(next_u64() % static_cast<uint64_t>(n));
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Box-Muller; second value cached.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 1.0 - uniform();  // (0, 1]
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

 private:
  std::mt19937_64 gen_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// SplitMix64; used to derive independent per-item seeds from a base seed.
inline uint64_t mix_seed(uint64_t seed, uint64_t index) {
  uint64_t z = seed + (index + 1) * 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace resim
