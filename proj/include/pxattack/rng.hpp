/*
 * Copyright 2026 The pxattack Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */


#ifndef PXATTACK_RNG_HPP_
#define PXATTACK_RNG_HPP_

#include <cstdint>
#include <limits>
#include <random>

namespace pxattack {

/// All randomized components draw from a 64-bit Mersenne twister. Bounded
/// draws go through uniform_index rather than std::uniform_int_distribution
/// so sequences do not depend on the standard library implementation.
using Rng = std::mt19937_64;

/// Uniform integer in [0, bound), bound > 0, by rejection sampling.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t bound) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t draw;
  do {
    draw = rng();
  } while (draw >= limit);
  return draw % bound;
}

inline int random_sign(Rng& rng) { return (rng() >> 63) != 0 ? 1 : -1; }

/// Per-image stream: base seed xor image index.
inline Rng image_rng(std::uint64_t base_seed, std::uint64_t image_index) {
  return Rng(base_seed ^ image_index);
}

}  // namespace pxattack

#endif  // PXATTACK_RNG_HPP_
