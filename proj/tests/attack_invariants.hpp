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


#ifndef PXATTACK_TESTS_ATTACK_INVARIANTS_HPP_
#define PXATTACK_TESTS_ATTACK_INVARIANTS_HPP_

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "pxattack/attack.hpp"

namespace pxattack::test {

/// Checks the contract shared by every attack against the images the model
/// actually saw. Returns an empty string when everything holds.
inline std::string check_attack_trace(const AttackTrace& trace, const std::vector<ImageTensor>& seen,
                                      const ImageTensor& x_org, double eps, std::size_t max_iters) {
  if (trace.queries != seen.size()) return "trace query count differs from model calls";
  if (trace.queries > max_iters) return "more queries than the budget";
  if (!trace.error && trace.iterations.size() != trace.queries) return "iterations differ from queries";
  const auto base = x_org.data();
  for (std::size_t q = 0; q < seen.size(); ++q) {
    const auto v = seen[q].data();
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double up = std::clamp(base[i] + eps, 0.0, 1.0);
      const double down = std::clamp(base[i] - eps, 0.0, 1.0);
      if (v[i] != up && v[i] != down) return "query " + std::to_string(q + 1) + " leaves the boundary";
      if (std::abs(v[i] - base[i]) > eps + 1e-12) return "query " + std::to_string(q + 1) + " leaves the ball";
    }
  }
  double running = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < trace.iterations.size(); ++k) {
    const auto& it = trace.iterations[k];
    if (it.t != k + 1) return "iteration numbering is not 1..T";
    if (it.queries_used != k + 1) return "queries_used is not exact";
    if (it.best_loss < running) return "best loss decreased at t=" + std::to_string(it.t);
    if (it.accepted && it.best_loss != it.loss) return "accepted loss not recorded as best";
    if (!it.accepted && it.best_loss != running) return "best loss moved without acceptance";
    running = it.best_loss;
  }
  if (!trace.iterations.empty() && trace.best_loss != running) return "final best loss differs from trace";
  if (trace.success != (trace.best_margin > 0.0)) return "success flag inconsistent with margin";
  if (trace.success != trace.first_success_iter.has_value()) return "first success inconsistent";
  return {};
}

}  // namespace pxattack::test

#endif  // PXATTACK_TESTS_ATTACK_INVARIANTS_HPP_
