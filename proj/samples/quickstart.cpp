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


// Attacks one synthetic image against a random linear classifier and prints
// the loss trajectory.

#include <cstdio>
#include <random>
#include <vector>

#include "pxattack/pxattack.hpp"

int main() {
  const pxattack::Shape shape{16, 16, 3};
  pxattack::Rng rng(7);
  std::normal_distribution<double> gauss(0.0, 0.05);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<double> pixels(shape.size());
  for (auto& v : pixels) v = unit(rng);
  const pxattack::ImageTensor image(shape, pixels);

  std::vector<double> weight(2 * shape.size());
  for (auto& w : weight) w = gauss(rng);
  auto model = pxattack::ToyModel::linear(shape, weight, {2.0, 0.0});

  pxattack::VersatileSearchConfig config;
  config.epsilon = 8.0 / 255.0;
  config.max_iters = 200;
  const auto trace = pxattack::versatile_search(model, image, 0, config, rng);

  for (const auto& rec : trace.iterations) {
    if (rec.accepted) std::printf("t=%zu  loss=%.6f\n", rec.t, rec.best_loss);
  }
  std::printf("success=%d queries=%zu first_success=%zu\n", trace.success ? 1 : 0, trace.queries,
              trace.first_success_iter.value_or(0));
  return 0;
}
