// Copyright 2026 The dmid Authors.
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

#include <span>
#include <vector>

#include "dmid/denoisers.hpp"
#include "dmid/image.hpp"
#include "dmid/sampler.hpp"
#include "dmid/schedule.hpp"

namespace dmid {

/// Re-noising weights gamma_N ... gamma_1 of the plug-in iterative loop.
struct IterationSchedule {
  std::vector<double> gammas;

  void validate() const;
  /// Geometric decay from `first` to `last` over `iterations` weights.
  static IterationSchedule geometric(int iterations, double first = 1.0, double last = 0.05);
};

/// x0_hat + gamma (y - x0_hat)
std::vector<double> iterative_update(std::span<const double> x0_hat, std::span<const double> y,
                                     double gamma);

/// Plug-in iterative denoising: x = y, then per weight
///   x0_hat = denoiser(x, level), x = x0_hat + gamma (y - x0_hat),
/// returning the last x0_hat. `level` is the noise std carried by x: sigma0
/// for the first pass and (previous weight) * sigma0 after that. A zero level
/// skips the denoiser. Empty schedules return denoiser(y, sigma0).
LatentImage run_iterative(const LatentImage& y, const IterationSchedule& gammas,
                          const ImageDenoiser& denoiser, double sigma0);

struct EquivalenceReport {
  /// Iterative weight that reproduces a deterministic diffusion hop: d(s) / d(t).
  double matched_gamma = 0.0;
  /// max |x0_hat(diffusion) - x0_hat(iterative)|
  double predicted_item_gap = 0.0;
  /// (diffusion hop / sqrt(ab_s)) - iterative step, elementwise.
  std::vector<double> difference;
  double max_difference = 0.0;
  /// max |difference - ((c - b)/a eps_hat + sigma/a eps)|
  double decomposition_gap = 0.0;
};

/// Runs one diffusion hop t -> t_prev and one iterative step with the matched
/// weight from the same state, and decomposes their difference. Both steps
/// share the denoiser's x0_hat; any difference lives in the added-noise item.
EquivalenceReport structural_equivalence_probe(std::span<const double> x_t, const Shape& shape,
                                               int t, int t_prev, const NoiseSchedule& schedule,
                                               const Denoiser& denoiser, double gamma,
                                               NoiseSource& noise);

}  // namespace dmid
