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

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dmid/denoisers.hpp"
#include "dmid/image.hpp"
#include "dmid/sampler.hpp"
#include "dmid/schedule.hpp"

namespace dmid {

struct EnsembleConfig {
  InferenceConfig base;
  int repeats = 1;            // R_t
  std::optional<int> budget;  // when set, S_t * R_t must equal it

  void validate(const NoiseSchedule& schedule) const;
};

/// Seed of repeat `index`: the base seed itself for index 0, otherwise the
/// splitmix64 finalizer applied to base + index * 0x9E3779B97F4A7C15.
std::uint64_t repeat_seed(std::uint64_t base, std::uint64_t index);

/// Members are summed pairwise within consecutive blocks of this size, then
/// the block sums pairwise in index order.
inline constexpr std::size_t kEnsembleBlock = 16;

/// Elementwise mean using the fixed summation tree described above.
std::vector<double> fixed_order_mean(const std::vector<std::vector<double>>& samples);

/// Averages R_t independent inferences. The result does not depend on
/// `threads`. Chains that draw no randomness (S_t = 1 or gamma = 0) are run
/// once, since every repeat would be identical.
LatentImage run_ensemble(const LatentImage& y, const EnsembleConfig& cfg,
                         const NoiseSchedule& schedule, const Denoiser& denoiser,
                         unsigned threads = 1);

struct VariantOptions {
  int budget = 1000;
  int distortion_steps = 10;
  int perception_steps = 100;
  double gamma = 0.85;
  std::uint64_t seed = 0;
};

struct VariantPlan {
  EnsembleConfig distortion;  // S_t * R_t = budget, S_t <= 10
  EnsembleConfig perception;  // R_t = 1
  bool distortion_collapsed = false;
  std::string warning;
};

/// Builds the low-distortion and perceptual configurations for a noise level.
VariantPlan plan_variants(double sigma_latent, const NoiseSchedule& schedule,
                          const VariantOptions& options = {});

}  // namespace dmid
