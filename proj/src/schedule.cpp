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

#include "dmid/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <fmt/format.h>

#include "dmid/error.hpp"

namespace dmid {

NoiseSchedule::NoiseSchedule(std::vector<double> betas_one_based)
    : beta_(std::move(betas_one_based)) {
  if (beta_.size() < 3) {
    throw ConfigError("schedule needs at least 2 timesteps");
  }
  const std::size_t n = beta_.size();
  beta_[0] = 0.0;
  alpha_.assign(n, 1.0);
  alpha_bar_.assign(n, 1.0);
  level_.assign(n, 0.0);
  for (std::size_t t = 1; t < n; ++t) {
    if (!(beta_[t] > 0.0 && beta_[t] < 1.0)) {
      throw ConfigError(fmt::format("beta[{}] = {} is outside (0, 1)", t, beta_[t]));
    }
    alpha_[t] = 1.0 - beta_[t];
    alpha_bar_[t] = alpha_bar_[t - 1] * alpha_[t];
    level_[t] = std::sqrt(1.0 - alpha_bar_[t]) / std::sqrt(alpha_bar_[t]);
  }
}

std::size_t NoiseSchedule::checked(int t, int lo) const {
  if (t < lo || t > steps()) {
    throw IndexError(fmt::format("timestep {} outside [{}, {}]", t, lo, steps()));
  }
  return static_cast<std::size_t>(t);
}

NoiseSchedule build_linear_schedule(int steps, double beta_start, double beta_end) {
  if (steps < 2) {
    throw ConfigError(fmt::format("schedule needs T >= 2, got {}", steps));
  }
  if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0)) {
    throw ConfigError(fmt::format("need 0 < beta_start <= beta_end < 1, got [{}, {}]",
                                  beta_start, beta_end));
  }
  std::vector<double> betas(static_cast<std::size_t>(steps) + 1, 0.0);
  for (int t = 1; t <= steps; ++t) {
    const double frac = static_cast<double>(t - 1) / static_cast<double>(steps - 1);
    betas[t] = beta_start + (beta_end - beta_start) * frac;
  }
  betas[steps] = beta_end;
  return NoiseSchedule(std::move(betas));
}

const NoiseSchedule& default_schedule() {
  static const NoiseSchedule schedule = build_linear_schedule(1000, 1e-4, 0.02);
  return schedule;
}

double sigma_t(const NoiseSchedule& schedule, int t, int t_prev, double gamma) {
  if (t < 1 || t > schedule.steps() || t_prev < 0 || t_prev >= t) {
    throw IndexError(fmt::format("invalid hop {} -> {}", t, t_prev));
  }
  if (!(gamma >= 0.0 && gamma <= 1.0)) {
    throw ConfigError(fmt::format("gamma {} outside [0, 1]", gamma));
  }
  const double ab_t = schedule.alpha_bar(t);
  const double ab_prev = schedule.alpha_bar(t_prev);
  return gamma * std::sqrt((1.0 - ab_prev) / (1.0 - ab_t)) * std::sqrt(1.0 - ab_t / ab_prev);
}

double sigma_t(const NoiseSchedule& schedule, int t, double gamma) {
  return sigma_t(schedule, t, t - 1, gamma);
}

EmbeddingPlan plan_for_timestep(const NoiseSchedule& schedule, int timestep) {
  EmbeddingPlan plan;
  plan.timestep = timestep;
  plan.scale = std::sqrt(schedule.alpha_bar(timestep));
  plan.matched_sigma = schedule.denoise_level(timestep);
  return plan;
}

EmbeddingPlan select_timestep(const NoiseSchedule& schedule, double sigma_latent,
                              TimestepRounding rounding) {
  if (!(sigma_latent >= 0.0)) {
    throw ConfigError(fmt::format("noise level must be >= 0, got {}", sigma_latent));
  }
  const auto levels = schedule.denoise_levels();
  // Embedding requires N < T.
  const int last = schedule.steps() - 1;
  const double max_level = levels[last];
  if (sigma_latent > max_level) {
    throw SaturationError(
        fmt::format("noise level {} exceeds the maximum representable level {}", sigma_latent,
                    max_level),
        max_level);
  }
  // levels is strictly increasing: first index with d(t) >= sigma.
  const auto first = levels.begin();
  const auto hi = std::lower_bound(first, first + last + 1, sigma_latent);
  int n = static_cast<int>(hi - first);
  if (rounding == TimestepRounding::kNearest && n > 0 &&
      sigma_latent - levels[n - 1] <= levels[n] - sigma_latent) {
    --n;
  }
  return plan_for_timestep(schedule, n);
}

}  // namespace dmid
