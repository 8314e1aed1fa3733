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

#include <cstddef>
#include <span>
#include <vector>

namespace dmid {

/// Variance-preserving noise schedule over timesteps 1..T.
///
/// beta/alpha are 1-based (index 0 holds 0 and 1 respectively) and alpha_bar
/// carries a synthetic alpha_bar(0) = 1 so the last reverse hop lands on a
/// noise-free state. Immutable after construction.
class NoiseSchedule {
 public:
  NoiseSchedule(std::vector<double> betas_one_based);

  int steps() const noexcept { return static_cast<int>(beta_.size()) - 1; }

  double beta(int t) const { return beta_.at(checked(t, 1)); }
  double alpha(int t) const { return alpha_.at(checked(t, 1)); }
  double alpha_bar(int t) const { return alpha_bar_[checked(t, 0)]; }
  /// sqrt(1 - alpha_bar) / sqrt(alpha_bar): the latent noise std absorbed at t.
  double denoise_level(int t) const { return level_[checked(t, 0)]; }

  std::span<const double> alpha_bars() const noexcept { return alpha_bar_; }
  std::span<const double> denoise_levels() const noexcept { return level_; }

 private:
  std::size_t checked(int t, int lo) const;

  std::vector<double> beta_;
  std::vector<double> alpha_;
  std::vector<double> alpha_bar_;
  std::vector<double> level_;
};

/// beta_1 = beta_start ... beta_T = beta_end, linearly spaced.
NoiseSchedule build_linear_schedule(int steps, double beta_start, double beta_end);

/// The default 1000-step schedule with beta in [1e-4, 0.02].
const NoiseSchedule& default_schedule();

/// Stochastic-step std for a hop t -> t_prev, scaled by gamma in [0, 1].
/// gamma = 0 is deterministic, gamma = 1 the ancestral posterior variance.
double sigma_t(const NoiseSchedule& schedule, int t, int t_prev, double gamma);
/// Adjacent-step form, t -> t-1.
double sigma_t(const NoiseSchedule& schedule, int t, double gamma);

struct EmbeddingPlan {
  int timestep = 0;
  double scale = 1.0;          // sqrt(alpha_bar(N))
  double matched_sigma = 0.0;  // denoise_level(N)
};

enum class TimestepRounding {
  kNearest,  // argmin |d(t) - sigma|, ties toward smaller t
  kUp,       // smallest t with d(t) >= sigma
};

/// Picks the embedding timestep whose denoising level matches sigma_latent.
/// Throws SaturationError when sigma_latent exceeds d(T-1).
EmbeddingPlan select_timestep(const NoiseSchedule& schedule, double sigma_latent,
                              TimestepRounding rounding = TimestepRounding::kNearest);

EmbeddingPlan plan_for_timestep(const NoiseSchedule& schedule, int timestep);

}  // namespace dmid
