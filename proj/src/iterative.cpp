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

#include "dmid/iterative.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "dmid/error.hpp"

namespace dmid {

void IterationSchedule::validate() const {
  for (double g : gammas) {
    if (!(g >= 0.0 && g <= 1.0)) throw ConfigError(fmt::format("iteration weight {} outside [0, 1]", g));
  }
}

IterationSchedule IterationSchedule::geometric(int iterations, double first, double last) {
  if (iterations < 0) throw ConfigError("iteration count must be >= 0");
  if (!(first > 0.0 && last > 0.0)) throw ConfigError("geometric weights must be > 0");
  IterationSchedule s;
  for (int k = 0; k < iterations; ++k) {
    const double frac = iterations == 1 ? 0.0 : static_cast<double>(k) / (iterations - 1);
    s.gammas.push_back(first * std::pow(last / first, frac));
  }
  s.validate();
  return s;
}

std::vector<double> iterative_update(std::span<const double> x0_hat, std::span<const double> y,
                                     double gamma) {
  if (x0_hat.size() != y.size()) throw ShapeError("iterative update on mismatched arrays");
  std::vector<double> out(y.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x0_hat[i] + gamma * (y[i] - x0_hat[i]);
  return out;
}

LatentImage run_iterative(const LatentImage& y, const IterationSchedule& gammas,
                          const ImageDenoiser& denoiser, double sigma0) {
  gammas.validate();
  if (!(sigma0 >= 0.0)) throw ConfigError("input noise level must be >= 0");
  LatentImage out{y.shape, {}, 0.0};
  if (gammas.gammas.empty()) {
    out.data = denoiser(y.data, y.shape, sigma0);
    return out;
  }
  std::vector<double> x = y.data;
  std::vector<double> x0;
  double carried = 1.0;
  for (double gamma : gammas.gammas) {
    const double level = carried * sigma0;
    x0 = level > 0.0 ? denoiser(x, y.shape, level) : x;
    x = iterative_update(x0, y.data, gamma);
    carried = gamma;
  }
  out.data = std::move(x0);
  return out;
}

EquivalenceReport structural_equivalence_probe(std::span<const double> x_t, const Shape& shape,
                                               int t, int t_prev, const NoiseSchedule& schedule,
                                               const Denoiser& denoiser, double gamma,
                                               NoiseSource& noise) {
  if (t < 1 || t_prev < 0 || t_prev >= t) {
    throw IndexError(fmt::format("invalid probe hop {} -> {}", t, t_prev));
  }
  EquivalenceReport report;
  const std::vector<double> eps = denoiser.predict_eps(x_t, shape, t, schedule);
  const double a_t = std::sqrt(schedule.alpha_bar(t));
  const double b_t = std::sqrt(1.0 - schedule.alpha_bar(t));
  const double a_s = std::sqrt(schedule.alpha_bar(t_prev));
  const double b_s = std::sqrt(1.0 - schedule.alpha_bar(t_prev));
  const double level_t = schedule.denoise_level(t);
  report.matched_gamma = schedule.denoise_level(t_prev) / level_t;

  double sigma = 0.0;
  double carry = 0.0;
  if (t_prev > 0) {
    sigma = sigma_t(schedule, t, t_prev, gamma);
    const double radicand = 1.0 - schedule.alpha_bar(t_prev) - sigma * sigma;
    if (radicand < 0.0) sigma = b_s;
    carry = std::sqrt(std::max(0.0, radicand));
  }
  std::vector<double> fresh(x_t.size(), 0.0);
  if (sigma > 0.0) noise.fill(fresh);

  report.difference.resize(x_t.size());
  for (std::size_t i = 0; i < x_t.size(); ++i) {
    // Diffusion hop, expressed in image units by dividing through sqrt(ab_s).
    const double x0_diffusion = (x_t[i] - b_t * eps[i]) / a_t;
    const double hop = t_prev == 0 ? x0_diffusion
                                   : (a_s * x0_diffusion + carry * eps[i] + sigma * fresh[i]) / a_s;
    // Iterative step on the image-unit state y_t = x_t / sqrt(ab_t).
    const double y_t = x_t[i] / a_t;
    const double x0_iterative = y_t - level_t * eps[i];
    const double step = x0_iterative + report.matched_gamma * (y_t - x0_iterative);

    report.predicted_item_gap =
        std::max(report.predicted_item_gap, std::abs(x0_diffusion - x0_iterative));
    report.difference[i] = hop - step;
    report.max_difference = std::max(report.max_difference, std::abs(report.difference[i]));
    const double expected = t_prev == 0 ? 0.0 : (carry - b_s) / a_s * eps[i] + sigma / a_s * fresh[i];
    report.decomposition_gap =
        std::max(report.decomposition_gap, std::abs(report.difference[i] - expected));
  }
  return report;
}

}  // namespace dmid
