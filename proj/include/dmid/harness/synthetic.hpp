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
#include <vector>

#include "dmid/denoisers.hpp"
#include "dmid/image.hpp"
#include "dmid/schedule.hpp"

namespace dmid::harness {

/// image + sigma * N(0, 1), unclipped; the declared range is kept.
PixelImage add_awgn(const PixelImage& image, double sigma, std::uint64_t seed);

std::vector<double> sample_prior(const GaussianPrior& prior, std::size_t n, std::uint64_t seed);
std::vector<double> sample_prior(const GaussianMixturePrior& prior, std::size_t n,
                                 std::uint64_t seed);

/// Synthetic denoising problem in model units: clean ~ N(mean, std^2),
/// noisy = clean + d(N) * noise, with N matched to the requested level so
/// the embedded state follows the forward marginal exactly.
struct OracleTask {
  std::vector<double> clean;
  std::vector<double> noisy;
  int timestep = 0;
  double sigma_latent = 0.0;
};

OracleTask make_oracle_task(std::size_t n, double prior_mean, double prior_std,
                            double sigma_latent, std::uint64_t seed,
                            const NoiseSchedule& schedule);

}  // namespace dmid::harness
