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

#include "dmid/harness/synthetic.hpp"

#include <random>

#include "dmid/error.hpp"

namespace dmid::harness {

namespace {

// Data generators never share a stream with the sampler's mt19937_64(seed).
std::mt19937_64 data_engine(std::uint64_t seed, std::uint32_t tag) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), tag};
  return std::mt19937_64(seq);
}

constexpr std::uint32_t kNoiseTag = 0x6e6f6973;
constexpr std::uint32_t kPriorTag = 0x70726972;
constexpr std::uint32_t kOracleTag = 0x6f72636c;

}  // namespace

PixelImage add_awgn(const PixelImage& image, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0.0)) throw ConfigError("noise sigma must be >= 0");
  auto engine = data_engine(seed, kNoiseTag);
  std::normal_distribution<double> normal;
  PixelImage out = image;
  for (double& v : out.data) v += sigma * normal(engine);
  return out;
}

std::vector<double> sample_prior(const GaussianPrior& prior, std::size_t n, std::uint64_t seed) {
  prior.validate(n);
  auto engine = data_engine(seed, kPriorTag);
  std::normal_distribution<double> normal;
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = prior.mean_at(i) + prior.std * normal(engine);
  return out;
}

std::vector<double> sample_prior(const GaussianMixturePrior& prior, std::size_t n,
                                 std::uint64_t seed) {
  prior.validate();
  std::vector<double> weights;
  for (const auto& c : prior.components) weights.push_back(c.weight);
  auto engine = data_engine(seed, kPriorTag);
  std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
  std::normal_distribution<double> normal;
  std::vector<double> out(n);
  for (double& v : out) {
    const auto& c = prior.components[pick(engine)];
    v = c.mean + c.std * normal(engine);
  }
  return out;
}

OracleTask make_oracle_task(std::size_t n, double prior_mean, double prior_std,
                            double sigma_latent, std::uint64_t seed,
                            const NoiseSchedule& schedule) {
  OracleTask task;
  const EmbeddingPlan plan = select_timestep(schedule, sigma_latent);
  task.timestep = plan.timestep;
  task.sigma_latent = plan.matched_sigma;
  task.clean = sample_prior(GaussianPrior{{prior_mean}, prior_std}, n, seed);
  auto engine = data_engine(seed, kOracleTag);
  std::normal_distribution<double> normal;
  task.noisy.resize(n);
  for (std::size_t i = 0; i < n; ++i) task.noisy[i] = task.clean[i] + plan.matched_sigma * normal(engine);
  return task;
}

}  // namespace dmid::harness
