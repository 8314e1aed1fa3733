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

#include "dmid/ensemble.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

#include <fmt/format.h>

#include "dmid/error.hpp"

namespace dmid {

void EnsembleConfig::validate(const NoiseSchedule& schedule) const {
  base.validate(schedule);
  if (repeats < 1) throw ConfigError(fmt::format("repeats must be >= 1, got {}", repeats));
  if (budget && base.sampling_steps * repeats != *budget) {
    throw ConfigError(fmt::format("S_t * R_t = {} * {} does not match the budget {}",
                                  base.sampling_steps, repeats, *budget));
  }
}

std::uint64_t repeat_seed(std::uint64_t base, std::uint64_t index) {
  if (index == 0) return base;
  std::uint64_t z = base + index * 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

namespace {

using Sample = std::vector<double>;

Sample pairwise_sum(std::vector<Sample>& items, std::size_t lo, std::size_t hi) {
  if (hi - lo == 1) return std::move(items[lo]);
  const std::size_t mid = lo + (hi - lo) / 2;
  Sample left = pairwise_sum(items, lo, mid);
  const Sample right = pairwise_sum(items, mid, hi);
  for (std::size_t i = 0; i < left.size(); ++i) left[i] += right[i];
  return left;
}

Sample finish_mean(std::vector<Sample>& block_sums, std::size_t count) {
  Sample total = pairwise_sum(block_sums, 0, block_sums.size());
  const double n = static_cast<double>(count);
  for (double& v : total) v /= n;
  return total;
}

}  // namespace

std::vector<double> fixed_order_mean(const std::vector<std::vector<double>>& samples) {
  if (samples.empty()) throw ConfigError("mean of an empty ensemble");
  std::vector<Sample> block_sums;
  for (std::size_t lo = 0; lo < samples.size(); lo += kEnsembleBlock) {
    const std::size_t hi = std::min(samples.size(), lo + kEnsembleBlock);
    std::vector<Sample> block(samples.begin() + static_cast<std::ptrdiff_t>(lo),
                              samples.begin() + static_cast<std::ptrdiff_t>(hi));
    block_sums.push_back(pairwise_sum(block, 0, block.size()));
  }
  return finish_mean(block_sums, samples.size());
}

LatentImage run_ensemble(const LatentImage& y, const EnsembleConfig& cfg,
                         const NoiseSchedule& schedule, const Denoiser& denoiser,
                         unsigned threads) {
  cfg.validate(schedule);
  if (cfg.repeats == 1 || cfg.base.deterministic()) {
    return run_inference(y, cfg.base, schedule, denoiser);
  }

  const auto repeats = static_cast<std::size_t>(cfg.repeats);
  const std::size_t blocks = (repeats + kEnsembleBlock - 1) / kEnsembleBlock;
  std::vector<Sample> block_sums(blocks);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto worker = [&] {
    for (std::size_t b = next++; b < blocks; b = next++) {
      try {
        const std::size_t lo = b * kEnsembleBlock;
        const std::size_t hi = std::min(repeats, lo + kEnsembleBlock);
        std::vector<Sample> members;
        members.reserve(hi - lo);
        for (std::size_t i = lo; i < hi; ++i) {
          InferenceConfig member = cfg.base;
          member.seed = repeat_seed(cfg.base.seed, i);
          members.push_back(run_inference(y, member, schedule, denoiser).data);
        }
        block_sums[b] = pairwise_sum(members, 0, members.size());
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = blocks;
      }
    }
  };

  const unsigned workers = std::clamp<unsigned>(threads, 1, static_cast<unsigned>(blocks));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  LatentImage out;
  out.shape = y.shape;
  out.data = finish_mean(block_sums, repeats);
  return out;
}

VariantPlan plan_variants(double sigma_latent, const NoiseSchedule& schedule,
                          const VariantOptions& options) {
  if (options.budget < 1) throw ConfigError("sampling budget must be >= 1");
  if (options.distortion_steps < 1 || options.perception_steps < 1) {
    throw ConfigError("sampling steps must be >= 1");
  }
  const EmbeddingPlan plan = select_timestep(schedule, sigma_latent);
  const int n = plan.timestep;

  VariantPlan out;
  InferenceConfig base{n, 0, options.gamma, options.seed};
  out.distortion.base = base;
  out.perception.base = base;
  if (n == 0) return out;

  // Largest S_t <= min(requested, 10, N) that divides the budget.
  int steps = std::min({options.distortion_steps, 10, n});
  while (options.budget % steps != 0) --steps;
  out.distortion.base.sampling_steps = steps;
  out.distortion.repeats = options.budget / steps;
  out.distortion.budget = options.budget;
  if (steps == 1 && out.distortion.repeats > 1) {
    out.distortion_collapsed = true;
    out.warning = fmt::format(
        "S_t = 1 draws no randomness; {} repeats reduce to a single inference",
        out.distortion.repeats);
  }

  out.perception.base.sampling_steps = std::min(options.perception_steps, n);
  out.perception.repeats = 1;
  return out;
}

}  // namespace dmid
