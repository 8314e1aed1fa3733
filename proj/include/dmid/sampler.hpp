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
#include <random>
#include <span>
#include <string>
#include <vector>

#include "dmid/denoisers.hpp"
#include "dmid/image.hpp"
#include "dmid/schedule.hpp"

namespace dmid {

struct InferenceConfig {
  int timestep = 0;        // embedding timestep N
  int sampling_steps = 1;  // S_t; ignored when N = 0
  double gamma = 0.85;     // stochasticity multiplier on sigma_t
  std::uint64_t seed = 0;

  void validate(const NoiseSchedule& schedule) const;
  /// True when the chain draws no random numbers.
  bool deterministic() const noexcept {
    return timestep == 0 || sampling_steps <= 1 || gamma == 0.0;
  }
};

/// Strictly decreasing steps [N, ..., tau_S], uniformly spaced with
/// round-to-nearest; the terminal hop to 0 is implicit.
std::vector<int> make_subsequence(int timestep, int sampling_steps);

/// x_N = sqrt(ab_N) * y. No randomness.
std::vector<double> embed(const LatentImage& y, const EmbeddingPlan& plan);

// ---------------------------------------------------------------------------
// Noise sources

class NoiseSource {
 public:
  virtual ~NoiseSource() = default;
  /// Fills out with independent standard normal draws.
  virtual void fill(std::span<double> out) = 0;
};

class GaussianNoise final : public NoiseSource {
 public:
  explicit GaussianNoise(std::uint64_t seed) : engine_(seed) {}
  void fill(std::span<double> out) override;

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;
};

/// Forwards to another source and keeps a copy of every draw.
class RecordingNoise final : public NoiseSource {
 public:
  explicit RecordingNoise(NoiseSource& inner) : inner_(inner) {}
  void fill(std::span<double> out) override;
  const std::vector<double>& record() const noexcept { return record_; }

 private:
  NoiseSource& inner_;
  std::vector<double> record_;
};

/// Replays a recorded stream; throws ConfigError when it runs out.
class ReplayNoise final : public NoiseSource {
 public:
  explicit ReplayNoise(std::span<const double> record) : record_(record) {}
  void fill(std::span<double> out) override;
  std::size_t consumed() const noexcept { return pos_; }

 private:
  std::span<const double> record_;
  std::size_t pos_ = 0;
};

/// Noise records are headerless little-endian IEEE-754 float64 streams.
void write_noise_record(const std::string& path, std::span<const double> record);
std::vector<double> read_noise_record(const std::string& path);

// ---------------------------------------------------------------------------

struct SamplerStats {
  std::size_t denoiser_calls = 0;
  std::size_t noise_draws = 0;
  /// Hops where 1 - ab_prev - sigma^2 < 0 and sigma was clamped.
  std::size_t clamped_radicands = 0;
};

/// One generalized DDIM hop t -> t_prev (t > t_prev >= 0):
///   x_prev = sqrt(ab_prev) x0_hat + sqrt(1 - ab_prev - sigma^2) eps_hat + sigma eps.
/// With t_prev = 0 the result is x0_hat and nothing is drawn.
std::vector<double> reverse_step(std::span<const double> x_t, const Shape& shape, int t, int t_prev,
                                 const Denoiser& denoiser, double gamma,
                                 const NoiseSchedule& schedule, NoiseSource& noise,
                                 SamplerStats* stats = nullptr);

/// Reverse chain from an embedded state x_N down to x_0.
std::vector<double> sample_chain(std::span<const double> x_n, const Shape& shape, int timestep,
                                 int sampling_steps, double gamma, const NoiseSchedule& schedule,
                                 const Denoiser& denoiser, NoiseSource& noise,
                                 SamplerStats* stats = nullptr);

/// Embed y at cfg.timestep and sample down to 0. Deterministic given inputs
/// and seed; the result has sigma_latent = 0.
LatentImage run_inference(const LatentImage& y, const InferenceConfig& cfg,
                          const NoiseSchedule& schedule, const Denoiser& denoiser,
                          SamplerStats* stats = nullptr);

struct AccumulationReport {
  /// max |iterated - accumulated| using the exact accumulated form.
  double residual = 0.0;
  /// max |iterated - two-sum form|. The two-sum form drops the
  /// (sigma + c - b) / a * eps_hat term, so this is only ~0 when gamma = 0.
  double two_sum_residual = 0.0;
  std::vector<double> iterated;
  std::vector<double> accumulated;
  std::vector<double> noise_record;
};

/// Evaluates the chain's output twice: by iterating reverse_step, and as the
/// single-shot estimate at N plus the accumulated per-hop corrections. Both
/// routes consume the same noise stream (noise_record, or one drawn from
/// cfg.seed when empty).
AccumulationReport accumulation_check(const LatentImage& y, const InferenceConfig& cfg,
                                      const NoiseSchedule& schedule, const Denoiser& denoiser,
                                      std::span<const double> noise_record = {});

}  // namespace dmid
