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

#include "dmid/sampler.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include <fmt/format.h>

#include "dmid/error.hpp"

namespace dmid {

void InferenceConfig::validate(const NoiseSchedule& schedule) const {
  if (timestep < 0 || timestep >= schedule.steps()) {
    throw ConfigError(fmt::format("embedding timestep {} outside [0, {})", timestep,
                                  schedule.steps()));
  }
  if (timestep > 0 && (sampling_steps < 1 || sampling_steps > timestep)) {
    throw ConfigError(fmt::format("sampling steps {} outside [1, N = {}]", sampling_steps,
                                  timestep));
  }
  if (!(gamma >= 0.0 && gamma <= 1.0)) {
    throw ConfigError(fmt::format("gamma {} outside [0, 1]", gamma));
  }
}

std::vector<int> make_subsequence(int timestep, int sampling_steps) {
  if (sampling_steps < 1 || sampling_steps > timestep) {
    throw ConfigError(fmt::format("need 1 <= S_t <= N, got S_t = {} with N = {}", sampling_steps,
                                  timestep));
  }
  const auto n = static_cast<long long>(timestep);
  const auto s = static_cast<long long>(sampling_steps);
  std::vector<int> steps;
  steps.reserve(static_cast<std::size_t>(s));
  for (long long k = 0; k < s; ++k) {
    // N - round(k N / S), exact in integers.
    steps.push_back(static_cast<int>(n - (2 * k * n + s) / (2 * s)));
  }
  steps.erase(std::unique(steps.begin(), steps.end()), steps.end());
  // Refill from the widest gap; steps stay >= 1 so the gap to the terminal 0
  // only counts from 1.
  while (static_cast<long long>(steps.size()) < s) {
    std::size_t widest = 0;
    int width = 0;
    for (std::size_t i = 0; i < steps.size(); ++i) {
      const int below = i + 1 < steps.size() ? steps[i + 1] : 0;
      if (steps[i] - below - 1 > width) {
        width = steps[i] - below - 1;
        widest = i;
      }
    }
    if (width == 0) break;
    const int below = widest + 1 < steps.size() ? steps[widest + 1] : 0;
    steps.insert(steps.begin() + static_cast<std::ptrdiff_t>(widest) + 1,
                 steps[widest] - (steps[widest] - below) / 2);
  }
  return steps;
}

std::vector<double> embed(const LatentImage& y, const EmbeddingPlan& plan) {
  std::vector<double> out(y.data.size());
  std::transform(y.data.begin(), y.data.end(), out.begin(),
                 [scale = plan.scale](double v) { return scale * v; });
  return out;
}

// ---------------------------------------------------------------------------

void GaussianNoise::fill(std::span<double> out) {
  for (double& v : out) v = normal_(engine_);
}

void RecordingNoise::fill(std::span<double> out) {
  inner_.fill(out);
  record_.insert(record_.end(), out.begin(), out.end());
}

void ReplayNoise::fill(std::span<double> out) {
  if (record_.size() - pos_ < out.size()) {
    throw ConfigError(fmt::format("noise record exhausted after {} draws", pos_));
  }
  std::copy_n(record_.begin() + static_cast<std::ptrdiff_t>(pos_), out.size(), out.begin());
  pos_ += out.size();
}

void write_noise_record(const std::string& path, std::span<const double> record) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(fmt::format("cannot write noise record '{}'", path));
  for (double v : record) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    unsigned char bytes[8];
    for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>(bits >> (8 * i));
    out.write(reinterpret_cast<const char*>(bytes), 8);
  }
  if (!out) throw IoError(fmt::format("short write on '{}'", path));
}

std::vector<double> read_noise_record(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot read noise record '{}'", path));
  std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (raw.size() % 8 != 0) {
    throw IoError(fmt::format("noise record '{}' is not a whole number of float64 values", path));
  }
  std::vector<double> out(raw.size() / 8);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) {
      bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(raw[8 * i + b])) << (8 * b);
    }
    out[i] = std::bit_cast<double>(bits);
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

struct Hop {
  double sigma;
  double carry;  // sqrt(1 - ab_prev - sigma^2)
};

Hop hop_coefficients(const NoiseSchedule& schedule, int t, int t_prev, double gamma,
                     SamplerStats* stats) {
  double sigma = sigma_t(schedule, t, t_prev, gamma);
  const double rest = 1.0 - schedule.alpha_bar(t_prev);
  double radicand = rest - sigma * sigma;
  if (radicand < 0.0) {
    sigma = std::sqrt(rest);
    radicand = 0.0;
    if (stats) ++stats->clamped_radicands;
  }
  return {sigma, std::sqrt(radicand)};
}

}  // namespace

std::vector<double> reverse_step(std::span<const double> x_t, const Shape& shape, int t, int t_prev,
                                 const Denoiser& denoiser, double gamma,
                                 const NoiseSchedule& schedule, NoiseSource& noise,
                                 SamplerStats* stats) {
  if (t < 1 || t_prev < 0 || t_prev >= t) {
    throw IndexError(fmt::format("invalid reverse hop {} -> {}", t, t_prev));
  }
  const std::vector<double> eps = denoiser.predict_eps(x_t, shape, t, schedule);
  if (stats) ++stats->denoiser_calls;
  std::vector<double> x0 = eps_to_x0(x_t, eps, t, schedule);
  if (t_prev == 0) return x0;

  const Hop hop = hop_coefficients(schedule, t, t_prev, gamma, stats);
  const double a_prev = std::sqrt(schedule.alpha_bar(t_prev));
  std::vector<double> fresh;
  if (hop.sigma > 0.0) {
    fresh.resize(x0.size());
    noise.fill(fresh);
    if (stats) stats->noise_draws += fresh.size();
  }
  for (std::size_t i = 0; i < x0.size(); ++i) {
    double v = a_prev * x0[i] + hop.carry * eps[i];
    if (!fresh.empty()) v += hop.sigma * fresh[i];
    x0[i] = v;
  }
  return x0;
}

std::vector<double> sample_chain(std::span<const double> x_n, const Shape& shape, int timestep,
                                 int sampling_steps, double gamma, const NoiseSchedule& schedule,
                                 const Denoiser& denoiser, NoiseSource& noise,
                                 SamplerStats* stats) {
  std::vector<double> x(x_n.begin(), x_n.end());
  if (timestep == 0) return x;
  const std::vector<int> steps = make_subsequence(timestep, sampling_steps);
  for (std::size_t k = 0; k < steps.size(); ++k) {
    const int t_prev = k + 1 < steps.size() ? steps[k + 1] : 0;
    x = reverse_step(x, shape, steps[k], t_prev, denoiser, gamma, schedule, noise, stats);
  }
  return x;
}

LatentImage run_inference(const LatentImage& y, const InferenceConfig& cfg,
                          const NoiseSchedule& schedule, const Denoiser& denoiser,
                          SamplerStats* stats) {
  cfg.validate(schedule);
  if (y.data.size() != y.shape.size()) throw ShapeError("latent data does not match its shape");
  LatentImage out;
  out.shape = y.shape;
  out.sigma_latent = 0.0;
  if (cfg.timestep == 0) {
    out.data = y.data;
    return out;
  }
  const std::vector<double> x_n = embed(y, plan_for_timestep(schedule, cfg.timestep));
  GaussianNoise noise(cfg.seed);
  out.data = sample_chain(x_n, y.shape, cfg.timestep, cfg.sampling_steps, cfg.gamma, schedule,
                          denoiser, noise, stats);
  return out;
}

// ---------------------------------------------------------------------------

AccumulationReport accumulation_check(const LatentImage& y, const InferenceConfig& cfg,
                                      const NoiseSchedule& schedule, const Denoiser& denoiser,
                                      std::span<const double> noise_record) {
  cfg.validate(schedule);
  AccumulationReport report;
  if (cfg.timestep == 0) {
    report.iterated = y.data;
    report.accumulated = y.data;
    return report;
  }
  const Shape& shape = y.shape;
  const std::vector<double> x_n = embed(y, plan_for_timestep(schedule, cfg.timestep));

  // Route 1: iterate the per-hop update.
  if (noise_record.empty()) {
    GaussianNoise source(cfg.seed);
    RecordingNoise recorder(source);
    report.iterated = sample_chain(x_n, shape, cfg.timestep, cfg.sampling_steps, cfg.gamma,
                                   schedule, denoiser, recorder);
    report.noise_record = recorder.record();
  } else {
    report.noise_record.assign(noise_record.begin(), noise_record.end());
    ReplayNoise replay(report.noise_record);
    report.iterated = sample_chain(x_n, shape, cfg.timestep, cfg.sampling_steps, cfg.gamma,
                                   schedule, denoiser, replay);
  }

  // Route 2: single-shot estimate at N plus accumulated corrections. Per hop
  // t -> s (s >= 1), with a, b = sqrt(ab_s), sqrt(1 - ab_s):
  //   x0(s) - x0(t) = sigma/a (eps - eps_s) + c/a (eps_t - eps_s) + (sigma + c - b)/a eps_s
  // The hop into 0 adds nothing since x_0 = x0(tau_S).
  ReplayNoise replay(report.noise_record);
  const std::vector<int> steps = make_subsequence(cfg.timestep, cfg.sampling_steps);
  std::vector<double> eps = denoiser.predict_eps(x_n, shape, steps[0], schedule);
  std::vector<double> estimate = eps_to_x0(x_n, eps, steps[0], schedule);
  std::vector<double> two_sum = estimate;
  std::vector<double> state(x_n.size()), fresh;
  for (std::size_t k = 0; k + 1 < steps.size(); ++k) {
    const int t = steps[k];
    const int s = steps[k + 1];
    const Hop hop = hop_coefficients(schedule, t, s, cfg.gamma, nullptr);
    const double a = std::sqrt(schedule.alpha_bar(s));
    const double b = std::sqrt(1.0 - schedule.alpha_bar(s));
    fresh.assign(state.size(), 0.0);
    if (hop.sigma > 0.0) replay.fill(fresh);
    for (std::size_t i = 0; i < state.size(); ++i) {
      state[i] = a * estimate[i] + hop.carry * eps[i] + hop.sigma * fresh[i];
    }
    const std::vector<double> next = denoiser.predict_eps(state, shape, s, schedule);
    for (std::size_t i = 0; i < state.size(); ++i) {
      const double noise_term = hop.sigma / a * (fresh[i] - next[i]);
      const double carry_term = hop.carry / a * (eps[i] - next[i]);
      estimate[i] += noise_term + carry_term + (hop.sigma + hop.carry - b) / a * next[i];
      two_sum[i] += noise_term + carry_term;
    }
    eps = next;
  }
  report.accumulated = std::move(estimate);
  for (std::size_t i = 0; i < report.iterated.size(); ++i) {
    report.residual = std::max(report.residual, std::abs(report.iterated[i] - report.accumulated[i]));
    report.two_sum_residual =
        std::max(report.two_sum_residual, std::abs(report.iterated[i] - two_sum[i]));
  }
  return report;
}

}  // namespace dmid
