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

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "dmid/image.hpp"
#include "dmid/schedule.hpp"

namespace dmid {

/// Anything that predicts the noise component eps from (x_t, t).
///
/// Implementations must be safe for concurrent const use and must preserve
/// shape. t = 0 is rejected: there is no noise left to predict.
class Denoiser {
 public:
  virtual ~Denoiser() = default;

  virtual std::vector<double> predict_eps(std::span<const double> x_t, const Shape& shape, int t,
                                          const NoiseSchedule& schedule) const = 0;
  virtual std::string name() const = 0;
};

/// x0_hat = (x_t - sqrt(1 - ab) eps) / sqrt(ab)
std::vector<double> eps_to_x0(std::span<const double> x_t, std::span<const double> eps, int t,
                              const NoiseSchedule& schedule);
/// eps = (x_t - sqrt(ab) x0_hat) / sqrt(1 - ab)
std::vector<double> x0_to_eps(std::span<const double> x_t, std::span<const double> x0, int t,
                              const NoiseSchedule& schedule);

/// Denoiser in image form: (noisy array, noise std) -> clean estimate.
using ImageDenoiser =
    std::function<std::vector<double>(std::span<const double>, const Shape&, double)>;

// ---------------------------------------------------------------------------
// Analytic priors

struct GaussianPrior {
  std::vector<double> mean;  // one value (broadcast) or one per element
  double std = 1.0;

  void validate(std::size_t n) const;
  double mean_at(std::size_t i) const { return mean.size() == 1 ? mean[0] : mean[i]; }
};

struct MixtureComponent {
  double weight;
  double mean;
  double std;
};

struct GaussianMixturePrior {
  std::vector<MixtureComponent> components;

  void validate() const;
  /// Reads "weight mean std" per line; '#' starts a comment.
  static GaussianMixturePrior load(const std::string& path);
};

/// Exact posterior-mean eps predictor for a Gaussian prior on x0.
std::vector<double> gaussian_posterior_eps(std::span<const double> x_t, int t,
                                           const GaussianPrior& prior,
                                           const NoiseSchedule& schedule);

/// Posterior mean of x0 given y = x0 + sigma * noise (image form).
std::vector<double> gaussian_posterior_mean(std::span<const double> y, double sigma,
                                            const GaussianPrior& prior);

/// Exact posterior-mean eps predictor for an elementwise Gaussian mixture prior.
std::vector<double> gmm_posterior_eps(std::span<const double> x_t, int t,
                                      const GaussianMixturePrior& prior,
                                      const NoiseSchedule& schedule);

/// Component responsibilities for one element, log-sum-exp stabilized.
std::vector<double> gmm_responsibilities(double x_t, int t, const GaussianMixturePrior& prior,
                                         const NoiseSchedule& schedule);

std::vector<double> gmm_posterior_mean(std::span<const double> y, double sigma,
                                       const GaussianMixturePrior& prior);

class GaussianDenoiser final : public Denoiser {
 public:
  explicit GaussianDenoiser(GaussianPrior prior) : prior_(std::move(prior)) {}
  std::vector<double> predict_eps(std::span<const double> x_t, const Shape& shape, int t,
                                  const NoiseSchedule& schedule) const override;
  std::string name() const override;
  const GaussianPrior& prior() const noexcept { return prior_; }

 private:
  GaussianPrior prior_;
};

class MixtureDenoiser final : public Denoiser {
 public:
  explicit MixtureDenoiser(GaussianMixturePrior prior);
  std::vector<double> predict_eps(std::span<const double> x_t, const Shape& shape, int t,
                                  const NoiseSchedule& schedule) const override;
  std::string name() const override { return "gmm"; }

 private:
  GaussianMixturePrior prior_;
};

/// Predicts eps = 0 everywhere; the reverse chain degenerates to rescaling.
class ZeroDenoiser final : public Denoiser {
 public:
  std::vector<double> predict_eps(std::span<const double> x_t, const Shape& shape, int t,
                                  const NoiseSchedule& schedule) const override;
  std::string name() const override { return "zero"; }
};

// ---------------------------------------------------------------------------
// Patch DCT hard thresholding

struct PatchDctConfig {
  std::size_t patch_size = 8;
  std::size_t stride = 4;
  double threshold_multiplier = 3.0;

  void validate() const;
};

/// Overlapping-patch DCT hard thresholding, per channel. The DC coefficient
/// is always kept and overlaps are averaged uniformly.
std::vector<double> dct_denoise(std::span<const double> x, const Shape& shape, double sigma,
                                const PatchDctConfig& cfg = {});

// ---------------------------------------------------------------------------

/// Adapts an image denoiser to the eps contract: at step t the state is
/// rescaled to x_t / sqrt(ab_t), which carries noise std d(t).
class X0DenoiserAdapter final : public Denoiser {
 public:
  X0DenoiserAdapter(ImageDenoiser inner, std::string name)
      : inner_(std::move(inner)), name_(std::move(name)) {}
  std::vector<double> predict_eps(std::span<const double> x_t, const Shape& shape, int t,
                                  const NoiseSchedule& schedule) const override;
  std::string name() const override { return name_; }

 private:
  ImageDenoiser inner_;
  std::string name_;
};

std::shared_ptr<const Denoiser> wrap_x0_denoiser(ImageDenoiser inner, std::string name = "x0");

/// Builds a denoiser from "gaussian:<mu>,<s>", "gmm:<spec-file>",
/// "dct:<patch>,<stride>,<k>" (or bare "dct") and "zero".
std::shared_ptr<const Denoiser> make_denoiser(const std::string& spec);

/// Image-form counterpart of make_denoiser, used by the iterative baseline.
ImageDenoiser make_image_denoiser(const std::string& spec);

}  // namespace dmid
