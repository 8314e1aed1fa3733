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

#include <span>
#include <string>

#include "dmid/image.hpp"

namespace dmid {

enum class NoiseKind { kAdditiveGaussian, kPoissonGaussian };

struct NoiseModel {
  NoiseKind kind = NoiseKind::kAdditiveGaussian;
  double sigma = 0.0;  // Gaussian std, source units
  double gain = 1.0;   // Poisson scaling, poisson-gaussian only

  static NoiseModel gaussian(double sigma) { return {NoiseKind::kAdditiveGaussian, sigma, 1.0}; }
  static NoiseModel poisson_gaussian(double gain, double sigma) {
    return {NoiseKind::kPoissonGaussian, sigma, gain};
  }
  void validate() const;
};

NoiseKind parse_noise_kind(const std::string& name);

// Generalized Anscombe transform for z = gain * Poisson(x) + N(0, sigma^2).
// The output has approximately unit noise std.
double anscombe_forward(double z, double gain, double sigma);
// Closed-form approximation of the exact unbiased inverse.
double anscombe_inverse(double d, double gain, double sigma);

/// Maps an image into the model domain. Additive noise: affine map of the
/// declared range onto [-1, 1]. Poisson-Gaussian: variance-stabilize first,
/// then map the stabilized range onto [-1, 1]. No clipping.
LatentImage to_latent(const PixelImage& image, const NoiseModel& model);

/// Inverse of to_latent; clips to target_range as the final step.
PixelImage from_latent(const LatentImage& latent, const NoiseModel& model, ValueRange target_range);

/// Blind noise std estimate in source units: 3x3 Laplacian-type residual
/// aggregated by the median absolute deviation. Needs height, width >= 16.
double estimate_sigma(const PixelImage& image);

}  // namespace dmid
