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

#include "dmid/transform.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "dmid/error.hpp"

namespace dmid {

namespace {

struct AffineMap {
  double lo;
  double span;
  double to_latent(double v) const { return 2.0 * (v - lo) / span - 1.0; }
  double from_latent(double v) const { return (v + 1.0) * 0.5 * span + lo; }
};

AffineMap latent_map(const NoiseModel& model, ValueRange range) {
  if (!(range.span() > 0.0)) {
    throw ConfigError(fmt::format("empty value range [{}, {}]", range.lo, range.hi));
  }
  if (model.kind == NoiseKind::kAdditiveGaussian) {
    return {range.lo, range.span()};
  }
  const double lo = anscombe_forward(range.lo, model.gain, model.sigma);
  const double hi = anscombe_forward(range.hi, model.gain, model.sigma);
  return {lo, hi - lo};
}

}  // namespace

void NoiseModel::validate() const {
  if (!(sigma >= 0.0)) {
    throw ConfigError(fmt::format("noise sigma must be >= 0, got {}", sigma));
  }
  if (kind == NoiseKind::kPoissonGaussian && !(gain > 0.0)) {
    throw ConfigError(fmt::format("poisson gain must be > 0, got {}", gain));
  }
}

NoiseKind parse_noise_kind(const std::string& name) {
  if (name == "gaussian" || name == "additive-gaussian") return NoiseKind::kAdditiveGaussian;
  if (name == "poisson-gaussian") return NoiseKind::kPoissonGaussian;
  throw ConfigError(fmt::format("unknown noise kind '{}'", name));
}

double anscombe_forward(double z, double gain, double sigma) {
  const double arg = gain * z + 0.375 * gain * gain + sigma * sigma;
  return arg > 0.0 ? 2.0 / gain * std::sqrt(arg) : 0.0;
}

double anscombe_inverse(double d, double gain, double sigma) {
  // Below d = 1 the asymptotic expansion diverges; the inverse is 0 there.
  if (d < 1.0) return 0.0;
  const double s = sigma / gain;
  const double r = std::sqrt(1.5);
  const double inv = 0.25 * d * d + 0.25 * r / d - 1.375 / (d * d) + 0.625 * r / (d * d * d) -
                     0.125 - s * s;
  return std::max(0.0, inv) * gain;
}

LatentImage to_latent(const PixelImage& image, const NoiseModel& model) {
  model.validate();
  if (image.data.size() != image.shape.size()) {
    throw ShapeError("image data does not match its shape");
  }
  const AffineMap map = latent_map(model, image.range);
  LatentImage out;
  out.shape = image.shape;
  out.data.resize(image.data.size());
  if (model.kind == NoiseKind::kAdditiveGaussian) {
    std::transform(image.data.begin(), image.data.end(), out.data.begin(),
                   [&](double v) { return map.to_latent(v); });
    out.sigma_latent = 2.0 * model.sigma / map.span;
  } else {
    std::transform(image.data.begin(), image.data.end(), out.data.begin(), [&](double v) {
      return map.to_latent(anscombe_forward(v, model.gain, model.sigma));
    });
    out.sigma_latent = 2.0 / map.span;
  }
  return out;
}

PixelImage from_latent(const LatentImage& latent, const NoiseModel& model, ValueRange target_range) {
  model.validate();
  if (latent.data.size() != latent.shape.size()) {
    throw ShapeError("latent data does not match its shape");
  }
  const AffineMap map = latent_map(model, target_range);
  PixelImage out(latent.shape, target_range);
  for (std::size_t i = 0; i < latent.data.size(); ++i) {
    double v = map.from_latent(latent.data[i]);
    if (model.kind == NoiseKind::kPoissonGaussian) {
      v = anscombe_inverse(v, model.gain, model.sigma);
    }
    out.data[i] = std::clamp(v, target_range.lo, target_range.hi);
  }
  return out;
}

double estimate_sigma(const PixelImage& image) {
  const Shape& s = image.shape;
  if (s.height < 16 || s.width < 16) {
    throw SizeError(fmt::format("noise estimation needs at least 16x16, got {}x{}", s.height,
                                s.width));
  }
  // Mask [1 -2 1; -2 4 -2; 1 -2 1]: white noise of std sigma gives residual std 6 sigma.
  static constexpr double kMask[3][3] = {{1, -2, 1}, {-2, 4, -2}, {1, -2, 1}};
  std::vector<double> residual;
  residual.reserve(s.channels * (s.height - 2) * (s.width - 2));
  for (std::size_t c = 0; c < s.channels; ++c) {
    for (std::size_t y = 1; y + 1 < s.height; ++y) {
      for (std::size_t x = 1; x + 1 < s.width; ++x) {
        double acc = 0.0;
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            acc += kMask[dy + 1][dx + 1] * image.at(c, y + dy, x + dx);
          }
        }
        residual.push_back(acc);
      }
    }
  }
  auto median = [](std::vector<double>& v) {
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    double m = *mid;
    if (v.size() % 2 == 0) {
      m = 0.5 * (m + *std::max_element(v.begin(), mid));
    }
    return m;
  };
  std::vector<double> work = residual;
  const double center = median(work);
  for (double& r : residual) r = std::abs(r - center);
  const double mad = median(residual);
  return 1.482602218505602 * mad / 6.0;
}

}  // namespace dmid
