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

#include "dmid/denoisers.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include <fmt/format.h>

#include "dmid/error.hpp"

namespace dmid {

namespace {

struct Coefficients {
  double a;  // sqrt(alpha_bar)
  double b;  // sqrt(1 - alpha_bar)
};

Coefficients coefficients(int t, const NoiseSchedule& schedule) {
  if (t < 1) {
    throw IndexError(fmt::format("denoisers are undefined at timestep {}", t));
  }
  const double ab = schedule.alpha_bar(t);
  return {std::sqrt(ab), std::sqrt(1.0 - ab)};
}

void check_shape(std::span<const double> x, const Shape& shape) {
  if (x.size() != shape.size()) {
    throw ShapeError(fmt::format("array has {} elements, shape needs {}", x.size(), shape.size()));
  }
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(item);
  return out;
}

double parse_double(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(fmt::format("cannot parse {} from '{}'", what, s));
  }
}

}  // namespace

std::vector<double> eps_to_x0(std::span<const double> x_t, std::span<const double> eps, int t,
                              const NoiseSchedule& schedule) {
  const auto [a, b] = coefficients(t, schedule);
  std::vector<double> out(x_t.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (x_t[i] - b * eps[i]) / a;
  return out;
}

std::vector<double> x0_to_eps(std::span<const double> x_t, std::span<const double> x0, int t,
                              const NoiseSchedule& schedule) {
  const auto [a, b] = coefficients(t, schedule);
  std::vector<double> out(x_t.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (x_t[i] - a * x0[i]) / b;
  return out;
}

// ---------------------------------------------------------------------------

void GaussianPrior::validate(std::size_t n) const {
  if (!(std > 0.0)) throw ConfigError(fmt::format("prior std must be > 0, got {}", std));
  if (mean.size() != 1 && mean.size() != n) {
    throw ShapeError(fmt::format("prior mean has {} entries, expected 1 or {}", mean.size(), n));
  }
}

void GaussianMixturePrior::validate() const {
  if (components.empty()) throw ConfigError("mixture prior has no components");
  double total = 0.0;
  for (const auto& c : components) {
    if (!(c.weight > 0.0)) throw ConfigError(fmt::format("mixture weight {} is not > 0", c.weight));
    if (!(c.std > 0.0)) throw ConfigError(fmt::format("mixture std {} is not > 0", c.std));
    total += c.weight;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw ConfigError(fmt::format("mixture weights sum to {}, not 1", total));
  }
}

GaussianMixturePrior GaussianMixturePrior::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open mixture spec '{}'", path));
  GaussianMixturePrior prior;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    MixtureComponent c{};
    if (!(ls >> c.weight)) continue;
    if (!(ls >> c.mean >> c.std)) {
      throw ConfigError(fmt::format("{}:{}: expected 'weight mean std'", path, lineno));
    }
    prior.components.push_back(c);
  }
  prior.validate();
  return prior;
}

std::vector<double> gaussian_posterior_eps(std::span<const double> x_t, int t,
                                           const GaussianPrior& prior,
                                           const NoiseSchedule& schedule) {
  const auto [a, b] = coefficients(t, schedule);
  prior.validate(x_t.size());
  const double s2 = prior.std * prior.std;
  const double marginal = a * a * s2 + b * b;
  std::vector<double> eps(x_t.size());
  for (std::size_t i = 0; i < eps.size(); ++i) {
    const double mu = prior.mean_at(i);
    const double x0 = mu + a * s2 / marginal * (x_t[i] - a * mu);
    eps[i] = (x_t[i] - a * x0) / b;
  }
  return eps;
}

std::vector<double> gaussian_posterior_mean(std::span<const double> y, double sigma,
                                            const GaussianPrior& prior) {
  prior.validate(y.size());
  const double s2 = prior.std * prior.std;
  const double gain = s2 / (s2 + sigma * sigma);
  std::vector<double> out(y.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double mu = prior.mean_at(i);
    out[i] = mu + gain * (y[i] - mu);
  }
  return out;
}

namespace {

// Posterior mean of x0 under a mixture, observed as obs = scale * x0 + noise_std * n.
double mixture_posterior_mean(double obs, double scale, double noise_std,
                              const GaussianMixturePrior& prior, std::vector<double>& logr) {
  const std::size_t k = prior.components.size();
  logr.resize(k);
  double peak = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < k; ++j) {
    const auto& c = prior.components[j];
    const double v = scale * scale * c.std * c.std + noise_std * noise_std;
    const double r = obs - scale * c.mean;
    logr[j] = std::log(c.weight) - 0.5 * std::log(v) - 0.5 * r * r / v;
    peak = std::max(peak, logr[j]);
  }
  double norm = 0.0;
  for (double& l : logr) {
    l = std::exp(l - peak);
    norm += l;
  }
  double mean = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    const auto& c = prior.components[j];
    const double s2 = c.std * c.std;
    const double v = scale * scale * s2 + noise_std * noise_std;
    logr[j] /= norm;
    mean += logr[j] * (c.mean + scale * s2 / v * (obs - scale * c.mean));
  }
  return mean;
}

}  // namespace

std::vector<double> gmm_responsibilities(double x_t, int t, const GaussianMixturePrior& prior,
                                         const NoiseSchedule& schedule) {
  const auto [a, b] = coefficients(t, schedule);
  prior.validate();
  std::vector<double> r;
  mixture_posterior_mean(x_t, a, b, prior, r);
  return r;
}

std::vector<double> gmm_posterior_eps(std::span<const double> x_t, int t,
                                      const GaussianMixturePrior& prior,
                                      const NoiseSchedule& schedule) {
  const auto [a, b] = coefficients(t, schedule);
  prior.validate();
  std::vector<double> eps(x_t.size());
  std::vector<double> scratch;
  for (std::size_t i = 0; i < eps.size(); ++i) {
    const double x0 = mixture_posterior_mean(x_t[i], a, b, prior, scratch);
    eps[i] = (x_t[i] - a * x0) / b;
  }
  return eps;
}

std::vector<double> gmm_posterior_mean(std::span<const double> y, double sigma,
                                       const GaussianMixturePrior& prior) {
  prior.validate();
  std::vector<double> out(y.size());
  std::vector<double> scratch;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = mixture_posterior_mean(y[i], 1.0, sigma, prior, scratch);
  }
  return out;
}

std::vector<double> GaussianDenoiser::predict_eps(std::span<const double> x_t, const Shape& shape,
                                                  int t, const NoiseSchedule& schedule) const {
  check_shape(x_t, shape);
  return gaussian_posterior_eps(x_t, t, prior_, schedule);
}

std::string GaussianDenoiser::name() const {
  return prior_.mean.size() == 1 ? fmt::format("gaussian:{},{}", prior_.mean[0], prior_.std)
                                 : fmt::format("gaussian:<field>,{}", prior_.std);
}

MixtureDenoiser::MixtureDenoiser(GaussianMixturePrior prior) : prior_(std::move(prior)) {
  prior_.validate();
}

std::vector<double> MixtureDenoiser::predict_eps(std::span<const double> x_t, const Shape& shape,
                                                 int t, const NoiseSchedule& schedule) const {
  check_shape(x_t, shape);
  return gmm_posterior_eps(x_t, t, prior_, schedule);
}

std::vector<double> ZeroDenoiser::predict_eps(std::span<const double> x_t, const Shape& shape,
                                              int t, const NoiseSchedule& schedule) const {
  check_shape(x_t, shape);
  coefficients(t, schedule);
  return std::vector<double>(x_t.size(), 0.0);
}

// ---------------------------------------------------------------------------

void PatchDctConfig::validate() const {
  if (patch_size < 1 || stride < 1 || stride > patch_size) {
    throw ConfigError(fmt::format("need 1 <= stride <= patch_size, got patch {} stride {}",
                                  patch_size, stride));
  }
  if (!(threshold_multiplier >= 0.0)) {
    throw ConfigError("threshold multiplier must be >= 0");
  }
}

namespace {

// Orthonormal DCT-II basis, row k = frequency k.
std::vector<double> dct_basis(std::size_t n) {
  std::vector<double> m(n * n);
  for (std::size_t k = 0; k < n; ++k) {
    const double norm = std::sqrt((k == 0 ? 1.0 : 2.0) / static_cast<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
      m[k * n + i] = norm * std::cos(std::numbers::pi * (2.0 * static_cast<double>(i) + 1.0) *
                                     static_cast<double>(k) / (2.0 * static_cast<double>(n)));
    }
  }
  return m;
}

std::vector<std::size_t> patch_origins(std::size_t extent, std::size_t patch, std::size_t stride) {
  std::vector<std::size_t> out;
  for (std::size_t p = 0; p + patch <= extent; p += stride) out.push_back(p);
  if (out.back() + patch != extent) out.push_back(extent - patch);
  return out;
}

}  // namespace

std::vector<double> dct_denoise(std::span<const double> x, const Shape& shape, double sigma,
                                const PatchDctConfig& cfg) {
  cfg.validate();
  check_shape(x, shape);
  if (!(sigma >= 0.0)) throw ConfigError("noise std must be >= 0");
  const std::size_t p = cfg.patch_size;
  if (shape.height < p || shape.width < p) {
    throw SizeError(fmt::format("{}x{} image is smaller than one {}x{} patch", shape.height,
                                shape.width, p, p));
  }
  const std::vector<double> basis = dct_basis(p);
  const double threshold = cfg.threshold_multiplier * sigma;
  const auto rows = patch_origins(shape.height, p, cfg.stride);
  const auto cols = patch_origins(shape.width, p, cfg.stride);

  std::vector<double> acc(x.size(), 0.0);
  std::vector<double> hits(shape.plane(), 0.0);
  std::vector<double> block(p * p), tmp(p * p);

  for (std::size_t r0 : rows) {
    for (std::size_t c0 : cols) {
      for (std::size_t y = 0; y < p; ++y) {
        for (std::size_t xx = 0; xx < p; ++xx) hits[(r0 + y) * shape.width + c0 + xx] += 1.0;
      }
    }
  }

  for (std::size_t ch = 0; ch < shape.channels; ++ch) {
    const double* plane = x.data() + ch * shape.plane();
    double* out = acc.data() + ch * shape.plane();
    for (std::size_t r0 : rows) {
      for (std::size_t c0 : cols) {
        for (std::size_t y = 0; y < p; ++y) {
          for (std::size_t xx = 0; xx < p; ++xx) {
            block[y * p + xx] = plane[(r0 + y) * shape.width + c0 + xx];
          }
        }
        // tmp = B * block, block = tmp * B^T
        for (std::size_t k = 0; k < p; ++k) {
          for (std::size_t j = 0; j < p; ++j) {
            double s = 0.0;
            for (std::size_t i = 0; i < p; ++i) s += basis[k * p + i] * block[i * p + j];
            tmp[k * p + j] = s;
          }
        }
        for (std::size_t k = 0; k < p; ++k) {
          for (std::size_t l = 0; l < p; ++l) {
            double s = 0.0;
            for (std::size_t j = 0; j < p; ++j) s += tmp[k * p + j] * basis[l * p + j];
            block[k * p + l] = s;
          }
        }
        for (std::size_t i = 1; i < p * p; ++i) {
          if (std::abs(block[i]) < threshold) block[i] = 0.0;
        }
        // inverse: tmp = B^T * block, block = tmp * B
        for (std::size_t i = 0; i < p; ++i) {
          for (std::size_t l = 0; l < p; ++l) {
            double s = 0.0;
            for (std::size_t k = 0; k < p; ++k) s += basis[k * p + i] * block[k * p + l];
            tmp[i * p + l] = s;
          }
        }
        for (std::size_t i = 0; i < p; ++i) {
          for (std::size_t j = 0; j < p; ++j) {
            double s = 0.0;
            for (std::size_t l = 0; l < p; ++l) s += tmp[i * p + l] * basis[l * p + j];
            out[(r0 + i) * shape.width + c0 + j] += s;
          }
        }
      }
    }
    for (std::size_t i = 0; i < shape.plane(); ++i) out[i] /= hits[i];
  }
  return acc;
}

// ---------------------------------------------------------------------------

std::vector<double> X0DenoiserAdapter::predict_eps(std::span<const double> x_t, const Shape& shape,
                                                   int t, const NoiseSchedule& schedule) const {
  check_shape(x_t, shape);
  const auto [a, b] = coefficients(t, schedule);
  std::vector<double> image(x_t.size());
  for (std::size_t i = 0; i < image.size(); ++i) image[i] = x_t[i] / a;
  std::vector<double> x0 = inner_(image, shape, schedule.denoise_level(t));
  if (x0.size() != x_t.size()) throw ShapeError("wrapped denoiser changed the array size");
  std::vector<double> eps(x_t.size());
  for (std::size_t i = 0; i < eps.size(); ++i) eps[i] = (x_t[i] - a * x0[i]) / b;
  return eps;
}

std::shared_ptr<const Denoiser> wrap_x0_denoiser(ImageDenoiser inner, std::string name) {
  return std::make_shared<X0DenoiserAdapter>(std::move(inner), std::move(name));
}

namespace {

struct ParsedSpec {
  std::string kind;
  std::string args;
};

ParsedSpec parse_spec(const std::string& spec) {
  const auto colon = spec.find(':');
  if (colon == std::string::npos) return {spec, ""};
  return {spec.substr(0, colon), spec.substr(colon + 1)};
}

GaussianPrior parse_gaussian(const std::string& args) {
  const auto parts = split(args, ',');
  if (parts.size() != 2) throw ConfigError("expected gaussian:<mu>,<s>");
  GaussianPrior prior{{parse_double(parts[0], "prior mean")}, parse_double(parts[1], "prior std")};
  prior.validate(1);
  return prior;
}

PatchDctConfig parse_dct(const std::string& args) {
  PatchDctConfig cfg;
  if (!args.empty()) {
    const auto parts = split(args, ',');
    if (parts.size() != 3) throw ConfigError("expected dct:<patch>,<stride>,<k>");
    cfg.patch_size = static_cast<std::size_t>(parse_double(parts[0], "patch size"));
    cfg.stride = static_cast<std::size_t>(parse_double(parts[1], "stride"));
    cfg.threshold_multiplier = parse_double(parts[2], "threshold multiplier");
  }
  cfg.validate();
  return cfg;
}

}  // namespace

std::shared_ptr<const Denoiser> make_denoiser(const std::string& spec) {
  const auto [kind, args] = parse_spec(spec);
  if (kind == "gaussian") return std::make_shared<GaussianDenoiser>(parse_gaussian(args));
  if (kind == "gmm") return std::make_shared<MixtureDenoiser>(GaussianMixturePrior::load(args));
  if (kind == "zero") return std::make_shared<ZeroDenoiser>();
  if (kind == "dct") return wrap_x0_denoiser(make_image_denoiser(spec), spec);
  throw ConfigError(fmt::format("unknown denoiser '{}'", spec));
}

ImageDenoiser make_image_denoiser(const std::string& spec) {
  const auto [kind, args] = parse_spec(spec);
  if (kind == "gaussian") {
    return [prior = parse_gaussian(args)](std::span<const double> y, const Shape&, double sigma) {
      return gaussian_posterior_mean(y, sigma, prior);
    };
  }
  if (kind == "gmm") {
    return [prior = GaussianMixturePrior::load(args)](std::span<const double> y, const Shape&,
                                                      double sigma) {
      return gmm_posterior_mean(y, sigma, prior);
    };
  }
  if (kind == "dct") {
    return [cfg = parse_dct(args)](std::span<const double> y, const Shape& shape, double sigma) {
      return dct_denoise(y, shape, sigma, cfg);
    };
  }
  if (kind == "identity") {
    return [](std::span<const double> y, const Shape&, double) {
      return std::vector<double>(y.begin(), y.end());
    };
  }
  throw ConfigError(fmt::format("unknown image denoiser '{}'", spec));
}

}  // namespace dmid
