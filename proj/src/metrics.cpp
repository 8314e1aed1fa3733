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

#include "dmid/metrics.hpp"

#include <cmath>

#include <fmt/format.h>

#include "dmid/error.hpp"

namespace dmid {

double mse(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw ShapeError(fmt::format("cannot compare {} against {} samples", a.size(), b.size()));
  }
  if (a.empty()) throw ShapeError("cannot compare empty arrays");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc / static_cast<double>(a.size());
}

MetricReport psnr(std::span<const double> a, std::span<const double> b, double peak) {
  if (!(peak > 0.0)) throw ConfigError(fmt::format("peak must be > 0, got {}", peak));
  MetricReport r;
  r.mse = mse(a, b);
  r.n = a.size();
  if (r.mse > 0.0) r.psnr = 10.0 * std::log10(peak * peak / r.mse);
  return r;
}

MetricReport psnr(const PixelImage& a, const PixelImage& b, double peak) {
  if (!(a.shape == b.shape)) throw ShapeError("images differ in shape");
  return psnr(std::span<const double>(a.data), std::span<const double>(b.data), peak);
}

}  // namespace dmid
