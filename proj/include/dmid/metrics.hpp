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

#include <cstddef>
#include <limits>
#include <span>

#include "dmid/image.hpp"

namespace dmid {

struct MetricReport {
  double mse = 0.0;
  /// +infinity when the images are identical.
  double psnr = std::numeric_limits<double>::infinity();
  std::size_t n = 0;

  bool identical() const noexcept { return mse == 0.0; }
};

double mse(std::span<const double> a, std::span<const double> b);

MetricReport psnr(std::span<const double> a, std::span<const double> b, double peak);
MetricReport psnr(const PixelImage& a, const PixelImage& b, double peak);

}  // namespace dmid
