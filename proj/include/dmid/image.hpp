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
#include <vector>

namespace dmid {

/// Planar layout: channel-major, then rows, then columns.
struct Shape {
  std::size_t channels = 1;
  std::size_t height = 0;
  std::size_t width = 0;

  std::size_t size() const noexcept { return channels * height * width; }
  std::size_t plane() const noexcept { return height * width; }
  bool operator==(const Shape&) const = default;
};

struct ValueRange {
  double lo = 0.0;
  double hi = 255.0;

  double span() const noexcept { return hi - lo; }
  bool operator==(const ValueRange&) const = default;
};

/// Image in source units (e.g. 8-bit counts) with its declared value range.
struct PixelImage {
  Shape shape;
  std::vector<double> data;
  ValueRange range;

  PixelImage() = default;
  PixelImage(Shape s, ValueRange r) : shape(s), data(s.size(), 0.0), range(r) {}
  PixelImage(Shape s, std::vector<double> d, ValueRange r);

  double& at(std::size_t c, std::size_t y, std::size_t x) {
    return data[c * shape.plane() + y * shape.width + x];
  }
  double at(std::size_t c, std::size_t y, std::size_t x) const {
    return data[c * shape.plane() + y * shape.width + x];
  }
};

/// Image in the model domain, nominally [-1, 1] but never clipped, together
/// with the std of the noise it carries in the same units.
struct LatentImage {
  Shape shape;
  std::vector<double> data;
  double sigma_latent = 0.0;
};

/// Center crop to size x size; throws SizeError when the image is smaller.
PixelImage center_crop(const PixelImage& image, std::size_t size);

}  // namespace dmid
