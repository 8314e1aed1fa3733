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

#include "dmid/image.hpp"

#include <fmt/format.h>

#include "dmid/error.hpp"

namespace dmid {

PixelImage::PixelImage(Shape s, std::vector<double> d, ValueRange r)
    : shape(s), data(std::move(d)), range(r) {
  if (data.size() != shape.size()) {
    throw ShapeError(fmt::format("image data has {} samples, shape needs {}", data.size(),
                                 shape.size()));
  }
}

PixelImage center_crop(const PixelImage& image, std::size_t size) {
  const Shape& s = image.shape;
  if (s.height < size || s.width < size) {
    throw SizeError(fmt::format("cannot crop {}x{} image to {}x{}", s.height, s.width, size, size));
  }
  const std::size_t top = (s.height - size) / 2;
  const std::size_t left = (s.width - size) / 2;
  PixelImage out({s.channels, size, size}, image.range);
  for (std::size_t c = 0; c < s.channels; ++c) {
    for (std::size_t y = 0; y < size; ++y) {
      for (std::size_t x = 0; x < size; ++x) {
        out.at(c, y, x) = image.at(c, top + y, left + x);
      }
    }
  }
  return out;
}

}  // namespace dmid
