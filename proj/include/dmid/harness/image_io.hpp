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
#include <string>
#include <vector>

#include "dmid/image.hpp"

namespace dmid::io {

enum class ImageFormat { kPgm, kPng, kRawF64 };

/// Picks the format from the extension: .pgm, .png, .raw / .f64.
ImageFormat format_for(const std::string& path);

/// Binary PGM (P5), 8- or 16-bit. The declared range is [0, maxval].
PixelImage load_pgm(const std::string& path);
/// Samples are rounded and clamped to [0, maxval]; maxval defaults to the
/// image's declared upper bound.
void save_pgm(const std::string& path, const PixelImage& image, int maxval = 0);

/// 8-bit grayscale or RGB PNG; the declared range is [0, 255].
PixelImage load_png(const std::string& path);
void save_png(const std::string& path, const PixelImage& image);

/// RAW-F64: ASCII header "RAWF64 <channels> <height> <width> <lo> <hi>\n"
/// followed by planar little-endian float64 samples. Lossless.
PixelImage load_raw(const std::string& path);
void save_raw(const std::string& path, const PixelImage& image);

PixelImage load_image(const std::string& path);
void save_image(const std::string& path, const PixelImage& image);

/// Writes to a sibling temporary file and renames it into place, so a
/// failed write never leaves a partial file at `path`.
void write_file_atomic(const std::string& path, const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> read_file(const std::string& path);

}  // namespace dmid::io
