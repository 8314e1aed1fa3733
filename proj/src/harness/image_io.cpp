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

#include "dmid/harness/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <fmt/format.h>

#include "dmid/error.hpp"

namespace dmid::io {

namespace fs = std::filesystem;

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open '{}'", path));
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_atomic(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  const fs::path target(path);
  std::random_device rd;
  const fs::path tmp = target.parent_path() /
                       fmt::format(".{}.tmp-{:08x}", target.filename().string(), rd());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(fmt::format("cannot write '{}'", path));
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
      out.close();
      std::error_code ec;
      fs::remove(tmp, ec);
      throw IoError(fmt::format("short write on '{}'", path));
    }
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError(fmt::format("cannot move output into place at '{}'", path));
  }
}

ImageFormat format_for(const std::string& path) {
  std::string ext = fs::path(path).extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (ext == ".pgm") return ImageFormat::kPgm;
  if (ext == ".png") return ImageFormat::kPng;
  if (ext == ".raw" || ext == ".f64") return ImageFormat::kRawF64;
  throw IoError(fmt::format("unsupported image extension '{}' ({})", ext, path));
}

// ---------------------------------------------------------------------------
// PGM

namespace {

class HeaderReader {
 public:
  HeaderReader(const std::vector<std::uint8_t>& bytes, std::string path)
      : bytes_(bytes), path_(std::move(path)) {}

  std::string token() {
    skip_space_and_comments();
    std::string out;
    while (pos_ < bytes_.size() && !std::isspace(bytes_[pos_])) out.push_back(static_cast<char>(bytes_[pos_++]));
    if (out.empty()) throw IoError(fmt::format("truncated header in '{}'", path_));
    return out;
  }

  long number() {
    const std::string t = token();
    if (!std::all_of(t.begin(), t.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
      throw IoError(fmt::format("bad header field '{}' in '{}'", t, path_));
    }
    return std::stol(t);
  }

  // Exactly one whitespace byte separates the header from the raster.
  std::size_t raster_offset() const { return pos_ + 1; }

 private:
  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  const std::vector<std::uint8_t>& bytes_;
  std::string path_;
  std::size_t pos_ = 0;
};

}  // namespace

PixelImage load_pgm(const std::string& path) {
  const auto bytes = read_file(path);
  HeaderReader header(bytes, path);
  if (header.token() != "P5") throw IoError(fmt::format("'{}' is not a binary PGM (P5)", path));
  const long width = header.number();
  const long height = header.number();
  const long maxval = header.number();
  if (width <= 0 || height <= 0 || maxval <= 0 || maxval > 65535) {
    throw IoError(fmt::format("invalid PGM header in '{}'", path));
  }
  const std::size_t bpp = maxval > 255 ? 2 : 1;
  const Shape shape{1, static_cast<std::size_t>(height), static_cast<std::size_t>(width)};
  const std::size_t offset = header.raster_offset();
  if (bytes.size() < offset + shape.size() * bpp) {
    throw IoError(fmt::format("truncated raster in '{}'", path));
  }
  PixelImage image(shape, {0.0, static_cast<double>(maxval)});
  for (std::size_t i = 0; i < shape.size(); ++i) {
    image.data[i] = bpp == 1 ? bytes[offset + i]
                             : static_cast<double>((bytes[offset + 2 * i] << 8) | bytes[offset + 2 * i + 1]);
  }
  return image;
}

void save_pgm(const std::string& path, const PixelImage& image, int maxval) {
  if (image.shape.channels != 1) throw IoError("PGM holds a single channel");
  if (maxval <= 0) maxval = static_cast<int>(std::lround(image.range.hi));
  if (maxval <= 0 || maxval > 65535) throw IoError(fmt::format("PGM maxval {} out of range", maxval));
  const std::string header =
      fmt::format("P5\n{} {}\n{}\n", image.shape.width, image.shape.height, maxval);
  std::vector<std::uint8_t> bytes(header.begin(), header.end());
  const bool wide = maxval > 255;
  for (double v : image.data) {
    const auto q = static_cast<unsigned>(std::clamp(std::nearbyint(v), 0.0, static_cast<double>(maxval)));
    if (wide) bytes.push_back(static_cast<std::uint8_t>(q >> 8));
    bytes.push_back(static_cast<std::uint8_t>(q & 0xFF));
  }
  write_file_atomic(path, bytes);
}

// ---------------------------------------------------------------------------
// PNG via libpng's simplified API

PixelImage load_png(const std::string& path) {
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.c_str())) {
    throw IoError(fmt::format("cannot read PNG '{}': {}", path, png.message));
  }
  const bool color = (png.format & PNG_FORMAT_FLAG_COLOR) != 0;
  png.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  const std::size_t channels = color ? 3 : 1;
  std::vector<std::uint8_t> raster(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, raster.data(), 0, nullptr)) {
    png_image_free(&png);
    throw IoError(fmt::format("cannot decode PNG '{}': {}", path, png.message));
  }
  const Shape shape{channels, png.height, png.width};
  PixelImage image(shape, {0.0, 255.0});
  for (std::size_t p = 0; p < shape.plane(); ++p) {
    for (std::size_t c = 0; c < channels; ++c) {
      image.data[c * shape.plane() + p] = raster[p * channels + c];
    }
  }
  return image;
}

void save_png(const std::string& path, const PixelImage& image) {
  const Shape& shape = image.shape;
  if (shape.channels != 1 && shape.channels != 3) throw IoError("PNG export needs 1 or 3 channels");
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(shape.width);
  png.height = static_cast<png_uint_32>(shape.height);
  png.format = shape.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  // Rescale the declared range onto 8 bits.
  const double scale = 255.0 / image.range.span();
  std::vector<std::uint8_t> raster(shape.size());
  for (std::size_t p = 0; p < shape.plane(); ++p) {
    for (std::size_t c = 0; c < shape.channels; ++c) {
      const double v = (image.data[c * shape.plane() + p] - image.range.lo) * scale;
      raster[p * shape.channels + c] = static_cast<std::uint8_t>(std::clamp(std::nearbyint(v), 0.0, 255.0));
    }
  }
  png_alloc_size_t size = 0;
  if (!png_image_write_get_memory_size(png, size, 0, raster.data(), 0, nullptr)) {
    throw IoError(fmt::format("cannot encode PNG '{}': {}", path, png.message));
  }
  std::vector<std::uint8_t> bytes(size);
  if (!png_image_write_to_memory(&png, bytes.data(), &size, 0, raster.data(), 0, nullptr)) {
    throw IoError(fmt::format("cannot encode PNG '{}': {}", path, png.message));
  }
  bytes.resize(size);
  write_file_atomic(path, bytes);
}

// ---------------------------------------------------------------------------
// RAW-F64

PixelImage load_raw(const std::string& path) {
  const auto bytes = read_file(path);
  const auto newline = std::find(bytes.begin(), bytes.end(), std::uint8_t{'\n'});
  if (newline == bytes.end()) throw IoError(fmt::format("'{}' has no RAWF64 header", path));
  std::istringstream header(std::string(bytes.begin(), newline));
  std::string magic;
  Shape shape;
  ValueRange range;
  if (!(header >> magic >> shape.channels >> shape.height >> shape.width >> range.lo >> range.hi) ||
      magic != "RAWF64") {
    throw IoError(fmt::format("'{}' has a malformed RAWF64 header", path));
  }
  const std::size_t offset = static_cast<std::size_t>(newline - bytes.begin()) + 1;
  if (bytes.size() != offset + 8 * shape.size()) {
    throw IoError(fmt::format("'{}' holds {} payload bytes, header needs {}", path,
                              bytes.size() - offset, 8 * shape.size()));
  }
  PixelImage image(shape, range);
  for (std::size_t i = 0; i < shape.size(); ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(bytes[offset + 8 * i + b]) << (8 * b);
    image.data[i] = std::bit_cast<double>(bits);
  }
  return image;
}

void save_raw(const std::string& path, const PixelImage& image) {
  const std::string header = fmt::format("RAWF64 {} {} {} {} {}\n", image.shape.channels,
                                         image.shape.height, image.shape.width, image.range.lo,
                                         image.range.hi);
  std::vector<std::uint8_t> bytes(header.begin(), header.end());
  bytes.reserve(bytes.size() + 8 * image.data.size());
  for (double v : image.data) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int b = 0; b < 8; ++b) bytes.push_back(static_cast<std::uint8_t>(bits >> (8 * b)));
  }
  write_file_atomic(path, bytes);
}

PixelImage load_image(const std::string& path) {
  switch (format_for(path)) {
    case ImageFormat::kPgm: return load_pgm(path);
    case ImageFormat::kPng: return load_png(path);
    case ImageFormat::kRawF64: return load_raw(path);
  }
  throw IoError("unreachable");
}

void save_image(const std::string& path, const PixelImage& image) {
  switch (format_for(path)) {
    case ImageFormat::kPgm: return save_pgm(path, image);
    case ImageFormat::kPng: return save_png(path, image);
    case ImageFormat::kRawF64: return save_raw(path, image);
  }
}

}  // namespace dmid::io
