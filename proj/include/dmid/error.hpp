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

#include <stdexcept>
#include <string>

namespace dmid {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid parameters or configuration (bad schedule bounds, S_t > N, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Timestep outside the valid range of a schedule.
class IndexError : public Error {
 public:
  using Error::Error;
};

/// Requested noise level is beyond what the schedule can absorb.
class SaturationError : public Error {
 public:
  SaturationError(const std::string& what, double max_level)
      : Error(what), max_level_(max_level) {}
  double max_level() const noexcept { return max_level_; }

 private:
  double max_level_;
};

/// Array or image shapes that do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Image too small for the requested operation.
class SizeError : public Error {
 public:
  using Error::Error;
};

/// Unreadable/unwritable files and malformed file contents.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace dmid
