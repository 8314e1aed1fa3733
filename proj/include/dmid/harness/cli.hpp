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

#include <string>
#include <vector>

namespace dmid::cli {

/// Process exit codes, also listed in `dmid --help`.
enum ExitCode : int {
  kOk = 0,
  kInternalError = 1,
  kUsageError = 2,       // bad flags or invalid configuration
  kIoError = 3,          // unreadable input or unwritable output
  kSaturated = 4,        // noise level beyond the schedule's range
  kOutputExists = 5,     // refusing to overwrite without --force
  kReplayMismatch = 6,   // replayed outputs differ from the manifest
};

/// Runs the command line `args` (without the program name) and returns the
/// exit code. Output goes to stdout, diagnostics to stderr.
int run(std::vector<std::string> args);

}  // namespace dmid::cli
