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

#include <doctest.h>

#include <cmath>

#include "dmid/error.hpp"
#include "dmid/schedule.hpp"
#include "oracles.hpp"

using namespace dmid;

TEST_CASE("linear schedule endpoints") {
  const NoiseSchedule s = build_linear_schedule(1000, 1e-4, 0.02);
  CHECK(s.steps() == 1000);
  CHECK(s.alpha_bar(0) == 1.0);
  CHECK(s.alpha_bar(1) == 0.9999);
  CHECK(s.beta(1) == 1e-4);
  CHECK(s.beta(1000) == doctest::Approx(0.02).epsilon(1e-15));
  CHECK(s.denoise_level(0) == 0.0);

  const NoiseSchedule two = build_linear_schedule(2, 0.5, 0.5);
  CHECK(two.alpha_bar(2) == 0.25);
}

TEST_CASE("alpha_bar and d match the extended-precision product") {
  const NoiseSchedule s = build_linear_schedule(1000, 1e-4, 0.02);
  const auto ab = oracle::alpha_bars(1000, 1e-4, 0.02);
  double worst_ab = 0, worst_d = 0;
  for (int t = 0; t <= 1000; ++t) {
    const double ref_ab = static_cast<double>(ab[t]);
    worst_ab = std::max(worst_ab, std::abs(s.alpha_bar(t) - ref_ab) / ref_ab);
    if (t > 0) {
      const double ref_d = static_cast<double>(oracle::level(ab[t]));
      worst_d = std::max(worst_d, std::abs(s.denoise_level(t) - ref_d) / ref_d);
    }
  }
  CHECK(worst_ab < 1e-12);
  CHECK(worst_d < 1e-12);
}

TEST_CASE("d is strictly increasing") {
  const auto& s = default_schedule();
  for (int t = 1; t <= s.steps(); ++t) CHECK(s.denoise_level(t) > s.denoise_level(t - 1));
}

TEST_CASE("invalid schedules are rejected") {
  CHECK_THROWS_AS(build_linear_schedule(0, 1e-4, 0.02), ConfigError);
  CHECK_THROWS_AS(build_linear_schedule(10, 0.0, 0.02), ConfigError);
  CHECK_THROWS_AS(build_linear_schedule(10, 1e-4, 1.0), ConfigError);
  CHECK_THROWS_AS(build_linear_schedule(10, 0.02, 1e-4), ConfigError);
}

TEST_CASE("sigma_t") {
  const auto& s = default_schedule();
  CHECK(sigma_t(s, 500, 0.0) == 0.0);
  // alpha_bar(0) = 1 zeroes the first factor: the last hop adds no noise.
  CHECK(sigma_t(s, 1, 1.0) == 0.0);
  CHECK(sigma_t(s, 2, 1.0) > 0.0);

  const auto ab = oracle::alpha_bars(1000, 1e-4, 0.02);
  const double ref = static_cast<double>(oracle::sigma(ab, 500, 499, 0.85));
  CHECK(std::abs(sigma_t(s, 500, 0.85) - ref) / ref < 1e-12);
  const double hop = static_cast<double>(oracle::sigma(ab, 500, 300, 1.0));
  CHECK(std::abs(sigma_t(s, 500, 300, 1.0) - hop) / hop < 1e-12);

  CHECK_THROWS_AS(sigma_t(s, 0, 0.5), IndexError);
  CHECK_THROWS_AS(sigma_t(s, 1001, 0.5), IndexError);
  CHECK_THROWS_AS(sigma_t(s, 10, 10, 0.5), IndexError);
  CHECK_THROWS_AS(sigma_t(s, 10, 1.5), ConfigError);
}

TEST_CASE("select_timestep") {
  const auto& s = default_schedule();
  SUBCASE("zero noise") {
    const EmbeddingPlan p = select_timestep(s, 0.0);
    CHECK(p.timestep == 0);
    CHECK(p.scale == 1.0);
  }
  SUBCASE("exact table hit") { CHECK(select_timestep(s, s.denoise_level(700)).timestep == 700); }
  SUBCASE("8-bit sigma 50 matches a linear scan") {
    const std::vector<double> d(s.denoise_levels().begin(), s.denoise_levels().end());
    const double sigma = 2.0 * 50 / 255;
    const EmbeddingPlan p = select_timestep(s, sigma);
    CHECK(p.timestep == oracle::nearest_timestep(d, sigma));
    CHECK(p.scale == doctest::Approx(std::sqrt(s.alpha_bar(p.timestep))));
    CHECK(p.matched_sigma == s.denoise_level(p.timestep));
  }
  SUBCASE("round trip every t") {
    for (int t = 0; t < s.steps(); ++t) {
      REQUIRE(select_timestep(s, s.denoise_level(t)).timestep == t);
      REQUIRE(select_timestep(s, s.denoise_level(t), TimestepRounding::kUp).timestep == t);
    }
  }
  SUBCASE("rounding up never undershoots") {
    for (double sigma : {0.01, 0.2, 0.39, 1.7, 30.0}) {
      const int t = select_timestep(s, sigma, TimestepRounding::kUp).timestep;
      CHECK(s.denoise_level(t) >= sigma);
      CHECK(s.denoise_level(t - 1) < sigma);
    }
  }
  SUBCASE("saturation") {
    const double max_level = s.denoise_level(s.steps() - 1);
    CHECK_NOTHROW(select_timestep(s, max_level));
    try {
      select_timestep(s, max_level * 1.01);
      FAIL("expected SaturationError");
    } catch (const SaturationError& e) {
      CHECK(e.max_level() == max_level);
    }
    CHECK_THROWS_AS(select_timestep(s, -0.1), ConfigError);
  }
}
