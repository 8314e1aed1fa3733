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
#include <filesystem>
#include <fstream>
#include <random>

#include "dmid/denoisers.hpp"
#include "dmid/error.hpp"
#include "dmid/schedule.hpp"
#include "oracles.hpp"

using namespace dmid;

namespace {

std::vector<double> random_vector(std::size_t n, double scale, std::uint64_t seed) {
  std::mt19937_64 engine(seed);
  std::normal_distribution<double> normal(0.0, scale);
  std::vector<double> v(n);
  for (double& x : v) x = normal(engine);
  return v;
}

}  // namespace

TEST_CASE("gaussian posterior eps matches the closed form") {
  const auto& s = default_schedule();
  const GaussianPrior prior{{0.2}, 0.4};
  const auto x = random_vector(64, 1.0, 1);
  for (int t : {1, 40, 115, 500, 999}) {
    const double a = std::sqrt(s.alpha_bar(t)), b = std::sqrt(1 - s.alpha_bar(t));
    const auto eps = gaussian_posterior_eps(x, t, prior, s);
    for (std::size_t i = 0; i < x.size(); ++i) {
      REQUIRE(eps[i] == doctest::Approx(oracle::gaussian_eps(x[i], a, b, 0.2, 0.4)).epsilon(1e-12));
    }
  }
}

TEST_CASE("gaussian posterior eps is the conditional mean of the true noise") {
  // Monte Carlo: regress true eps on x_t inside a narrow bin.
  const auto& s = default_schedule();
  const int t = 200;
  const double a = std::sqrt(s.alpha_bar(t)), b = std::sqrt(1 - s.alpha_bar(t));
  const GaussianPrior prior{{0.0}, 0.5};
  std::mt19937_64 engine(3);
  std::normal_distribution<double> normal;
  const double centre = 0.4, half = 0.01;
  std::vector<double> eps_in_bin;
  std::vector<double> x_in_bin;
  for (int i = 0; i < 4'000'000; ++i) {
    const double x0 = 0.5 * normal(engine);
    const double e = normal(engine);
    const double xt = a * x0 + b * e;
    if (std::abs(xt - centre) < half) {
      eps_in_bin.push_back(e);
      x_in_bin.push_back(xt);
    }
  }
  const double predicted = gaussian_posterior_eps(std::vector{oracle::mean(x_in_bin)}, t, prior, s)[0];
  const double se = std::sqrt(oracle::variance(eps_in_bin) / eps_in_bin.size());
  CHECK(std::abs(oracle::mean(eps_in_bin) - predicted) < 4 * se);
}

TEST_CASE("flat prior passes the data through") {
  const auto& s = default_schedule();
  const auto x = random_vector(16, 1.0, 2);
  const auto eps = gaussian_posterior_eps(x, 300, GaussianPrior{{0.0}, 1e9}, s);
  for (double e : eps) CHECK(std::abs(e) < 1e-6);
}

TEST_CASE("per-element prior means") {
  const auto& s = default_schedule();
  GaussianPrior prior{{0.1, -0.2, 0.3}, 0.5};
  const std::vector<double> x{0.0, 0.5, -0.5};
  const auto eps = gaussian_posterior_eps(x, 50, prior, s);
  const double a = std::sqrt(s.alpha_bar(50)), b = std::sqrt(1 - s.alpha_bar(50));
  for (int i = 0; i < 3; ++i) CHECK(eps[i] == doctest::Approx(oracle::gaussian_eps(x[i], a, b, prior.mean[i], 0.5)));
  CHECK_THROWS_AS(gaussian_posterior_eps(std::vector<double>(4, 0.0), 50, prior, s), ShapeError);
  CHECK_THROWS_AS(gaussian_posterior_eps(x, 0, prior, s), IndexError);
  CHECK_THROWS_AS(gaussian_posterior_eps(x, 50, GaussianPrior{{0.0}, 0.0}, s), ConfigError);
}

TEST_CASE("mixture posterior matches quadrature") {
  const auto& s = default_schedule();
  const GaussianMixturePrior prior{{{0.3, -0.6, 0.2}, {0.5, 0.1, 0.3}, {0.2, 0.7, 0.1}}};
  const std::vector<oracle::Component> ref{{0.3, -0.6, 0.2}, {0.5, 0.1, 0.3}, {0.2, 0.7, 0.1}};
  const auto x = random_vector(24, 0.8, 4);
  for (int t : {5, 115, 600}) {
    const double a = std::sqrt(s.alpha_bar(t)), b = std::sqrt(1 - s.alpha_bar(t));
    const auto eps = gmm_posterior_eps(x, t, prior, s);
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double x0 = oracle::mixture_posterior_mean(x[i], a, b, ref);
      REQUIRE(eps[i] == doctest::Approx((x[i] - a * x0) / b).epsilon(1e-8));
    }
  }
}

TEST_CASE("mixture symmetry and responsibilities") {
  const auto& s = default_schedule();
  const GaussianMixturePrior sym{{{0.5, -0.5, 0.2}, {0.5, 0.5, 0.2}}};
  const auto eps = gmm_posterior_eps(std::vector{0.0}, 100, sym, s);
  CHECK(std::abs(eps[0]) < 1e-12);
  const auto r = gmm_responsibilities(0.0, 100, sym, s);
  CHECK(r[0] == doctest::Approx(0.5));
  // Far into a tail the weights stay finite and normalized.
  const auto far = gmm_responsibilities(1e3, 3, sym, s);
  CHECK(far[0] + far[1] == doctest::Approx(1.0));
  CHECK(far[1] == doctest::Approx(1.0));
}

TEST_CASE("single-component mixture equals the gaussian prior") {
  const auto& s = default_schedule();
  const auto x = random_vector(32, 1.0, 5);
  const auto g = gaussian_posterior_eps(x, 250, GaussianPrior{{0.1}, 0.3}, s);
  const auto m = gmm_posterior_eps(x, 250, GaussianMixturePrior{{{1.0, 0.1, 0.3}}}, s);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(m[i] == doctest::Approx(g[i]).epsilon(1e-12));
}

TEST_CASE("mixture validation and loading") {
  CHECK_THROWS_AS(GaussianMixturePrior({{{0.5, 0, 1}, {0.4, 1, 1}}}).validate(), ConfigError);
  CHECK_THROWS_AS(GaussianMixturePrior({{{1.0, 0, -1}}}).validate(), ConfigError);
  CHECK_THROWS_AS(GaussianMixturePrior{}.validate(), ConfigError);

  const auto dir = oracle::scratch_dir("gmm");
  const auto path = (dir / "prior.txt").string();
  std::ofstream(path) << "# weight mean std\n0.25 -0.5 0.2\n0.75 0.3 0.1  # second\n";
  const auto prior = GaussianMixturePrior::load(path);
  REQUIRE(prior.components.size() == 2);
  CHECK(prior.components[1].weight == 0.75);
  CHECK(prior.components[1].std == 0.1);
  CHECK_THROWS_AS(GaussianMixturePrior::load((dir / "missing.txt").string()), IoError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("eps and x0 conversions are inverse") {
  const auto& s = default_schedule();
  const auto x = random_vector(50, 1.0, 6);
  const auto eps = random_vector(50, 1.0, 7);
  for (int t : {1, 2, 300, 1000}) {
    const auto back = x0_to_eps(x, eps_to_x0(x, eps, t, s), t, s);
    for (std::size_t i = 0; i < x.size(); ++i) REQUIRE(std::abs(back[i] - eps[i]) < 1e-10);
  }
}

TEST_CASE("patch DCT") {
  const Shape shape{1, 20, 27};
  const auto x = random_vector(shape.size(), 1.0, 8);
  SUBCASE("zero threshold is the identity") {
    const auto out = dct_denoise(x, shape, 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) REQUIRE(std::abs(out[i] - x[i]) < 1e-5);
  }
  SUBCASE("constants survive any threshold") {
    const std::vector<double> c(shape.size(), 0.37);
    for (double v : dct_denoise(c, shape, 5.0)) REQUIRE(v == doctest::Approx(0.37).epsilon(1e-12));
  }
  SUBCASE("removes noise from a smooth image") {
    Shape big{1, 64, 64};
    std::vector<double> clean(big.size()), noisy(big.size());
    std::mt19937_64 engine(9);
    std::normal_distribution<double> normal(0.0, 0.2);
    for (std::size_t y = 0; y < 64; ++y) {
      for (std::size_t xx = 0; xx < 64; ++xx) {
        const std::size_t i = y * 64 + xx;
        clean[i] = std::sin(0.1 * y) * std::cos(0.07 * xx);
        noisy[i] = clean[i] + normal(engine);
      }
    }
    const auto out = dct_denoise(noisy, big, 0.2);
    double before = 0, after = 0;
    for (std::size_t i = 0; i < clean.size(); ++i) {
      before += (noisy[i] - clean[i]) * (noisy[i] - clean[i]);
      after += (out[i] - clean[i]) * (out[i] - clean[i]);
    }
    CHECK(after < 0.25 * before);
  }
  SUBCASE("channels are independent") {
    Shape rgb{3, 16, 16};
    auto data = random_vector(rgb.size(), 1.0, 10);
    const auto joint = dct_denoise(data, rgb, 0.5);
    const std::span<const double> green(data.data() + 256, 256);
    const auto alone = dct_denoise(green, {1, 16, 16}, 0.5);
    for (std::size_t i = 0; i < 256; ++i) REQUIRE(joint[256 + i] == alone[i]);
  }
  CHECK_THROWS_AS(dct_denoise(std::vector<double>(16, 0.0), {1, 4, 4}, 1.0), SizeError);
  CHECK_THROWS_AS(dct_denoise(x, shape, 1.0, {8, 0, 3.0}), ConfigError);
  CHECK_THROWS_AS(dct_denoise(x, {1, 20, 20}, 1.0), ShapeError);
}

TEST_CASE("x0 adapter around an identity denoiser") {
  const auto& s = default_schedule();
  const auto identity = wrap_x0_denoiser(
      [](std::span<const double> v, const Shape&, double) { return std::vector<double>(v.begin(), v.end()); });
  const auto x = random_vector(8, 1.0, 11);
  const int t = 321;
  const auto eps = identity->predict_eps(x, {1, 1, 8}, t, s);
  const auto x0 = eps_to_x0(x, eps, t, s);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(x0[i] == doctest::Approx(x[i] / std::sqrt(s.alpha_bar(t))));
}

TEST_CASE("x0 adapter passes the matching noise level") {
  const auto& s = default_schedule();
  double seen = -1;
  const auto probe = wrap_x0_denoiser([&](std::span<const double> v, const Shape&, double level) {
    seen = level;
    return std::vector<double>(v.size(), 0.0);
  });
  probe->predict_eps(std::vector<double>(4, 0.1), {1, 2, 2}, 77, s);
  CHECK(seen == s.denoise_level(77));
}

TEST_CASE("denoiser factory") {
  CHECK(make_denoiser("gaussian:0,0.5")->name().starts_with("gaussian"));
  CHECK(make_denoiser("dct")->name().starts_with("dct"));
  CHECK(make_denoiser("dct:8,2,2.7")->name().starts_with("dct"));
  CHECK(make_denoiser("zero")->name() == "zero");
  CHECK_THROWS_AS(make_denoiser("unet"), ConfigError);
  CHECK_THROWS_AS(make_denoiser("gaussian:0"), ConfigError);
  CHECK_THROWS_AS(make_denoiser("gaussian:0,-1"), ConfigError);
  CHECK_THROWS_AS(make_image_denoiser("bm3d"), ConfigError);

  const auto zero = make_denoiser("zero");
  const auto eps = zero->predict_eps(std::vector<double>(5, 1.0), {1, 1, 5}, 10, default_schedule());
  for (double e : eps) CHECK(e == 0.0);
}
