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

#include "dmid/error.hpp"
#include "dmid/harness/image_io.hpp"
#include "dmid/harness/manifest.hpp"
#include "dmid/harness/synthetic.hpp"
#include "oracles.hpp"

using namespace dmid;
namespace fs = std::filesystem;

TEST_CASE("image formats round trip") {
  const auto dir = oracle::scratch_dir("io");
  PixelImage img({1, 5, 7}, {0, 255});
  for (std::size_t i = 0; i < img.data.size(); ++i) img.data[i] = static_cast<double>((i * 37) % 256);

  SUBCASE("pgm 8-bit") {
    const auto p = (dir / "a.pgm").string();
    io::save_pgm(p, img);
    const auto back = io::load_pgm(p);
    CHECK(back.shape == img.shape);
    CHECK(back.range == img.range);
    CHECK(back.data == img.data);
    CHECK(fs::file_size(p) == std::string("P5\n7 5\n255\n").size() + 35);
  }
  SUBCASE("pgm rounds and clamps") {
    PixelImage odd = img;
    odd.data[0] = -4.2;
    odd.data[1] = 300.0;
    odd.data[2] = 10.6;
    const auto p = (dir / "b.pgm").string();
    io::save_pgm(p, odd);
    const auto back = io::load_pgm(p);
    CHECK(back.data[0] == 0.0);
    CHECK(back.data[1] == 255.0);
    CHECK(back.data[2] == 11.0);
  }
  SUBCASE("pgm 16-bit") {
    PixelImage wide({1, 3, 3}, {0, 65535});
    for (std::size_t i = 0; i < 9; ++i) wide.data[i] = 7000.0 * i;
    const auto p = (dir / "c.pgm").string();
    io::save_pgm(p, wide);
    CHECK(io::load_pgm(p).data == wide.data);
  }
  SUBCASE("pgm with comments") {
    const auto p = (dir / "d.pgm").string();
    std::ofstream(p, std::ios::binary) << "P5\n# made by hand\n2 1\n# depth\n255\n" << char(3) << char(250);
    const auto back = io::load_pgm(p);
    CHECK(back.data == std::vector<double>{3.0, 250.0});
  }
  SUBCASE("raw is lossless") {
    PixelImage f({2, 3, 4}, {-1.0, 1.0});
    for (std::size_t i = 0; i < f.data.size(); ++i) f.data[i] = std::sin(0.3 * i) * 1.7;
    const auto p = (dir / "e.raw").string();
    io::save_raw(p, f);
    const auto back = io::load_raw(p);
    CHECK(back.shape == f.shape);
    CHECK(back.range == f.range);
    CHECK(back.data == f.data);
  }
  SUBCASE("png gray and rgb") {
    const auto p = (dir / "f.png").string();
    io::save_png(p, img);
    CHECK(io::load_png(p).data == img.data);
    PixelImage rgb({3, 4, 4}, {0, 255});
    for (std::size_t i = 0; i < rgb.data.size(); ++i) rgb.data[i] = static_cast<double>(i * 5);
    io::save_image((dir / "g.png").string(), rgb);
    const auto back = io::load_image((dir / "g.png").string());
    CHECK(back.shape == rgb.shape);
    CHECK(back.data == rgb.data);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(io::load_pgm((dir / "missing.pgm").string()), IoError);
    const auto p = (dir / "bad.pgm").string();
    std::ofstream(p) << "P2\n1 1\n255\n0\n";
    CHECK_THROWS_AS(io::load_pgm(p), IoError);
    const auto t = (dir / "trunc.pgm").string();
    std::ofstream(t, std::ios::binary) << "P5\n4 4\n255\nabc";
    CHECK_THROWS_AS(io::load_pgm(t), IoError);
    CHECK_THROWS_AS(io::format_for("x.tiff"), IoError);
    CHECK_THROWS_AS(io::save_pgm((dir / "nodir" / "x.pgm").string(), img), IoError);
    CHECK_FALSE(fs::exists(dir / "nodir"));
  }
  fs::remove_all(dir);
}

TEST_CASE("center crop") {
  PixelImage img({1, 6, 8}, {0, 255});
  for (std::size_t i = 0; i < img.data.size(); ++i) img.data[i] = static_cast<double>(i);
  const auto c = center_crop(img, 4);
  CHECK(c.shape == Shape{1, 4, 4});
  CHECK(c.at(0, 0, 0) == img.at(0, 1, 2));
  CHECK_THROWS_AS(center_crop(img, 7), SizeError);
}

TEST_CASE("sha256") {
  CHECK(harness::sha256_hex(std::string("abc")) ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(harness::sha256_hex(std::string()) ==
        "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("manifests append and tolerate a torn tail") {
  const auto dir = oracle::scratch_dir("manifest");
  const auto p = (dir / "m.jsonl").string();
  CHECK(harness::read_manifest(p).empty());
  harness::append_manifest(p, {{"a", 1}});
  harness::append_manifest(p, {{"a", 2}});
  std::ofstream(p, std::ios::app) << "{\"a\": 3";
  const auto records = harness::read_manifest(p);
  REQUIRE(records.size() == 2);
  CHECK(records[1]["a"] == 2);
  CHECK(harness::manifest_path_for("out/x.pgm") == "out/x.pgm.manifest.jsonl");
  fs::remove_all(dir);
}

TEST_CASE("synthetic generators") {
  const PixelImage clean = io::load_pgm(std::string(DMID_CORPUS_DIR) + "/camera.pgm");
  CHECK(clean.shape == Shape{1, 128, 128});
  const PixelImage noisy = harness::add_awgn(clean, 50, 3);
  std::vector<double> diff(clean.data.size());
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = noisy.data[i] - clean.data[i];
  CHECK(std::sqrt(oracle::variance(diff)) == doctest::Approx(50).epsilon(0.02));
  CHECK(harness::add_awgn(clean, 50, 3).data == noisy.data);
  CHECK(harness::add_awgn(clean, 0, 3).data == clean.data);

  const auto g = harness::sample_prior(GaussianPrior{{0.5}, 0.2}, 100'000, 1);
  CHECK(oracle::mean(g) == doctest::Approx(0.5).epsilon(0.01));
  CHECK(std::sqrt(oracle::variance(g)) == doctest::Approx(0.2).epsilon(0.01));

  const auto m = harness::sample_prior(GaussianMixturePrior{{{0.5, -1, 0.01}, {0.5, 1, 0.01}}}, 10'000, 2);
  std::size_t negative = 0;
  for (double v : m) negative += v < 0;
  CHECK(negative == doctest::Approx(5000).epsilon(0.05));

  const auto task = harness::make_oracle_task(4096, 0.0, 0.5, 100.0 / 255, 4, default_schedule());
  CHECK(task.timestep == select_timestep(default_schedule(), 100.0 / 255).timestep);
  std::vector<double> residual(4096);
  for (std::size_t i = 0; i < 4096; ++i) residual[i] = task.noisy[i] - task.clean[i];
  CHECK(std::sqrt(oracle::variance(residual)) == doctest::Approx(task.sigma_latent).epsilon(0.05));
}
