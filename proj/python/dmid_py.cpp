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

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "dmid/denoisers.hpp"
#include "dmid/ensemble.hpp"
#include "dmid/error.hpp"
#include "dmid/iterative.hpp"
#include "dmid/metrics.hpp"
#include "dmid/sampler.hpp"
#include "dmid/schedule.hpp"
#include "dmid/transform.hpp"

namespace py = pybind11;
using namespace dmid;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

// 1-D arrays are a single row, 2-D are (H, W), 3-D are (C, H, W).
Shape shape_of(const Array& a) {
  switch (a.ndim()) {
    case 1: return {1, 1, static_cast<std::size_t>(a.shape(0))};
    case 2: return {1, static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1))};
    case 3:
      return {static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)),
              static_cast<std::size_t>(a.shape(2))};
    default: throw ShapeError("expected a 1-, 2- or 3-dimensional array");
  }
}

std::span<const double> view(const Array& a) { return {a.data(), static_cast<std::size_t>(a.size())}; }

Array like(const Array& a, const std::vector<double>& data) {
  std::vector<py::ssize_t> dims(a.shape(), a.shape() + a.ndim());
  Array out(dims);
  std::copy(data.begin(), data.end(), out.mutable_data());
  return out;
}

struct PyDenoiser {
  std::shared_ptr<const Denoiser> impl;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Diffusion-model image denoising core";

  auto error = py::register_exception<Error>(m, "Error");
  py::register_exception<ConfigError>(m, "ConfigError", error.ptr());
  py::register_exception<IndexError>(m, "TimestepError", error.ptr());
  py::register_exception<SaturationError>(m, "SaturationError", error.ptr());
  py::register_exception<ShapeError>(m, "ShapeError", error.ptr());
  py::register_exception<SizeError>(m, "SizeError", error.ptr());
  py::register_exception<IoError>(m, "IoError", error.ptr());

  py::class_<NoiseSchedule>(m, "NoiseSchedule")
      .def_property_readonly("steps", &NoiseSchedule::steps)
      .def("beta", &NoiseSchedule::beta)
      .def("alpha_bar", &NoiseSchedule::alpha_bar)
      .def("denoise_level", &NoiseSchedule::denoise_level)
      .def_property_readonly("alpha_bars", [](const NoiseSchedule& s) {
        return py::array_t<double>(s.alpha_bars().size(), s.alpha_bars().data());
      })
      .def_property_readonly("denoise_levels", [](const NoiseSchedule& s) {
        return py::array_t<double>(s.denoise_levels().size(), s.denoise_levels().data());
      });

  m.def("build_linear_schedule", &build_linear_schedule, py::arg("steps") = 1000,
        py::arg("beta_start") = 1e-4, py::arg("beta_end") = 0.02);
  m.def("default_schedule", &default_schedule, py::return_value_policy::reference);
  m.def("sigma_t", py::overload_cast<const NoiseSchedule&, int, int, double>(&sigma_t), py::arg("schedule"),
        py::arg("t"), py::arg("t_prev"), py::arg("gamma"));

  py::class_<EmbeddingPlan>(m, "EmbeddingPlan")
      .def_readonly("timestep", &EmbeddingPlan::timestep)
      .def_readonly("scale", &EmbeddingPlan::scale)
      .def_readonly("matched_sigma", &EmbeddingPlan::matched_sigma)
      .def("__repr__", [](const EmbeddingPlan& p) {
        return "EmbeddingPlan(timestep=" + std::to_string(p.timestep) + ", scale=" + std::to_string(p.scale) +
               ", matched_sigma=" + std::to_string(p.matched_sigma) + ")";
      });
  m.def(
      "select_timestep",
      [](const NoiseSchedule& s, double sigma, const std::string& rounding) {
        if (rounding != "nearest" && rounding != "up") throw ConfigError("rounding must be 'nearest' or 'up'");
        return select_timestep(s, sigma, rounding == "up" ? TimestepRounding::kUp : TimestepRounding::kNearest);
      },
      py::arg("schedule"), py::arg("sigma_latent"), py::arg("rounding") = "nearest");
  m.def("make_subsequence", &make_subsequence, py::arg("timestep"), py::arg("sampling_steps"));

  m.def("anscombe_forward", py::vectorize(&anscombe_forward), py::arg("z"), py::arg("gain"), py::arg("sigma"));
  m.def("anscombe_inverse", py::vectorize(&anscombe_inverse), py::arg("d"), py::arg("gain"), py::arg("sigma"));
  m.def(
      "estimate_sigma",
      [](const Array& image, double lo, double hi) {
        return estimate_sigma(PixelImage(shape_of(image), {view(image).begin(), view(image).end()}, {lo, hi}));
      },
      py::arg("image"), py::arg("lo") = 0.0, py::arg("hi") = 255.0);
  m.def(
      "to_latent",
      [](const Array& image, double sigma, double lo, double hi, const std::string& noise, double gain) {
        NoiseModel model{parse_noise_kind(noise), sigma, gain};
        const auto z = to_latent(PixelImage(shape_of(image), {view(image).begin(), view(image).end()}, {lo, hi}),
                                 model);
        return py::make_tuple(like(image, z.data), z.sigma_latent);
      },
      py::arg("image"), py::arg("sigma"), py::arg("lo") = 0.0, py::arg("hi") = 255.0,
      py::arg("noise") = "gaussian", py::arg("gain") = 1.0,
      "Returns (latent, sigma_latent).");
  m.def(
      "from_latent",
      [](const Array& latent, double sigma, double lo, double hi, const std::string& noise, double gain) {
        NoiseModel model{parse_noise_kind(noise), sigma, gain};
        LatentImage z{shape_of(latent), {view(latent).begin(), view(latent).end()}, 0.0};
        return like(latent, from_latent(z, model, {lo, hi}).data);
      },
      py::arg("latent"), py::arg("sigma"), py::arg("lo") = 0.0, py::arg("hi") = 255.0,
      py::arg("noise") = "gaussian", py::arg("gain") = 1.0);

  py::class_<PyDenoiser>(m, "Denoiser")
      .def_property_readonly("name", [](const PyDenoiser& d) { return d.impl->name(); })
      .def(
          "predict_eps",
          [](const PyDenoiser& d, const Array& x, int t, const NoiseSchedule& s) {
            return like(x, d.impl->predict_eps(view(x), shape_of(x), t, s));
          },
          py::arg("x_t"), py::arg("t"), py::arg("schedule"));
  m.def(
      "make_denoiser", [](const std::string& spec) { return PyDenoiser{make_denoiser(spec)}; }, py::arg("spec"),
      "gaussian:<mu>,<s> | gmm:<file> | dct[:<patch>,<stride>,<k>] | zero");
  m.def(
      "gaussian_posterior_mean",
      [](const Array& y, double sigma, double mean, double std) {
        return like(y, gaussian_posterior_mean(view(y), sigma, GaussianPrior{{mean}, std}));
      },
      py::arg("y"), py::arg("sigma"), py::arg("mean"), py::arg("std"));
  m.def(
      "dct_denoise",
      [](const Array& x, double sigma, std::size_t patch, std::size_t stride, double k) {
        return like(x, dct_denoise(view(x), shape_of(x), sigma, {patch, stride, k}));
      },
      py::arg("x"), py::arg("sigma"), py::arg("patch_size") = 8, py::arg("stride") = 4,
      py::arg("threshold_multiplier") = 3.0);

  m.def(
      "run_ensemble",
      [](const Array& y, double sigma_latent, const PyDenoiser& d, int timestep, int sampling_steps, int repeats,
         double gamma, std::uint64_t seed, unsigned threads, const NoiseSchedule& s) {
        const LatentImage in{shape_of(y), {view(y).begin(), view(y).end()}, sigma_latent};
        std::vector<double> out;
        {
          py::gil_scoped_release release;
          out = run_ensemble(in, {{timestep, sampling_steps, gamma, seed}, repeats, {}}, s, *d.impl, threads).data;
        }
        return like(y, out);
      },
      py::arg("y"), py::arg("sigma_latent"), py::arg("denoiser"), py::arg("timestep"),
      py::arg("sampling_steps") = 1, py::arg("repeats") = 1, py::arg("gamma") = 0.85, py::arg("seed") = 0,
      py::arg("threads") = 1, py::arg("schedule") = default_schedule());
  m.def(
      "accumulation_check",
      [](const Array& y, const PyDenoiser& d, int timestep, int sampling_steps, double gamma, std::uint64_t seed,
         const NoiseSchedule& s) {
        const LatentImage in{shape_of(y), {view(y).begin(), view(y).end()}, 0.0};
        const auto r = accumulation_check(in, {timestep, sampling_steps, gamma, seed}, s, *d.impl);
        return py::make_tuple(r.residual, r.two_sum_residual);
      },
      py::arg("y"), py::arg("denoiser"), py::arg("timestep"), py::arg("sampling_steps"), py::arg("gamma") = 0.85,
      py::arg("seed") = 0, py::arg("schedule") = default_schedule(),
      "Returns (residual, two_sum_residual).");
  m.def(
      "run_iterative",
      [](const Array& y, const std::vector<double>& gammas, const std::string& denoiser, double sigma0) {
        const LatentImage in{shape_of(y), {view(y).begin(), view(y).end()}, sigma0};
        return like(y, run_iterative(in, {gammas}, make_image_denoiser(denoiser), sigma0).data);
      },
      py::arg("y"), py::arg("gammas"), py::arg("denoiser"), py::arg("sigma0"));

  m.def(
      "psnr",
      [](const Array& a, const Array& b, double peak) {
        const auto r = psnr(view(a), view(b), peak);
        return py::make_tuple(r.mse, r.psnr);
      },
      py::arg("a"), py::arg("b"), py::arg("peak") = 255.0, "Returns (mse, psnr); psnr is inf for identical inputs.");
}
