# Copyright 2026 The dmid Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

import math

import numpy as np
import pytest

import dmid


def test_schedule():
    s = dmid.default_schedule()
    assert s.steps == 1000
    assert s.alpha_bar(1) == pytest.approx(0.9999)
    assert np.all(np.diff(s.denoise_levels) > 0)
    assert dmid.select_timestep(s, 0.0).timestep == 0
    assert dmid.select_timestep(s, s.denoise_level(700)).timestep == 700
    with pytest.raises(dmid.SaturationError):
        dmid.select_timestep(s, 1e6)


def test_subsequence():
    assert dmid.make_subsequence(500, 5) == [500, 400, 300, 200, 100]
    with pytest.raises(dmid.ConfigError):
        dmid.make_subsequence(10, 11)


def test_single_step_is_posterior_mean():
    rng = np.random.default_rng(0)
    s = dmid.default_schedule()
    n = dmid.select_timestep(s, 0.4).timestep
    sigma = s.denoise_level(n)
    y = 0.5 * rng.standard_normal(256) + sigma * rng.standard_normal(256)
    den = dmid.make_denoiser("gaussian:0,0.5")
    out = dmid.run_ensemble(y, sigma, den, n, sampling_steps=1, repeats=4, seed=3)
    mmse = dmid.gaussian_posterior_mean(y, sigma, 0.0, 0.5)
    np.testing.assert_allclose(out, mmse, atol=1e-9)
    residual, _ = dmid.accumulation_check(y, den, n, 10)
    assert residual < 1e-6


def test_latent_round_trip_and_denoise():
    rng = np.random.default_rng(1)
    yy, xx = np.mgrid[0:64, 0:64]
    clean = 127.5 + 80 * np.sin(xx / 9.0) * np.cos(yy / 13.0)
    latent, sigma_latent = dmid.to_latent(clean, 25.0)
    assert latent.shape == clean.shape
    assert sigma_latent == pytest.approx(50 / 255)
    np.testing.assert_allclose(dmid.from_latent(latent, 25.0), clean, atol=1e-9)

    noisy = clean + 25 * rng.standard_normal(clean.shape)
    restored = dmid.denoise(noisy, 25.0, sampling_steps=3, repeats=4, seed=1)
    _, p_noisy = dmid.psnr(noisy, clean)
    _, p_restored = dmid.psnr(restored, clean)
    assert p_restored > p_noisy + 3
    assert math.isinf(dmid.psnr(clean, clean)[1])


def test_vst_and_estimator():
    z = np.linspace(0, 255, 50)
    back = dmid.anscombe_inverse(dmid.anscombe_forward(z, 1.0, 1.0), 1.0, 1.0)
    assert np.max(np.abs(back - z)) < 0.5
    flat = np.full((32, 32), 80.0)
    assert dmid.estimate_sigma(flat) < 0.5
    with pytest.raises(dmid.SizeError):
        dmid.estimate_sigma(np.zeros((8, 8)))
