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

"""Diffusion-model image denoising with adaptive embedding and ensembling."""

from ._core import *  # noqa: F401,F403
from ._core import __doc__  # noqa: F401

__version__ = "0.1.0"


def denoise(image, sigma, *, denoiser="dct", sampling_steps=1, repeats=1, gamma=0.85, seed=0,
            lo=0.0, hi=255.0, threads=1):
    """Denoise an image carrying additive Gaussian noise of std `sigma` (source units)."""
    from . import _core

    latent, sigma_latent = _core.to_latent(image, sigma, lo, hi)
    schedule = _core.default_schedule()
    plan = _core.select_timestep(schedule, sigma_latent)
    steps = sampling_steps if plan.timestep > 0 else 0
    out = _core.run_ensemble(latent, sigma_latent, _core.make_denoiser(denoiser), plan.timestep,
                             steps, repeats, gamma, seed, threads, schedule)
    return _core.from_latent(out, sigma, lo, hi)
