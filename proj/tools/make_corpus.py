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

"""Regenerate data/corpus/*.pgm from scikit-image sample images.

The bundled images are 128x128 8-bit grayscale area-averaged downsamples of
public-domain / CC0 scikit-image samples (camera, astronaut, coins, moon).
"""
import pathlib

import numpy as np
from skimage import color, data, transform

OUT = pathlib.Path(__file__).resolve().parent.parent / "data" / "corpus"


def to_gray(img):
    if img.ndim == 3:
        img = color.rgb2gray(img[..., :3]) * 255.0
    return img.astype(np.float64)


def center_square(img):
    h, w = img.shape
    s = min(h, w)
    top, left = (h - s) // 2, (w - s) // 2
    return img[top:top + s, left:left + s]


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    for name in ("camera", "astronaut", "coins", "moon"):
        img = center_square(to_gray(getattr(data, name)()))
        small = transform.resize(img, (128, 128), anti_aliasing=True, preserve_range=True)
        q = np.clip(np.rint(small), 0, 255).astype(np.uint8)
        with open(OUT / f"{name}.pgm", "wb") as f:
            f.write(b"P5\n128 128\n255\n")
            f.write(q.tobytes())


if __name__ == "__main__":
    main()
