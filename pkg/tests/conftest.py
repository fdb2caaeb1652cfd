import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from irstd.raster import save_gray, save_mask
from irstd.synth import DiskTarget, SceneSpec, generate_scene


def random_mask(rng, shape=(32, 32), density=0.4) -> np.ndarray:
    return (rng.random(shape) < density).astype(np.uint8)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def make_scene(n_targets=3, size=64, seed=0, noise=4.0):
    """A small scene with well-separated disks of mixed scale/contrast."""
    placements = [(0.22, 0.19, 2.0, 60.0), (0.69, 0.47, 4.0, 25.0),
                  (0.31, 0.75, 3.0, 40.0), (0.78, 0.81, 2.5, 80.0)]
    spec = SceneSpec(width=size, height=size, background_level=90.0,
                     noise_sigma=noise,
                     targets=tuple(DiskTarget(round(fx * size),
                                              round(fy * size), r, a)
                                   for fx, fy, r, a in
                                   placements[:n_targets]))
    return generate_scene(spec, seed)


def write_scene_files(tmp_path, name, image, mask):
    image_path = tmp_path / f"{name}.pgm"
    mask_path = tmp_path / f"{name}_mask.pgm"
    save_gray(image_path, image)
    save_mask(mask_path, mask)
    return image_path, mask_path
