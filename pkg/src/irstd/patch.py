"""Crop-and-resize of grid regions to a fixed patch size, with the
adjoint (backward scatter) so gradients flow back to full resolution.

Coordinate convention is align-corners-false: output cell i samples the
source coordinate (i + 0.5) * (src / out) - 0.5, clamped to
[0, src - 1]. Nearest rounds half up. Both directions share one
sampling plan, so <crop_resize(X), v> == <X, crop_resize_backward(v)>
up to float rounding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BoundsError
from .targets import BBox

DEFAULT_PATCH_SIZE = 48

MODES = ("nearest", "bilinear")


@dataclass(frozen=True)
class Patch:
    size: int
    data: np.ndarray
    source_bbox: BBox
    mode: str


@dataclass(frozen=True)
class ResamplePlan:
    """Precomputed gather indices and weights for one (bbox, size, mode)."""

    bbox: BBox
    size: int
    mode: str
    grid_shape: tuple[int, int]
    # absolute source indices, one pair of arrays per axis
    iy0: np.ndarray
    iy1: np.ndarray
    wy: np.ndarray
    ix0: np.ndarray
    ix1: np.ndarray
    wx: np.ndarray

    def forward(self, grid: np.ndarray) -> np.ndarray:
        if grid.shape != self.grid_shape:
            raise BoundsError(
                f"grid {grid.shape} does not match plan {self.grid_shape}")
        if self.mode == "nearest":
            return grid[np.ix_(self.iy0, self.ix0)].astype(np.float64)
        wy = self.wy[:, None]
        wx = self.wx[None, :]
        v00 = grid[np.ix_(self.iy0, self.ix0)]
        v01 = grid[np.ix_(self.iy0, self.ix1)]
        v10 = grid[np.ix_(self.iy1, self.ix0)]
        v11 = grid[np.ix_(self.iy1, self.ix1)]
        top = v00 + (v01 - v00) * wx
        bot = v10 + (v11 - v10) * wx
        return top + (bot - top) * wy

    def backward_into(self, grad_patch: np.ndarray, out: np.ndarray) -> None:
        """Accumulate the transpose of forward() into ``out``."""
        if out.shape != self.grid_shape:
            raise BoundsError(
                f"output {out.shape} does not match plan {self.grid_shape}")
        v = np.asarray(grad_patch, dtype=np.float64)
        if self.mode == "nearest":
            np.add.at(out, (self.iy0[:, None], self.ix0[None, :]), v)
            return
        wy = self.wy[:, None]
        wx = self.wx[None, :]
        iy0 = self.iy0[:, None]
        iy1 = self.iy1[:, None]
        ix0 = self.ix0[None, :]
        ix1 = self.ix1[None, :]
        np.add.at(out, (iy0, ix0), (1 - wy) * (1 - wx) * v)
        np.add.at(out, (iy0, ix1), (1 - wy) * wx * v)
        np.add.at(out, (iy1, ix0), wy * (1 - wx) * v)
        np.add.at(out, (iy1, ix1), wy * wx * v)

    def backward(self, grad_patch: np.ndarray) -> np.ndarray:
        out = np.zeros(self.grid_shape, dtype=np.float64)
        self.backward_into(grad_patch, out)
        return out


def _axis(lo: int, hi: int, out_size: int, mode: str):
    src = hi - lo + 1
    u = (np.arange(out_size, dtype=np.float64) + 0.5) * (src / out_size) - 0.5
    u = np.clip(u, 0.0, src - 1.0)
    if mode == "nearest":
        i0 = np.clip(np.floor(u + 0.5), 0, src - 1).astype(np.intp)
        return i0 + lo, i0 + lo, np.zeros(out_size)
    i0 = np.floor(u).astype(np.intp)
    w = u - i0
    i1 = np.minimum(i0 + 1, src - 1)
    return i0 + lo, i1 + lo, w


def make_plan(bbox: BBox, size: int, mode: str,
              grid_height: int, grid_width: int) -> ResamplePlan:
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    if size < 1:
        raise ValueError(f"patch size must be >= 1, got {size}")
    if not (0 <= bbox.x0 <= bbox.x1 < grid_width
            and 0 <= bbox.y0 <= bbox.y1 < grid_height):
        raise BoundsError(
            f"bbox {bbox} exceeds {grid_width}x{grid_height} grid")
    iy0, iy1, wy = _axis(bbox.y0, bbox.y1, size, mode)
    ix0, ix1, wx = _axis(bbox.x0, bbox.x1, size, mode)
    return ResamplePlan(bbox, size, mode, (grid_height, grid_width),
                        iy0, iy1, wy, ix0, ix1, wx)


def crop_resize(grid: np.ndarray, bbox: BBox, size: int = DEFAULT_PATCH_SIZE,
                mode: str = "bilinear") -> Patch:
    """Resample the bbox region of a grid to a size x size patch."""
    h, w = grid.shape
    plan = make_plan(bbox, size, mode, h, w)
    return Patch(size, plan.forward(grid), bbox, mode)


def crop_resize_backward(grad_patch: Patch, bbox: BBox, grid_width: int,
                         grid_height: int, mode: str) -> np.ndarray:
    """Transpose of crop_resize as a full-resolution gradient grid."""
    if grad_patch.mode != mode:
        raise ValueError(
            f"gradient patch mode {grad_patch.mode!r} != {mode!r}")
    plan = make_plan(bbox, grad_patch.size, mode, grid_height, grid_width)
    return plan.backward(grad_patch.data)
