"""Connected-component labeling of binary masks.

Two-pass raster scan with union-find. Pass one assigns provisional
labels and records equivalences against the already-visited neighbors
(W, NW, N, NE for 8-connectivity; W, N for 4). Unions always keep the
smaller root, so each component's root is the provisional label of its
first pixel in raster order; the renumbering pass therefore hands out
final labels 1..count in first-encounter order, which makes downstream
target indices reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BoundsError
from .raster import validate_mask


@dataclass(frozen=True)
class LabelMap:
    labels: np.ndarray  # int32, 0 = background
    count: int

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]


def _find(parent: list[int], x: int) -> int:
    while parent[x] != x:
        parent[x] = parent[parent[x]]
        x = parent[x]
    return x


def label_components(mask: np.ndarray, connectivity: int = 8) -> LabelMap:
    """Label connected foreground regions of a {0,1} mask."""
    if connectivity not in (4, 8):
        raise ValueError(f"connectivity must be 4 or 8, got {connectivity}")
    m = validate_mask(mask)
    h, w = m.shape
    data = m.ravel().tolist()
    prov = [0] * (h * w)
    parent = [0]
    diag = connectivity == 8
    find = _find

    for y in range(h):
        row = y * w
        north = row - w
        for x in range(w):
            i = row + x
            if not data[i]:
                continue
            a = prov[i - 1] if x else 0
            if y:
                b = prov[north + x]
                if diag:
                    c = prov[north + x - 1] if x else 0
                    d = prov[north + x + 1] if x < w - 1 else 0
                else:
                    c = d = 0
            else:
                b = c = d = 0
            lab = a or b or c or d
            if not lab:
                lab = len(parent)
                parent.append(lab)
            else:
                for other in (a, b, c, d):
                    if other and other != lab:
                        ra = find(parent, lab)
                        rb = find(parent, other)
                        if ra < rb:
                            parent[rb] = ra
                        elif rb < ra:
                            parent[ra] = rb
            prov[i] = lab

    renum = [0] * len(parent)
    count = 0
    for lab in range(1, len(parent)):
        root = find(parent, lab)
        if root == lab:
            count += 1
            renum[lab] = count

    final = np.fromiter(
        (renum[find(parent, p)] if p else 0 for p in prov),
        dtype=np.int32,
        count=h * w,
    ).reshape(h, w)
    return LabelMap(final, count)


def component_pixels(lm: LabelMap, label: int) -> list[tuple[int, int]]:
    """All (x, y) pixels carrying the given label, in raster order."""
    if not 1 <= label <= lm.count:
        raise BoundsError(f"label {label} out of range 1..{lm.count}")
    ys, xs = np.nonzero(lm.labels == label)
    return list(zip(xs.tolist(), ys.tolist()))
