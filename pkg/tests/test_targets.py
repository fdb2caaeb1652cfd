import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from irstd.ccl import label_components
from irstd.errors import DegenerateRegionError, EmptyTrainingSetError
from irstd.raster import load_manifest, save_gray, save_mask
from irstd.targets import (
    BBox,
    DatasetStats,
    dataset_stats,
    dilate_bbox,
    extract_targets,
    load_stats,
    local_contrast,
    save_stats,
)

from oracles import brute_contrast

masks = hnp.arrays(np.uint8, (24, 24), elements=st.integers(0, 1))


@pytest.mark.parametrize("box,d,expected", [
    (BBox(10, 10, 12, 12), 3, BBox(7, 7, 15, 15)),
    (BBox(0, 0, 2, 2), 5, BBox(0, 0, 7, 7)),
    (BBox(250, 250, 255, 255), 4, BBox(246, 246, 255, 255)),
])
def test_dilate_bbox(box, d, expected):
    assert dilate_bbox(box, d, 256, 256) == expected


def test_dilate_zero_is_identity():
    box = BBox(3, 4, 9, 11)
    assert dilate_bbox(box, 0, 20, 20) == box


def test_dilate_negative_rejected():
    with pytest.raises(ValueError):
        dilate_bbox(BBox(0, 0, 1, 1), -1, 4, 4)


def _three_pixel_scene():
    image = np.full((5, 5), 100.0)
    mask = np.zeros((5, 5), dtype=np.uint8)
    mask[1, 1] = mask[1, 2] = mask[2, 1] = 1
    image[1, 1], image[1, 2], image[2, 1] = 180.0, 150.0, 210.0
    return image, mask


def test_local_contrast_constant_regions():
    image = np.full((6, 6), 100.0)
    mask = np.zeros((6, 6), dtype=np.uint8)
    mask[2:4, 2:4] = 1
    image[mask == 1] = 200.0
    lm = label_components(mask)
    assert local_contrast(image, lm, 1, BBox(0, 0, 5, 5)) == 100.0


def test_local_contrast_uniform_image_is_zero():
    image = np.full((5, 5), 77.0)
    mask = np.zeros((5, 5), dtype=np.uint8)
    mask[2, 2] = 1
    lm = label_components(mask)
    assert local_contrast(image, lm, 1, BBox(0, 0, 4, 4)) == 0.0


def test_local_contrast_derived_example():
    # 3 target px averaging 180, 22 background px summing 2200
    image, mask = _three_pixel_scene()
    lm = label_components(mask)
    got = local_contrast(image, lm, 1, BBox(0, 0, 4, 4))
    assert got == pytest.approx(80.0, abs=1e-12)
    ref = brute_contrast(image, lm.labels, 1, 0, 0, 4, 4)
    assert got == pytest.approx(ref, abs=1e-12)


def test_local_contrast_degenerate_region():
    image = np.full((3, 3), 10.0)
    mask = np.ones((3, 3), dtype=np.uint8)
    lm = label_components(mask)
    with pytest.raises(DegenerateRegionError):
        local_contrast(image, lm, 1, BBox(0, 0, 2, 2))


@settings(max_examples=40, deadline=None)
@given(st.floats(-50, 50), st.floats(0.1, 4.0))
def test_local_contrast_affine_equivariance(shift, gain):
    image, mask = _three_pixel_scene()
    lm = label_components(mask)
    region = BBox(0, 0, 4, 4)
    base = local_contrast(image, lm, 1, region)
    shifted = local_contrast(image + shift, lm, 1, region)
    scaled = local_contrast(image * gain, lm, 1, region)
    assert shifted == pytest.approx(base, abs=1e-9)
    assert scaled == pytest.approx(gain * base, rel=1e-12)


def test_extract_targets_empty():
    mask = np.zeros((8, 8), dtype=np.uint8)
    image = np.zeros((8, 8))
    assert extract_targets(mask, image, label_components(mask), 3) == []


def test_extract_targets_solid_square():
    mask = np.zeros((9, 9), dtype=np.uint8)
    mask[3:6, 2:5] = 1
    image = np.full((9, 9), 50.0)
    image[mask == 1] = 90.0
    (t,) = extract_targets(mask, image, label_components(mask), 2)
    assert t.scale == 9
    assert t.bbox == BBox(2, 3, 4, 5)
    assert t.dilated_bbox == BBox(0, 1, 6, 7)
    assert t.contrast == pytest.approx(40.0)


def test_extract_targets_fallback_when_filling_region(caplog):
    mask = np.ones((4, 4), dtype=np.uint8)
    image = np.full((4, 4), 30.0)
    with caplog.at_level("WARNING"):
        (t,) = extract_targets(mask, image, label_components(mask), 2)
    assert t.contrast == 0.0  # mean(target) - global mean, same here
    assert "fills its dilated region" in caplog.text


@settings(max_examples=60, deadline=None)
@given(masks)
def test_scales_conserve_foreground(mask):
    image = np.zeros(mask.shape)
    descs = extract_targets(mask, image, label_components(mask), 1)
    assert sum(t.scale for t in descs) == int(mask.sum())


def _write_pair(tmp_path, name, image, mask):
    save_gray(tmp_path / f"{name}.pgm", image)
    save_mask(tmp_path / f"{name}_m.pgm", mask)
    return f"{name}.pgm", f"{name}_m.pgm"


def _scene(offset, value=200.0, size=16):
    image = np.full((size, size), 100.0)
    mask = np.zeros((size, size), dtype=np.uint8)
    return image, mask


def test_dataset_stats_two_images(tmp_path):
    # scales 4 and 6 -> s_mean 5.0
    img1 = np.full((16, 16), 100.0)
    m1 = np.zeros((16, 16), dtype=np.uint8)
    m1[4:6, 4:6] = 1
    img1[m1 == 1] = 150.0
    img2 = np.full((16, 16), 100.0)
    m2 = np.zeros((16, 16), dtype=np.uint8)
    m2[8:10, 5:8] = 1
    img2[m2 == 1] = 180.0
    rows = ["image_path,mask_path,split"]
    for name, image, mask in [("a", img1, m1), ("b", img2, m2)]:
        ip, mp = _write_pair(tmp_path, name, image, mask)
        rows.append(f"{ip},{mp},train")
    (tmp_path / "manifest.csv").write_text("\n".join(rows) + "\n")
    stats = dataset_stats(load_manifest(tmp_path / "manifest.csv"), 3)
    assert stats.s_mean == pytest.approx(5.0)
    assert stats.n_targets == 2


def test_dataset_stats_single_contrast(tmp_path):
    image = np.full((16, 16), 100.0)
    mask = np.zeros((16, 16), dtype=np.uint8)
    mask[6:8, 6:8] = 1
    image[mask == 1] = 180.0
    ip, mp = _write_pair(tmp_path, "solo", image, mask)
    (tmp_path / "manifest.csv").write_text(
        f"image_path,mask_path,split\n{ip},{mp},train\n")
    stats = dataset_stats(load_manifest(tmp_path / "manifest.csv"), 3)
    assert stats.c_mean == pytest.approx(80.0)
    assert stats.n_targets == 1


def test_dataset_stats_needs_train_targets(tmp_path):
    image = np.full((8, 8), 10.0)
    mask = np.zeros((8, 8), dtype=np.uint8)
    ip, mp = _write_pair(tmp_path, "empty", image, mask)
    (tmp_path / "manifest.csv").write_text(
        f"image_path,mask_path,split\n{ip},{mp},train\n")
    with pytest.raises(EmptyTrainingSetError):
        dataset_stats(load_manifest(tmp_path / "manifest.csv"), 3)


def test_dataset_stats_order_invariant(tmp_path, rng):
    names = []
    for k in range(4):
        image = np.full((20, 20), 90.0)
        mask = np.zeros((20, 20), dtype=np.uint8)
        y, x = 3 + 4 * (k % 2), 4 + 3 * k
        mask[y:y + 2 + k % 3, x:x + 2] = 1
        image[mask == 1] = 130.0 + 10 * k
        names.append(_write_pair(tmp_path, f"s{k}", image, mask))
    header = "image_path,mask_path,split\n"
    fwd = header + "".join(f"{i},{m},train\n" for i, m in names)
    rev = header + "".join(f"{i},{m},train\n" for i, m in reversed(names))
    (tmp_path / "fwd.csv").write_text(fwd)
    (tmp_path / "rev.csv").write_text(rev)
    a = dataset_stats(load_manifest(tmp_path / "fwd.csv"), 3)
    b = dataset_stats(load_manifest(tmp_path / "rev.csv"), 3)
    assert a.s_mean == pytest.approx(b.s_mean)
    assert a.c_mean == pytest.approx(b.c_mean)
    assert a.n_targets == b.n_targets


def test_stats_json_roundtrip(tmp_path):
    stats = DatasetStats(s_mean=41.25, c_mean=-3.5, n_targets=17, dilation=3)
    save_stats(tmp_path / "s.json", stats)
    assert load_stats(tmp_path / "s.json") == stats


def test_dataset_stats_matches_brute_rescan(tmp_path):
    """20 generated scenes; means recomputed from scratch (BFS labels,
    per-pixel contrast loops)."""
    import math

    from conftest import make_scene
    from oracles import bfs_label, brute_contrast

    rows = ["image_path,mask_path,split"]
    scenes = []
    for k in range(20):
        image, mask = make_scene(1 + k % 4, size=48, seed=100 + k)
        save_gray(tmp_path / f"s{k}.pgm", image)
        save_mask(tmp_path / f"s{k}_m.pgm", mask)
        rows.append(f"s{k}.pgm,s{k}_m.pgm,train")
        scenes.append((np.rint(image), mask))  # files quantize to u8
    (tmp_path / "manifest.csv").write_text("\n".join(rows) + "\n")
    stats = dataset_stats(load_manifest(tmp_path / "manifest.csv"), 3)

    scales, contrasts = [], []
    for image, mask in scenes:
        labels, count = bfs_label(mask)
        h, w = mask.shape
        for lab in range(1, count + 1):
            ys, xs = np.nonzero(labels == lab)
            scales.append(len(xs))
            contrasts.append(brute_contrast(
                image, labels, lab,
                max(int(xs.min()) - 3, 0), max(int(ys.min()) - 3, 0),
                min(int(xs.max()) + 3, w - 1), min(int(ys.max()) + 3, h - 1)))
    assert stats.n_targets == len(scales)
    assert stats.s_mean == pytest.approx(math.fsum(scales) / len(scales),
                                         rel=1e-12)
    assert stats.c_mean == pytest.approx(
        math.fsum(contrasts) / len(contrasts), rel=1e-10)
