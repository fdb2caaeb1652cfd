import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from irstd.errors import FormatError
from irstd.raster import (
    DatasetManifest,
    ManifestEntry,
    load_gray,
    load_manifest,
    load_mask,
    load_prob,
    save_gray,
    save_manifest,
    save_mask,
)


def test_load_gray_decodes_bytes(tmp_path):
    f = tmp_path / "a.pgm"
    f.write_bytes(b"P5\n2 2\n255\n" + bytes([0, 128, 255, 64]))
    img = load_gray(f)
    assert img.shape == (2, 2)
    assert img.tolist() == [[0, 128], [255, 64]]


def test_load_gray_allows_comments(tmp_path):
    f = tmp_path / "a.pgm"
    f.write_bytes(b"P5\n# a comment\n2 1 # inline\n255\n" + bytes([7, 9]))
    assert load_gray(f).tolist() == [[7, 9]]


def test_empty_file_rejected(tmp_path):
    f = tmp_path / "a.pgm"
    f.write_bytes(b"")
    with pytest.raises(FormatError):
        load_gray(f)


@pytest.mark.parametrize("payload", [
    b"P6\n2 2\n255\n" + bytes(4),          # wrong magic
    b"P5\n2 2\n65535\n" + bytes(8),        # wrong maxval
    b"P5\n2 2\n255\n" + bytes(3),          # truncated payload
    b"P5\n2 x\n255\n" + bytes(4),          # non-numeric size
])
def test_bad_pgm_rejected(tmp_path, payload):
    f = tmp_path / "bad.pgm"
    f.write_bytes(payload)
    with pytest.raises(FormatError):
        load_gray(f)


def test_missing_file_raises_oserror(tmp_path):
    with pytest.raises(OSError):
        load_gray(tmp_path / "nope.pgm")


def test_load_mask_maps_255_to_1(tmp_path):
    f = tmp_path / "m.pgm"
    f.write_bytes(b"P5\n2 2\n255\n" + bytes([0, 255, 255, 0]))
    assert load_mask(f).tolist() == [[0, 1], [1, 0]]


def test_load_mask_rejects_soft_values(tmp_path):
    f = tmp_path / "m.pgm"
    f.write_bytes(b"P5\n2 2\n255\n" + bytes([0, 128, 255, 0]))
    with pytest.raises(FormatError):
        load_mask(f)


def test_all_zero_mask(tmp_path):
    f = tmp_path / "m.pgm"
    f.write_bytes(b"P5\n16 16\n255\n" + bytes(256))
    mask = load_mask(f)
    assert mask.shape == (16, 16)
    assert mask.sum() == 0


def test_gray_roundtrip_256(tmp_path):
    rng = np.random.default_rng(0)
    img = rng.integers(0, 256, size=(256, 256)).astype(np.float64)
    f = tmp_path / "rt.pgm"
    save_gray(f, img)
    assert np.array_equal(load_gray(f), img)


@settings(max_examples=25, deadline=None)
@given(hnp.arrays(np.uint8, hnp.array_shapes(min_dims=2, max_dims=2,
                                             min_side=1, max_side=24)))
def test_gray_roundtrip_property(tmp_path_factory, arr):
    f = tmp_path_factory.mktemp("pgm") / "x.pgm"
    save_gray(f, arr.astype(np.float64))
    assert np.array_equal(load_gray(f), arr.astype(np.float64))


@settings(max_examples=25, deadline=None)
@given(hnp.arrays(np.uint8, (9, 7), elements=st.integers(0, 1)))
def test_mask_roundtrip_preserves_domain(tmp_path_factory, mask):
    f = tmp_path_factory.mktemp("pgm") / "m.pgm"
    save_mask(f, mask)
    back = load_mask(f)
    assert np.array_equal(back, mask)
    assert set(np.unique(back)) <= {0, 1}


def test_prob_roundtrip_quantized(tmp_path):
    prob = np.linspace(0, 1, 64).reshape(8, 8)
    f = tmp_path / "p.pgm"
    from irstd.raster import save_prob
    save_prob(f, prob)
    back = load_prob(f)
    assert np.all((back >= 0) & (back <= 1))
    assert np.max(np.abs(back - prob)) <= 0.5 / 255 + 1e-12


def test_manifest_parse_order(tmp_path):
    f = tmp_path / "m.csv"
    f.write_text("image_path,mask_path,split\n"
                 "a.pgm,a_m.pgm,train\n"
                 "b.pgm,b_m.pgm,test\n")
    m = load_manifest(f)
    assert [e.split for e in m.entries] == ["train", "test"]
    assert m.image_file(m.entries[0]) == tmp_path / "a.pgm"


def test_manifest_crlf(tmp_path):
    f = tmp_path / "m.csv"
    f.write_bytes(b"image_path,mask_path,split\r\na.pgm,b.pgm,train\r\n")
    assert len(load_manifest(f).entries) == 1


def test_manifest_unknown_split(tmp_path):
    f = tmp_path / "m.csv"
    f.write_text("image_path,mask_path,split\na.pgm,b.pgm,validation\n")
    with pytest.raises(FormatError):
        load_manifest(f)


def test_manifest_bad_header(tmp_path):
    f = tmp_path / "m.csv"
    f.write_text("img,mask,split\na.pgm,b.pgm,train\n")
    with pytest.raises(FormatError):
        load_manifest(f)


def test_manifest_header_only(tmp_path):
    f = tmp_path / "m.csv"
    f.write_text("image_path,mask_path,split\n")
    assert load_manifest(f).entries == ()


def test_manifest_roundtrip(tmp_path):
    entries = (ManifestEntry("x/im.pgm", "x/ms.pgm", "train"),
               ManifestEntry("y.pgm", "ym.pgm", "test"))
    manifest = DatasetManifest(entries, tmp_path)
    f = tmp_path / "m.csv"
    save_manifest(f, manifest)
    assert load_manifest(f).entries == entries
