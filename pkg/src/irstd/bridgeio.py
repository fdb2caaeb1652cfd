"""Raw-array loss service over stdin/stdout.

Lets foreign runtimes use the loss kernels through flat buffers instead
of files: a client spawns ``python -m irstd.bridgeio``, writes one
request, and reads one response.

Wire format (all multi-byte values little-endian, grids row-major):

    request  = header JSON + "\\n" + payload bytes
    response = header JSON + "\\n" + payload bytes

Operations:

- {"op": "version"}
  -> {"status": 0, "version": "<semver>"}; no payloads.

- {"op": "tda_forward_backward", "height": H, "width": W,
   "s_mean": float, "c_mean": float, "w_T": float, "base": "iou",
   "seed": int, optional "gamma"/"alpha"/"beta"/"eps"/"patch_size"/
   "d_min"/"d_max"/"fixed_p"}
  payload: H*W float32 prediction in [0,1], then H*W uint8 mask in
  {0,1}, then H*W uint8 image.
  -> {"status": 0, "loss": float, "base_loss": float, "tda_loss": float}
  payload: H*W float32 gradient of the combined loss.

- {"op": "extract_targets", "height": H, "width": W, "dilation": int}
  payload: H*W uint8 mask, then H*W uint8 image.
  -> {"status": 0, "count": N, "label": [...], "x0": [...], "y0": [...],
      "x1": [...], "y1": [...], "scale": [...], "contrast": [...]}
  (parallel arrays; no binary payload).

Status codes: 0 ok, 1 shape mismatch, 2 stats error, 3 malformed
request, 4 internal error. The process always exits 0; failures are
reported in-band so callers are never aborted.
"""

from __future__ import annotations

import json
import sys

import numpy as np

from . import __version__
from .ccl import label_components
from .errors import ShapeMismatchError, StatsError
from .losses import BASE_LOSSES, TdaConfig, base_loss, tda_image_loss, total_loss
from .raster import clamp_prob
from .targets import DatasetStats, extract_targets

OK = 0
ERR_SHAPE = 1
ERR_STATS = 2
ERR_REQUEST = 3
ERR_INTERNAL = 4


def _fail(status: int, message: str) -> bytes:
    return (json.dumps({"status": status, "error": message},
                       sort_keys=True) + "\n").encode()


def _reply(header: dict, payload: bytes = b"") -> bytes:
    header = {"status": OK, **header}
    return (json.dumps(header, sort_keys=True) + "\n").encode() + payload


def _split_payload(payload: bytes, sizes: list[int]) -> list[bytes]:
    if len(payload) != sum(sizes):
        raise ShapeMismatchError(
            f"payload is {len(payload)} bytes, expected {sum(sizes)}")
    parts = []
    pos = 0
    for size in sizes:
        parts.append(payload[pos:pos + size])
        pos += size
    return parts


def _dims(header: dict) -> tuple[int, int]:
    h = int(header["height"])
    w = int(header["width"])
    if h < 1 or w < 1:
        raise ShapeMismatchError(f"bad dimensions {h}x{w}")
    return h, w


def _mask_from(buf: bytes, h: int, w: int) -> np.ndarray:
    mask = np.frombuffer(buf, dtype=np.uint8).reshape(h, w)
    if not np.isin(mask, (0, 1)).all():
        raise ValueError("mask bytes must be 0 or 1")
    return mask


def _op_forward_backward(header: dict, payload: bytes) -> bytes:
    h, w = _dims(header)
    n = h * w
    pred_b, mask_b, image_b = _split_payload(payload, [4 * n, n, n])
    pred = clamp_prob(
        np.frombuffer(pred_b, dtype="<f4").astype(np.float64).reshape(h, w))
    mask = _mask_from(mask_b, h, w)
    image = np.frombuffer(image_b, dtype=np.uint8).astype(
        np.float64).reshape(h, w)

    base_kind = header.get("base", "iou")
    if base_kind not in BASE_LOSSES:
        raise ValueError(f"unknown base loss {base_kind!r}")
    cfg = TdaConfig(
        patch_size=int(header.get("patch_size", 48)),
        d_min=int(header.get("d_min", 2)),
        d_max=int(header.get("d_max", 5)),
        w_T=float(header["w_T"]),
        eps=float(header.get("eps", 1e-6)),
        p_override=header.get("fixed_p"),
    )
    stats = DatasetStats(s_mean=float(header["s_mean"]),
                         c_mean=float(header["c_mean"]), n_targets=1)
    base = base_loss(base_kind, pred, mask,
                     gamma=float(header.get("gamma", 2.0)),
                     alpha=float(header.get("alpha", 0.3)),
                     beta=float(header.get("beta", 0.7)),
                     eps=cfg.eps, with_grad=True)
    tda = tda_image_loss(pred, mask, image, stats, cfg,
                         int(header.get("seed", 0)))
    combined = total_loss(base, tda, cfg.w_T)
    return _reply(
        {"loss": combined.value, "base_loss": base.value,
         "tda_loss": tda.value},
        combined.grad.astype("<f4").tobytes(),
    )


def _op_extract_targets(header: dict, payload: bytes) -> bytes:
    h, w = _dims(header)
    n = h * w
    mask_b, image_b = _split_payload(payload, [n, n])
    mask = _mask_from(mask_b, h, w)
    image = np.frombuffer(image_b, dtype=np.uint8).astype(
        np.float64).reshape(h, w)
    d = int(header.get("dilation", 3))
    descs = extract_targets(mask, image, label_components(mask), d)
    return _reply({
        "count": len(descs),
        "label": [t.label for t in descs],
        "x0": [t.bbox.x0 for t in descs],
        "y0": [t.bbox.y0 for t in descs],
        "x1": [t.bbox.x1 for t in descs],
        "y1": [t.bbox.y1 for t in descs],
        "scale": [t.scale for t in descs],
        "contrast": [t.contrast for t in descs],
    })


def handle_request(data: bytes) -> bytes:
    """Dispatch one raw request; never raises."""
    try:
        newline = data.find(b"\n")
        if newline < 0:
            return _fail(ERR_REQUEST, "missing header line")
        try:
            header = json.loads(data[:newline].decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            return _fail(ERR_REQUEST, f"bad header: {exc}")
        if not isinstance(header, dict) or "op" not in header:
            return _fail(ERR_REQUEST, "header must carry an 'op' field")
        payload = data[newline + 1:]
        op = header["op"]
        if op == "version":
            return _reply({"version": __version__})
        if op == "tda_forward_backward":
            return _op_forward_backward(header, payload)
        if op == "extract_targets":
            return _op_extract_targets(header, payload)
        return _fail(ERR_REQUEST, f"unknown op {op!r}")
    except ShapeMismatchError as exc:
        return _fail(ERR_SHAPE, str(exc))
    except StatsError as exc:
        return _fail(ERR_STATS, str(exc))
    except (KeyError, TypeError, ValueError) as exc:
        return _fail(ERR_REQUEST, str(exc))
    except Exception as exc:  # pragma: no cover - defensive
        return _fail(ERR_INTERNAL, f"{type(exc).__name__}: {exc}")


def main() -> int:
    data = sys.stdin.buffer.read()
    sys.stdout.buffer.write(handle_request(data))
    sys.stdout.buffer.flush()
    return 0


if __name__ == "__main__":
    sys.exit(main())
