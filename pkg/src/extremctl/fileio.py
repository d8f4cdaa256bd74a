"""File formats used by the CLI: PGM frames, XFLW flow fields, CSV signals,
JSONL pose streams, and deterministic JSON.

XFLW is a raw little-endian flow container: 16-byte header (magic "XFLW",
width u32, height u32, reserved u32 = 0) followed by the full u plane then
the full v plane as f32, row-major.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .latency import FlowField, MotionSignal
from .mapping import LinkSet
from .wire import BadMagic, ShortRead

FLOW_MAGIC = b"XFLW"
_FLOW_HEADER = struct.Struct("<4sIII")


def write_flow(path, flow: FlowField) -> None:
    h, w = flow.shape
    with open(path, "wb") as f:
        f.write(_FLOW_HEADER.pack(FLOW_MAGIC, w, h, 0))
        f.write(flow.u.astype("<f4").tobytes())
        f.write(flow.v.astype("<f4").tobytes())


def read_flow(path) -> FlowField:
    data = Path(path).read_bytes()
    if len(data) < _FLOW_HEADER.size:
        raise ShortRead(f"{len(data)} bytes, need {_FLOW_HEADER.size} header")
    magic, w, h, _reserved = _FLOW_HEADER.unpack_from(data)
    if magic != FLOW_MAGIC:
        raise BadMagic(f"{magic!r}")
    need = _FLOW_HEADER.size + 2 * 4 * w * h
    if len(data) < need:
        raise ShortRead(f"{len(data)} bytes, need {need} for {w}x{h} flow")
    planes = np.frombuffer(data, dtype="<f4", count=2 * w * h, offset=_FLOW_HEADER.size)
    u = planes[: w * h].reshape(h, w).astype(float)
    v = planes[w * h :].reshape(h, w).astype(float)
    return FlowField(u=u, v=v)


def write_pgm(path, image: np.ndarray) -> None:
    """Binary 8-bit PGM (P5)."""
    img = np.asarray(image)
    if img.ndim != 2:
        raise ValueError("image must be 2-d")
    img = np.clip(np.rint(img), 0, 255).astype(np.uint8)
    h, w = img.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        f.write(img.tobytes())


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if data[:2] != b"P5":
        raise ValueError(f"{path}: not a binary PGM (P5) file")
    # Header: magic, width, height, maxval as whitespace-separated tokens,
    # '#' comments allowed through end of line.
    tokens: list[int] = []
    pos = 2
    while len(tokens) < 3:
        if pos >= len(data):
            raise ValueError(f"{path}: truncated PGM header")
        c = data[pos : pos + 1]
        if c == b"#":
            pos = data.index(b"\n", pos) + 1
        elif c.isspace():
            pos += 1
        else:
            end = pos
            while end < len(data) and not data[end : end + 1].isspace():
                end += 1
            tokens.append(int(data[pos:end]))
            pos = end
    w, h, maxval = tokens
    pos += 1  # single whitespace after maxval
    if maxval <= 0 or maxval > 65535:
        raise ValueError(f"{path}: bad maxval {maxval}")
    dtype = np.uint8 if maxval < 256 else ">u2"
    count = w * h
    pixels = np.frombuffer(data, dtype=dtype, count=count, offset=pos)
    if pixels.size < count:
        raise ValueError(f"{path}: truncated PGM pixel data")
    return pixels.reshape(h, w).astype(np.uint8 if maxval < 256 else np.uint16)


def read_frame_dir(path, pattern: str = "*.pgm") -> list[np.ndarray]:
    files = sorted(Path(path).glob(pattern))
    if not files:
        raise ValueError(f"no {pattern} files in {path}")
    return [read_pgm(f) for f in files]


def read_flow_dir(path, pattern: str = "*.xflw") -> list[FlowField]:
    files = sorted(Path(path).glob(pattern))
    if not files:
        raise ValueError(f"no {pattern} files in {path}")
    return [read_flow(f) for f in files]


def write_signal_csv(path, signal: MotionSignal, value_header: str = "value") -> None:
    with open(path, "w", newline="") as f:
        f.write(f"t_s,{value_header}\n")
        for t, v in zip(signal.t, signal.samples):
            f.write(f"{repr(float(t))},{repr(float(v))}\n")


def read_signal_csv(path) -> MotionSignal:
    """CSV with a header row and columns (time seconds, value), any names."""
    rows = []
    with open(path, "r", newline="") as f:
        header = f.readline()
        if not header:
            raise ValueError(f"{path}: empty file")
        for line in f:
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            rows.append((float(parts[0]), float(parts[1])))
    if len(rows) < 2:
        raise ValueError(f"{path}: need at least 2 samples")
    t = np.asarray([r[0] for r in rows])
    v = np.asarray([r[1] for r in rows])
    dt = np.diff(t)
    dt_med = float(np.median(dt))
    if dt_med <= 0 or np.any(np.abs(dt - dt_med) > 1e-6 * max(dt_med, 1.0) + 1e-9):
        raise ValueError(f"{path}: time column is not uniformly sampled")
    return MotionSignal(v, 1.0 / dt_med, t0=float(t[0]))


def write_linkset_jsonl(path, frames) -> None:
    """frames: iterable of (timestamp_ns, LinkSet)."""
    with open(path, "w") as f:
        for timestamp_ns, links in frames:
            row = {"timestamp_ns": int(timestamp_ns), "links": links.to_dict()}
            f.write(json.dumps(row, sort_keys=True) + "\n")


def read_linkset_jsonl(path) -> list[tuple[int, LinkSet]]:
    out = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            row = json.loads(line)
            out.append((int(row["timestamp_ns"]), LinkSet.from_dict(row["links"])))
    return out


def dump_json(path, obj) -> None:
    """Deterministic JSON: sorted keys, fixed layout, trailing newline."""
    with open(path, "w") as f:
        json.dump(obj, f, sort_keys=True, indent=2)
        f.write("\n")


def load_json(path):
    with open(path) as f:
        return json.load(f)
