"""End-to-end latency estimation from paired motion observations.

Two observations of the same motion (video of the operator and video of the
robot, or directly tracked positions) are reduced to one-dimensional motion
signals, standardized, and aligned: the time offset maximizing their
normalized cross-correlation is the latency estimate. Sub-sample refinement
by parabolic interpolation of the correlation peak supports claims below
one frame period.

Video enters through a deliberately simple block-matching optical flow
(mean-removed SAD), region averaging, and projection onto a motion
direction; precomputed flow fields and raw signals are accepted as well.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ExtremControlError


class DimensionMismatch(ExtremControlError):
    """Frame pair dimensions differ."""


class OutOfBounds(ExtremControlError):
    """Region extends outside the flow field."""


class ConstantSignal(ExtremControlError):
    """Signal standard deviation at or below 1e-12; nothing to align."""


class InsufficientOverlap(ExtremControlError):
    """No candidate lag leaves enough overlapping samples."""


@dataclass(frozen=True)
class MotionSignal:
    """Uniformly sampled 1-D signal: samples at rate_hz starting at t0."""

    samples: np.ndarray
    rate_hz: float
    t0: float = 0.0

    def __post_init__(self) -> None:
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim != 1 or samples.size < 2:
            raise ValueError("signal needs at least 2 samples in one dimension")
        if not np.all(np.isfinite(samples)):
            raise ValueError("signal contains non-finite samples")
        if self.rate_hz <= 0:
            raise ValueError(f"rate {self.rate_hz} Hz must be positive")
        samples.flags.writeable = False
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration_s(self) -> float:
        return (self.samples.size - 1) / self.rate_hz

    @property
    def t(self) -> np.ndarray:
        return self.t0 + np.arange(self.samples.size) / self.rate_hz


@dataclass(frozen=True)
class RegionSpec:
    """Axis-aligned pixel rectangle plus the motion direction to project on."""

    x: int
    y: int
    w: int
    h: int
    direction: np.ndarray

    def __post_init__(self) -> None:
        if self.w < 1 or self.h < 1:
            raise ValueError("region must be at least 1x1 pixels")
        d = np.asarray(self.direction, dtype=float)
        if d.shape != (2,):
            raise ValueError("direction must be a 2-vector")
        norm = float(np.linalg.norm(d))
        if norm <= 1e-12:
            raise ValueError("direction must be non-zero")
        d = d / norm
        d.flags.writeable = False
        object.__setattr__(self, "direction", d)

    @staticmethod
    def parse(text: str) -> "RegionSpec":
        """Build from 'x,y,w,h,dx,dy' (the CLI flag format)."""
        parts = text.split(",")
        if len(parts) != 6:
            raise ValueError(f"expected x,y,w,h,dx,dy, got {text!r}")
        x, y, w, h = (int(p) for p in parts[:4])
        return RegionSpec(x, y, w, h, np.array([float(parts[4]), float(parts[5])]))


@dataclass(frozen=True)
class FlowField:
    """Per-pixel displacement field in pixels/frame, components u (x) and v (y)."""

    u: np.ndarray
    v: np.ndarray

    def __post_init__(self) -> None:
        u = np.asarray(self.u, dtype=float)
        v = np.asarray(self.v, dtype=float)
        if u.shape != v.shape or u.ndim != 2:
            raise ValueError("u and v must be equal-shape 2-d arrays")
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
            raise ValueError("flow contains non-finite entries")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)

    @property
    def shape(self) -> tuple[int, int]:
        return self.u.shape


def block_match_flow(
    frame_a: np.ndarray,
    frame_b: np.ndarray,
    block: int = 8,
    radius: int = 4,
    texture_threshold: float = 1.0,
) -> FlowField:
    """Block displacement field from frame_a to frame_b.

    Each block x block tile of frame_a is matched against frame_b over
    displacements within +-radius by mean-removed sum of absolute
    differences, so uniform brightness changes do not register as motion.
    Ties prefer the smallest displacement (then smallest du, dv); tiles
    whose mean absolute deviation falls at or below texture_threshold are
    reported as zero flow. The winning displacement is painted across the
    tile; border pixels not covered by a full tile stay zero.
    """
    a = np.asarray(frame_a, dtype=float)
    b = np.asarray(frame_b, dtype=float)
    if a.shape != b.shape:
        raise DimensionMismatch(f"frame shapes {a.shape} vs {b.shape}")
    if a.ndim != 2:
        raise ValueError("frames must be 2-d grayscale arrays")
    if block < 4:
        raise ValueError(f"block {block} must be at least 4 pixels")
    if radius < 0:
        raise ValueError("radius must be non-negative")

    h, w = a.shape
    nby, nbx = h // block, w // block
    if nby == 0 or nbx == 0:
        raise ValueError(f"frames {a.shape} smaller than one {block}px block")
    h2, w2 = nby * block, nbx * block

    def tiles(img_region: np.ndarray, rows: int, cols: int) -> np.ndarray:
        t = img_region.reshape(rows, block, cols, block).swapaxes(1, 2)
        return t - t.mean(axis=(2, 3), keepdims=True)

    a_tiles = tiles(a[:h2, :w2], nby, nbx)
    texture = np.abs(a_tiles).mean(axis=(2, 3))

    # Displacements sorted so np.argmin's first-wins rule breaks SAD ties
    # toward the smallest motion.
    disps = sorted(
        ((dv, du) for dv in range(-radius, radius + 1) for du in range(-radius, radius + 1)),
        key=lambda d: (d[0] ** 2 + d[1] ** 2, d[1], d[0]),
    )
    cost = np.full((nby, nbx, len(disps)), np.inf)
    for i, (dv, du) in enumerate(disps):
        by0 = (-dv + block - 1) // block if dv < 0 else 0
        bx0 = (-du + block - 1) // block if du < 0 else 0
        by1 = min(nby, (h - dv) // block)
        bx1 = min(nbx, (w - du) // block)
        if by0 >= by1 or bx0 >= bx1:
            continue
        ys, xs = by0 * block, bx0 * block
        ye, xe = by1 * block, bx1 * block
        b_sub = tiles(b[ys + dv : ye + dv, xs + du : xe + du], by1 - by0, bx1 - bx0)
        sad = np.abs(a_tiles[by0:by1, bx0:bx1] - b_sub).mean(axis=(2, 3))
        cost[by0:by1, bx0:bx1, i] = sad

    best = np.argmin(cost, axis=2)
    darr = np.asarray(disps)  # (D, 2) rows (dv, du)
    dv_best = darr[best, 0].astype(float)
    du_best = darr[best, 1].astype(float)
    flat = texture <= texture_threshold
    dv_best[flat] = 0.0
    du_best[flat] = 0.0

    u = np.zeros((h, w))
    v = np.zeros((h, w))
    u[:h2, :w2] = np.kron(du_best, np.ones((block, block)))
    v[:h2, :w2] = np.kron(dv_best, np.ones((block, block)))
    return FlowField(u=u, v=v)


def project_region(flow: FlowField, region: RegionSpec) -> float:
    """Mean flow vector inside the region, projected on its direction."""
    h, w = flow.shape
    if region.x < 0 or region.y < 0 or region.x + region.w > w or region.y + region.h > h:
        raise OutOfBounds(
            f"region {(region.x, region.y, region.w, region.h)} outside {w}x{h} flow"
        )
    sl = (slice(region.y, region.y + region.h), slice(region.x, region.x + region.w))
    mean_u = float(np.mean(flow.u[sl]))
    mean_v = float(np.mean(flow.v[sl]))
    return mean_u * region.direction[0] + mean_v * region.direction[1]


def standardize(signal: MotionSignal) -> MotionSignal:
    """Zero-mean, unit-variance copy (population std)."""
    s = signal.samples
    std = float(np.std(s))
    if std <= 1e-12:
        raise ConstantSignal(f"std {std:.3g} at or below 1e-12")
    return MotionSignal((s - np.mean(s)) / std, signal.rate_hz, signal.t0)


@dataclass(frozen=True)
class LagEstimate:
    """Time offset of b behind a (positive = b trails), with peak correlation."""

    lag_s: float
    confidence: float
    low_confidence: bool
    n_overlap: int


def estimate_lag(
    a: MotionSignal,
    b: MotionSignal,
    max_lag_s: float = 1.0,
    min_overlap_s: float = 1.0,
) -> LagEstimate:
    """Lag maximizing normalized cross-correlation between two signals.

    Pearson correlation is evaluated per candidate integer lag over the
    overlapping samples (standardization is therefore implicit and
    amplitude drops out), then the peak is refined sub-sample by a 3-point
    parabolic fit. Differing t0 values are honored: the returned lag is in
    absolute time. Estimates whose peak correlation falls below 0.6 are
    flagged low_confidence, not rejected.
    """
    if abs(a.rate_hz - b.rate_hz) > 1e-9 * max(a.rate_hz, b.rate_hz):
        raise ValueError(f"sample rates differ: {a.rate_hz} vs {b.rate_hz} Hz")
    rate = a.rate_hz
    sa, sb = a.samples, b.samples
    if float(np.std(sa)) <= 1e-12 or float(np.std(sb)) <= 1e-12:
        raise ConstantSignal("cannot align a constant signal")

    max_shift = int(round(max_lag_s * rate))
    min_overlap = max(2, int(round(min_overlap_s * rate)))
    na, nb = sa.size, sb.size

    shifts = np.arange(-max_shift, max_shift + 1)
    corr = np.full(shifts.size, -np.inf)
    counts = np.zeros(shifts.size, dtype=int)
    for idx, s in enumerate(shifts):
        i0 = max(0, -s)
        i1 = min(na, nb - s)
        m = i1 - i0
        counts[idx] = m
        if m < min_overlap:
            continue
        x = sa[i0:i1]
        y = sb[i0 + s : i1 + s]
        x = x - x.mean()
        y = y - y.mean()
        den = np.sqrt((x @ x) * (y @ y))
        if den <= 1e-30:
            continue
        corr[idx] = (x @ y) / den

    if not np.any(np.isfinite(corr)):
        raise InsufficientOverlap(
            f"no lag within +-{max_lag_s} s leaves {min_overlap} overlapping samples"
        )

    peak = int(np.argmax(corr))
    refined = float(shifts[peak])
    if 0 < peak < shifts.size - 1 and np.isfinite(corr[peak - 1]) and np.isfinite(corr[peak + 1]):
        c0, c1, c2 = corr[peak - 1], corr[peak], corr[peak + 1]
        denom = c0 - 2.0 * c1 + c2
        if abs(denom) > 1e-15:
            delta = 0.5 * (c0 - c2) / denom
            refined += float(np.clip(delta, -0.5, 0.5))

    confidence = float(np.clip(corr[peak], -1.0, 1.0))
    return LagEstimate(
        lag_s=refined / rate + (b.t0 - a.t0),
        confidence=confidence,
        low_confidence=confidence < 0.6,
        n_overlap=int(counts[peak]),
    )


@dataclass
class LatencyReport:
    """analyze_pair output: standardized signals plus the lag estimate."""

    signal_a: MotionSignal
    signal_b: MotionSignal
    lag_s: float
    confidence: float
    low_confidence: bool
    source: str  # "frames" | "flows" | "signals"

    def to_dict(self) -> dict:
        return {
            "lag_ms": self.lag_s * 1e3,
            "confidence": self.confidence,
            "low_confidence": self.low_confidence,
            "source": self.source,
            "rate_hz": self.signal_a.rate_hz,
            "signal_a": {"t0_s": self.signal_a.t0, "values": self.signal_a.samples.tolist()},
            "signal_b": {"t0_s": self.signal_b.t0, "values": self.signal_b.samples.tolist()},
        }


def flow_signal(flows, region: RegionSpec, fps: float, t0: float = 0.0) -> MotionSignal:
    """Project a sequence of flow fields through one region into a signal."""
    values = [project_region(f, region) for f in flows]
    return MotionSignal(np.asarray(values), fps, t0)


def frames_to_flows(frames, block: int = 8, radius: int = 4) -> list[FlowField]:
    """Consecutive-pair block-matching flows for a frame sequence."""
    frames = list(frames)
    if len(frames) < 2:
        raise ValueError("need at least 2 frames")
    return [block_match_flow(frames[k], frames[k + 1], block, radius) for k in range(len(frames) - 1)]


def analyze_pair(
    source_a,
    source_b,
    region_a: RegionSpec | None = None,
    region_b: RegionSpec | None = None,
    fps: float | None = None,
    max_lag_s: float = 1.0,
    block: int = 8,
    radius: int = 4,
) -> LatencyReport:
    """Full latency analysis between two observations of one motion.

    Each source is a MotionSignal, a sequence of FlowField, or a sequence
    of grayscale frames; frame/flow sources need their RegionSpec and a
    shared fps. Reciprocating or otherwise quasi-periodic motion gives the
    correlation a clear phase structure to lock onto.
    """

    def to_signal(source, region: RegionSpec | None) -> tuple[MotionSignal, str]:
        if isinstance(source, MotionSignal):
            return source, "signals"
        seq = list(source)
        if len(seq) == 0:
            raise ValueError("empty source")
        if isinstance(seq[0], FlowField):
            if region is None or fps is None:
                raise ValueError("flow input needs region and fps")
            return flow_signal(seq, region, fps), "flows"
        if region is None or fps is None:
            raise ValueError("frame input needs region and fps")
        return flow_signal(frames_to_flows(seq, block, radius), region, fps), "frames"

    sig_a, kind_a = to_signal(source_a, region_a)
    sig_b, kind_b = to_signal(source_b, region_b)
    est = estimate_lag(sig_a, sig_b, max_lag_s=max_lag_s)
    return LatencyReport(
        signal_a=standardize(sig_a),
        signal_b=standardize(sig_b),
        lag_s=est.lag_s,
        confidence=est.confidence,
        low_confidence=est.low_confidence,
        source=kind_a if kind_a == kind_b else f"{kind_a}+{kind_b}",
    )
