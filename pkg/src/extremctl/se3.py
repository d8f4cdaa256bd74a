"""Rigid-transform algebra on unit quaternions and 3-vectors.

Conventions:
    * quaternions are scalar-first (w, x, y, z), unit norm, and canonicalized
      to w >= 0 so each rotation has a single representation (double cover);
    * translations are meters, rotations are right-handed;
    * ``compose(a, b)`` applies ``b`` first, then ``a`` (matrix convention).

All types are immutable; every operation returns a new value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ExtremControlError

_UNIT_EPS = 1e-12


class ZeroVector(ExtremControlError):
    """A direction argument was too short to normalize."""


def _locked(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Rotation:
    """Unit quaternion (w, x, y, z), w >= 0."""

    q: np.ndarray

    def __post_init__(self) -> None:
        q = np.asarray(self.q, dtype=float).reshape(4).copy()
        norm = math.sqrt(float(np.dot(q, q)))
        if not math.isfinite(norm) or norm <= _UNIT_EPS:
            raise ZeroVector(f"quaternion norm {norm} is not normalizable")
        # Skip the divide when already unit so construction from a stored
        # canonical quaternion is bit-stable (wire round trips rely on it).
        if abs(norm - 1.0) > _UNIT_EPS:
            q = q / norm
        if q[0] < 0.0:
            q = -q
        object.__setattr__(self, "q", _locked(q))

    @staticmethod
    def identity() -> "Rotation":
        return Rotation(np.array([1.0, 0.0, 0.0, 0.0]))

    @staticmethod
    def from_axis_angle(axis: np.ndarray, angle: float) -> "Rotation":
        """Rotation of `angle` radians about `axis` (need not be unit length)."""
        axis = np.asarray(axis, dtype=float).reshape(3)
        norm = float(np.linalg.norm(axis))
        if norm <= _UNIT_EPS:
            raise ZeroVector(f"rotation axis norm {norm} is not normalizable")
        half = 0.5 * float(angle)
        u = axis * (math.sin(half) / norm)
        return Rotation(np.array([math.cos(half), u[0], u[1], u[2]]))

    @staticmethod
    def about_z(angle: float) -> "Rotation":
        return Rotation.from_axis_angle(np.array([0.0, 0.0, 1.0]), angle)

    def compose(self, other: "Rotation") -> "Rotation":
        """Hamilton product self * other (other applied first)."""
        w1, x1, y1, z1 = self.q
        w2, x2, y2, z2 = other.q
        return Rotation(
            np.array(
                [
                    w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
                    w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
                    w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
                    w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
                ]
            )
        )

    def __mul__(self, other: "Rotation") -> "Rotation":
        return self.compose(other)

    def inverse(self) -> "Rotation":
        w, x, y, z = self.q
        return Rotation(np.array([w, -x, -y, -z]))

    def apply(self, v: np.ndarray) -> np.ndarray:
        """Rotate one 3-vector (or an (..., 3) stack of them)."""
        v = np.asarray(v, dtype=float)
        w = self.q[0]
        u = self.q[1:]
        t = 2.0 * np.cross(u, v)
        return v + w * t + np.cross(u, t)

    def angle(self) -> float:
        """Rotation magnitude in radians, in [0, pi]."""
        s = float(np.linalg.norm(self.q[1:]))
        c = float(self.q[0])
        return 2.0 * math.atan2(s, c)

    def angle_to(self, other: "Rotation") -> float:
        """Geodesic distance to another rotation, radians."""
        return self.inverse().compose(other).angle()

    def as_matrix(self) -> np.ndarray:
        w, x, y, z = self.q
        return np.array(
            [
                [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
                [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
                [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
            ]
        )

    def to_list(self) -> list[float]:
        return [float(c) for c in self.q]

    def __repr__(self) -> str:
        w, x, y, z = self.q
        return f"Rotation(w={w:.6g}, x={x:.6g}, y={y:.6g}, z={z:.6g})"


@dataclass(frozen=True, eq=False)
class Pose:
    """Rigid transform: rotation plus translation (meters)."""

    rotation: Rotation
    translation: np.ndarray

    def __post_init__(self) -> None:
        p = np.asarray(self.translation, dtype=float).reshape(3).copy()
        if not np.all(np.isfinite(p)):
            raise ValueError(f"non-finite translation {p}")
        object.__setattr__(self, "translation", _locked(p))

    @staticmethod
    def identity() -> "Pose":
        return Pose(Rotation.identity(), np.zeros(3))

    @staticmethod
    def from_parts(q: np.ndarray, p: np.ndarray) -> "Pose":
        return Pose(Rotation(np.asarray(q)), np.asarray(p))

    def compose(self, other: "Pose") -> "Pose":
        return Pose(
            self.rotation.compose(other.rotation),
            self.translation + self.rotation.apply(other.translation),
        )

    def __mul__(self, other: "Pose") -> "Pose":
        return self.compose(other)

    def inverse(self) -> "Pose":
        rinv = self.rotation.inverse()
        return Pose(rinv, -rinv.apply(self.translation))

    def apply(self, point: np.ndarray) -> np.ndarray:
        return self.rotation.apply(point) + self.translation

    def to_dict(self) -> dict:
        return {"q": self.rotation.to_list(), "p": [float(c) for c in self.translation]}

    @staticmethod
    def from_dict(d: dict) -> "Pose":
        return Pose(Rotation(np.asarray(d["q"], dtype=float)), np.asarray(d["p"], dtype=float))

    def __repr__(self) -> str:
        p = self.translation
        return f"Pose(q={self.rotation.to_list()}, p=[{p[0]:.6g}, {p[1]:.6g}, {p[2]:.6g}])"


def compose(a: Pose, b: Pose) -> Pose:
    """a * b: apply b, then a."""
    return a.compose(b)


def inverse(a: Pose) -> Pose:
    return a.inverse()


def relative(base: Pose, target: Pose) -> Pose:
    """Target expressed in the base frame: inverse(base) * target."""
    return base.inverse().compose(target)


_CANONICAL_AXES = (
    np.array([1.0, 0.0, 0.0]),
    np.array([0.0, 1.0, 0.0]),
    np.array([0.0, 0.0, 1.0]),
)


def align_axis(from_axis: np.ndarray, to_vector: np.ndarray) -> Rotation:
    """Minimal rotation mapping `from_axis` onto the direction of `to_vector`.

    Rotates about the axis orthogonal to the plane spanned by the two
    directions. Anti-parallel inputs need a convention: the rotation is pi
    about the smallest-index canonical axis not parallel to `from_axis`
    (projected orthogonal to it).

    Raises ZeroVector if |to_vector| <= 1e-9 (or from_axis is degenerate).
    """
    f = np.asarray(from_axis, dtype=float).reshape(3)
    t = np.asarray(to_vector, dtype=float).reshape(3)
    fn = float(np.linalg.norm(f))
    tn = float(np.linalg.norm(t))
    if fn <= 1e-9:
        raise ZeroVector(f"from_axis norm {fn:.3e} <= 1e-9")
    if tn <= 1e-9:
        raise ZeroVector(f"to_vector norm {tn:.3e} <= 1e-9")
    f = f / fn
    t = t / tn
    c = float(np.dot(f, t))
    if c >= 1.0 - 1e-12:
        return Rotation.identity()
    if c <= -1.0 + 1e-12:
        for e in _CANONICAL_AXES:
            a = e - float(np.dot(e, f)) * f
            if float(np.linalg.norm(a)) > 1e-6:
                return Rotation.from_axis_angle(a, math.pi)
        raise ZeroVector("no canonical axis orthogonal to from_axis")  # unreachable
    axis = np.cross(f, t)
    angle = math.atan2(float(np.linalg.norm(axis)), c)
    return Rotation.from_axis_angle(axis, angle)
