"""Binary pose streaming: the 353-byte frame codec and the latest-value mailbox.

A frame carries six link poses with a sequence number and a nanosecond
timestamp. Layout, little-endian throughout:

    magic "XCTL" (4s) | version u8 | seq u32 | timestamp_ns u64
    then per link, in LinkSet field order (pelvis, torso, left_hand,
    right_hand, left_foot, right_foot): translation x,y,z f64, then
    quaternion w,x,y,z f64

4 + 1 + 4 + 8 + 6*56 = 353 bytes. Encoding is bit-exact: a decoded frame
re-encodes to the identical bytes (link rotations are stored canonically,
w >= 0, unit norm).
"""

from __future__ import annotations

import struct
import threading
from dataclasses import dataclass

import numpy as np

from .errors import ExtremControlError
from .mapping import LINKS, LinkSet
from .se3 import Pose, Rotation

MAGIC = b"XCTL"
VERSION = 1
FRAME_STRUCT = struct.Struct("<4sBIQ" + "d" * (len(LINKS) * 7))
FRAME_SIZE = FRAME_STRUCT.size  # 353
QUAT_NORM_TOL = 1e-6


class BadMagic(ExtremControlError):
    """Buffer does not start with XCTL."""


class BadVersion(ExtremControlError):
    """Unsupported frame version byte."""


class NonUnitQuaternion(ExtremControlError):
    """A link quaternion deviates from unit norm by more than 1e-6."""


class ShortRead(ExtremControlError):
    """Buffer shorter than one full frame."""


@dataclass(frozen=True)
class PoseFrame:
    """One streaming unit: six link poses, a sequence number, a timestamp."""

    seq: int
    timestamp_ns: int
    links: LinkSet

    def __post_init__(self) -> None:
        if not (0 <= self.seq < 2**32):
            raise ValueError(f"seq {self.seq} outside u32 range")
        if not (0 <= self.timestamp_ns < 2**64):
            raise ValueError(f"timestamp_ns {self.timestamp_ns} outside u64 range")


def encode_frame(frame: PoseFrame) -> bytes:
    values: list[float] = []
    for name in LINKS:
        pose = frame.links.pose(name)
        q = pose.rotation.q
        if abs(float(q @ q) - 1.0) > 2 * QUAT_NORM_TOL:
            raise NonUnitQuaternion(f"{name} quaternion norm^2 {float(q @ q):.9f}")
        values.extend(pose.translation.tolist())
        values.extend(q.tolist())
    return FRAME_STRUCT.pack(MAGIC, VERSION, frame.seq, frame.timestamp_ns, *values)


def decode_frame(buf: bytes) -> PoseFrame:
    if len(buf) < FRAME_SIZE:
        raise ShortRead(f"{len(buf)} bytes, need {FRAME_SIZE}")
    magic, version, seq, timestamp_ns, *values = FRAME_STRUCT.unpack(buf[:FRAME_SIZE])
    if magic != MAGIC:
        raise BadMagic(f"{magic!r}")
    if version != VERSION:
        raise BadVersion(f"version {version}, expected {VERSION}")
    poses = {}
    for i, name in enumerate(LINKS):
        chunk = values[i * 7 : i * 7 + 7]
        t = np.asarray(chunk[:3])
        q = np.asarray(chunk[3:])
        norm = float(np.linalg.norm(q))
        if abs(norm - 1.0) > QUAT_NORM_TOL:
            raise NonUnitQuaternion(f"{name} quaternion norm {norm:.9f}")
        poses[name] = Pose(Rotation(q), t)
    return PoseFrame(seq=seq, timestamp_ns=timestamp_ns, links=LinkSet(**poses))


@dataclass(frozen=True)
class MailboxRead:
    """One read result; frame is None when nothing new is available."""

    frame: PoseFrame | None
    staleness_ns: int | None


class LatestValueMailbox:
    """Single-slot, non-blocking channel: writes replace, reads take the newest.

    The consumer side never observes a sequence regression: if a reordered
    writer stores a frame older than one already read, read reports no new
    frame instead of handing the stale frame out. Reads of the same frame
    repeat (with growing staleness); write cost is independent of reader
    behavior.
    """

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._frame: PoseFrame | None = None
        self._last_read_seq: int | None = None
        self.writes = 0

    def write(self, frame: PoseFrame) -> None:
        with self._lock:
            self._frame = frame
            self.writes += 1

    def read(self, now_ns: int | None = None) -> MailboxRead:
        with self._lock:
            frame = self._frame
            if frame is None:
                return MailboxRead(None, None)
            if self._last_read_seq is not None and frame.seq < self._last_read_seq:
                return MailboxRead(None, None)
            self._last_read_seq = frame.seq
        staleness = None if now_ns is None else now_ns - frame.timestamp_ns
        return MailboxRead(frame, staleness)
