"""Frame codec layout, bit-exact round trips, malformed-buffer refusal,
and latest-value mailbox semantics."""

import numpy as np
import pytest

from extremctl.mapping import LINKS, LinkSet
from extremctl.se3 import Pose, Rotation
from extremctl.wire import (
    FRAME_SIZE,
    BadMagic,
    BadVersion,
    LatestValueMailbox,
    NonUnitQuaternion,
    PoseFrame,
    ShortRead,
    decode_frame,
    encode_frame,
)


def random_frame(rng, seq=0, timestamp_ns=0):
    poses = {}
    for name in LINKS:
        vec = rng.normal(size=4)
        poses[name] = Pose(Rotation(vec / np.linalg.norm(vec)), rng.normal(size=3))
    return PoseFrame(seq=seq, timestamp_ns=timestamp_ns, links=LinkSet(**poses))


def test_frame_is_353_bytes():
    assert FRAME_SIZE == 353
    rng = np.random.default_rng(0)
    assert len(encode_frame(random_frame(rng))) == 353


def test_round_trip_bit_exact():
    rng = np.random.default_rng(1)
    for k in range(200):
        frame = random_frame(rng, seq=k, timestamp_ns=k * 8_333_333)
        wire = encode_frame(frame)
        back = decode_frame(wire)
        assert back.seq == frame.seq
        assert back.timestamp_ns == frame.timestamp_ns
        assert encode_frame(back) == wire
        for name in LINKS:
            assert np.array_equal(
                back.links.pose(name).translation, frame.links.pose(name).translation
            )
            assert np.array_equal(
                back.links.pose(name).rotation.q, frame.links.pose(name).rotation.q
            )


def test_decode_rejects_wrong_magic():
    rng = np.random.default_rng(2)
    wire = bytearray(encode_frame(random_frame(rng)))
    wire[:4] = b"YCTL"
    with pytest.raises(BadMagic):
        decode_frame(bytes(wire))


def test_decode_rejects_wrong_version():
    rng = np.random.default_rng(3)
    wire = bytearray(encode_frame(random_frame(rng)))
    wire[4] = 9
    with pytest.raises(BadVersion):
        decode_frame(bytes(wire))


def test_decode_rejects_non_unit_quaternion():
    import struct

    rng = np.random.default_rng(4)
    wire = bytearray(encode_frame(random_frame(rng)))
    # first link quaternion sits after the 17-byte header + 24-byte translation
    struct.pack_into("<4d", wire, 17 + 24, 0.5, 0.0, 0.0, 0.0)
    with pytest.raises(NonUnitQuaternion):
        decode_frame(bytes(wire))


def test_decode_rejects_short_buffer():
    rng = np.random.default_rng(5)
    wire = encode_frame(random_frame(rng))
    with pytest.raises(ShortRead):
        decode_frame(wire[:100])


def test_frame_field_ranges():
    rng = np.random.default_rng(6)
    links = random_frame(rng).links
    with pytest.raises(ValueError):
        PoseFrame(seq=-1, timestamp_ns=0, links=links)
    with pytest.raises(ValueError):
        PoseFrame(seq=2**32, timestamp_ns=0, links=links)
    with pytest.raises(ValueError):
        PoseFrame(seq=0, timestamp_ns=-1, links=links)


def test_mailbox_empty_and_replace():
    rng = np.random.default_rng(7)
    box = LatestValueMailbox()
    assert box.read().frame is None

    first = random_frame(rng, seq=1, timestamp_ns=1000)
    second = random_frame(rng, seq=2, timestamp_ns=2000)
    box.write(first)
    box.write(second)
    got = box.read(now_ns=5000)
    assert got.frame.seq == 2
    assert got.staleness_ns == 3000
    # same frame repeats on the next read, staleness keeps growing
    again = box.read(now_ns=9000)
    assert again.frame.seq == 2
    assert again.staleness_ns == 7000


def test_mailbox_guards_sequence_regression():
    rng = np.random.default_rng(8)
    box = LatestValueMailbox()
    box.write(random_frame(rng, seq=5, timestamp_ns=5000))
    assert box.read().frame.seq == 5
    # a late-arriving older frame must not surface after seq 5 was seen
    box.write(random_frame(rng, seq=3, timestamp_ns=3000))
    assert box.read().frame is None
    box.write(random_frame(rng, seq=6, timestamp_ns=6000))
    assert box.read().frame.seq == 6


def test_mailbox_counts_writes():
    rng = np.random.default_rng(9)
    box = LatestValueMailbox()
    for k in range(4):
        box.write(random_frame(rng, seq=k))
    assert box.writes == 4
