"""Container formats round-trip exactly and refuse malformed input."""

import numpy as np
import pytest

from extremctl.fileio import (
    dump_json,
    load_json,
    read_flow,
    read_flow_dir,
    read_frame_dir,
    read_linkset_jsonl,
    read_pgm,
    read_signal_csv,
    write_flow,
    write_linkset_jsonl,
    write_pgm,
    write_signal_csv,
)
from extremctl.latency import FlowField, MotionSignal
from extremctl.mapping import LinkSet
from extremctl.se3 import Pose, Rotation
from extremctl.wire import BadMagic, ShortRead


def test_flow_round_trip(tmp_path):
    # quarter-steps are exactly representable in the f32 planes
    rng = np.random.default_rng(0)
    u = np.round(rng.uniform(-4, 4, (12, 10)) * 4.0) / 4.0
    v = np.round(rng.uniform(-4, 4, (12, 10)) * 4.0) / 4.0
    path = tmp_path / "field.xflw"
    write_flow(path, FlowField(u=u, v=v))
    back = read_flow(path)
    assert np.array_equal(back.u, u)
    assert np.array_equal(back.v, v)


def test_flow_rejects_bad_magic_and_truncation(tmp_path):
    path = tmp_path / "bad.xflw"
    path.write_bytes(b"NOPE" + bytes(12))
    with pytest.raises(BadMagic):
        read_flow(path)
    good = tmp_path / "short.xflw"
    write_flow(good, FlowField(u=np.zeros((4, 4)), v=np.zeros((4, 4))))
    good.write_bytes(good.read_bytes()[:-8])
    with pytest.raises(ShortRead):
        read_flow(good)
    (tmp_path / "tiny.xflw").write_bytes(b"XF")
    with pytest.raises(ShortRead):
        read_flow(tmp_path / "tiny.xflw")


def test_pgm_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    img = rng.integers(0, 256, (24, 17)).astype(np.uint8)
    path = tmp_path / "frame.pgm"
    write_pgm(path, img)
    assert np.array_equal(read_pgm(path), img)


def test_pgm_clips_and_rounds(tmp_path):
    path = tmp_path / "f.pgm"
    write_pgm(path, np.array([[-3.0, 12.6, 300.0]]))
    assert read_pgm(path).tolist() == [[0, 13, 255]]


def test_pgm_rejects_other_formats(tmp_path):
    path = tmp_path / "f.ppm"
    path.write_bytes(b"P6\n2 2\n255\n" + bytes(12))
    with pytest.raises(ValueError):
        read_pgm(path)


def test_frame_dir_sorted(tmp_path):
    for k, fill in ((1, 10), (2, 20), (10, 30)):
        write_pgm(tmp_path / f"{k:04d}.pgm", np.full((4, 4), fill))
    frames = read_frame_dir(tmp_path)
    assert [int(f[0, 0]) for f in frames] == [10, 20, 30]
    with pytest.raises(ValueError):
        read_frame_dir(tmp_path, pattern="*.missing")


def test_flow_dir_sorted(tmp_path):
    for k in range(3):
        write_flow(
            tmp_path / f"{k:03d}.xflw",
            FlowField(u=np.full((2, 2), float(k)), v=np.zeros((2, 2))),
        )
    flows = read_flow_dir(tmp_path)
    assert [f.u[0, 0] for f in flows] == [0.0, 1.0, 2.0]


def test_signal_csv_round_trip(tmp_path):
    rng = np.random.default_rng(2)
    sig = MotionSignal(rng.normal(size=50), 60.0, t0=0.5)
    path = tmp_path / "sig.csv"
    write_signal_csv(path, sig)
    back = read_signal_csv(path)
    assert np.array_equal(back.samples, sig.samples)
    assert back.rate_hz == pytest.approx(60.0, rel=1e-9)
    assert back.t0 == pytest.approx(0.5, abs=1e-12)


def test_signal_csv_rejects_nonuniform(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("t_s,value\n0.0,1.0\n0.1,2.0\n0.35,3.0\n")
    with pytest.raises(ValueError):
        read_signal_csv(path)
    (tmp_path / "empty.csv").write_text("")
    with pytest.raises(ValueError):
        read_signal_csv(tmp_path / "empty.csv")


def test_linkset_jsonl_round_trip(tmp_path):
    rng = np.random.default_rng(3)

    def pose():
        vec = rng.normal(size=4)
        return Pose(Rotation(vec / np.linalg.norm(vec)), rng.normal(size=3))

    names = ("pelvis", "torso", "left_hand", "right_hand", "left_foot", "right_foot")
    frames = [
        (1_000_000 * k, LinkSet(**{n: pose() for n in names})) for k in range(4)
    ]
    path = tmp_path / "stream.jsonl"
    write_linkset_jsonl(path, frames)
    back = read_linkset_jsonl(path)
    assert len(back) == 4
    for (ts_a, links_a), (ts_b, links_b) in zip(frames, back):
        assert ts_a == ts_b
        for name in names:
            pa, pb = getattr(links_a, name), getattr(links_b, name)
            assert np.array_equal(pa.translation, pb.translation)
            assert np.array_equal(pa.rotation.q, pb.rotation.q)


def test_json_deterministic(tmp_path):
    obj = {"b": [1.5, 2.25], "a": {"z": 1, "m": None}}
    p1, p2 = tmp_path / "one.json", tmp_path / "two.json"
    dump_json(p1, obj)
    dump_json(p2, obj)
    assert p1.read_bytes() == p2.read_bytes()
    assert p1.read_text().endswith("\n")
    assert load_json(p1) == obj
