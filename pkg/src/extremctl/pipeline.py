"""End-to-end teleoperation pipeline harness on a virtual clock.

One simulated run wires the whole stack together: a motion generator emits
human link frames at the capture rate, each frame travels through the
353-byte codec and a delay/jitter/drop channel into a latest-value mailbox,
the control loop reads the newest frame at the control rate, retargets it,
derives a joint target (held zero-order), and the plant integrates at the
low-level rate. Everything runs single-threaded on a virtual clock, so a
fixed seed reproduces the record bit for bit.

The harness drives one decoupled joint from an extremity signal instead of
a learned whole-body policy; that isolates transport, hold, and controller
response, the quantities the latency budget decomposes.
"""

from __future__ import annotations

import heapq
import math
import socket
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ExtremControlError
from .impedance import TWO_PI
from .latency import MotionSignal, estimate_lag
from .mapping import CalibrationProfile, LinkSet, RobotModel, calibrate, map_frame
from .plant import DecoupledLinear, GainSchedule, JointState, equivalent_delay, step
from .se3 import Pose
from .wire import LatestValueMailbox, PoseFrame, decode_frame, encode_frame


class ConfigInvalid(ExtremControlError):
    """Pipeline configuration violates a rate or probability constraint."""


class InsufficientPoints(ExtremControlError):
    """Latency fit needs at least 3 sweep points."""


def default_robot_model() -> RobotModel:
    return RobotModel(
        pelvis_height=0.72,
        pelvis_to_torso=(0.0, 0.0, 0.25),
        shoulder_offset={"left": (0.0, 0.16, 0.04), "right": (0.0, -0.16, 0.04)},
        arm_length={"left": 0.45, "right": 0.45},
        neutral_foot={"left": (0.0, 0.09, 0.015), "right": (0.0, -0.09, 0.015)},
    )


def default_human_neutral() -> LinkSet:
    """A plausible performer standing in the calibration pose."""
    human = RobotModel(
        pelvis_height=0.95,
        pelvis_to_torso=(0.0, 0.0, 0.30),
        shoulder_offset={"left": (0.0, 0.20, 0.05), "right": (0.0, -0.20, 0.05)},
        arm_length={"left": 0.55, "right": 0.55},
        neutral_foot={"left": (0.0, 0.10, 0.02), "right": (0.0, -0.10, 0.02)},
    )
    return human.neutral_links()


@dataclass(frozen=True)
class MotionSpec:
    """Reciprocating extremity motion: one link oscillates along one axis."""

    amplitude_m: float = 0.15
    frequency_hz: float = 0.5
    link: str = "right_hand"
    axis: int = 2

    def __post_init__(self) -> None:
        if self.amplitude_m <= 0 or self.frequency_hz <= 0:
            raise ValueError("amplitude and frequency must be positive")
        if self.axis not in (0, 1, 2):
            raise ValueError(f"axis {self.axis} not in (0, 1, 2)")

    def displacement(self, t: float) -> float:
        return self.amplitude_m * math.sin(TWO_PI * self.frequency_hz * t)

    def to_dict(self) -> dict:
        return {
            "amplitude_m": self.amplitude_m,
            "frequency_hz": self.frequency_hz,
            "link": self.link,
            "axis": self.axis,
        }

    @staticmethod
    def from_dict(d: dict) -> "MotionSpec":
        return MotionSpec(
            amplitude_m=float(d.get("amplitude_m", 0.15)),
            frequency_hz=float(d.get("frequency_hz", 0.5)),
            link=str(d.get("link", "right_hand")),
            axis=int(d.get("axis", 2)),
        )


@dataclass(frozen=True)
class PipelineConfig:
    capture_rate_hz: float = 120.0
    control_rate_hz: float = 50.0
    lowlevel_rate_hz: float = 1000.0
    network_delay_s: float = 0.0
    jitter_std_s: float = 0.0
    drop_prob: float = 0.0
    duration_s: float = 12.0
    seed: int = 0
    omega_n: float = 10.0
    zeta: float = 1.0
    eta: float = 0.9
    plant_inertia: float = 1.0
    target_scale: float = 5.0  # rad of joint motion per meter of extremity motion
    motion: MotionSpec = field(default_factory=MotionSpec)
    profile: CalibrationProfile | None = None  # default: built-in human + robot

    def __post_init__(self) -> None:
        if min(self.capture_rate_hz, self.control_rate_hz, self.lowlevel_rate_hz) <= 0:
            raise ConfigInvalid("all rates must be positive")
        ratio = self.lowlevel_rate_hz / self.control_rate_hz
        if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
            raise ConfigInvalid(
                f"lowlevel_rate {self.lowlevel_rate_hz} not a multiple of "
                f"control_rate {self.control_rate_hz}"
            )
        if not (0.0 <= self.drop_prob < 1.0):
            raise ConfigInvalid(f"drop_prob {self.drop_prob} outside [0, 1)")
        if self.duration_s <= 0 or self.network_delay_s < 0 or self.jitter_std_s < 0:
            raise ConfigInvalid("duration must be positive; delay and jitter non-negative")
        if self.omega_n <= 0 or self.plant_inertia <= 0:
            raise ConfigInvalid("omega_n and plant_inertia must be positive")
        if not (0.0 <= self.eta <= 1.0):
            raise ConfigInvalid(f"eta {self.eta} outside [0, 1]")

    def resolve_profile(self) -> CalibrationProfile:
        if self.profile is not None:
            return self.profile
        return calibrate(default_human_neutral(), default_robot_model())

    def to_dict(self) -> dict:
        return {
            "capture_rate_hz": self.capture_rate_hz,
            "control_rate_hz": self.control_rate_hz,
            "lowlevel_rate_hz": self.lowlevel_rate_hz,
            "network_delay_s": self.network_delay_s,
            "jitter_std_s": self.jitter_std_s,
            "drop_prob": self.drop_prob,
            "duration_s": self.duration_s,
            "seed": self.seed,
            "omega_n": self.omega_n,
            "zeta": self.zeta,
            "eta": self.eta,
            "plant_inertia": self.plant_inertia,
            "target_scale": self.target_scale,
            "motion": self.motion.to_dict(),
        }

    @staticmethod
    def from_dict(d: dict) -> "PipelineConfig":
        kwargs = {k: d[k] for k in d if k not in ("motion", "profile")}
        if "motion" in d:
            kwargs["motion"] = MotionSpec.from_dict(d["motion"])
        if "profile" in d and d["profile"] is not None:
            kwargs["profile"] = CalibrationProfile.from_dict(d["profile"])
        return PipelineConfig(**kwargs)


@dataclass
class ConsumedFrame:
    """Transport bookkeeping for one frame actually used by the control loop."""

    seq: int
    emit_ns: int
    read_ns: int

    @property
    def transport_s(self) -> float:
        return (self.read_ns - self.emit_ns) * 1e-9


@dataclass
class PipelineRecord:
    """Low-level-rate trajectories plus transport bookkeeping."""

    t: np.ndarray
    human_signal: np.ndarray  # true extremity displacement, meters
    q_target_held: np.ndarray  # rad
    q: np.ndarray  # rad
    consumed: list[ConsumedFrame]
    staleness_ns: list[int]
    frames_emitted: int
    config: PipelineConfig

    @property
    def control_dt(self) -> float:
        return 1.0 / self.config.control_rate_hz


def run_pipeline(config: PipelineConfig) -> PipelineRecord:
    """Simulate the full capture -> transport -> control -> plant path.

    Returns trajectories sampled at the low-level rate. Deterministic for a
    fixed config (jitter and drops come from one seeded generator; all
    clocks are virtual).
    """
    rng = np.random.default_rng(config.seed)
    profile = config.resolve_profile()
    motion = config.motion

    # Motion always plays out around the built-in performer's neutral; a
    # custom profile is applied to those frames as-is.
    neutral = default_human_neutral()
    base_pose = neutral.pose(motion.link)
    neutral_target = map_frame(profile, neutral).pose(motion.link).translation[motion.axis]

    def human_links(t: float) -> LinkSet:
        offset = np.zeros(3)
        offset[motion.axis] = motion.displacement(t)
        return neutral.with_pose(
            motion.link, Pose(base_pose.rotation, base_pose.translation + offset)
        )

    dt = 1.0 / config.lowlevel_rate_hz
    substeps = int(round(config.lowlevel_rate_hz / config.control_rate_hz))
    control_dt = substeps * dt
    n_steps = int(round(config.duration_s * config.lowlevel_rate_hz))

    plant = DecoupledLinear(inertia=np.array([config.plant_inertia]), physics_dt=dt)
    gains = GainSchedule.from_impedance(
        m_eff=np.array([config.plant_inertia]),
        omega_n=config.omega_n,
        zeta=config.zeta,
        eta=config.eta,
    )
    state = JointState.at_rest(np.zeros(1))
    mailbox = LatestValueMailbox()

    capture_dt = 1.0 / config.capture_rate_hz
    next_capture = 0.0
    seq = 0
    deliveries: list[tuple[float, int, bytes]] = []
    consumed: list[ConsumedFrame] = []
    staleness: list[int] = []

    held_q = np.zeros(1)
    held_qd = np.zeros(1)
    prev_target = 0.0
    last_seq_used = -1

    t_axis = np.empty(n_steps)
    rec_human = np.empty(n_steps)
    rec_target = np.empty(n_steps)
    rec_q = np.empty(n_steps)

    for k in range(n_steps):
        t = k * dt

        # Capture side: emit every frame due by now through the channel.
        while next_capture <= t + 1e-12:
            frame = PoseFrame(
                seq=seq,
                timestamp_ns=int(round(next_capture * 1e9)),
                links=human_links(next_capture),
            )
            payload = encode_frame(frame)
            jitter = config.jitter_std_s * float(rng.standard_normal())
            delay = max(0.0, config.network_delay_s + jitter)
            dropped = float(rng.random()) < config.drop_prob
            if not dropped:
                heapq.heappush(deliveries, (next_capture + delay, seq, payload))
            seq += 1
            next_capture += capture_dt

        # Transport side: anything whose delay elapsed lands in the mailbox.
        while deliveries and deliveries[0][0] <= t + 1e-12:
            _, _, payload = heapq.heappop(deliveries)
            mailbox.write(decode_frame(payload))

        # Control tick: read newest, retarget, refresh held targets.
        if k % substeps == 0:
            now_ns = int(round(t * 1e9))
            result = mailbox.read(now_ns)
            target = prev_target
            if result.frame is not None:
                mapped = map_frame(profile, result.frame.links)
                pos = mapped.pose(motion.link).translation[motion.axis]
                target = config.target_scale * (pos - neutral_target)
                if result.frame.seq != last_seq_used:
                    consumed.append(
                        ConsumedFrame(result.frame.seq, result.frame.timestamp_ns, now_ns)
                    )
                    last_seq_used = result.frame.seq
                staleness.append(result.staleness_ns)
            held_qd = np.array([(target - prev_target) / control_dt])
            held_q = np.array([target])
            prev_target = target

        state = step(plant, state, held_q, held_qd, gains)
        t_post = t + dt
        t_axis[k] = t_post
        rec_human[k] = motion.displacement(t_post)
        rec_target[k] = held_q[0]
        rec_q[k] = state.q[0]

    return PipelineRecord(
        t=t_axis,
        human_signal=rec_human,
        q_target_held=rec_target,
        q=rec_q,
        consumed=consumed,
        staleness_ns=staleness,
        frames_emitted=seq,
        config=config,
    )


@dataclass
class LatencyBudget:
    """Where the milliseconds went for one pipeline run."""

    eta: float
    transport_ms: float  # frame emit -> control-loop read, averaged
    hold_ms: float  # half the control period (zero-order hold)
    control_ms: float  # held target -> plant response, measured
    overall_ms: float  # true human motion -> plant response, measured
    control_confidence: float
    overall_confidence: float
    theory_control_ms: float  # 2 (1 - eta) / omega_n

    @property
    def components_sum_ms(self) -> float:
        return self.transport_ms + self.hold_ms + self.control_ms

    def to_dict(self) -> dict:
        return {
            "eta": self.eta,
            "transport_ms": self.transport_ms,
            "hold_ms": self.hold_ms,
            "control_ms": self.control_ms,
            "overall_ms": self.overall_ms,
            "components_sum_ms": self.components_sum_ms,
            "control_confidence": self.control_confidence,
            "overall_confidence": self.overall_confidence,
            "theory_control_ms": self.theory_control_ms,
        }


def latency_budget(record: PipelineRecord, settle_s: float = 2.0) -> LatencyBudget:
    """Decompose one run into transport + hold + controller response.

    The overall figure is measured independently (true extremity motion vs
    realized joint) and should agree with the component sum to within the
    accounting slack of the hold-time model.
    """
    cfg = record.config
    rate = cfg.lowlevel_rate_hz
    keep = record.t >= settle_s
    if np.count_nonzero(keep) < int(2.0 * rate):
        raise ValueError("record too short after settling trim; extend duration_s")
    if not record.consumed:
        raise ValueError("no frames consumed; transport never delivered")

    human = MotionSignal(record.human_signal[keep], rate)
    target = MotionSignal(record.q_target_held[keep], rate)
    q = MotionSignal(record.q[keep], rate)

    control = estimate_lag(target, q, max_lag_s=1.0)
    overall = estimate_lag(human, q, max_lag_s=1.0)
    transport_s = float(np.mean([c.transport_s for c in record.consumed]))

    gains = GainSchedule.from_impedance(
        m_eff=np.array([cfg.plant_inertia]), omega_n=cfg.omega_n, zeta=cfg.zeta, eta=cfg.eta
    )
    return LatencyBudget(
        eta=cfg.eta,
        transport_ms=transport_s * 1e3,
        hold_ms=0.5 * record.control_dt * 1e3,
        control_ms=control.lag_s * 1e3,
        overall_ms=overall.lag_s * 1e3,
        control_confidence=control.confidence,
        overall_confidence=overall.confidence,
        theory_control_ms=float(equivalent_delay(gains)[0]) * 1e3,
    )


def sweep_budgets(config: PipelineConfig, etas) -> list[LatencyBudget]:
    """One pipeline run + budget per feedforward ratio, same seed and motion."""
    return [latency_budget(run_pipeline(replace(config, eta=float(e)))) for e in etas]


@dataclass
class LatencyFit:
    """Least-squares line overall = slope * control + intercept."""

    slope: float
    intercept_ms: float
    r_squared: float

    def to_dict(self) -> dict:
        return {
            "slope": self.slope,
            "intercept_ms": self.intercept_ms,
            "r_squared": self.r_squared,
        }


def fit_latency_line(control_ms, overall_ms) -> LatencyFit:
    """Fit overall-vs-control latency across a feedforward sweep."""
    x = np.asarray(control_ms, dtype=float)
    y = np.asarray(overall_ms, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("control_ms and overall_ms must be equal-length 1-d")
    if x.size < 3:
        raise InsufficientPoints(f"{x.size} points, need at least 3")
    coeffs, *_ = np.linalg.lstsq(np.column_stack([x, np.ones_like(x)]), y, rcond=None)
    slope, intercept = float(coeffs[0]), float(coeffs[1])
    resid = y - (slope * x + intercept)
    sst = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if sst <= 1e-30 else 1.0 - float(np.sum(resid**2)) / sst
    return LatencyFit(slope=slope, intercept_ms=intercept, r_squared=r2)


class UdpLink:
    """Loopback datagram transport speaking the 353-byte frame codec.

    The receiver socket is non-blocking; drain_into empties whatever has
    arrived into a mailbox and reports the count. Integration aid, not part
    of the deterministic simulation path.
    """

    def __init__(self, host: str = "127.0.0.1", port: int = 0) -> None:
        self._rx = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        self._rx.bind((host, port))
        self._rx.setblocking(False)
        self._tx = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        self.address = self._rx.getsockname()

    def send(self, frame: PoseFrame) -> None:
        self._tx.sendto(encode_frame(frame), self.address)

    def drain_into(self, mailbox: LatestValueMailbox) -> int:
        count = 0
        while True:
            try:
                payload = self._rx.recv(4096)
            except BlockingIOError:
                return count
            mailbox.write(decode_frame(payload))
            count += 1

    def close(self) -> None:
        self._rx.close()
        self._tx.close()

    def __enter__(self) -> "UdpLink":
        return self

    def __exit__(self, *exc) -> None:
        self.close()
