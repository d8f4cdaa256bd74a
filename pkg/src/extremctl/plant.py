"""Joint-space plants under PD control with velocity feedforward.

The control law per joint is

    tau = kp * (q_t - q) - kd * qdot + eta * kd * qdot_t

with gains derived from a target impedance: kp = M * omega_n^2,
kd = 2 * zeta * M * omega_n. eta in [0, 1] trades tracking delay against
overshoot; the closed loop (zeta = 1) behaves like

    H(s) = (omega_n^2 + 2 eta omega_n s) / (s^2 + 2 omega_n s + omega_n^2)

whose low-frequency group delay is 2 (1 - eta) / omega_n.

Two plants are provided: independent linear joints (q_dd = tau / M) and a
planar serial chain with full Lagrangian dynamics (configuration-dependent
mass matrix, Coriolis/centrifugal terms, optional gravity). Integration is
semi-implicit Euler at a fixed physics step; control targets are held
zero-order between control ticks.

State arrays, targets, and gains all broadcast over a leading batch
dimension, so parallel environments step in lockstep.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence, Union

import numpy as np

from .errors import ExtremControlError

QDOT_BLOWUP = 1e6


class NumericalBlowup(ExtremControlError):
    """Integration produced non-finite state or |qdot| beyond 1e6 rad/s."""


class BadAlpha(ExtremControlError):
    """Low-pass coefficient outside (0, 1]."""


class Infeasible(ExtremControlError):
    """No feedforward ratio in [0, 1] satisfies the requested bound."""


def lowpass(prev: np.ndarray, sample: np.ndarray, alpha: float) -> np.ndarray:
    """First-order filter update prev + alpha * (sample - prev).

    alpha = 1 is a passthrough; alpha outside (0, 1] raises BadAlpha.
    """
    if not (0.0 < alpha <= 1.0):
        raise BadAlpha(f"alpha {alpha} outside (0, 1]")
    return prev + alpha * (np.asarray(sample) - prev)


@dataclass(frozen=True, eq=False)
class GainSchedule:
    """Per-joint PD gains with a feedforward ratio and its enable mask.

    kp in N*m/rad, kd in N*m*s/rad. omega_n/zeta record the impedance the
    gains were derived from (needed by the frequency-domain helpers); they
    are None for raw hand-set gains.
    """

    kp: np.ndarray
    kd: np.ndarray
    eta: np.ndarray
    omega_n: np.ndarray | None = None
    zeta: np.ndarray | None = None
    feedforward_enabled: np.ndarray | None = None

    def __post_init__(self) -> None:
        kp = np.atleast_1d(np.asarray(self.kp, dtype=float))
        kd = np.broadcast_to(np.asarray(self.kd, dtype=float), kp.shape).copy()
        eta = np.broadcast_to(np.asarray(self.eta, dtype=float), kp.shape).copy()
        if np.any(kp < 0) or np.any(kd < 0):
            raise ValueError("gains must be non-negative")
        if np.any(eta < 0) or np.any(eta > 1):
            raise ValueError(f"eta {eta} outside [0, 1]")
        object.__setattr__(self, "kp", kp)
        object.__setattr__(self, "kd", kd)
        object.__setattr__(self, "eta", eta)
        for name in ("omega_n", "zeta"):
            v = getattr(self, name)
            if v is not None:
                object.__setattr__(
                    self, name, np.broadcast_to(np.asarray(v, dtype=float), kp.shape).copy()
                )
        mask = self.feedforward_enabled
        mask = (
            np.ones(kp.shape, dtype=bool)
            if mask is None
            else np.broadcast_to(np.asarray(mask, dtype=bool), kp.shape).copy()
        )
        object.__setattr__(self, "feedforward_enabled", mask)

    @staticmethod
    def from_impedance(
        m_eff: Union[float, np.ndarray],
        omega_n: Union[float, np.ndarray],
        zeta: Union[float, np.ndarray] = 1.0,
        eta: Union[float, np.ndarray] = 0.0,
        feedforward_enabled: np.ndarray | None = None,
    ) -> "GainSchedule":
        """Gains realizing the target impedance: kp = M w^2, kd = 2 zeta M w."""
        m_eff = np.atleast_1d(np.asarray(m_eff, dtype=float))
        if np.any(m_eff <= 0):
            raise ValueError(f"effective inertia {m_eff} must be positive")
        omega_n = np.broadcast_to(np.asarray(omega_n, dtype=float), m_eff.shape)
        zeta_b = np.broadcast_to(np.asarray(zeta, dtype=float), m_eff.shape)
        return GainSchedule(
            kp=m_eff * omega_n**2,
            kd=2.0 * zeta_b * m_eff * omega_n,
            eta=np.broadcast_to(np.asarray(eta, dtype=float), m_eff.shape),
            omega_n=omega_n,
            zeta=zeta_b,
            feedforward_enabled=feedforward_enabled,
        )

    @property
    def n_joints(self) -> int:
        return self.kp.shape[0]

    def effective_eta(self) -> np.ndarray:
        return np.where(self.feedforward_enabled, self.eta, 0.0)

    def with_joint(self, j: int, *, kp: float | None = None, kd: float | None = None) -> "GainSchedule":
        new_kp, new_kd = self.kp.copy(), self.kd.copy()
        if kp is not None:
            new_kp[j] = kp
        if kd is not None:
            new_kd[j] = kd
        return replace(self, kp=new_kp, kd=new_kd)

    def to_dict(self) -> dict:
        d = {
            "kp_nm_per_rad": self.kp.tolist(),
            "kd_nms_per_rad": self.kd.tolist(),
            "eta": self.eta.tolist(),
            "feedforward_enabled": self.feedforward_enabled.tolist(),
        }
        if self.omega_n is not None:
            d["omega_n_rad_s"] = self.omega_n.tolist()
        if self.zeta is not None:
            d["zeta"] = self.zeta.tolist()
        return d

    @staticmethod
    def from_dict(d: dict) -> "GainSchedule":
        return GainSchedule(
            kp=np.asarray(d["kp_nm_per_rad"], dtype=float),
            kd=np.asarray(d["kd_nms_per_rad"], dtype=float),
            eta=np.asarray(d["eta"], dtype=float),
            omega_n=np.asarray(d["omega_n_rad_s"], dtype=float) if "omega_n_rad_s" in d else None,
            zeta=np.asarray(d["zeta"], dtype=float) if "zeta" in d else None,
            feedforward_enabled=np.asarray(d["feedforward_enabled"], dtype=bool)
            if "feedforward_enabled" in d
            else None,
        )


@dataclass
class JointState:
    """Joint-space state arrays, shape (..., n_joints)."""

    q: np.ndarray
    qdot: np.ndarray
    tau: np.ndarray
    filtered_q: np.ndarray

    @staticmethod
    def at_rest(q0: np.ndarray) -> "JointState":
        q0 = np.asarray(q0, dtype=float)
        return JointState(q0.copy(), np.zeros_like(q0), np.zeros_like(q0), q0.copy())


@dataclass(frozen=True)
class DecoupledLinear:
    """Independent double-integrator joints: q_dd = tau / inertia."""

    inertia: np.ndarray  # kg*m^2 per joint
    physics_dt: float = 1e-3
    joint_limits: np.ndarray | None = None  # (n, 2) rad, optional clamp

    def __post_init__(self) -> None:
        inertia = np.atleast_1d(np.asarray(self.inertia, dtype=float))
        if np.any(inertia <= 0):
            raise ValueError(f"inertia {inertia} must be positive")
        object.__setattr__(self, "inertia", inertia)
        _check_dt(self.physics_dt)

    @property
    def n_joints(self) -> int:
        return self.inertia.shape[0]

    def accel(self, q: np.ndarray, qdot: np.ndarray, tau: np.ndarray) -> np.ndarray:
        return tau / self.inertia

    def to_dict(self) -> dict:
        d = {"kind": "decoupled_linear", "inertia_kg_m2": self.inertia.tolist(),
             "physics_dt_s": self.physics_dt}
        if self.joint_limits is not None:
            d["joint_limits_rad"] = np.asarray(self.joint_limits).tolist()
        return d


@dataclass(frozen=True)
class PlanarChain:
    """Serial planar manipulator with full Lagrangian dynamics.

    Links are uniform rods by default (com at mid-length, rod inertia
    m l^2 / 12 about the com); com offsets and com inertias can be given
    explicitly. Joint angles are relative; gravity (m/s^2, pulling along
    -y of the plane) defaults to zero.
    """

    masses: np.ndarray  # kg per link
    lengths: np.ndarray  # m per link
    com: np.ndarray | None = None  # m from the parent joint, default lengths/2
    inertia_com: np.ndarray | None = None  # kg*m^2 about the com, default rod
    gravity: float = 0.0
    physics_dt: float = 1e-3
    joint_limits: np.ndarray | None = None

    # precomputed coefficient tables (set in __post_init__)
    _beta: np.ndarray = field(init=False, repr=False, compare=False)
    _inertia_diag: np.ndarray = field(init=False, repr=False, compare=False)
    _gamma: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        m = np.atleast_1d(np.asarray(self.masses, dtype=float))
        l = np.atleast_1d(np.asarray(self.lengths, dtype=float))
        if m.shape != l.shape or m.ndim != 1:
            raise ValueError("masses and lengths must be 1-d arrays of equal length")
        if np.any(m <= 0) or np.any(l <= 0):
            raise ValueError("masses and lengths must be positive")
        com = l / 2.0 if self.com is None else np.asarray(self.com, dtype=float)
        icom = (
            m * l**2 / 12.0 if self.inertia_com is None else np.asarray(self.inertia_com, dtype=float)
        )
        _check_dt(self.physics_dt)
        object.__setattr__(self, "masses", m)
        object.__setattr__(self, "lengths", l)
        object.__setattr__(self, "com", com)
        object.__setattr__(self, "inertia_com", icom)

        # Kinetic energy in absolute link angles th_i = sum_{j<=i} q_j is
        #   T = 1/2 sum_jk (beta_jk cos(th_j - th_k) + I_j delta_jk) thd_j thd_k
        # with beta_jk = sum_{i >= max(j,k)} m_i a_j^i a_k^i, where a_j^i is
        # l_j for j < i and com_i for j = i (lever arms to link i's com).
        n = m.shape[0]
        arm = np.zeros((n, n))  # arm[i, j] = a_j^(i)
        for i in range(n):
            arm[i, :i] = l[:i]
            arm[i, i] = com[i]
        beta = np.einsum("i,ij,ik->jk", m, arm, arm)
        gamma = np.einsum("i,ij->j", m, arm)  # gravity lever sums
        object.__setattr__(self, "_beta", beta)
        object.__setattr__(self, "_inertia_diag", icom)
        object.__setattr__(self, "_gamma", gamma)

    @property
    def n_joints(self) -> int:
        return self.masses.shape[0]

    def _theta_terms(self, q: np.ndarray, qdot: np.ndarray):
        th = np.cumsum(q, axis=-1)
        thd = np.cumsum(qdot, axis=-1)
        diff = th[..., :, None] - th[..., None, :]
        mass = self._beta * np.cos(diff)
        mass[..., np.arange(self.n_joints), np.arange(self.n_joints)] += self._inertia_diag
        return th, thd, mass, diff

    def accel(self, q: np.ndarray, qdot: np.ndarray, tau: np.ndarray) -> np.ndarray:
        """Forward dynamics q_dd = M(q)^-1 (tau - C(q, qd) qd - g(q)).

        Solved in absolute-angle coordinates, where the Coriolis/
        centrifugal vector collapses to sum_k beta_jk sin(th_j - th_k)
        thd_k^2 and joint torques map through differences.
        """
        th, thd, mass, diff = self._theta_terms(q, qdot)
        coriolis = np.einsum("...jk,...k->...j", self._beta * np.sin(diff), thd**2)
        grav = self.gravity * self._gamma * np.cos(th)
        # tau_theta = L^-T tau: adjacent differences (last joint unchanged).
        rhs = tau.copy()
        rhs[..., :-1] -= tau[..., 1:]
        rhs = rhs - coriolis - grav
        thdd = np.linalg.solve(mass, rhs[..., None])[..., 0]
        qdd = thdd.copy()
        qdd[..., 1:] -= thdd[..., :-1]
        return qdd

    def mass_matrix(self, q: np.ndarray) -> np.ndarray:
        """Joint-space mass matrix M(q) = L^T M_theta L (L = lower ones)."""
        n = self.n_joints
        _, _, mass, _ = self._theta_terms(np.asarray(q, dtype=float), np.zeros(n))
        lower = np.tril(np.ones((n, n)))
        return lower.T @ mass @ lower

    def energy(self, q: np.ndarray, qdot: np.ndarray) -> float:
        """Total mechanical energy (kinetic + gravity potential), joules."""
        th, thd, mass, _ = self._theta_terms(np.asarray(q, dtype=float), np.asarray(qdot, dtype=float))
        kinetic = 0.5 * float(thd @ mass @ thd)
        potential = self.gravity * float(self._gamma @ np.sin(th))
        return kinetic + potential

    def to_dict(self) -> dict:
        d = {
            "kind": "planar_chain",
            "link_masses_kg": self.masses.tolist(),
            "link_lengths_m": self.lengths.tolist(),
            "com_m": self.com.tolist(),
            "inertia_com_kg_m2": self.inertia_com.tolist(),
            "gravity_m_s2": self.gravity,
            "physics_dt_s": self.physics_dt,
        }
        if self.joint_limits is not None:
            d["joint_limits_rad"] = np.asarray(self.joint_limits).tolist()
        return d


PlantModel = Union[DecoupledLinear, PlanarChain]


def plant_from_dict(d: dict) -> PlantModel:
    kind = d.get("kind")
    if kind == "decoupled_linear":
        return DecoupledLinear(
            inertia=np.asarray(d["inertia_kg_m2"], dtype=float),
            physics_dt=float(d.get("physics_dt_s", 1e-3)),
            joint_limits=np.asarray(d["joint_limits_rad"], dtype=float)
            if "joint_limits_rad" in d
            else None,
        )
    if kind == "planar_chain":
        return PlanarChain(
            masses=np.asarray(d["link_masses_kg"], dtype=float),
            lengths=np.asarray(d["link_lengths_m"], dtype=float),
            com=np.asarray(d["com_m"], dtype=float) if "com_m" in d else None,
            inertia_com=np.asarray(d["inertia_com_kg_m2"], dtype=float)
            if "inertia_com_kg_m2" in d
            else None,
            gravity=float(d.get("gravity_m_s2", 0.0)),
            physics_dt=float(d.get("physics_dt_s", 1e-3)),
            joint_limits=np.asarray(d["joint_limits_rad"], dtype=float)
            if "joint_limits_rad" in d
            else None,
        )
    raise ValueError(f"unknown plant kind {kind!r}")


def _check_dt(dt: float) -> None:
    if not (0.0 < dt <= 0.1):
        raise ValueError(f"physics_dt {dt} outside (0, 0.1] s")


def actuator_torque(
    state: JointState, q_t: np.ndarray, qdot_t: np.ndarray, gains: GainSchedule
) -> np.ndarray:
    """PD torque with velocity feedforward (masked per joint)."""
    tau = gains.kp * (q_t - state.q) - gains.kd * state.qdot
    eta = gains.effective_eta()
    if np.any(eta != 0.0):
        tau = tau + eta * gains.kd * qdot_t
    return tau


def step(
    plant: PlantModel,
    state: JointState,
    q_t: np.ndarray,
    qdot_t: np.ndarray,
    gains: GainSchedule,
    filter_alpha: float = 1.0,
) -> JointState:
    """One semi-implicit Euler step at the plant's physics rate.

    Velocity updates from the acceleration first, position from the new
    velocity. Raises NumericalBlowup on non-finite state or runaway
    velocity; optional joint limits clamp position and zero velocity.
    """
    tau = actuator_torque(state, q_t, qdot_t, gains)
    qdd = plant.accel(state.q, state.qdot, tau)
    qdot = state.qdot + plant.physics_dt * qdd
    q = state.q + plant.physics_dt * qdot
    if plant.joint_limits is not None:
        lo, hi = plant.joint_limits[..., 0], plant.joint_limits[..., 1]
        clipped = np.clip(q, lo, hi)
        qdot = np.where(clipped != q, 0.0, qdot)
        q = clipped
    if not (np.all(np.isfinite(q)) and np.all(np.isfinite(qdot))):
        raise NumericalBlowup("non-finite joint state")
    if np.any(np.abs(qdot) > QDOT_BLOWUP):
        raise NumericalBlowup(f"|qdot| exceeded {QDOT_BLOWUP:g} rad/s")
    filtered = lowpass(state.filtered_q, q, filter_alpha)
    return JointState(q, qdot, tau, filtered)


Reference = Callable[[float], Union[np.ndarray, float, tuple]]


def make_sinusoid(amplitude: float, omega: float, analytic_velocity: bool = True) -> Reference:
    """Sinusoidal joint reference A sin(w t); optionally with velocity."""
    if analytic_velocity:
        return lambda t: (amplitude * math.sin(omega * t), amplitude * omega * math.cos(omega * t))
    return lambda t: amplitude * math.sin(omega * t)


@dataclass
class EpisodeRecord:
    """Uniformly sampled (physics rate) trajectories from run_episode."""

    t: np.ndarray
    q_target_held: np.ndarray  # ZOH target the controller saw
    qdot_target_held: np.ndarray
    q_target_true: np.ndarray  # reference evaluated at every physics step
    q: np.ndarray
    qdot: np.ndarray
    filtered_q: np.ndarray
    control_dt: float
    physics_dt: float

    @property
    def n_joints(self) -> int:
        return self.q.shape[1]


def run_episode(
    plant: PlantModel,
    gains: GainSchedule,
    reference: Reference,
    duration: float,
    control_dt: float,
    *,
    q0: np.ndarray | None = None,
    filter_alpha: float = 1.0,
) -> EpisodeRecord:
    """Closed-loop episode with zero-order-held targets.

    The reference callable maps time to either (q_t, qdot_t) or positions
    only; in the latter case target velocities are backward finite
    differences of the held positions over the control period, which is
    all a deployed target stream can offer. control_dt must be an integer
    multiple of the plant's physics step.
    """
    n = plant.n_joints
    dt = plant.physics_dt
    substeps = control_dt / dt
    if abs(substeps - round(substeps)) > 1e-9 or round(substeps) < 1:
        raise ValueError(f"control_dt {control_dt} not a multiple of physics_dt {dt}")
    substeps = int(round(substeps))
    n_steps = int(round(duration / dt))

    def broadcast(x) -> np.ndarray:
        return np.broadcast_to(np.asarray(x, dtype=float), (n,)).copy()

    def sample(t: float) -> tuple[np.ndarray, np.ndarray | None]:
        out = reference(t)
        if isinstance(out, tuple):
            q_t, qd_t = out
            return broadcast(q_t), broadcast(qd_t)
        return broadcast(out), None

    state = JointState.at_rest(np.zeros(n) if q0 is None else np.asarray(q0, dtype=float))
    rec = {
        name: np.empty((n_steps, n))
        for name in ("q_target_held", "qdot_target_held", "q_target_true", "q", "qdot", "filtered_q")
    }
    t_axis = np.empty(n_steps)

    held_q = held_qd = None
    prev_held_q = None
    for k in range(n_steps):
        t = k * dt
        if k % substeps == 0:
            q_t, qd_t = sample(t)
            if qd_t is None:
                qd_t = (
                    np.zeros(n) if prev_held_q is None else (q_t - prev_held_q) / control_dt
                )
            prev_held_q = q_t
            held_q, held_qd = q_t, qd_t
        true_q, _ = sample(t)
        state = step(plant, state, held_q, held_qd, gains, filter_alpha)
        t_axis[k] = t + dt
        rec["q_target_held"][k] = held_q
        rec["qdot_target_held"][k] = held_qd
        rec["q_target_true"][k] = true_q
        rec["q"][k] = state.q
        rec["qdot"][k] = state.qdot
        rec["filtered_q"][k] = state.filtered_q

    return EpisodeRecord(t=t_axis, control_dt=control_dt, physics_dt=dt, **rec)


def frequency_response(gains: GainSchedule, omega: Union[float, np.ndarray]):
    """Closed-loop magnitude and phase (radians) at drive frequency omega.

    Valid for critically damped impedance-derived gains (zeta = 1); phase
    is continued through omega = omega_n via atan2. Returns per-joint
    arrays shaped like broadcast(omega, joints).
    """
    if gains.omega_n is None or gains.zeta is None:
        raise ValueError("frequency_response needs impedance-derived gains (omega_n, zeta)")
    if not np.allclose(gains.zeta, 1.0):
        raise ValueError(f"frequency_response assumes zeta = 1, got {gains.zeta}")
    omega = np.asarray(omega, dtype=float)
    if np.any(omega <= 0):
        raise ValueError("omega must be positive")
    wn = gains.omega_n
    eta = gains.effective_eta()
    num = wn**2 + 1j * 2.0 * eta * wn * omega
    den = wn**2 - omega**2 + 1j * 2.0 * wn * omega
    mag = np.abs(num) / np.abs(den)
    phase = np.arctan2(2.0 * eta * omega, wn) - np.arctan2(2.0 * wn * omega, wn**2 - omega**2)
    # First term written as atan2(2 eta (w/wn), 1) == atan(2 eta w / wn).
    return mag, phase


def equivalent_delay(gains: GainSchedule) -> np.ndarray:
    """Low-frequency tracking delay 2 (1 - eta) / omega_n, seconds."""
    if gains.omega_n is None:
        raise ValueError("equivalent_delay needs impedance-derived gains (omega_n)")
    return 2.0 * (1.0 - gains.effective_eta()) / gains.omega_n


def max_feedforward_ratio(omega_n: float, control_dt: float) -> float:
    """Largest eta that avoids intra-interval overshoot under ZOH targets.

    The hold makes the proportional term fight a stale target for half a
    period on average; staying at or below 1 - omega_n * control_dt / 4
    keeps the net torque from accelerating the joint beyond the commanded
    velocity. Raises Infeasible when omega_n * control_dt >= 4 (no valid
    ratio).
    """
    if omega_n <= 0 or control_dt <= 0:
        raise ValueError("omega_n and control_dt must be positive")
    if omega_n * control_dt >= 4.0:
        raise Infeasible(
            f"omega_n * control_dt = {omega_n * control_dt:g} >= 4: no feasible feedforward ratio"
        )
    return 1.0 - omega_n * control_dt / 4.0


def zoh_interval_overshoot(
    omega_n: float,
    eta: float,
    control_dt: float,
    qdot_t: float = 1.0,
    physics_dt: float = 1e-5,
) -> float:
    """Per-interval overshoot metric for zero-order-held targets.

    Simulates a single hold interval for a unit-inertia joint that starts
    at the commanded velocity, displaced behind the held target by the
    mean ZOH deviation qdot_t * dt / 2, and returns the peak velocity
    excess (qdot - qdot_t) / qdot_t. Positive means the feedforward drives
    the joint beyond the commanded velocity inside one interval; the sign
    flips at eta = 1 - omega_n * control_dt / 4.
    """
    if qdot_t <= 0:
        raise ValueError("qdot_t must be positive")
    kp = omega_n**2
    kd = 2.0 * omega_n
    q = -qdot_t * control_dt / 2.0  # held target is the origin
    qdot = qdot_t
    worst = -np.inf
    steps = max(1, int(round(control_dt / physics_dt)))
    dt = control_dt / steps
    for _ in range(steps):
        tau = kp * (0.0 - q) - kd * qdot + eta * kd * qdot_t
        qdot += dt * tau
        q += dt * qdot
        worst = max(worst, qdot - qdot_t)
    return worst / qdot_t


@dataclass
class DelayPoint:
    """One point of a measured-vs-theory tracking delay curve."""

    eta: float
    theory_s: float
    measured_s: float
    confidence: float


def simulate_delay_curve(
    omega_n: float,
    etas: Sequence[float],
    *,
    control_dt: float = 0.02,
    wave_omega: float = 3.14,
    amplitude: float = 0.3,
    duration: float = 12.0,
    settle_s: float = 2.0,
    physics_dt: float = 1e-3,
) -> list[DelayPoint]:
    """Measured tracking delay vs the 2 (1 - eta) / omega_n prediction.

    Drives one linear joint per eta with a shared sinusoid reference held
    at the control rate, then estimates the lag between the held target
    and the measured position by normalized cross-correlation (settling
    transient trimmed). All etas run as one batched decoupled plant.
    """
    from .latency import MotionSignal, estimate_lag

    etas = list(etas)
    n = len(etas)
    plant = DecoupledLinear(inertia=np.ones(n), physics_dt=physics_dt)
    gains = GainSchedule.from_impedance(
        m_eff=np.ones(n), omega_n=omega_n, zeta=1.0, eta=np.asarray(etas, dtype=float)
    )
    record = run_episode(
        plant, gains, make_sinusoid(amplitude, wave_omega), duration, control_dt
    )
    keep = record.t >= settle_s
    rate = 1.0 / physics_dt
    points = []
    theory = equivalent_delay(gains)
    for j, eta in enumerate(etas):
        est = estimate_lag(
            MotionSignal(record.q_target_held[keep, j], rate),
            MotionSignal(record.q[keep, j], rate),
            max_lag_s=1.0,
        )
        points.append(
            DelayPoint(eta=eta, theory_s=float(theory[j]), measured_s=est.lag_s, confidence=est.confidence)
        )
    return points
