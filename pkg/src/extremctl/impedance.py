"""Oscillation-based impedance calibration for joint chains.

Zeroing one joint's damping and releasing it from a small offset turns the
closed loop around that joint into a local oscillator

    M_eff q_dd = -kp (q - q0)

whose period P gives the effective inertia M_eff = kp P^2 / (2 pi)^2. The
number folds physical inertia and whole-body coupling into one scalar, so
gains synthesized from it (kp = M wn^2, kd = 2 zeta M wn) realize the target
natural frequency on the real coupled plant, not just on a bare link.

Joints are processed distal to proximal. Each measurement runs a batch of
parallel environments with the probe stiffness resampled per environment,
and the per-environment inertia estimates are averaged before the gain
update. Sweeps repeat until the gains stop moving.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ExtremControlError
from .plant import GainSchedule, PlantModel, PlanarChain, NumericalBlowup, QDOT_BLOWUP

TWO_PI = 2.0 * np.pi


class NoOscillation(ExtremControlError):
    """Fewer than 3 zero crossings in the measurement window.

    Signals overdamped coupling, a too-small perturbation, or a window
    shorter than the oscillation period.
    """


@dataclass(frozen=True)
class CalibrationConfig:
    """Knobs for calibrate_chain; defaults suit desk-scale plants."""

    omega_n: float
    zeta: float = 1.0
    n_envs: int = 16
    kp_sample_range: tuple[float, float] = (0.5, 1.5)
    perturbation: float = 0.05  # rad, release offset
    measure_window: float = 10.0  # s
    sweeps: int = 3
    convergence_tol: float = 0.02  # max relative kp change per sweep

    def __post_init__(self) -> None:
        if self.omega_n <= 0:
            raise ValueError(f"omega_n {self.omega_n} must be positive")
        if self.zeta < 0:
            raise ValueError("zeta must be non-negative")
        if self.n_envs < 2:
            raise ValueError(f"n_envs {self.n_envs} must be at least 2")
        lo, hi = self.kp_sample_range
        if not (0.0 < lo < hi):
            raise ValueError(f"kp_sample_range {self.kp_sample_range} must satisfy 0 < lo < hi")
        if self.perturbation <= 0:
            raise ValueError("perturbation must be positive")
        if self.measure_window <= 0 or self.sweeps < 1 or self.convergence_tol <= 0:
            raise ValueError("measure_window, sweeps, convergence_tol must be positive")


@dataclass
class ImpedanceEstimate:
    """One joint's measurement batch and the gains synthesized from it."""

    joint: int
    kp_samples: np.ndarray  # probe stiffness per environment
    periods: np.ndarray  # s per environment
    m_eff_samples: np.ndarray  # kg*m^2 per environment
    m_eff_mean: float
    kp: float
    kd: float

    def to_dict(self) -> dict:
        return {
            "joint": self.joint,
            "kp_samples_nm_per_rad": self.kp_samples.tolist(),
            "periods_s": self.periods.tolist(),
            "m_eff_samples_kg_m2": self.m_eff_samples.tolist(),
            "m_eff_mean_kg_m2": self.m_eff_mean,
            "kp_nm_per_rad": self.kp,
            "kd_nms_per_rad": self.kd,
        }


@dataclass
class ChainCalibration:
    """Result of calibrate_chain: final gains plus per-joint evidence."""

    gains: GainSchedule
    estimates: list[ImpedanceEstimate]
    converged: bool
    sweeps_run: int
    history: list[np.ndarray] = field(default_factory=list)  # kp after each sweep

    def to_dict(self) -> dict:
        return {
            "gains": self.gains.to_dict(),
            "converged": self.converged,
            "sweeps_run": self.sweeps_run,
            "joints": [e.to_dict() for e in self.estimates],
            "history_kp_nm_per_rad": [h.tolist() for h in self.history],
        }


def estimate_meff(kp_sample, period):
    """Invert the oscillator identity: M_eff = kp P^2 / (2 pi)^2."""
    period = np.asarray(period, dtype=float)
    if np.any(period <= 0):
        raise ValueError("period must be positive")
    return np.asarray(kp_sample, dtype=float) * period**2 / TWO_PI**2


def update_gains(m_bar, omega_n: float, zeta: float = 1.0):
    """PD gains realizing the target impedance on inertia m_bar."""
    m_bar = np.asarray(m_bar, dtype=float)
    if np.any(m_bar <= 0):
        raise ValueError("effective inertia must be positive")
    return m_bar * omega_n**2, 2.0 * zeta * m_bar * omega_n


def _crossing_periods(z: np.ndarray, dt: float) -> tuple[int, np.ndarray]:
    """Zero-crossing count and same-direction periods of one trace.

    Crossing times are linearly interpolated between samples. Periods come
    from successive upward crossings (downward if fewer than two upward
    exist, which can happen when the window ends mid-cycle).
    """
    a, b = z[:-1], z[1:]
    up = np.nonzero((a <= 0) & (b > 0))[0]
    dn = np.nonzero((a >= 0) & (b < 0))[0]

    def times(idx: np.ndarray) -> np.ndarray:
        frac = a[idx] / (a[idx] - b[idx])
        return (idx + frac) * dt

    n_crossings = up.size + dn.size
    source = up if up.size >= 2 else dn
    periods = np.diff(times(source)) if source.size >= 2 else np.empty(0)
    return n_crossings, periods


def _average_period(periods: np.ndarray) -> float:
    # Skip the first (transient) cycle when more than one is available,
    # then average up to the next five.
    if periods.size >= 2:
        periods = periods[1:6]
    return float(np.mean(periods))


def _measure_periods_batched(
    plant: PlantModel,
    gains: GainSchedule,
    joint: int,
    kp_samples: np.ndarray,
    dq: float,
    window: float,
    q0: np.ndarray,
) -> np.ndarray:
    """Release-from-rest periods for one joint across E environments.

    The target joint runs spring-only at the sampled stiffness; every other
    joint stays under its current full PD loop holding q0. Returns one
    period per environment.
    """
    n = plant.n_joints
    n_envs = kp_samples.shape[0]
    dt = plant.physics_dt
    steps = int(round(window / dt))

    kp = np.tile(gains.kp, (n_envs, 1))
    kd = np.tile(gains.kd, (n_envs, 1))
    kp[:, joint] = kp_samples
    kd[:, joint] = 0.0

    # Joint damping integrates implicitly (solved at the new velocity), the
    # same way physics engines keep arbitrarily large kd stable; the spring
    # stays explicit so measured frequencies are undistorted. Substep only
    # for the stiffness eigenrate at q0 (whitened by the mass matrix, since
    # inertia coupling raises it beyond any per-joint kp/M ratio).
    is_chain = isinstance(plant, PlanarChain)
    mass0 = plant.mass_matrix(q0) if is_chain else np.diag(plant.inertia)
    white = np.linalg.inv(np.linalg.cholesky(mass0))
    omega_max = float(
        np.sqrt(np.linalg.eigvalsh(white @ np.diag(kp.max(axis=0)) @ white.T).max())
    )
    substeps = max(1, int(np.ceil(dt * omega_max / 0.2)))
    dt_sub = dt / substeps

    q = np.tile(q0, (n_envs, 1))
    q[:, joint] += dq
    qdot = np.zeros((n_envs, n))
    zero_tau = np.zeros((n_envs, n))
    eye = np.eye(n)

    trace = np.empty((steps + 1, n_envs))
    trace[0] = dq
    up_count = np.zeros(n_envs, dtype=int)
    done = 0
    for k in range(steps):
        for _ in range(substeps):
            tau_s = kp * (q0 - q)
            if is_chain:
                drift = qdot + dt_sub * plant.accel(q, qdot, zero_tau)
                mass_q = plant.mass_matrix(q)
                rhs = (mass_q @ drift[..., None])[..., 0] + dt_sub * tau_s
                sys = mass_q + dt_sub * (eye * kd[:, :, None])
                qdot = np.linalg.solve(sys, rhs[..., None])[..., 0]
            else:
                qdot = (plant.inertia * qdot + dt_sub * tau_s) / (
                    plant.inertia + dt_sub * kd
                )
            q = q + dt_sub * qdot
        z = q[:, joint] - q0[joint]
        up_count += (trace[k] <= 0) & (z > 0)
        trace[k + 1] = z
        done = k + 2
        if k % 200 == 199:
            if not np.all(np.isfinite(q)) or np.any(np.abs(qdot) > QDOT_BLOWUP):
                raise NumericalBlowup("calibration probe diverged")
            # 7 upward crossings bound the 1-skip + 5-average period rule.
            if np.all(up_count >= 7):
                break

    periods = np.empty(n_envs)
    for e in range(n_envs):
        n_crossings, p = _crossing_periods(trace[:done, e], dt)
        if n_crossings < 3 or p.size == 0:
            raise NoOscillation(
                f"joint {joint}, env {e}: {n_crossings} zero crossings in {window} s window"
            )
        periods[e] = _average_period(p)
    return periods


def measure_period(
    plant: PlantModel,
    gains: GainSchedule,
    joint: int,
    dq: float = 0.05,
    window: float = 10.0,
    q0: np.ndarray | None = None,
) -> float:
    """Free-oscillation period of one joint, damping removed.

    The joint's kd is zeroed internally; gains already carrying kd = 0 on
    the target joint pass through unchanged. Raises NoOscillation when the
    window captures fewer than 3 zero crossings.
    """
    if q0 is None:
        q0 = np.zeros(plant.n_joints)
    periods = _measure_periods_batched(
        plant, gains, joint, np.asarray([gains.kp[joint]]), dq, window, np.asarray(q0, dtype=float)
    )
    return float(periods[0])


def joint_order(plant: PlantModel) -> list[int]:
    """Measurement order: strictly by kinematic distance from the base,
    farthest first; ties broken by joint index."""
    n = plant.n_joints
    if isinstance(plant, PlanarChain):
        return list(range(n - 1, -1, -1))
    return list(range(n))  # independent joints: all tied, index order


def calibrate_chain(
    plant: PlantModel,
    config: CalibrationConfig,
    initial_gains: GainSchedule | None = None,
    seed: int | None = None,
    rng: np.random.Generator | None = None,
    q0: np.ndarray | None = None,
) -> ChainCalibration:
    """Sequential distal-to-proximal impedance calibration.

    Each sweep measures every joint once: zero its kd, release from
    q0 + dq, observe oscillation periods across n_envs environments with
    probe stiffness drawn from kp_sample_range times the joint's current
    kp, average the resulting inertias, and refresh (kp, kd) in place so
    later (more proximal) joints are measured against already-calibrated
    distal loops. Stops early once the largest relative kp change over a
    sweep drops below convergence_tol; otherwise runs config.sweeps and
    returns converged=False.
    """
    n = plant.n_joints
    if rng is None:
        rng = np.random.default_rng(seed)
    if q0 is None:
        q0 = np.zeros(n)
    q0 = np.asarray(q0, dtype=float)

    if initial_gains is None:
        # Random init scaled to each joint's locked-others inertia: the
        # spread (x0.5..x1.5 around the nominal synthesis) is what the
        # sweeps must iron out, while the magnitude stays physical the way
        # a first guess derived from a mass model would.
        if isinstance(plant, PlanarChain):
            m_local = np.diagonal(plant.mass_matrix(q0)).copy()
        else:
            m_local = plant.inertia
        initial_gains = GainSchedule(
            kp=rng.uniform(0.5, 1.5, n) * m_local * config.omega_n**2,
            kd=rng.uniform(0.5, 1.5, n) * 2.0 * config.zeta * m_local * config.omega_n,
            eta=np.zeros(n),
        )
    if np.any(initial_gains.kp <= 0):
        raise ValueError("initial kp must be positive")

    kp = initial_gains.kp.copy()
    kd = initial_gains.kd.copy()
    lo, hi = config.kp_sample_range
    order = joint_order(plant)

    estimates: dict[int, ImpedanceEstimate] = {}
    history: list[np.ndarray] = []
    converged = False
    sweeps_run = 0
    for _ in range(config.sweeps):
        sweeps_run += 1
        kp_before = kp.copy()
        for j in order:
            gains = GainSchedule(kp=kp, kd=kd, eta=np.zeros(n))
            kp_samples = rng.uniform(lo * kp[j], hi * kp[j], config.n_envs)
            periods = _measure_periods_batched(
                plant, gains, j, kp_samples, config.perturbation, config.measure_window, q0
            )
            m_samples = estimate_meff(kp_samples, periods)
            m_bar = float(np.mean(m_samples))
            kp_j, kd_j = update_gains(m_bar, config.omega_n, config.zeta)
            kp[j], kd[j] = float(kp_j), float(kd_j)
            estimates[j] = ImpedanceEstimate(
                joint=j,
                kp_samples=kp_samples,
                periods=periods,
                m_eff_samples=m_samples,
                m_eff_mean=m_bar,
                kp=kp[j],
                kd=kd[j],
            )
        history.append(kp.copy())
        if np.max(np.abs(kp - kp_before) / kp_before) < config.convergence_tol:
            converged = True
            break

    m_bar_all = np.array([estimates[j].m_eff_mean for j in range(n)])
    final = GainSchedule.from_impedance(
        m_eff=m_bar_all, omega_n=config.omega_n, zeta=config.zeta, eta=np.zeros(n)
    )
    return ChainCalibration(
        gains=final,
        estimates=[estimates[j] for j in range(n)],
        converged=converged,
        sweeps_run=sweeps_run,
        history=history,
    )
