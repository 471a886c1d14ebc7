"""Ground-truth trajectory generation, noisy PMU stream synthesis, and
fault injection.

The truth is integrated deterministically (process noise belongs to the
filter's model; an optional switch perturbs the truth as well), so
estimation errors are attributable to the measurement path.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, NumericalError
from .power_model import (
    DynamicState,
    MeasurementFrame,
    RawCase,
    SystemParams,
    channel_index,
    equilibrium_state,
    measurement_fn,
    discretize_step,
    reduce_network,
)

DISTURBANCE_KINDS = ("load-scale", "mech-power-step")
FAULT_KINDS = ("comm-loss", "gross-error")


@dataclass(frozen=True)
class Disturbance:
    """A transient applied to the true system inside [t_start, t_end):
    either one load admittance or one generator's mechanical power is
    scaled by `factor`.  `target` is a bus id (load-scale) or a 1-based
    generator number (mech-power-step)."""

    kind: str
    target: int
    factor: float
    t_start: float
    t_end: float


@dataclass(frozen=True)
class Fault:
    """A measurement-path fault.  comm-loss zeroes the channels and
    marks them invalid inside the closed window [t_start, t_end];
    gross-error overwrites them with `value` from t_start onward (or
    within the window when t_end is set)."""

    kind: str
    channels: tuple[str, ...]
    t_start: float
    t_end: float | None
    value: float


@dataclass(frozen=True)
class Scenario:
    """One experiment: an optional disturbance, a list of measurement
    faults, the run length, and the noise seed."""

    name: str
    duration: float
    seed: int
    disturbance: Disturbance | None = None
    faults: tuple[Fault, ...] = ()

    def validate(self) -> None:
        if self.duration <= 0:
            raise ConfigError("scenario duration must be positive")
        d = self.disturbance
        if d is not None:
            if d.kind not in DISTURBANCE_KINDS:
                raise ConfigError(f"unknown disturbance kind {d.kind!r}")
            if not (0.0 <= d.t_start < d.t_end <= self.duration):
                raise ConfigError("disturbance window must satisfy 0 <= start < end <= duration")
        for f in self.faults:
            if f.kind not in FAULT_KINDS:
                raise ConfigError(f"unknown fault kind {f.kind!r}")
            if not f.channels:
                raise ConfigError("fault lists no channels")
            end = f.t_end if f.t_end is not None else self.duration
            if not (0.0 <= f.t_start < end <= self.duration):
                raise ConfigError("fault window must satisfy 0 <= start < end <= duration")


@dataclass(frozen=True)
class Trajectory:
    """Uniformly sampled truth: states and their noise-free frames."""

    times: np.ndarray
    states: tuple[DynamicState, ...]
    frames: tuple[MeasurementFrame, ...]

    def state_matrix(self) -> np.ndarray:
        return np.array([s.to_vector() for s in self.states])


def simulate_truth(
    case: RawCase,
    scenario: Scenario,
    sys: SystemParams,
    truth_noise_cov: np.ndarray | None = None,
) -> Trajectory:
    """Integrate the true system from the case equilibrium.

    The disturbance's network or mechanical-power change is active for
    integration steps starting in [t_start, t_end), and the noise-free
    frames reflect whichever network is live at each sample time.
    truth_noise_cov, when given, adds per-step Gaussian process noise to
    the truth itself (seeded from the scenario).
    """
    scenario.validate()
    net0 = reduce_network(case)
    gens0 = case.generator_params()
    net_d, gens_d = net0, gens0
    dist = scenario.disturbance
    if dist is not None:
        if dist.kind == "load-scale":
            net_d = reduce_network(case, load_scale={dist.target: dist.factor})
        else:
            if not 1 <= dist.target <= case.n_gen:
                raise ConfigError(f"no generator {dist.target}")
            gens_d = tuple(
                replace(g, mech_power_Pm=g.mech_power_Pm * dist.factor)
                if i + 1 == dist.target
                else g
                for i, g in enumerate(gens0)
            )

    rng = None
    noise_sqrt = None
    if truth_noise_cov is not None:
        rng = np.random.default_rng(np.random.SeedSequence(scenario.seed, spawn_key=(1,)))
        noise_sqrt = _cov_sqrt(np.asarray(truth_noise_cov, dtype=float))

    def in_window(t: float) -> bool:
        return dist is not None and dist.t_start <= t < dist.t_end

    steps = int(round(scenario.duration / sys.dt))
    times = np.arange(steps + 1) * sys.dt
    state = equilibrium_state(case)
    states = [state]
    frames = [_frame_at(state, 0.0, in_window(0.0), net0, gens0, net_d, gens_d, sys)]
    for k in range(steps):
        active = in_window(times[k])
        net, gens = (net_d, gens_d) if active else (net0, gens0)
        try:
            state = discretize_step(state, sys.dt, gens, net, sys)
        except NumericalError as exc:
            raise NumericalError("unstable trajectory") from exc
        if noise_sqrt is not None:
            x = state.to_vector() + noise_sqrt @ rng.standard_normal(sys.n_states)
            state = DynamicState.from_vector(x, sys.n_gen)
        t_next = times[k + 1]
        states.append(state)
        frames.append(
            _frame_at(state, t_next, in_window(t_next), net0, gens0, net_d, gens_d, sys)
        )
    return Trajectory(times=times, states=tuple(states), frames=tuple(frames))


def _frame_at(state, t, disturbed, net0, gens0, net_d, gens_d, sys):
    net, gens = (net_d, gens_d) if disturbed else (net0, gens0)
    frame = measurement_fn(state, net, gens, sys)
    return replace(frame, timestamp=float(t))


def _cov_sqrt(C: np.ndarray) -> np.ndarray:
    if not np.any(C):
        return np.zeros_like(C)
    try:
        return np.linalg.cholesky(C)
    except np.linalg.LinAlgError:
        w, V = np.linalg.eigh(0.5 * (C + C.T))
        return V @ np.diag(np.sqrt(np.clip(w, 0.0, None)))


def synthesize_measurements(
    traj: Trajectory, noise, seed: int
) -> tuple[MeasurementFrame, ...]:
    """Add seeded Gaussian noise to every frame of a trajectory.

    `noise` is either a NoiseModel (its R is used) or a covariance
    matrix; R = 0 reproduces the noise-free frames.  The stream is a
    deterministic function of (trajectory, R, seed).
    """
    R = np.asarray(noise.R if hasattr(noise, "R") else noise, dtype=float)
    rng = np.random.default_rng(seed)
    m = traj.frames[0].n_channels
    if R.shape != (m, m):
        raise ValueError("R must be m x m")
    L = _cov_sqrt(R)
    out = []
    for frame in traj.frames:
        z = frame.to_vector() + L @ rng.standard_normal(m)
        out.append(
            MeasurementFrame.from_vector(
                z,
                frame.P.size,
                frame.V.size,
                valid=frame.valid,
                timestamp=frame.timestamp,
            )
        )
    return tuple(out)


def apply_faults(
    frames, scenario: Scenario, n_gen: int, n_bus: int
) -> tuple[MeasurementFrame, ...]:
    """Overwrite channels per the scenario's faults.

    Frames outside every fault window are returned unchanged (the same
    objects), making the operation window-local and idempotent.
    """
    scenario.validate()
    resolved = [
        (f, [channel_index(c, n_gen, n_bus) for c in f.channels])
        for f in scenario.faults
    ]
    out = []
    for frame in frames:
        t = frame.timestamp
        z = None
        valid = None
        for fault, idx in resolved:
            if fault.kind == "comm-loss":
                hit = fault.t_start <= t <= fault.t_end
            else:
                hit = t >= fault.t_start and (fault.t_end is None or t <= fault.t_end)
            if not hit:
                continue
            if z is None:
                z = frame.to_vector()
                valid = frame.valid.copy()
            if fault.kind == "comm-loss":
                z[idx] = 0.0
                valid[idx] = False
            else:
                z[idx] = fault.value
        if z is None:
            out.append(frame)
        else:
            out.append(
                MeasurementFrame.from_vector(
                    z, n_gen, n_bus, valid=valid, timestamp=t
                )
            )
    return tuple(out)


def overall_error(estimates: np.ndarray, truth: np.ndarray) -> float:
    """Per-state-per-step RMSE between aligned estimate and truth
    sequences (rows = time steps, columns = states)."""
    est = np.asarray(estimates, dtype=float)
    tru = np.asarray(truth, dtype=float)
    if est.shape != tru.shape:
        raise ValueError("estimate/truth length mismatch")
    return float(np.sqrt(np.mean((est - tru) ** 2)))
