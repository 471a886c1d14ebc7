"""Multimachine classical-model dynamics and PMU measurement functions.

The model is the second-order classical machine: constant internal EMF
behind transient reactance, swing-equation rotor dynamics, and a network
Kron-reduced to the generator internal nodes.  Rotor speeds are stored
as absolute electrical speed in rad/s; rotor angles in rad.

State vector layout: x = [omega_1..omega_ng, delta_1..delta_ng].
Measurement vector layout: z = [P_1..P_ng, Q_1..Q_ng, V_1..V_nb,
theta_1..theta_nb], so m = 2*n_gen + 2*n_bus.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .errors import ConfigError, NumericalError


@dataclass(frozen=True)
class GeneratorParams:
    """Classical-model parameters of one synchronous machine (pu on the
    system base; inertia in seconds)."""

    inertia_H: float
    damping_D: float
    mech_power_Pm: float
    emf_E: float
    xd_prime: float

    def __post_init__(self):
        if self.inertia_H <= 0:
            raise ValueError("inertia_H must be positive")
        if self.emf_E <= 0:
            raise ValueError("emf_E must be positive")
        if self.xd_prime <= 0:
            raise ValueError("xd_prime must be positive")
        if self.damping_D < 0:
            raise ValueError("damping_D must be nonnegative")


@dataclass(frozen=True)
class SystemParams:
    """System-wide constants: synchronous speed, dimensions, time step."""

    omega_s: float
    n_gen: int
    n_bus: int
    dt: float

    def __post_init__(self):
        if self.omega_s <= 0 or self.dt <= 0:
            raise ValueError("omega_s and dt must be positive")
        if self.n_gen < 1 or self.n_bus < self.n_gen:
            raise ValueError("need n_gen >= 1 and n_bus >= n_gen")

    @property
    def n_states(self) -> int:
        return 2 * self.n_gen

    @property
    def n_channels(self) -> int:
        return 2 * self.n_gen + 2 * self.n_bus


@dataclass(frozen=True)
class RawCase:
    """Bus/branch/generator tables of a solved network case.

    Bus voltages vm (pu) and va (rad) hold the power-flow solution the
    case was built around; loads are constant-impedance at that
    solution.  Branch tap = 1 means an ordinary line.
    """

    name: str
    base_mva: float
    f_hz: float
    bus_id: np.ndarray
    load_p: np.ndarray
    load_q: np.ndarray
    vm: np.ndarray
    va: np.ndarray
    br_from: np.ndarray
    br_to: np.ndarray
    br_r: np.ndarray
    br_x: np.ndarray
    br_b: np.ndarray
    br_tap: np.ndarray
    gen_bus: np.ndarray
    gen_H: np.ndarray
    gen_D: np.ndarray
    gen_xd_prime: np.ndarray
    gen_Pm: np.ndarray
    gen_E: np.ndarray

    @property
    def n_bus(self) -> int:
        return self.bus_id.size

    @property
    def n_gen(self) -> int:
        return self.gen_bus.size

    @property
    def omega_s(self) -> float:
        return 2.0 * np.pi * self.f_hz

    def bus_index(self, bus: int) -> int:
        pos = np.flatnonzero(self.bus_id == bus)
        if pos.size != 1:
            raise ConfigError(f"unknown bus id {bus}")
        return int(pos[0])

    def generator_params(self) -> tuple[GeneratorParams, ...]:
        return tuple(
            GeneratorParams(
                inertia_H=float(self.gen_H[i]),
                damping_D=float(self.gen_D[i]),
                mech_power_Pm=float(self.gen_Pm[i]),
                emf_E=float(self.gen_E[i]),
                xd_prime=float(self.gen_xd_prime[i]),
            )
            for i in range(self.n_gen)
        )

    def system_params(self, dt: float) -> SystemParams:
        return SystemParams(
            omega_s=self.omega_s, n_gen=self.n_gen, n_bus=self.n_bus, dt=dt
        )


@dataclass(frozen=True)
class DynamicState:
    """Rotor speeds (rad/s, absolute) and rotor angles (rad) of all
    generators."""

    omega: np.ndarray
    delta: np.ndarray

    def __post_init__(self):
        if self.omega.shape != self.delta.shape or self.omega.ndim != 1:
            raise ValueError("omega and delta must be 1-D arrays of equal length")

    @property
    def n_gen(self) -> int:
        return self.omega.size

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.omega, self.delta])

    @classmethod
    def from_vector(cls, x: np.ndarray, n_gen: int) -> "DynamicState":
        x = np.asarray(x, dtype=float)
        if x.size != 2 * n_gen:
            raise ValueError("state vector length must be 2*n_gen")
        return cls(omega=x[:n_gen].copy(), delta=x[n_gen:].copy())


@dataclass(frozen=True)
class MeasurementFrame:
    """One PMU snapshot: generator P/Q injections plus all bus voltage
    magnitudes and angles, with per-channel validity flags."""

    P: np.ndarray
    Q: np.ndarray
    V: np.ndarray
    theta: np.ndarray
    valid: np.ndarray
    timestamp: float = 0.0

    @property
    def n_channels(self) -> int:
        return self.P.size + self.Q.size + self.V.size + self.theta.size

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.P, self.Q, self.V, self.theta])

    @classmethod
    def from_vector(
        cls,
        z: np.ndarray,
        n_gen: int,
        n_bus: int,
        valid: np.ndarray | None = None,
        timestamp: float = 0.0,
    ) -> "MeasurementFrame":
        z = np.asarray(z, dtype=float)
        m = 2 * n_gen + 2 * n_bus
        if z.size != m:
            raise ValueError("measurement vector length must be 2*n_gen + 2*n_bus")
        if valid is None:
            valid = np.ones(m, dtype=bool)
        return cls(
            P=z[:n_gen].copy(),
            Q=z[n_gen : 2 * n_gen].copy(),
            V=z[2 * n_gen : 2 * n_gen + n_bus].copy(),
            theta=z[2 * n_gen + n_bus :].copy(),
            valid=np.asarray(valid, dtype=bool).copy(),
            timestamp=timestamp,
        )


def channel_labels(n_gen: int, n_bus: int) -> tuple[str, ...]:
    """Symbolic names of the measurement channels, in vector order."""
    return tuple(
        [f"P{i + 1}" for i in range(n_gen)]
        + [f"Q{i + 1}" for i in range(n_gen)]
        + [f"V{l + 1}" for l in range(n_bus)]
        + [f"theta{l + 1}" for l in range(n_bus)]
    )


def channel_index(label: str, n_gen: int, n_bus: int) -> int:
    """Resolve a channel name (P5, Q7, V34, theta34) or a bare 0-based
    integer to its position in the measurement vector."""
    label = label.strip()
    m = 2 * n_gen + 2 * n_bus
    if label.lstrip("+-").isdigit():
        idx = int(label)
        if not 0 <= idx < m:
            raise ConfigError(f"channel index {idx} out of range 0..{m - 1}")
        return idx
    for prefix, offset, count in (
        ("theta", 2 * n_gen + n_bus, n_bus),
        ("P", 0, n_gen),
        ("Q", n_gen, n_gen),
        ("V", 2 * n_gen, n_bus),
    ):
        if label.startswith(prefix) and label[len(prefix) :].isdigit():
            num = int(label[len(prefix) :])
            if not 1 <= num <= count:
                raise ConfigError(f"channel {label!r} out of range")
            return offset + num - 1
    raise ConfigError(f"unrecognized channel {label!r}")


@dataclass(frozen=True)
class ReducedNetwork:
    """Network reduced to the generator internal nodes.

    G and B are the real and imaginary parts of the Kron-reduced
    admittance matrix.  Y_aug is the full augmented matrix (buses plus
    internal nodes) kept for reconstructing bus voltages; its bus block
    factorization is cached for repeated solves.
    """

    G: np.ndarray
    B: np.ndarray
    Y_aug: np.ndarray
    gen_bus_pos: np.ndarray
    y_gen: np.ndarray
    n_bus: int
    n_gen: int
    _ybb_lu: tuple = field(repr=False, default=None)

    def solve_bus_voltages(self, emf: np.ndarray) -> np.ndarray:
        """Complex bus voltages given internal EMF phasors."""
        rhs = np.zeros(self.n_bus, dtype=complex)
        np.add.at(rhs, self.gen_bus_pos, self.y_gen * emf)
        try:
            v = lu_solve(self._ybb_lu, rhs)
        except Exception as exc:  # pragma: no cover - lu_solve rarely raises
            raise NumericalError("network solve failed") from exc
        if not np.all(np.isfinite(v)):
            raise NumericalError("network solve failed")
        return v

    def solve_bus_voltages_batch(self, emf_cols: np.ndarray) -> np.ndarray:
        """Batched variant; emf_cols has one EMF vector per column."""
        rhs = np.zeros((self.n_bus, emf_cols.shape[1]), dtype=complex)
        np.add.at(rhs, self.gen_bus_pos, self.y_gen[:, None] * emf_cols)
        v = lu_solve(self._ybb_lu, rhs)
        if not np.all(np.isfinite(v)):
            raise NumericalError("network solve failed")
        return v


def build_ybus(
    case: RawCase,
    include_loads: bool = True,
    load_scale: dict[int, float] | None = None,
) -> np.ndarray:
    """Bus admittance matrix from the branch tables, optionally with the
    loads folded in as constant shunt admittances at the solved voltage.

    load_scale maps bus id -> multiplier on that bus's load admittance.
    """
    nb = case.n_bus
    Y = np.zeros((nb, nb), dtype=complex)
    for f, t, r, x, b, tap in zip(
        case.br_from, case.br_to, case.br_r, case.br_x, case.br_b, case.br_tap
    ):
        i, j = case.bus_index(int(f)), case.bus_index(int(t))
        if r == 0.0 and x == 0.0:
            raise ConfigError(f"branch {int(f)}-{int(t)} has zero impedance")
        y = 1.0 / complex(r, x)
        bsh = 0.5j * b
        a = float(tap) if tap not in (0.0, None) else 1.0
        Y[i, i] += (y + bsh) / (a * a)
        Y[j, j] += y + bsh
        Y[i, j] -= y / a
        Y[j, i] -= y / a
    if include_loads:
        scale = np.ones(nb)
        if load_scale:
            for bus, factor in load_scale.items():
                scale[case.bus_index(int(bus))] = factor
        y_load = scale * (case.load_p - 1j * case.load_q) / case.vm**2
        Y[np.diag_indices(nb)] += y_load
    return Y


def _check_connected(case: RawCase) -> None:
    nb = case.n_bus
    adj = [[] for _ in range(nb)]
    for f, t in zip(case.br_from, case.br_to):
        i, j = case.bus_index(int(f)), case.bus_index(int(t))
        adj[i].append(j)
        adj[j].append(i)
    seen = np.zeros(nb, dtype=bool)
    stack = [0]
    seen[0] = True
    while stack:
        u = stack.pop()
        for v in adj[u]:
            if not seen[v]:
                seen[v] = True
                stack.append(v)
    if not seen.all():
        raise NumericalError("island detected")


def reduce_network(
    case: RawCase, load_scale: dict[int, float] | None = None
) -> ReducedNetwork:
    """Kron-reduce the network onto the generator internal nodes.

    Loads become shunt admittances at the solved voltages; each
    generator hangs behind 1/(j*xd') from its terminal bus.  Returns the
    reduced conductance/susceptance matrices together with the augmented
    admittance matrix used for bus-voltage reconstruction.
    """
    _check_connected(case)
    nb, ng = case.n_bus, case.n_gen
    Ybus = build_ybus(case, include_loads=True, load_scale=load_scale)
    y_gen = 1.0 / (1j * case.gen_xd_prime.astype(float))
    gen_pos = np.array([case.bus_index(int(b)) for b in case.gen_bus])

    Ybb = Ybus.copy()
    np.add.at(Ybb, (gen_pos, gen_pos), y_gen)

    Y_aug = np.zeros((nb + ng, nb + ng), dtype=complex)
    Y_aug[:nb, :nb] = Ybb
    Y_aug[nb:, nb:] = np.diag(y_gen)
    for i, p in enumerate(gen_pos):
        Y_aug[p, nb + i] -= y_gen[i]
        Y_aug[nb + i, p] -= y_gen[i]

    Ybg = Y_aug[:nb, nb:]
    try:
        X = np.linalg.solve(Ybb, Ybg)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("network not reducible") from exc
    if not np.all(np.isfinite(X)):
        raise NumericalError("network not reducible")
    Y_red = np.diag(y_gen) - Y_aug[nb:, :nb] @ X

    G = Y_red.real
    B = Y_red.imag
    asym = max(np.abs(G - G.T).max(), np.abs(B - B.T).max())
    if asym > 1e-8:
        raise NumericalError("network not reducible")
    G = 0.5 * (G + G.T)
    B = 0.5 * (B + B.T)

    return ReducedNetwork(
        G=G,
        B=B,
        Y_aug=Y_aug,
        gen_bus_pos=gen_pos,
        y_gen=y_gen,
        n_bus=nb,
        n_gen=ng,
        _ybb_lu=lu_factor(Ybb),
    )


@dataclass(frozen=True)
class _GenArrays:
    """Stacked generator parameters for vectorized math."""

    H: np.ndarray
    D: np.ndarray
    Pm: np.ndarray
    E: np.ndarray
    xd_prime: np.ndarray


def _stack_gens(gens) -> _GenArrays:
    if isinstance(gens, _GenArrays):
        return gens
    gens = list(gens)
    return _GenArrays(
        H=np.array([g.inertia_H for g in gens]),
        D=np.array([g.damping_D for g in gens]),
        Pm=np.array([g.mech_power_Pm for g in gens]),
        E=np.array([g.emf_E for g in gens]),
        xd_prime=np.array([g.xd_prime for g in gens]),
    )


def _power_cols(delta_cols: np.ndarray, E: np.ndarray, G: np.ndarray, B: np.ndarray):
    # delta_cols: (ng, K) -> electrical power (ng, K)
    dd = delta_cols[:, None, :] - delta_cols[None, :, :]
    T = G[:, :, None] * np.cos(dd) + B[:, :, None] * np.sin(dd)
    return E[:, None] * np.einsum("ijk,j->ik", T, E)


def electrical_power(state: DynamicState, net: ReducedNetwork, gens) -> np.ndarray:
    """Per-generator electrical power injection (pu):
    P_i = G_ii E_i^2 + sum_{j != i} E_i E_j (G_ij cos d_ij + B_ij sin d_ij).
    """
    ga = _stack_gens(gens)
    if state.n_gen != net.n_gen or ga.E.size != net.n_gen:
        raise ValueError("dimension mismatch between state, network and generators")
    return _power_cols(state.delta[:, None], ga.E, net.G, net.B)[:, 0]


def _rhs_cols(x_cols, ga: _GenArrays, net: ReducedNetwork, omega_s: float):
    ng = net.n_gen
    omega = x_cols[:ng]
    delta = x_cols[ng:]
    pe = _power_cols(delta, ga.E, net.G, net.B)
    dev = omega - omega_s
    domega = (omega_s / (2.0 * ga.H))[:, None] * (ga.Pm[:, None] - pe - ga.D[:, None] * dev)
    return np.vstack([domega, dev])


def swing_derivative(
    state: DynamicState, gens, net: ReducedNetwork, sys: SystemParams
) -> np.ndarray:
    """Time derivative of [omega; delta] under the swing equation."""
    ga = _stack_gens(gens)
    return _rhs_cols(state.to_vector()[:, None], ga, net, sys.omega_s)[:, 0]


def _rk4_cols(x_cols, dt, ga, net, omega_s):
    k1 = _rhs_cols(x_cols, ga, net, omega_s)
    k2 = _rhs_cols(x_cols + 0.5 * dt * k1, ga, net, omega_s)
    k3 = _rhs_cols(x_cols + 0.5 * dt * k2, ga, net, omega_s)
    k4 = _rhs_cols(x_cols + dt * k3, ga, net, omega_s)
    return x_cols + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def discretize_step(
    state: DynamicState, dt: float, gens, net: ReducedNetwork, sys: SystemParams
) -> DynamicState:
    """Advance the state by one classical RK4 step of length dt."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    ga = _stack_gens(gens)
    out = _rk4_cols(state.to_vector()[:, None], dt, ga, net, sys.omega_s)[:, 0]
    if not np.all(np.isfinite(out)):
        raise NumericalError("integration diverged")
    return DynamicState.from_vector(out, state.n_gen)


def _dpower_ddelta(delta: np.ndarray, E: np.ndarray, G: np.ndarray, B: np.ndarray):
    # Jacobian of the electrical power vector w.r.t. the angle vector.
    dd = delta[:, None] - delta[None, :]
    S = (E[:, None] * E[None, :]) * (G * np.sin(dd) - B * np.cos(dd))
    np.fill_diagonal(S, 0.0)
    np.fill_diagonal(S, -S.sum(axis=1))
    return S


def continuous_jacobian(
    state: DynamicState, gens, net: ReducedNetwork, sys: SystemParams
) -> np.ndarray:
    """Jacobian of the swing-equation right-hand side at a state."""
    ga = _stack_gens(gens)
    ng = state.n_gen
    A = np.zeros((2 * ng, 2 * ng))
    coef = sys.omega_s / (2.0 * ga.H)
    A[:ng, :ng] = np.diag(-coef * ga.D)
    A[:ng, ng:] = -coef[:, None] * _dpower_ddelta(state.delta, ga.E, net.G, net.B)
    A[ng:, :ng] = np.eye(ng)
    return A


def jacobian_F(
    state: DynamicState,
    dt: float,
    gens,
    net: ReducedNetwork,
    sys: SystemParams,
    method: str = "fd",
    h: float = 1e-6,
) -> np.ndarray:
    """Jacobian of the one-step RK4 map.

    method="fd" uses central finite differences of the step itself;
    method="analytic" propagates the continuous Jacobian through the
    RK4 stages (the exact tangent of the discrete map).
    """
    ga = _stack_gens(gens)
    x = state.to_vector()
    n = x.size
    if method == "fd":
        F = np.empty((n, n))
        for j in range(n):
            up = x.copy()
            dn = x.copy()
            up[j] += h
            dn[j] -= h
            plus = _rk4_cols(up[:, None], dt, ga, net, sys.omega_s)[:, 0]
            minus = _rk4_cols(dn[:, None], dt, ga, net, sys.omega_s)[:, 0]
            F[:, j] = (plus - minus) / (2.0 * h)
        return F
    if method != "analytic":
        raise ValueError("method must be 'fd' or 'analytic'")

    eye = np.eye(n)

    def stage(xv):
        st = DynamicState.from_vector(xv, state.n_gen)
        return (
            _rhs_cols(xv[:, None], ga, net, sys.omega_s)[:, 0],
            continuous_jacobian(st, ga, net, sys),
        )

    k1, K1 = stage(x)
    k2, A2 = stage(x + 0.5 * dt * k1)
    K2 = A2 @ (eye + 0.5 * dt * K1)
    k3, A3 = stage(x + 0.5 * dt * k2)
    K3 = A3 @ (eye + 0.5 * dt * K2)
    _, A4 = stage(x + dt * k3)
    K4 = A4 @ (eye + dt * K3)
    return eye + (dt / 6.0) * (K1 + 2.0 * K2 + 2.0 * K3 + K4)


def _measure_cols(x_cols, ga: _GenArrays, net: ReducedNetwork):
    ng, nb = net.n_gen, net.n_bus
    delta = x_cols[ng:]
    emf = ga.E[:, None] * np.exp(1j * delta)
    vbus = net.solve_bus_voltages_batch(emf)
    p = _power_cols(delta, ga.E, net.G, net.B)
    vterm = vbus[net.gen_bus_pos]
    i_gen = (emf - vterm) * net.y_gen[:, None]
    q = (vterm * np.conj(i_gen)).imag
    return np.vstack([p, q, np.abs(vbus), np.angle(vbus)])


def measurement_fn(
    state: DynamicState, net: ReducedNetwork, gens, sys: SystemParams | None = None
) -> MeasurementFrame:
    """Noise-free measurement of a state.

    Bus phasors are reconstructed by driving the augmented network with
    the internal EMFs (loads as constant impedances); generator P comes
    from the reduced network, Q from the terminal complex power.
    """
    ga = _stack_gens(gens)
    z = _measure_cols(state.to_vector()[:, None], ga, net)[:, 0]
    return MeasurementFrame.from_vector(z, net.n_gen, net.n_bus)


def jacobian_H(
    state: DynamicState,
    net: ReducedNetwork,
    gens,
    sys: SystemParams | None = None,
    h: float = 1e-6,
) -> np.ndarray:
    """Measurement Jacobian by central finite differences (step h for
    every state coordinate).  Rows of invalid channels are produced like
    any other; masking is the caller's business."""
    ga = _stack_gens(gens)
    x = state.to_vector()
    n = x.size
    m = 2 * net.n_gen + 2 * net.n_bus
    H = np.empty((m, n))
    for j in range(n):
        up = x.copy()
        dn = x.copy()
        up[j] += h
        dn[j] -= h
        plus = _measure_cols(up[:, None], ga, net)[:, 0]
        minus = _measure_cols(dn[:, None], ga, net)[:, 0]
        H[:, j] = (plus - minus) / (2.0 * h)
    return H


def emf_from_powerflow(case: RawCase) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Internal EMF magnitude, rotor angle, and mechanical power of each
    generator, recovered from the case's solved power flow.

    The generator current is the net bus injection plus the local load;
    the EMF phasor then sits behind xd'.  Real power is conserved across
    the lossless transient reactance, so the terminal injection doubles
    as the mechanical power at equilibrium.
    """
    Y = build_ybus(case, include_loads=False)
    vbar = case.vm * np.exp(1j * case.va)
    s_net = vbar * np.conj(Y @ vbar)
    s_gen = s_net + (case.load_p + 1j * case.load_q)
    pos = np.array([case.bus_index(int(b)) for b in case.gen_bus])
    vterm = vbar[pos]
    i_gen = np.conj(s_gen[pos] / vterm)
    emf = vterm + 1j * case.gen_xd_prime * i_gen
    return np.abs(emf), np.angle(emf), s_gen[pos].real


def equilibrium_state(case: RawCase) -> DynamicState:
    """Steady state implied by the case's solved power flow: all rotors
    at synchronous speed, angles at the recovered EMF angles."""
    _, delta0, _ = emf_from_powerflow(case)
    return DynamicState(
        omega=np.full(case.n_gen, case.omega_s), delta=delta0
    )


class PowerSystemModel:
    """Bundles generators, reduced network and system constants behind
    the generic step/measure interface the filters consume."""

    def __init__(
        self,
        gens: Sequence[GeneratorParams],
        net: ReducedNetwork,
        sys: SystemParams,
        jac_f_method: str = "fd",
    ):
        self.gens = tuple(gens)
        self.net = net
        self.sys = sys
        self.jac_f_method = jac_f_method
        self._ga = _stack_gens(self.gens)

    @classmethod
    def from_case(cls, case: RawCase, dt: float, **kw) -> "PowerSystemModel":
        return cls(
            gens=case.generator_params(),
            net=reduce_network(case),
            sys=case.system_params(dt),
            **kw,
        )

    @property
    def n(self) -> int:
        return self.sys.n_states

    @property
    def m(self) -> int:
        return self.sys.n_channels

    def f(self, x: np.ndarray) -> np.ndarray:
        out = _rk4_cols(x[:, None], self.sys.dt, self._ga, self.net, self.sys.omega_s)
        if not np.all(np.isfinite(out)):
            raise NumericalError("integration diverged")
        return out[:, 0]

    def f_batch(self, x_cols: np.ndarray) -> np.ndarray:
        out = _rk4_cols(x_cols, self.sys.dt, self._ga, self.net, self.sys.omega_s)
        if not np.all(np.isfinite(out)):
            raise NumericalError("integration diverged")
        return out

    def jac_f(self, x: np.ndarray) -> np.ndarray:
        return jacobian_F(
            DynamicState.from_vector(x, self.sys.n_gen),
            self.sys.dt,
            self._ga,
            self.net,
            self.sys,
            method=self.jac_f_method,
        )

    def g(self, x: np.ndarray) -> np.ndarray:
        return _measure_cols(x[:, None], self._ga, self.net)[:, 0]

    def g_batch(self, x_cols: np.ndarray) -> np.ndarray:
        return _measure_cols(x_cols, self._ga, self.net)

    def jac_h(self, x: np.ndarray) -> np.ndarray:
        return jacobian_H(
            DynamicState.from_vector(x, self.sys.n_gen), self.net, self._ga, self.sys
        )

    def frame(self, x: np.ndarray, timestamp: float = 0.0) -> MeasurementFrame:
        z = self.g(x)
        return MeasurementFrame.from_vector(
            z, self.sys.n_gen, self.sys.n_bus, timestamp=timestamp
        )
