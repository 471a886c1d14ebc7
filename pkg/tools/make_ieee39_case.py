"""Regenerate the shipped 39-bus New England case file.

Solves the power flow for the standard bus/branch/load/dispatch tables,
recovers each generator's internal EMF and mechanical power behind its
transient reactance, and writes robustdse/data/ieee39.case with the
solved voltages embedded.

Run from the repo root:  PYTHONPATH=src python3 tools/make_ieee39_case.py
"""

import os
import sys

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from robustdse.fileio import write_case
from robustdse.power_model import RawCase, emf_from_powerflow, measurement_fn
from robustdse.power_model import equilibrium_state, reduce_network

BASE_MVA = 100.0
F_HZ = 60.0

# from, to, r, x, total line charging b, tap (1.0 = plain line)
BRANCHES = [
    (1, 2, 0.0035, 0.0411, 0.6987, 1.0), (1, 39, 0.0010, 0.0250, 0.7500, 1.0),
    (2, 3, 0.0013, 0.0151, 0.2572, 1.0), (2, 25, 0.0070, 0.0086, 0.1460, 1.0),
    (3, 4, 0.0013, 0.0213, 0.2214, 1.0), (3, 18, 0.0011, 0.0133, 0.2138, 1.0),
    (4, 5, 0.0008, 0.0128, 0.1342, 1.0), (4, 14, 0.0008, 0.0129, 0.1382, 1.0),
    (5, 6, 0.0002, 0.0026, 0.0434, 1.0), (5, 8, 0.0008, 0.0112, 0.1476, 1.0),
    (6, 7, 0.0006, 0.0092, 0.1130, 1.0), (6, 11, 0.0007, 0.0082, 0.1389, 1.0),
    (7, 8, 0.0004, 0.0046, 0.0780, 1.0), (8, 9, 0.0023, 0.0363, 0.3804, 1.0),
    (9, 39, 0.0010, 0.0250, 1.2000, 1.0), (10, 11, 0.0004, 0.0043, 0.0729, 1.0),
    (10, 13, 0.0004, 0.0043, 0.0729, 1.0), (13, 14, 0.0009, 0.0101, 0.1723, 1.0),
    (14, 15, 0.0018, 0.0217, 0.3660, 1.0), (15, 16, 0.0009, 0.0094, 0.1710, 1.0),
    (16, 17, 0.0007, 0.0089, 0.1342, 1.0), (16, 19, 0.0016, 0.0195, 0.3040, 1.0),
    (16, 21, 0.0008, 0.0135, 0.2548, 1.0), (16, 24, 0.0003, 0.0059, 0.0680, 1.0),
    (17, 18, 0.0007, 0.0082, 0.1319, 1.0), (17, 27, 0.0013, 0.0173, 0.3216, 1.0),
    (21, 22, 0.0008, 0.0140, 0.2565, 1.0), (22, 23, 0.0006, 0.0096, 0.1846, 1.0),
    (23, 24, 0.0022, 0.0350, 0.3610, 1.0), (25, 26, 0.0032, 0.0323, 0.5130, 1.0),
    (26, 27, 0.0014, 0.0147, 0.2396, 1.0), (26, 28, 0.0043, 0.0474, 0.7802, 1.0),
    (26, 29, 0.0057, 0.0625, 1.0290, 1.0), (28, 29, 0.0014, 0.0151, 0.2490, 1.0),
    (12, 11, 0.0016, 0.0435, 0.0, 1.006), (12, 13, 0.0016, 0.0435, 0.0, 1.006),
    (6, 31, 0.0, 0.0250, 0.0, 1.070), (10, 32, 0.0, 0.0200, 0.0, 1.070),
    (19, 33, 0.0007, 0.0142, 0.0, 1.070), (20, 34, 0.0009, 0.0180, 0.0, 1.009),
    (22, 35, 0.0, 0.0143, 0.0, 1.025), (23, 36, 0.0005, 0.0272, 0.0, 1.000),
    (25, 37, 0.0006, 0.0232, 0.0, 1.025), (2, 30, 0.0, 0.0181, 0.0, 1.025),
    (29, 38, 0.0008, 0.0156, 0.0, 1.025), (19, 20, 0.0007, 0.0138, 0.0, 1.060),
]

# bus: (load MW, load MVAr)
LOADS = {
    3: (322.0, 2.4), 4: (500.0, 184.0), 7: (233.8, 84.0), 8: (522.0, 176.0),
    12: (7.5, 88.0), 15: (320.0, 153.0), 16: (329.0, 32.3), 18: (158.0, 30.0),
    20: (628.0, 103.0), 21: (274.0, 115.0), 23: (247.5, 84.6), 24: (308.6, -92.0),
    25: (224.0, 47.2), 26: (139.0, 17.0), 27: (281.0, 75.5), 28: (206.0, 27.6),
    29: (283.5, 26.9), 31: (9.2, 4.6), 39: (1104.0, 250.0),
}

SLACK_BUS = 31

# bus: (dispatch MW, voltage setpoint, inertia H s, transient reactance xd' pu)
GENERATORS = {
    30: (250.0, 1.0475, 42.0, 0.0310),
    31: (0.0, 0.9820, 30.3, 0.0697),  # slack; dispatch from the solution
    32: (650.0, 0.9831, 35.8, 0.0531),
    33: (632.0, 0.9972, 28.6, 0.0436),
    34: (508.0, 1.0123, 26.0, 0.1320),
    35: (650.0, 1.0493, 34.8, 0.0500),
    36: (560.0, 1.0635, 26.4, 0.0490),
    37: (540.0, 1.0278, 24.3, 0.0570),
    38: (830.0, 1.0265, 34.5, 0.0570),
    39: (1000.0, 1.0300, 500.0, 0.0060),
}

DAMPING_D = 0.05  # pu power per rad/s of speed deviation; light decay


def branch_ybus(n_bus):
    Y = np.zeros((n_bus, n_bus), dtype=complex)
    for f, t, r, x, b, tap in BRANCHES:
        i, j = f - 1, t - 1
        y = 1.0 / complex(r, x)
        bsh = 0.5j * b
        a = tap
        Y[i, i] += (y + bsh) / (a * a)
        Y[j, j] += y + bsh
        Y[i, j] -= y / a
        Y[j, i] -= y / a
    return Y


def solve_power_flow(tol=1e-12, max_iter=30):
    nb = 39
    Y = branch_ybus(nb)
    p_load = np.zeros(nb)
    q_load = np.zeros(nb)
    for bus, (p, q) in LOADS.items():
        p_load[bus - 1] = p / BASE_MVA
        q_load[bus - 1] = q / BASE_MVA
    p_gen = np.zeros(nb)
    vset = np.ones(nb)
    gen_buses = sorted(GENERATORS)
    for bus, (p, v, _, _) in GENERATORS.items():
        p_gen[bus - 1] = p / BASE_MVA
        vset[bus - 1] = v

    slack = SLACK_BUS - 1
    pv = [b - 1 for b in gen_buses if b != SLACK_BUS]
    pq = [i for i in range(nb) if i not in pv and i != slack]
    non_slack = [i for i in range(nb) if i != slack]

    p_spec = p_gen - p_load
    q_spec = -q_load

    vm = vset.copy()
    vm[pq] = 1.0
    va = np.zeros(nb)

    def mismatch(u):
        va_l = va.copy()
        vm_l = vm.copy()
        va_l[non_slack] = u[: len(non_slack)]
        vm_l[pq] = u[len(non_slack):]
        vbar = vm_l * np.exp(1j * va_l)
        s = vbar * np.conj(Y @ vbar)
        return np.concatenate([s.real[non_slack] - p_spec[non_slack],
                               s.imag[pq] - q_spec[pq]])

    u = np.concatenate([va[non_slack], vm[pq]])
    for it in range(max_iter):
        f0 = mismatch(u)
        if np.max(np.abs(f0)) < tol:
            break
        J = np.empty((u.size, u.size))
        h = 1e-7
        for j in range(u.size):
            up = u.copy(); up[j] += h
            dn = u.copy(); dn[j] -= h
            J[:, j] = (mismatch(up) - mismatch(dn)) / (2 * h)
        u = u - np.linalg.solve(J, f0)
    resid = np.max(np.abs(mismatch(u)))
    print(f"power flow: {it} iterations, max mismatch {resid:.3e} pu")
    if resid > 1e-10:
        raise RuntimeError("power flow did not converge")

    va[non_slack] = u[: len(non_slack)]
    vm[pq] = u[len(non_slack):]
    return vm, va, p_load, q_load


def main():
    vm, va, p_load, q_load = solve_power_flow()
    gen_buses = sorted(GENERATORS)
    case = RawCase(
        name="ieee39",
        base_mva=BASE_MVA,
        f_hz=F_HZ,
        bus_id=np.arange(1, 40),
        load_p=p_load,
        load_q=q_load,
        vm=vm,
        va=va,
        br_from=np.array([b[0] for b in BRANCHES]),
        br_to=np.array([b[1] for b in BRANCHES]),
        br_r=np.array([b[2] for b in BRANCHES]),
        br_x=np.array([b[3] for b in BRANCHES]),
        br_b=np.array([b[4] for b in BRANCHES]),
        br_tap=np.array([b[5] for b in BRANCHES]),
        gen_bus=np.array(gen_buses),
        gen_H=np.array([GENERATORS[b][2] for b in gen_buses]),
        gen_D=np.full(len(gen_buses), DAMPING_D),
        gen_xd_prime=np.array([GENERATORS[b][3] for b in gen_buses]),
        gen_Pm=np.zeros(len(gen_buses)),   # filled from the solution below
        gen_E=np.ones(len(gen_buses)),
    )
    emf, delta0, pm = emf_from_powerflow(case)
    case = RawCase(
        **{
            **{f: getattr(case, f) for f in case.__dataclass_fields__},
            "gen_Pm": pm,
            "gen_E": emf,
        }
    )

    out = os.path.join(
        os.path.dirname(__file__), "..", "src", "robustdse", "data", "ieee39.case"
    )
    os.makedirs(os.path.dirname(out), exist_ok=True)
    write_case(case, out)
    print(f"wrote {os.path.normpath(out)}")

    # consistency: the equilibrium frame must reproduce the solved voltages
    net = reduce_network(case)
    state = equilibrium_state(case)
    frame = measurement_fn(state, net, case.generator_params(), case.system_params(1 / 60))
    dv = np.max(np.abs(frame.V - vm))
    dth = np.max(np.abs(frame.theta - va))
    dp = np.max(np.abs(frame.P - pm))
    print(f"round trip: |dV|={dv:.3e}  |dtheta|={dth:.3e}  |dP|={dp:.3e}")
    if max(dv, dth, dp) > 1e-6:
        raise RuntimeError("case round trip exceeds 1e-6")


if __name__ == "__main__":
    main()
