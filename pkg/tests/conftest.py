import numpy as np
import pytest

from robustdse.fileio import bundled_path, parse_case
from robustdse.power_model import (
    PowerSystemModel,
    RawCase,
    equilibrium_state,
    reduce_network,
)

DT = 1.0 / 60.0


def make_case(
    buses,
    branches,
    gens,
    name="synthetic",
    f_hz=60.0,
):
    """Build a RawCase from plain tuples.

    buses: (id, load_p, load_q, vm, va); branches: (f, t, r, x, b, tap);
    gens: (bus, H, D, xd_prime, Pm, E).
    """
    buses = np.array(buses, dtype=float).reshape(-1, 5)
    branches = (
        np.array(branches, dtype=float).reshape(-1, 6)
        if len(branches)
        else np.zeros((0, 6))
    )
    gens = np.array(gens, dtype=float).reshape(-1, 6)
    return RawCase(
        name=name,
        base_mva=100.0,
        f_hz=f_hz,
        bus_id=buses[:, 0].astype(int),
        load_p=buses[:, 1],
        load_q=buses[:, 2],
        vm=buses[:, 3],
        va=buses[:, 4],
        br_from=branches[:, 0].astype(int),
        br_to=branches[:, 1].astype(int),
        br_r=branches[:, 2],
        br_x=branches[:, 3],
        br_b=branches[:, 4],
        br_tap=branches[:, 5],
        gen_bus=gens[:, 0].astype(int),
        gen_H=gens[:, 1],
        gen_D=gens[:, 2],
        gen_xd_prime=gens[:, 3],
        gen_Pm=gens[:, 4],
        gen_E=gens[:, 5],
    )


@pytest.fixture(scope="session")
def ieee_case():
    return parse_case(bundled_path("ieee39.case"))


@pytest.fixture(scope="session")
def ieee_net(ieee_case):
    return reduce_network(ieee_case)


@pytest.fixture(scope="session")
def ieee_gens(ieee_case):
    return ieee_case.generator_params()


@pytest.fixture(scope="session")
def ieee_sys(ieee_case):
    return ieee_case.system_params(DT)


@pytest.fixture(scope="session")
def ieee_model(ieee_case):
    return PowerSystemModel.from_case(ieee_case, DT)


@pytest.fixture(scope="session")
def ieee_equilibrium(ieee_case):
    return equilibrium_state(ieee_case)
