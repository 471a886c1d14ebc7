"""Readers and writers for the case and scenario text formats.

Both formats are line-oriented: `#` starts a comment, `[name]` opens a
section.  Sections either hold `key = value` pairs or whitespace-
separated table rows.  See the shipped files under robustdse/data for
worked examples; the full schemas are documented in the README.
"""

from __future__ import annotations

import os

import numpy as np

from .errors import ConfigError
from .power_model import RawCase
from .simulator import Disturbance, Fault, Scenario

CASE_VERSION = 1
SCENARIO_VERSION = 1


def bundled_path(name: str) -> str:
    """Absolute path of a data file shipped with the package (the 39-bus
    case and the three scenario files)."""
    from importlib.resources import files

    path = files("robustdse").joinpath("data", name)
    if not path.is_file():
        raise ConfigError(f"no bundled data file {name!r}")
    return str(path)


def _read_sections(path: str) -> list[tuple[str, list[str]]]:
    """Split a file into (section name, raw lines) pairs, in order.
    Repeated section names are preserved as separate entries."""
    if not os.path.exists(path):
        raise ConfigError(f"file not found: {path}")
    sections: list[tuple[str, list[str]]] = []
    current: list[str] | None = None
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if line.startswith("[") and line.endswith("]"):
                current = []
                sections.append((line[1:-1].strip(), current))
            elif current is None:
                raise ConfigError(f"{path}:{lineno}: content before first section")
            else:
                current.append(line)
    return sections


def _kv(lines: list[str], path: str, section: str) -> dict[str, str]:
    out = {}
    for line in lines:
        if "=" not in line:
            raise ConfigError(f"{path}: expected key = value in [{section}]: {line!r}")
        key, val = line.split("=", 1)
        out[key.strip()] = val.strip()
    return out


def _table(lines: list[str], ncols: int, path: str, section: str) -> np.ndarray:
    rows = []
    for line in lines:
        parts = line.split()
        if len(parts) != ncols:
            raise ConfigError(
                f"{path}: [{section}] row needs {ncols} columns: {line!r}"
            )
        rows.append([float(p) for p in parts])
    if not rows:
        raise ConfigError(f"{path}: section [{section}] is empty")
    return np.array(rows)


def parse_case(path: str) -> RawCase:
    """Load a network case file."""
    if not os.path.exists(path):
        raise ConfigError("case file not found")
    found = {name: lines for name, lines in _read_sections(path)}
    for required in ("case", "buses", "branches", "generators"):
        if required not in found:
            raise ConfigError(f"{path}: missing section [{required}]")

    meta = _kv(found["case"], path, "case")
    version = int(meta.get("version", "1"))
    if version != CASE_VERSION:
        raise ConfigError(f"{path}: unsupported case version {version}")

    bus = _table(found["buses"], 5, path, "buses")
    br = _table(found["branches"], 6, path, "branches")
    gen = _table(found["generators"], 6, path, "generators")

    return RawCase(
        name=meta.get("name", os.path.basename(path)),
        base_mva=float(meta.get("base_mva", "100.0")),
        f_hz=float(meta.get("f_hz", "60.0")),
        bus_id=bus[:, 0].astype(int),
        load_p=bus[:, 1],
        load_q=bus[:, 2],
        vm=bus[:, 3],
        va=bus[:, 4],
        br_from=br[:, 0].astype(int),
        br_to=br[:, 1].astype(int),
        br_r=br[:, 2],
        br_x=br[:, 3],
        br_b=br[:, 4],
        br_tap=br[:, 5],
        gen_bus=gen[:, 0].astype(int),
        gen_H=gen[:, 1],
        gen_D=gen[:, 2],
        gen_xd_prime=gen[:, 3],
        gen_Pm=gen[:, 4],
        gen_E=gen[:, 5],
    )


def write_case(case: RawCase, path: str) -> None:
    """Write a case file with full-precision values."""
    lines = [
        "# robustdse case file",
        "[case]",
        f"version = {CASE_VERSION}",
        f"name = {case.name}",
        f"base_mva = {float(case.base_mva)!r}",
        f"f_hz = {float(case.f_hz)!r}",
        "",
        "[buses]",
        "# id  load_p  load_q  vm  va",
    ]
    for i in range(case.n_bus):
        lines.append(
            f"{int(case.bus_id[i])}  {float(case.load_p[i])!r}  "
            f"{float(case.load_q[i])!r}  {float(case.vm[i])!r}  {float(case.va[i])!r}"
        )
    lines += ["", "[branches]", "# from  to  r  x  b  tap"]
    for i in range(case.br_from.size):
        lines.append(
            f"{int(case.br_from[i])}  {int(case.br_to[i])}  {float(case.br_r[i])!r}  "
            f"{float(case.br_x[i])!r}  {float(case.br_b[i])!r}  {float(case.br_tap[i])!r}"
        )
    lines += ["", "[generators]", "# bus  H  D  xd_prime  Pm  E"]
    for i in range(case.n_gen):
        lines.append(
            f"{int(case.gen_bus[i])}  {float(case.gen_H[i])!r}  {float(case.gen_D[i])!r}  "
            f"{float(case.gen_xd_prime[i])!r}  {float(case.gen_Pm[i])!r}  {float(case.gen_E[i])!r}"
        )
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def parse_scenario(path: str) -> Scenario:
    """Load a scenario file."""
    if not os.path.exists(path):
        raise ConfigError("scenario file not found")
    sections = _read_sections(path)
    names = [name for name, _ in sections]
    if "scenario" not in names:
        raise ConfigError(f"{path}: missing section [scenario]")

    meta = _kv(dict(sections)["scenario"], path, "scenario")
    version = int(meta.get("version", "1"))
    if version != SCENARIO_VERSION:
        raise ConfigError(f"{path}: unsupported scenario version {version}")
    duration = float(meta["duration"])
    seed = int(meta.get("seed", "0"))
    name = meta.get("name", os.path.basename(path))

    disturbance = None
    faults = []
    for sec, lines in sections:
        if sec == "scenario":
            continue
        if sec == "disturbance":
            if disturbance is not None:
                raise ConfigError(f"{path}: more than one [disturbance]")
            kv = _kv(lines, path, sec)
            kind = kv.get("kind", "none")
            if kind == "none":
                continue
            disturbance = Disturbance(
                kind=kind,
                target=int(kv["target"]),
                factor=float(kv["factor"]),
                t_start=float(kv["t_start"]),
                t_end=float(kv["t_end"]),
            )
        elif sec == "fault":
            kv = _kv(lines, path, sec)
            t_end = kv.get("t_end")
            faults.append(
                Fault(
                    kind=kv["kind"],
                    channels=tuple(
                        c.strip() for c in kv["channels"].split(",") if c.strip()
                    ),
                    t_start=float(kv["t_start"]),
                    t_end=float(t_end) if t_end not in (None, "", "-") else None,
                    value=float(kv.get("value", "0.0")),
                )
            )
        else:
            raise ConfigError(f"{path}: unknown section [{sec}]")

    scenario = Scenario(
        name=name,
        duration=duration,
        seed=seed,
        disturbance=disturbance,
        faults=tuple(faults),
    )
    scenario.validate()
    return scenario


def write_scenario(scenario: Scenario, path: str) -> None:
    lines = [
        "# robustdse scenario file",
        "[scenario]",
        f"version = {SCENARIO_VERSION}",
        f"name = {scenario.name}",
        f"duration = {float(scenario.duration)!r}",
        f"seed = {scenario.seed}",
    ]
    if scenario.disturbance is not None:
        d = scenario.disturbance
        lines += [
            "",
            "[disturbance]",
            f"kind = {d.kind}",
            f"target = {d.target}",
            f"factor = {float(d.factor)!r}",
            f"t_start = {float(d.t_start)!r}",
            f"t_end = {float(d.t_end)!r}",
        ]
    for f in scenario.faults:
        lines += [
            "",
            "[fault]",
            f"kind = {f.kind}",
            f"channels = {', '.join(f.channels)}",
            f"t_start = {float(f.t_start)!r}",
        ]
        if f.t_end is not None:
            lines.append(f"t_end = {float(f.t_end)!r}")
        lines.append(f"value = {float(f.value)!r}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
