"""Command-line front end: run filter comparisons on a case/scenario
pair, emit CSV traces, a text report, optional figures, and benchmark
timing tables.

Exit codes: 0 success, 1 numerical failure, 2 configuration/IO failure.
Set ROBUSTDSE_LOG=debug|info|warning to control verbosity.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import statistics
import sys as _sys
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NumericalError, RobustDseError
from .fileio import parse_case, parse_scenario
from .filters import (
    FilterState,
    NoiseModel,
    UkfConfig,
    ekf_step,
    gmekf_step,
    ukf_step,
)
from .power_model import PowerSystemModel, equilibrium_state
from .robust_stats import HuberConfig
from .simulator import apply_faults, overall_error, simulate_truth, synthesize_measurements

log = logging.getLogger("robustdse")

FILTER_NAMES = ("ekf", "gmekf", "ukf")
DEFAULT_DT = 1.0 / 60.0


@dataclass(frozen=True)
class RunConfig:
    """Everything one comparison run needs."""

    case_path: str
    scenario_path: str
    filters: tuple[str, ...] = FILTER_NAMES
    huber: HuberConfig = field(default_factory=HuberConfig)
    ukf: UkfConfig = field(default_factory=UkfConfig)
    output_dir: str = "out"
    seed: int | None = None
    emit_plots: bool = False
    plot_gens: tuple[int, ...] | None = None
    dt: float = DEFAULT_DT
    process_noise: float = 1e-4
    measurement_noise: float = 1e-4
    sigma0: float = 1e-4
    mask_invalid: bool = False

    def __post_init__(self):
        if not self.filters:
            raise ConfigError("select at least one filter")
        for name in self.filters:
            if name not in FILTER_NAMES:
                raise ConfigError(f"unknown filter {name!r}")


@dataclass(frozen=True)
class RunReport:
    """Per-filter outcome of one run."""

    case: str
    scenario: str
    seed: int
    filters: tuple[str, ...]
    error: dict[str, float]
    wall_time: dict[str, float]
    irls_median_iters: float | None
    irls_max_iters: int | None
    irls_nonconverged: int | None
    artifacts: tuple[str, ...]


class _Stage:
    """Context tagging errors with the pipeline stage that failed."""

    def __init__(self, name: str):
        self.name = name

    def __enter__(self):
        log.debug("stage %s", self.name)
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc is not None and isinstance(exc, RobustDseError):
            exc.args = (f"{self.name}: {exc}",)
        return False


def _run_filter(name, frames, model, noise, fs0, huber, ukf_cfg, mask_invalid):
    fs = fs0
    history = None
    est = np.empty((len(frames) - 1, model.n))
    iters: list[int] = []
    nonconverged = 0
    t0 = time.perf_counter()
    for i, frame in enumerate(frames[1:]):
        if name == "ekf":
            fs = ekf_step(fs, frame, noise, model, mask_invalid=mask_invalid)
        elif name == "ukf":
            fs = ukf_step(fs, frame, noise, model, cfg=ukf_cfg, mask_invalid=mask_invalid)
        else:
            fs, info = gmekf_step(
                fs, frame, noise, model, cfg=huber, history=history,
                mask_invalid=mask_invalid,
            )
            history = info.history
            iters.append(info.irls_iterations)
            nonconverged += 0 if info.irls_converged else 1
        est[i] = fs.x_hat
    wall = time.perf_counter() - t0
    return est, wall, iters, nonconverged


def _prepare(config: RunConfig):
    with _Stage("case-load"):
        case = parse_case(config.case_path)
    with _Stage("scenario-load"):
        scenario = parse_scenario(config.scenario_path)
    seed = scenario.seed if config.seed is None else config.seed
    sys_params = case.system_params(config.dt)
    with _Stage("network-reduction"):
        model = PowerSystemModel.from_case(case, config.dt)
    noise = NoiseModel.diagonal(
        model.n, model.m, w=config.process_noise, r=config.measurement_noise
    )
    with _Stage("simulate-truth"):
        traj = simulate_truth(case, scenario, sys_params)
    with _Stage("synthesize-measurements"):
        clean = synthesize_measurements(traj, noise, seed)
        frames = apply_faults(clean, scenario, case.n_gen, case.n_bus)
    fs0 = FilterState(
        x_hat=equilibrium_state(case).to_vector(),
        sigma=config.sigma0 * np.eye(model.n),
        k=0,
    )
    return case, scenario, seed, model, noise, traj, frames, fs0


def run(config: RunConfig) -> RunReport:
    """Simulate once, run every selected filter on the identical
    measurement stream, and write traces/report/figures to disk."""
    case, scenario, seed, model, noise, traj, frames, fs0 = _prepare(config)
    os.makedirs(config.output_dir, exist_ok=True)

    truth = traj.state_matrix()
    estimates: dict[str, np.ndarray] = {}
    error: dict[str, float] = {}
    wall: dict[str, float] = {}
    gm_iters: list[int] = []
    gm_nonconv: int | None = None
    for name in config.filters:
        with _Stage(f"filter-{name}"):
            est, t, iters, nonconv = _run_filter(
                name, frames, model, noise, fs0, config.huber, config.ukf,
                config.mask_invalid,
            )
        estimates[name] = est
        error[name] = overall_error(est, truth[1:])
        wall[name] = t
        if name == "gmekf":
            gm_iters = iters
            gm_nonconv = nonconv
        log.info("%s: overall error %.6g in %.3fs", name, error[name], t)

    artifacts = []
    with _Stage("write-artifacts"):
        trace_path = os.path.join(config.output_dir, "traces.csv")
        _write_traces(trace_path, traj.times, truth, estimates, model.sys.n_gen)
        artifacts.append(trace_path)
        report_path = os.path.join(config.output_dir, "report.txt")
        report = RunReport(
            case=case.name,
            scenario=scenario.name,
            seed=seed,
            filters=config.filters,
            error=error,
            wall_time=wall,
            irls_median_iters=float(statistics.median(gm_iters)) if gm_iters else None,
            irls_max_iters=max(gm_iters) if gm_iters else None,
            irls_nonconverged=gm_nonconv,
            artifacts=(),
        )
        _write_report(report_path, report, config)
        artifacts.append(report_path)
        if config.emit_plots:
            from .plotting import save_state_plots

            artifacts += save_state_plots(
                traj.times,
                truth,
                estimates,
                model.sys.n_gen,
                config.output_dir,
                gen_numbers=config.plot_gens,
            )
    return RunReport(
        case=report.case,
        scenario=report.scenario,
        seed=report.seed,
        filters=report.filters,
        error=report.error,
        wall_time=report.wall_time,
        irls_median_iters=report.irls_median_iters,
        irls_max_iters=report.irls_max_iters,
        irls_nonconverged=report.irls_nonconverged,
        artifacts=tuple(artifacts),
    )


def bench(config: RunConfig, repeats: int) -> list[dict]:
    """Mean/std wall-clock of each filter over `repeats` passes of the
    full scenario, all on one shared measurement stream."""
    if repeats < 1:
        raise ConfigError("repeats must be >= 1")
    _, scenario, _, model, noise, traj, frames, fs0 = _prepare(config)
    rows = []
    for name in config.filters:
        times = []
        for _ in range(repeats):
            _, t, _, _ = _run_filter(
                name, frames, model, noise, fs0, config.huber, config.ukf,
                config.mask_invalid,
            )
            times.append(t)
        rows.append(
            {
                "filter": name,
                "mean_s": statistics.fmean(times),
                "std_s": statistics.stdev(times) if repeats > 1 else 0.0,
                "repeats": repeats,
            }
        )
        log.info("%s: %.4fs +- %.4fs", name, rows[-1]["mean_s"], rows[-1]["std_s"])
    os.makedirs(config.output_dir, exist_ok=True)
    path = os.path.join(config.output_dir, "bench.csv")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(
            fh, fieldnames=["filter", "mean_s", "std_s", "repeats"], lineterminator="\n"
        )
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
    return rows


def _write_traces(path, times, truth, estimates, n_gen):
    state_names = [f"omega_{i + 1}" for i in range(n_gen)] + [
        f"delta_{i + 1}" for i in range(n_gen)
    ]
    header = ["time"]
    header += [f"truth_{s}" for s in state_names]
    for name in estimates:
        header += [f"{name}_{s}" for s in state_names]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for k, t in enumerate(times):
            row = [repr(float(t))]
            row += [repr(float(v)) for v in truth[k]]
            for est in estimates.values():
                if k == 0:
                    row += [""] * est.shape[1]
                else:
                    row += [repr(float(v)) for v in est[k - 1]]
            writer.writerow(row)


def _write_report(path, report: RunReport, config: RunConfig):
    lines = [
        "# robustdse run report",
        "[run]",
        f"case = {report.case}",
        f"scenario = {report.scenario}",
        f"seed = {report.seed}",
        f"dt = {config.dt!r}",
        f"filters = {','.join(report.filters)}",
        "",
        "[overall_error]",
    ]
    lines += [f"{k} = {v!r}" for k, v in report.error.items()]
    lines += ["", "[wall_time_s]"]
    lines += [f"{k} = {v!r}" for k, v in report.wall_time.items()]
    if report.irls_median_iters is not None:
        lines += [
            "",
            "[irls]",
            f"median_iterations = {report.irls_median_iters!r}",
            f"max_iterations = {report.irls_max_iters}",
            f"nonconverged_steps = {report.irls_nonconverged}",
        ]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="robustdse",
        description="Dynamic state estimation runs on multimachine cases",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--case", required=True, help="case file path")
        p.add_argument("--scenario", required=True, help="scenario file path")
        p.add_argument(
            "--filters",
            default="ekf,gmekf,ukf",
            help="comma-separated subset of ekf,gmekf,ukf",
        )
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override scenario seed")
        p.add_argument("--dt", type=float, default=DEFAULT_DT, help="step (s)")
        p.add_argument("--huber-c", type=float, default=1.5)
        p.add_argument("--huber-d", type=float, default=1.5)
        p.add_argument("--irls-tol", type=float, default=0.01)
        p.add_argument("--process-noise", type=float, default=1e-4)
        p.add_argument("--measurement-noise", type=float, default=1e-4)
        p.add_argument(
            "--mask-invalid",
            action="store_true",
            help="drop invalid channels instead of processing their zeros",
        )

    p_run = sub.add_parser("run", help="run filters once and write artifacts")
    common(p_run)
    p_run.add_argument("--plots", action="store_true", help="write SVG figures")
    p_run.add_argument(
        "--plot-gens",
        default=None,
        help="comma-separated generator numbers to plot (default: all)",
    )

    p_bench = sub.add_parser("bench", help="time repeated filter passes")
    common(p_bench)
    p_bench.add_argument("--repeats", type=int, default=10)
    return parser


def _config_from_args(args) -> RunConfig:
    plot_gens = None
    if getattr(args, "plot_gens", None):
        plot_gens = tuple(int(g) for g in args.plot_gens.split(","))
    return RunConfig(
        case_path=args.case,
        scenario_path=args.scenario,
        filters=tuple(f.strip() for f in args.filters.split(",") if f.strip()),
        huber=HuberConfig(c=args.huber_c, d=args.huber_d, irls_tol=args.irls_tol),
        output_dir=args.out,
        seed=args.seed,
        emit_plots=getattr(args, "plots", False),
        plot_gens=plot_gens,
        dt=args.dt,
        process_noise=args.process_noise,
        measurement_noise=args.measurement_noise,
        mask_invalid=args.mask_invalid,
    )


def main(argv=None) -> int:
    logging.basicConfig(
        level=os.environ.get("ROBUSTDSE_LOG", "warning").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        config = _config_from_args(args)
        if args.command == "run":
            report = run(config)
            print(f"case={report.case} scenario={report.scenario} seed={report.seed}")
            for name in report.filters:
                print(
                    f"{name}: overall_error={report.error[name]:.6g} "
                    f"wall_time={report.wall_time[name]:.3f}s"
                )
            print(f"artifacts: {', '.join(report.artifacts)}")
        else:
            rows = bench(config, args.repeats)
            for row in rows:
                print(
                    f"{row['filter']}: mean={row['mean_s']:.4f}s "
                    f"std={row['std_s']:.4f}s repeats={row['repeats']}"
                )
        return 0
    except ConfigError as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=_sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
