"""Figure rendering for run artifacts.

Static per-generator line plots of rotor speed and angle, truth against
every estimate, written as files next to the CSV traces.  CSV remains
the contract; the figures are conveniences.
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np


def save_state_plots(
    times: np.ndarray,
    truth: np.ndarray,
    estimates: dict[str, np.ndarray],
    n_gen: int,
    out_dir: str,
    gen_numbers=None,
    fmt: str = "svg",
) -> list[str]:
    """Write speed_gen<i> and angle_gen<i> figures.

    truth has one row per time sample; each estimate array is aligned
    with times[1:] (filters produce no output for the initial sample).
    Returns the written paths.
    """
    if gen_numbers is None:
        gen_numbers = range(1, n_gen + 1)
    t_est = times[1 : 1 + min(e.shape[0] for e in estimates.values())] if estimates else times[1:]
    written = []
    for g in gen_numbers:
        if not 1 <= g <= n_gen:
            raise ValueError(f"no generator {g}")
        for label, col, unit, stem in (
            ("rotor speed", g - 1, "rad/s", "speed"),
            ("rotor angle", n_gen + g - 1, "rad", "angle"),
        ):
            fig, ax = plt.subplots(figsize=(8.0, 4.0))
            ax.plot(times, truth[:, col], "k-", lw=1.6, label="truth")
            for name, est in estimates.items():
                ax.plot(t_est, est[: t_est.size, col], lw=1.0, label=name)
            ax.set_xlabel("time (s)")
            ax.set_ylabel(f"{label} of generator {g} ({unit})")
            ax.grid(True, alpha=0.4)
            ax.legend(loc="best")
            fig.tight_layout()
            path = os.path.join(out_dir, f"{stem}_gen{g}.{fmt}")
            fig.savefig(path)
            plt.close(fig)
            written.append(path)
    return written
