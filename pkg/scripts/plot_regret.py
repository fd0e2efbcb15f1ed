"""Plot the regret and trajectory files written by ``online-newton run``.

Usage::

    python scripts/plot_regret.py OUT_DIR [--save figure.png]

Needs matplotlib (``pip install artifact[plot]``).
"""

import argparse
import csv
from pathlib import Path

import matplotlib.pyplot as plt
import numpy as np


def read_columns(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    return {key: np.array([float(r[key]) for r in rows]) for key in rows[0]}


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("out_dir", type=Path)
    parser.add_argument("--save", type=Path, help="write the figure here instead of showing it")
    args = parser.parse_args(argv)

    regret = read_columns(args.out_dir / "regret.csv")
    traj = read_columns(args.out_dir / "trajectory.csv")
    fig, (ax_r, ax_t) = plt.subplots(1, 2, figsize=(11, 4.5))

    t = regret["t"]
    for name, color in (("onm", "C0"), ("ogd", "C1")):
        mean, err = regret[f"{name}_regret_mean"], regret[f"{name}_regret_stderr"]
        ax_r.plot(t, mean, color=color, label=name.upper())
        ax_r.fill_between(t, mean - err, mean + err, color=color, alpha=0.25)
    ax_r.set_xlabel("round t")
    ax_r.set_ylabel("cumulative dynamic regret")
    ax_r.legend()

    first = traj["replication"] == traj["replication"][0]
    ax_t.plot(traj["target_x"][first], traj["target_y"][first], "k-", label="target")
    ax_t.plot(traj["onm_x"][first], traj["onm_y"][first], "C0.", ms=3, label="ONM")
    ax_t.plot(traj["ogd_x"][first], traj["ogd_y"][first], "C1.", ms=3, label="OGD")
    ax_t.set_xlabel("x")
    ax_t.set_ylabel("y")
    ax_t.legend()
    fig.tight_layout()

    if args.save:
        fig.savefig(args.save, dpi=150)
    else:
        plt.show()


if __name__ == "__main__":
    main()
