"""Render PNGs from the CSVs written by reproduce_figures.py.

Needs matplotlib (``pip install -e .[plot]``).

    python3 scripts/plot_figures.py figures
"""

import csv
import sys
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def read(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def by_size(rows, column):
    groups = defaultdict(list)
    for r in rows:
        groups[int(r["d"])].append(float(r[column]))
    sizes = sorted(groups)
    return np.array(sizes), [np.array(groups[d]) for d in sizes]


def plot_shrinkage(src, dst):
    rows = read(src / "fig_shrinkage.csv")
    sizes, emp = by_size(rows, "empirical_error")
    _, theory = by_size(rows, "theory_error")
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.errorbar(sizes, [e.mean() for e in emp], yerr=[e.std() for e in emp], marker="o", label="empirical")
    ax.plot(sizes, [t[0] for t in theory], "k--", label="theory")
    ax.set(xscale="log", xlabel="d", ylabel="squared Frobenius error")
    ax.set_xticks(sizes, [str(s) for s in sizes])
    ax.legend()
    fig.tight_layout()
    fig.savefig(dst / "fig_shrinkage.png", dpi=150)


def plot_opnorm(src, dst):
    sizes, res = by_size(read(src / "fig_opnorm.csv"), "opnorm_residual")
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.errorbar(sizes, [r.mean() for r in res], yerr=[r.std() for r in res], marker="o")
    ax.set(xscale="log", yscale="log", xlabel="d", ylabel="operator-norm residual")
    ax.set_xticks(sizes, [str(s) for s in sizes])
    fig.tight_layout()
    fig.savefig(dst / "fig_opnorm.png", dpi=150)


def plot_spectrum(src, dst):
    values = np.array([float(r["singular_value_normalized"]) for r in read(src / "fig_spectrum.csv")])
    law = read(src / "fig_spectrum_law.csv")
    spikes = [float(r["predicted_location"]) for r in read(src / "fig_spectrum_spikes.csv")]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    bulk = values[values <= 2.05]
    ax.hist(bulk, bins=60, density=True, alpha=0.6, label="singular values")
    ax.plot([float(r["x"]) for r in law], [float(r["pdf"]) for r in law], "k", label="quarter circle")
    outliers = values[values > 2.05]
    ax.plot(outliers, np.zeros_like(outliers), "r^", ms=8, label="outliers")
    ax.plot(spikes, np.zeros(len(spikes)), "kx", ms=8, label="predicted")
    ax.set(xlabel="normalized singular value", ylabel="density")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(dst / "fig_spectrum.png", dpi=150)


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    src = Path(argv[0] if argv else "figures")
    for plot in (plot_shrinkage, plot_opnorm, plot_spectrum):
        try:
            plot(src, src)
        except FileNotFoundError as exc:
            print(f"skipping {plot.__name__}: {exc.filename} missing")
    print(f"plots written to {src}")


if __name__ == "__main__":
    main()
