"""Plot outputs for study CSVs: gnuplot scripts and matplotlib PNGs."""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

CONVERGENCE = ("tau", "ms_error", "stderr", "order_fit")
ENERGY = ("t", "mean_energy", "stderr", "predicted")
DIVERGENCE = ("t", "residual_coarse", "residual_fine")


def read_csv(path) -> tuple[tuple[str, ...], np.ndarray]:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such CSV: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2:
        raise OSError(f"{path} has no data rows")
    header = tuple(rows[0])
    return header, np.array([[float(v) for v in r] for r in rows[1:]])


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join("%.17g" % float(v) for v in row) + "\n")
    return path


def _kind(header) -> str:
    for name, cols in (("convergence", CONVERGENCE), ("energy", ENERGY), ("divergence", DIVERGENCE)):
        if tuple(header) == cols:
            return name
    raise ValueError(f"unrecognised CSV header {header!r}")


def _gnuplot(kind: str, csv_name: str, data: np.ndarray) -> str:
    lines = [
        "# gnuplot script",
        "set datafile separator ','",
        "set key top left",
        f"set output '{Path(csv_name).stem}.svg'",
        "set terminal svg",
    ]
    if kind == "convergence":
        tau0, e0 = data[0, 0], np.sqrt(data[0, 1])
        lines += [
            "set logscale xy",
            "set xlabel 'tau'",
            "set ylabel 'rms error'",
            f"guide(x) = {e0:.17g} * (x / {tau0:.17g})**1",
            f"plot '{csv_name}' skip 1 using 1:(sqrt($2)) with linespoints title 'rms error', \\",
            "     guide(x) with lines dashtype 2 title 'slope 1'",
        ]
    elif kind == "energy":
        lines += [
            "set xlabel 't'",
            "set ylabel 'E||Z||^2'",
            f"plot '{csv_name}' skip 1 using 1:2:(4*$3) with yerrorbars title 'mean energy', \\",
            f"     '{csv_name}' skip 1 using 1:4 with lines title 'predicted'",
        ]
    else:
        lines += [
            "set xlabel 't'",
            "set ylabel 'divergence residual'",
            f"plot '{csv_name}' skip 1 using 1:2 with linespoints title 'tau', \\",
            f"     '{csv_name}' skip 1 using 1:3 with linespoints title 'tau/2'",
        ]
    return "\n".join(lines) + "\n"


def emit_plots(csv_paths, out_dir=None) -> list[Path]:
    """Write one gnuplot script per CSV; returns the script paths."""
    out = []
    for p in csv_paths:
        p = Path(p)
        header, data = read_csv(p)
        kind = _kind(header)
        target = Path(out_dir or p.parent) / (p.stem + ".gp")
        target.write_text(_gnuplot(kind, p.name, data), encoding="utf-8")
        out.append(target)
    return out


def render_png(csv_path, out_dir=None) -> Path:
    """Render a CSV to PNG with matplotlib."""
    p = Path(csv_path)
    header, data = read_csv(p)
    kind = _kind(header)
    fig, ax = plt.subplots(figsize=(5.5, 4.0))
    if kind == "convergence":
        tau, rms = data[:, 0], np.sqrt(data[:, 1])
        err = 0.5 * data[:, 2] / np.maximum(rms, 1e-300)
        ax.errorbar(tau, rms, yerr=2 * err, marker="o", capsize=3, label=f"p = {data[0, 3]:.3f}")
        ax.loglog(tau, rms[0] * tau / tau[0], "k--", lw=1, label="slope 1")
        ax.set_xlabel(r"$\tau$")
        ax.set_ylabel("rms error")
    elif kind == "energy":
        ax.errorbar(data[:, 0], data[:, 1], yerr=4 * data[:, 2], fmt=".", ms=3, capsize=2, label="mean energy")
        ax.plot(data[:, 0], data[:, 3], "k-", lw=1, label="predicted")
        ax.set_xlabel("t")
        ax.set_ylabel(r"$E\|Z\|^2$")
    else:
        ax.plot(data[:, 0], data[:, 1], "o-", label=r"$\tau$")
        ax.plot(data[:, 0], data[:, 2], "s-", label=r"$\tau/2$")
        ax.set_xlabel("t")
        ax.set_ylabel("divergence residual")
    ax.legend()
    fig.tight_layout()
    target = Path(out_dir or p.parent) / (p.stem + ".png")
    fig.savefig(target, dpi=120)
    plt.close(fig)
    return target
