"""Report, table and plot writers."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .analysis import SWEEP_HEADER, SweepTable, ThresholdEstimate
from .errors import NehariError
from .mesh import write_node_csv
from .solver import SolveReport, VerificationReport


class IoError(NehariError, OSError):
    pass


def _num(v):
    """JSON-safe float (NaN/inf become strings)."""
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    return v


def _clean(d):
    if isinstance(d, dict):
        return {k: _clean(v) for k, v in d.items()}
    if isinstance(d, (list, tuple)):
        return [_clean(v) for v in d]
    return _num(d)


def solve_report_text(rep: SolveReport) -> str:
    s = rep.summary()
    lines = [f"branch          {s['branch']}"]
    lines += [f"{k:<16}{v}" for k, v in s.items() if k != "branch"]
    return "\n".join(lines) + "\n"


def write_solve_report(rep: SolveReport, out_dir, name: str, plot: bool = True) -> list[Path]:
    """``<name>.json``, ``<name>.txt``, ``<name>_u.csv`` and optionally ``<name>.svg``."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        paths = [out / f"{name}.json", out / f"{name}.txt", out / f"{name}_u.csv"]
        payload = dict(rep.summary(), energy_trace=list(rep.energy_trace))
        paths[0].write_text(json.dumps(_clean(payload), indent=2) + "\n")
        paths[1].write_text(solve_report_text(rep))
        write_node_csv(rep.u, paths[2])
        if plot:
            paths.append(out / f"{name}.svg")
            plot_solution(rep.u, paths[-1], title=f"{rep.branch.value} branch, energy {rep.energy:.6g}")
    except OSError as exc:
        raise IoError(str(exc)) from exc
    return paths


def write_sweep_csv(table: SweepTable, path) -> Path:
    path = Path(path)
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(SWEEP_HEADER)
            for row in table.rows:
                w.writerow([repr(float(v)) if isinstance(v, float) else v for v in row.as_tuple()])
    except OSError as exc:
        raise IoError(str(exc)) from exc
    return path


def read_sweep_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_json(obj: dict, path) -> Path:
    path = Path(path)
    try:
        path.write_text(json.dumps(_clean(obj), indent=2) + "\n")
    except OSError as exc:
        raise IoError(str(exc)) from exc
    return path


def write_report(obj, path, **kwargs):
    """Dispatch on report type; ``path`` is a directory for solve reports, a file otherwise."""
    if isinstance(obj, SolveReport):
        return write_solve_report(obj, path, kwargs.get("name", obj.branch.value), kwargs.get("plot", True))
    if isinstance(obj, SweepTable):
        return write_sweep_csv(obj, path)
    if isinstance(obj, (ThresholdEstimate, VerificationReport)):
        return write_json(obj.summary(), path)
    raise TypeError(f"cannot write {type(obj).__name__}")


def _figure():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def _save(plt, fig, path):
    try:
        fig.savefig(path, format="svg", metadata={"Date": None})
    except OSError as exc:
        raise IoError(str(exc)) from exc
    finally:
        plt.close(fig)


def plot_solution(u, path, title: str = "") -> Path:
    """Line plot in 1D, filled contour plot on triangles in 2D."""
    plt = _figure()
    mesh = u.mesh
    fig, ax = plt.subplots(figsize=(5, 4))
    if mesh.dim == 1:
        ax.plot(mesh.nodes[:, 0], u.values, "-")
        ax.set_xlabel("x")
        ax.set_ylabel("u")
    else:
        tc = ax.tricontourf(mesh.nodes[:, 0], mesh.nodes[:, 1], mesh.elements, u.values, levels=20)
        fig.colorbar(tc, ax=ax)
        ax.set_aspect("equal")
        ax.set_xlabel("x1")
        ax.set_ylabel("x2")
    ax.set_title(title)
    _save(plt, fig, path)
    return Path(path)


def plot_sweep(table: SweepTable, path) -> Path:
    """Branch minima against the parameter (minus energy on a symlog axis)."""
    plt = _figure()
    lam = np.array([r.lam for r in table.rows])
    mp = np.array([r.m_plus for r in table.rows])
    mm = np.array([r.m_minus for r in table.rows])
    fig, (a1, a2) = plt.subplots(1, 2, figsize=(9, 4))
    a1.plot(lam, mp, "o-")
    a1.set_xscale("log")
    a1.set_xlabel("lambda")
    a1.set_ylabel("m_plus")
    a2.plot(lam, mm, "s-")
    a2.set_xscale("log")
    a2.set_yscale("symlog")
    a2.axhline(0.0, color="k", lw=0.5)
    a2.set_xlabel("lambda")
    a2.set_ylabel("m_minus")
    fig.tight_layout()
    _save(plt, fig, path)
    return Path(path)
