"""Closed-form thermodynamic phase boundaries at the solvable point Delta = t.

Two families of lines in the (eta, U/t) plane, with r_pm = (1 +- eta) / (1 -+ eta):

* real-line gap closing:  U/t = +- sqrt(| delta^2/t^2 - r_pm^2 |)
* imaginary-part zeros:   U/t = +- r_pm

They coincide when delta = 0.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

DEDUP_TOL = 1e-12
REAL_GAP = "real_gap"
IMAG_ZERO = "imag_zero"


class NoAnalyticBoundary:
    """Marker returned when the model is away from the solvable point."""

    def __repr__(self) -> str:
        return "NO_ANALYTIC_BOUNDARY"

    def __bool__(self) -> bool:
        return False


NO_ANALYTIC_BOUNDARY = NoAnalyticBoundary()


def _ratios(eta: float) -> tuple[float, float]:
    if not abs(eta) < 1:
        raise ValueError(f"boundaries need |eta| < 1, got {eta}")
    return (1 + eta) / (1 - eta), (1 - eta) / (1 + eta)


def _dedup(values) -> list[float]:
    out: list[float] = []
    for v in sorted(values):
        if not out or abs(v - out[-1]) > DEDUP_TOL:
            out.append(v)
    return out


def real_gap_boundary(eta: float, delta_nh: float = 0.0, t: float = 1.0) -> list[float]:
    """U/t values where the real-line gap closes, sorted, duplicates removed."""
    if not t > 0:
        raise ValueError("t must be positive")
    d2 = (delta_nh / t) ** 2
    vals = []
    for r in _ratios(eta):
        m = math.sqrt(abs(d2 - r * r))
        vals += [m, -m]
    return _dedup(vals)


def imag_zero_boundary(eta: float) -> list[float]:
    """U/t values where imaginary parts of the spectrum become degenerate at zero."""
    vals = []
    for r in _ratios(eta):
        vals += [r, -r]
    return _dedup(vals)


@dataclass
class BoundarySet:
    eta: float
    delta_over_t: float
    real_gap: list[float]
    imag_zero: list[float]


def analytic_boundaries(params, eta: float | None = None):
    """Boundaries for a ModelParams-like object, or NO_ANALYTIC_BOUNDARY when Delta != t."""
    if abs(params.delta_pair - params.t) > DEDUP_TOL * max(1.0, abs(params.t)):
        return NO_ANALYTIC_BOUNDARY
    eta = params.eta if eta is None else eta
    d = params.delta_nh / params.t
    return BoundarySet(eta, d, real_gap_boundary(eta, d), imag_zero_boundary(eta))


@dataclass
class Polyline:
    branch_id: str
    family: str
    points: np.ndarray  # (n, 2) columns eta, u_over_t


def boundary_polylines(eta_range, delta_nh: float = 0.0, resolution: int = 200,
                       t: float = 1.0) -> list[Polyline]:
    """Vertex lists per boundary branch over ``eta_range = (lo, hi)``.

    One branch per sign and per ratio r_pm. The imaginary-zero family is
    omitted when delta = 0 because it lies on top of the real-gap family.
    """
    if resolution < 2:
        raise ValueError("resolution must be >= 2")
    lo, hi = eta_range
    if lo > hi:
        return []
    etas = np.linspace(lo, hi, resolution)
    d = delta_nh / t
    rp = (1 + etas) / (1 - etas)
    rm = (1 - etas) / (1 + etas)
    lines = []
    for rname, r in (("r+", rp), ("r-", rm)):
        gap = np.sqrt(np.abs(d * d - r * r))
        for sign in (+1, -1):
            s = "+" if sign > 0 else "-"
            lines.append(Polyline(f"{REAL_GAP}:{s}{rname}", REAL_GAP,
                                  np.column_stack([etas, sign * gap])))
    if d != 0:
        for rname, r in (("r+", rp), ("r-", rm)):
            for sign in (+1, -1):
                s = "+" if sign > 0 else "-"
                lines.append(Polyline(f"{IMAG_ZERO}:{s}{rname}", IMAG_ZERO,
                                      np.column_stack([etas, sign * r])))
    return lines


def write_polylines_csv(lines: list[Polyline], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["branch_id", "eta", "u_over_t"])
        for line in lines:
            for eta, u in line.points:
                w.writerow([line.branch_id, format(eta, ".17g"), format(u, ".17g")])
