"""Parameter sweeps over the (U/t, eta) plane and the dataset CSV format.

Random-uniform sampling is portable across platforms: the raw 64-bit output
of the Philox-4x32-10 counter-based generator keyed directly by ``seed``
(``numpy.random.Philox(key=seed).random_raw``) is converted to doubles in
[0, 1) by keeping the top 53 bits, ``(x >> 11) * 2**-53``. Point ``n`` uses
draws ``2n`` (eta) and ``2n + 1`` (U/t).
"""

from __future__ import annotations

import csv
import hashlib
import math
import warnings
from dataclasses import dataclass, field, fields
from multiprocessing import Pool

import numpy as np

from .correlators import DataQualityWarning, correlation_entropy, feature_vector
from .hamiltonian import ModelParams
from .spectra import LAMBDA, N_KEEP, SolverError, ground_manifold, solve

ETA_LIMIT = 0.95
N_FEATURES = 64
N_TWO_POINT = 32
SCALARS = ("u_over_t", "eta", "delta_over_t", "chi", "chi_class", "c_corr", "valid")
FEATURE_COLUMNS = [f"{n}_{a}{b}" for n in ("d", "f", "k", "p") for a in range(4) for b in range(4)]
HEADER = list(SCALARS) + FEATURE_COLUMNS
RANDOM = "random-uniform"
GRID = "regular-grid"


class DatasetFormatError(ValueError):
    pass


def fmt(x: float) -> str:
    return format(float(x), ".17g")


@dataclass
class SampleRecord:
    u_over_t: float
    eta: float
    delta_over_t: float
    chi: float
    chi_class: int
    c_corr: float
    features: np.ndarray | None
    valid: bool = True
    excursion: bool = field(default=False, compare=False)

    def __eq__(self, other):
        if not isinstance(other, SampleRecord):
            return NotImplemented
        for name in ("u_over_t", "eta", "delta_over_t", "chi", "c_corr"):
            a, b = getattr(self, name), getattr(other, name)
            if not (a == b or (math.isnan(a) and math.isnan(b))):
                return False
        if self.chi_class != other.chi_class or self.valid != other.valid:
            return False
        if self.features is None or other.features is None:
            return self.features is None and other.features is None
        return np.array_equal(self.features, other.features)

    def feature_subset(self, which: str = "all") -> np.ndarray:
        return self.features[:N_TWO_POINT] if which == "two_point" else self.features


@dataclass
class SweepSpec:
    u_range: tuple[float, float] = (-4.0, 4.0)
    eta_range: tuple[float, float] = (-ETA_LIMIT, ETA_LIMIT)
    delta_over_t: float = 0.0
    count: int = 20000
    grid: tuple[int, int] | None = None  # (n_eta, n_u)
    sampling: str = RANDOM
    seed: int = 0
    L: int = 8
    n_keep: int = N_KEEP
    delta_pair_over_t: float = 1.0
    inv_lambda: float = 1.0 / LAMBDA

    def __post_init__(self):
        self.u_range = tuple(float(x) for x in self.u_range)
        self.eta_range = tuple(float(x) for x in self.eta_range)
        if self.grid is not None:
            self.grid = tuple(int(x) for x in self.grid)
            self.sampling = GRID
            self.count = self.grid[0] * self.grid[1]
        self.validate()

    def validate(self) -> None:
        lo, hi = self.eta_range
        if lo > hi or self.u_range[0] > self.u_range[1]:
            raise ValueError("ranges must be given as [min, max]")
        if lo < -ETA_LIMIT or hi > ETA_LIMIT:
            raise ValueError(f"eta range {self.eta_range} leaves [-{ETA_LIMIT}, {ETA_LIMIT}]")
        if self.sampling not in (RANDOM, GRID):
            raise ValueError(f"unknown sampling {self.sampling!r}")
        if self.sampling == GRID and self.grid is None:
            raise ValueError("regular-grid sampling needs a grid shape")
        if self.count < 1:
            raise ValueError("count must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.L < 8:
            raise ValueError("L must be >= 8 for the central feature window")

    @classmethod
    def from_mapping(cls, items: dict) -> "SweepSpec":
        known = {f.name for f in fields(cls)}
        kw = {}
        for key, value in items.items():
            key = key.strip().replace("-", "_")
            if key not in known:
                raise ValueError(f"unknown sweep key {key!r}")
            value = str(value).strip()
            if key in ("u_range", "eta_range"):
                kw[key] = tuple(float(x) for x in value.split(","))
            elif key == "grid":
                kw[key] = None if value in ("", "none") else tuple(int(x) for x in value.lower().replace("x", ",").split(","))
            elif key in ("count", "seed", "L", "n_keep"):
                kw[key] = int(value)
            elif key == "sampling":
                kw[key] = value
            else:
                kw[key] = float(value)
        return cls(**kw)

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ",".join(fmt(x) if isinstance(x, float) else str(x) for x in v)
            elif isinstance(v, float):
                v = fmt(v)
            lines.append(f"{f.name}={'none' if v is None else v}")
        return "\n".join(lines) + "\n"

    def digest(self) -> str:
        return hashlib.sha256(self.to_text().encode()).hexdigest()


def uniform_draws(seed: int, n: int) -> np.ndarray:
    raw = np.random.Philox(key=seed).random_raw(n)
    return (raw >> np.uint64(11)).astype(np.float64) * 2.0**-53


def parameter_points(spec: SweepSpec) -> list[tuple[float, float]]:
    """(eta, U/t) pairs in canonical order (eta outer, U inner for grids)."""
    (elo, ehi), (ulo, uhi) = spec.eta_range, spec.u_range
    if spec.sampling == GRID:
        n_eta, n_u = spec.grid
        etas = np.linspace(elo, ehi, n_eta)
        us = np.linspace(ulo, uhi, n_u)
        return [(float(e), float(u)) for e in etas for u in us]
    x = uniform_draws(spec.seed, 2 * spec.count).reshape(spec.count, 2)
    etas = elo + (ehi - elo) * x[:, 0]
    us = ulo + (uhi - ulo) * x[:, 1]
    return list(zip(etas.tolist(), us.tolist()))


def compute_record(eta: float, u_over_t: float, delta_over_t: float, L: int = 8,
                   n_keep: int = N_KEEP, delta_pair_over_t: float = 1.0,
                   lam: float = LAMBDA) -> SampleRecord:
    """Labels and features for one parameter point (energies in units of t)."""
    params = ModelParams(t=1.0, delta_pair=delta_pair_over_t, u=u_over_t,
                         delta_nh=delta_over_t, eta=eta, L=L)
    nan = float("nan")
    try:
        es = solve(params, n_keep)
    except SolverError:
        return SampleRecord(u_over_t, eta, delta_over_t, nan, 0, nan, None, valid=False)
    gm = ground_manifold(es, lam)
    if es.flagged:
        return SampleRecord(u_over_t, eta, delta_over_t, gm.chi, gm.chi_class, nan, None, valid=False)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DataQualityWarning)
        cs = correlation_entropy(gm, L)
    fv = feature_vector(gm, L)
    return SampleRecord(u_over_t, eta, delta_over_t, gm.chi, gm.chi_class, cs.c_corr,
                        fv.flat(), valid=True, excursion=cs.excursion)


def _point_job(args):
    return compute_record(*args)


def generate(spec: SweepSpec, workers: int = 1) -> list[SampleRecord]:
    """One record per sweep point, in canonical order regardless of ``workers``."""
    jobs = [(eta, u, spec.delta_over_t, spec.L, spec.n_keep, spec.delta_pair_over_t,
             1.0 / spec.inv_lambda) for eta, u in parameter_points(spec)]
    if workers <= 1:
        return [_point_job(j) for j in jobs]
    with Pool(workers) as pool:
        return pool.map(_point_job, jobs, chunksize=max(1, len(jobs) // (8 * workers)))


def write_csv(records, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HEADER)
        for r in records:
            feats = [""] * N_FEATURES if r.features is None else [fmt(x) for x in r.features]
            w.writerow([fmt(r.u_over_t), fmt(r.eta), fmt(r.delta_over_t), fmt(r.chi),
                        str(int(r.chi_class)), fmt(r.c_corr), "1" if r.valid else "0"] + feats)


def read_csv(path) -> list[SampleRecord]:
    records = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != HEADER:
            raise DatasetFormatError(f"{path}: line 1: unexpected header")
        for row in reader:
            line = reader.line_num
            if len(row) != len(HEADER):
                raise DatasetFormatError(f"{path}: line {line}: expected {len(HEADER)} fields, got {len(row)}")
            try:
                u, eta, d, chi = (float(x) for x in row[:4])
                cls, c_corr = int(row[4]), float(row[5])
                if row[6] not in ("0", "1"):
                    raise ValueError(f"valid must be 0 or 1, got {row[6]!r}")
                feats = row[7:]
                features = None if all(x == "" for x in feats) else np.array([float(x) for x in feats])
            except ValueError as exc:
                raise DatasetFormatError(f"{path}: line {line}: {exc}") from exc
            records.append(SampleRecord(u, eta, d, chi, cls, c_corr, features, row[6] == "1"))
    return records


def feature_matrix(records, which: str = "all") -> np.ndarray:
    width = N_TWO_POINT if which == "two_point" else N_FEATURES
    if not records:
        return np.zeros((0, width))
    return np.array([r.features[:width] for r in records])
