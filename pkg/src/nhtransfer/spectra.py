"""Diagonalization, spectrum ordering and the quasi-degeneracy of the ground state."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .fock import EVEN, ODD, SectorBasis, build_sector
from .hamiltonian import ModelParams, build_hamiltonian

INV_LAMBDA = 0.005
LAMBDA = 1.0 / INV_LAMBDA
N_KEEP = 16
DENSE_MAX_DIM = 8192
CLASSES = (1, 2, 4)
EP_OVERLAP = 1.0 - 1e-6


class SolverError(RuntimeError):
    """Raised when a sample cannot be trusted (no convergence, exceptional point)."""


@lru_cache(maxsize=32)
def sector(n_sites: int, parity: str) -> SectorBasis:
    return build_sector(n_sites, parity)


@dataclass
class EigenSystem:
    energies: np.ndarray
    vectors: np.ndarray = field(repr=False)  # (n_keep, 2**L), full-space embedding
    sector_of: list[str]
    n_sites: int
    flagged: bool = False
    reason: str = ""

    @property
    def n_keep(self) -> int:
        return len(self.sector_of)


@dataclass
class GroundManifold:
    chi: float
    chi_int: int
    chi_class: int
    energies: np.ndarray
    states: np.ndarray = field(repr=False)
    sector_of: list[str] = field(default_factory=list)
    n_sites: int = 0


def order(energies: np.ndarray) -> np.ndarray:
    """Indices sorting by real part, ties by imaginary part."""
    energies = np.asarray(energies)
    return np.lexsort((energies.imag, energies.real))


def is_hermitian(h, rtol: float = 1e-12) -> bool:
    h = sp.csr_matrix(h)
    scale = abs(h).max() if h.nnz else 0.0
    diff = h - h.conj().T
    return (abs(diff).max() if diff.nnz else 0.0) <= rtol * max(scale, 1.0)


def _dense_sector(h, hermitian: bool):
    a = h.toarray() if sp.issparse(h) else np.asarray(h)
    if hermitian:
        w, v = la.eigh(a)
        return w.astype(complex), v
    w, v = la.eig(a)
    return w, v / np.linalg.norm(v, axis=0)


def _iterative_sector(h, k: int, hermitian: bool):
    k = min(k, h.shape[0] - 2)
    try:
        if hermitian:
            w, v = spla.eigsh(h, k=k, which="SA")
            return w.astype(complex), v
        # rough location of the low edge, then shift-invert just below it
        w0 = spla.eigs(h, k=2, which="SR", return_eigenvectors=False)
        sigma = complex(w0.real.min() - 0.1, 0.0)
        w, v = spla.eigs(h, k=k, sigma=sigma, which="LM")
    except spla.ArpackNoConvergence as exc:
        raise SolverError(f"iterative eigensolver did not converge: {exc}") from exc
    return w, v / np.linalg.norm(v, axis=0)


def diagonalize(h_even, h_odd, n_sites: int, n_keep: int = N_KEEP,
                hermitian: bool | None = None) -> EigenSystem:
    """Merge the spectra of both parity blocks and keep the lowest eigenvectors.

    Sector blocks up to ``DENSE_MAX_DIM`` are diagonalized densely (all
    energies returned); larger blocks use ARPACK and only the low-lying part
    of the spectrum is meaningful.
    """
    total = h_even.shape[0] + h_odd.shape[0]
    if not 1 <= n_keep <= total:
        raise ValueError(f"n_keep={n_keep} outside 1..{total}")
    if hermitian is None:
        hermitian = is_hermitian(h_even) and is_hermitian(h_odd)
    ws, vs, labels = [], [], []
    for parity, h in ((EVEN, h_even), (ODD, h_odd)):
        if h.shape[0] <= DENSE_MAX_DIM:
            w, v = _dense_sector(h, hermitian)
        else:
            w, v = _iterative_sector(h, n_keep, hermitian)
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(v))):
            raise SolverError(f"non-finite eigenpairs in {parity} sector")
        ws.append(w)
        vs.append(v)
        labels += [parity] * len(w)
    energies = np.concatenate(ws)
    idx = order(energies)
    energies = energies[idx]

    offsets = {EVEN: 0, ODD: len(ws[0])}
    keep = idx[:n_keep]
    vectors = np.zeros((n_keep, 1 << n_sites), dtype=complex)
    sector_of = []
    for row, i in enumerate(keep):
        parity = labels[i]
        col = i - offsets[parity]
        vectors[row, sector(n_sites, parity).states] = vs[0 if parity == EVEN else 1][:, col]
        sector_of.append(parity)

    es = EigenSystem(energies, vectors, sector_of, n_sites)
    overlap = np.abs(vectors.conj() @ vectors.T)
    np.fill_diagonal(overlap, 0.0)
    if overlap.max(initial=0.0) > EP_OVERLAP:
        es.flagged = True
        es.reason = "near-parallel eigenvectors (exceptional point)"
    return es


def quasi_degeneracy(energies, lam: float = LAMBDA) -> float:
    """chi = sum_a exp(-lam |e_a - e_0|) with e_0 the smallest-real-part energy."""
    energies = np.asarray(energies, dtype=complex)
    if energies.size == 0:
        raise ValueError("need at least one energy")
    if not lam > 0:
        raise ValueError("lam must be positive")
    e0 = energies[order(energies)[0]]
    return float(np.exp(-lam * np.abs(energies - e0)).sum())


def round_chi(chi: float, n_keep: int = N_KEEP) -> int:
    """Nearest integer, halves rounded away from zero, clamped to [1, n_keep]."""
    n = math.floor(abs(chi) + 0.5)
    n = int(math.copysign(n, chi))
    return min(max(n, 1), n_keep)


def chi_class(chi_int: int) -> int:
    """Nearest of {1, 2, 4}; 3 is a tie and goes to 2."""
    if chi_int < 1:
        raise ValueError(f"chi_int must be >= 1, got {chi_int}")
    return min(CLASSES, key=lambda c: (abs(c - chi_int), c))


def ground_manifold(es: EigenSystem, lam: float = LAMBDA) -> GroundManifold:
    retained = es.energies[: es.n_keep]
    chi = quasi_degeneracy(retained, lam)
    n = round_chi(chi, es.n_keep)
    return GroundManifold(
        chi=chi,
        chi_int=n,
        chi_class=chi_class(n),
        energies=retained[:n],
        states=es.vectors[:n],
        sector_of=es.sector_of[:n],
        n_sites=es.n_sites,
    )


def solve(params: ModelParams, n_keep: int = N_KEEP) -> EigenSystem:
    """Assemble both parity blocks for ``params`` and diagonalize them."""
    h_even = build_hamiltonian(params, EVEN, sector(params.L, EVEN))
    h_odd = build_hamiltonian(params, ODD, sector(params.L, ODD))
    return diagonalize(h_even, h_odd, params.L, n_keep=min(n_keep, 1 << params.L),
                       hermitian=params.delta_nh == 0)
