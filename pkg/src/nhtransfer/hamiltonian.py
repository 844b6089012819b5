"""Sparse matrix of the non-Hermitian dimerized Kitaev-Hubbard chain.

    H = - sum_j [ t_j (c+_j c_{j+1} + c+_{j+1} c_j)
                  + D_j (c+_j c+_{j+1} + c_{j+1} c_j) ]
        + sum_j (U_j - i d_j) (2 n_j - 1) (2 n_{j+1} - 1)

with bonds j = 1..L-1 on an open chain. Every coupling O in {t, D, U, d} is
dimerized by bond index: O (1 + eta) on odd bonds, O (1 - eta) on even ones.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .fock import PARITIES, SectorBasis, apply_product, build_sector


@dataclass(frozen=True)
class ModelParams:
    t: float = 1.0
    delta_pair: float = 1.0
    u: float = 0.0
    delta_nh: float = 0.0
    eta: float = 0.0
    L: int = 8

    def __post_init__(self):
        if not self.t > 0:
            raise ValueError(f"hopping t must be positive, got {self.t}")
        if not -1 < self.eta < 1:
            raise ValueError(f"dimerization must satisfy |eta| < 1, got {self.eta}")
        if self.L < 2:
            raise ValueError(f"chain needs at least 2 sites, got L={self.L}")
        for name in ("delta_pair", "u", "delta_nh"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")


def dimerized(o: float, eta: float, j: int) -> float:
    """Bond coupling: strong ``o (1 + eta)`` on odd bonds, weak on even."""
    return o * (1 + eta) if j % 2 == 1 else o * (1 - eta)


# (prefactor selector, operator string) for the off-diagonal bond terms
_BOND_TERMS = (
    ("t", (("+", 0), ("-", 1))),
    ("t", (("+", 1), ("-", 0))),
    ("D", (("+", 0), ("+", 1))),
    ("D", (("-", 1), ("-", 0))),
)


def _assemble(p: ModelParams, states: np.ndarray, index_of) -> sp.csr_matrix:
    dim = len(states)
    rows, cols, vals = [], [], []
    diag = np.zeros(dim, dtype=complex)
    for j in range(1, p.L):
        tj = dimerized(p.t, p.eta, j)
        dj = dimerized(p.delta_pair, p.eta, j)
        uj = dimerized(p.u, p.eta, j) - 1j * dimerized(p.delta_nh, p.eta, j)
        zi = 2 * ((states >> (j - 1)) & 1) - 1
        zk = 2 * ((states >> j) & 1) - 1
        diag += uj * zi * zk
        for which, ops in _BOND_TERMS:
            amp = -(tj if which == "t" else dj)
            if amp == 0:
                continue
            out, signs, ok = apply_product([(k, j + off) for k, off in ops], states)
            src = np.nonzero(ok)[0]
            rows.append(index_of(out[ok]))
            cols.append(src)
            vals.append(amp * signs[ok])
    rows.append(np.arange(dim))
    cols.append(np.arange(dim))
    vals.append(diag)
    h = sp.coo_matrix(
        (np.concatenate(vals).astype(complex), (np.concatenate(rows), np.concatenate(cols))),
        shape=(dim, dim),
    )
    return h.tocsr()


def build_hamiltonian(p: ModelParams, parity: str, basis: SectorBasis | None = None) -> sp.csr_matrix:
    """Hamiltonian restricted to one fermion-parity sector (CSR, complex)."""
    if parity not in PARITIES:
        raise ValueError(f"parity must be 'even' or 'odd', got {parity!r}")
    if basis is None:
        basis = build_sector(p.L, parity)
    return _assemble(p, basis.states, basis.index_of)


def build_full_hamiltonian(p: ModelParams) -> sp.csr_matrix:
    """Hamiltonian on the whole 2^L Fock space, indexed by bitmask value."""
    states = np.arange(1 << p.L, dtype=np.int64)
    return _assemble(p, states, lambda s: s)
