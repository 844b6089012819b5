"""Occupation-number basis for spinless fermions on an open chain.

Sites are 1-indexed. A basis state is a machine integer whose bit ``j - 1``
is set when site ``j`` is occupied. Operator ordering follows ascending site
index, so acting with ``c_j`` or ``c_j^dagger`` picks up the Jordan-Wigner
sign ``(-1)**(number of occupied sites with index < j)``.

Scalar helpers (``apply_creation`` / ``apply_annihilation``) work on single
states; the ``*_many`` variants work on integer arrays and are what the
Hamiltonian and correlator kernels use.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MAX_SITES = 20

EVEN = "even"
ODD = "odd"
PARITIES = (EVEN, ODD)


def _check_site(site: int, n_sites: int | None) -> None:
    if site < 1 or (n_sites is not None and site > n_sites):
        raise ValueError(f"site {site} out of range 1..{n_sites}")


def _string_sign(state: int, site: int) -> int:
    below = state & ((1 << (site - 1)) - 1)
    return -1 if bin(below).count("1") % 2 else 1


def apply_creation(state: int, site: int, n_sites: int | None = None):
    """Return ``(new_state, sign)`` for ``c_site^dagger |state>`` or None."""
    _check_site(site, n_sites)
    bit = 1 << (site - 1)
    if state & bit:
        return None
    return state | bit, _string_sign(state, site)


def apply_annihilation(state: int, site: int, n_sites: int | None = None):
    """Return ``(new_state, sign)`` for ``c_site |state>`` or None."""
    _check_site(site, n_sites)
    bit = 1 << (site - 1)
    if not state & bit:
        return None
    return state ^ bit, _string_sign(state, site)


def popcount(states: np.ndarray) -> np.ndarray:
    return np.bitwise_count(np.asarray(states, dtype=np.int64)).astype(np.int64)


def apply_many(kind: str, states: np.ndarray, site: int):
    """Vectorized single-operator action on an array of basis states.

    ``kind`` is ``"+"`` (creation) or ``"-"`` (annihilation). Returns
    ``(new_states, signs, ok)``; entries with ``ok == False`` were killed by
    the operator and their ``new_states``/``signs`` are meaningless.
    """
    if kind not in ("+", "-"):
        raise ValueError(f"unknown operator kind {kind!r}")
    _check_site(site, None)
    states = np.asarray(states, dtype=np.int64)
    bit = np.int64(1 << (site - 1))
    occupied = (states & bit) != 0
    ok = ~occupied if kind == "+" else occupied
    signs = 1 - 2 * (popcount(states & (bit - 1)) & 1)
    return states ^ bit, signs, ok


def apply_product(ops, states: np.ndarray):
    """Apply an operator product to each basis state.

    ``ops`` is written left to right as in the operator string, e.g.
    ``[("+", i), ("-", j)]`` for ``c_i^dagger c_j``; the rightmost operator
    acts first.
    """
    cur = np.asarray(states, dtype=np.int64)
    signs = np.ones(cur.shape, dtype=np.int64)
    ok = np.ones(cur.shape, dtype=bool)
    for kind, site in reversed(list(ops)):
        cur, s, good = apply_many(kind, cur, site)
        signs = signs * s
        ok &= good
    return cur, signs, ok


@dataclass(frozen=True)
class SectorBasis:
    n_sites: int
    parity: str
    states: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return len(self.states)

    def index_of(self, states: np.ndarray) -> np.ndarray:
        """Positions of ``states`` in the basis (states must belong to it)."""
        return np.searchsorted(self.states, states)

    @property
    def index(self) -> dict[int, int]:
        return {int(s): i for i, s in enumerate(self.states)}


def build_sector(n_sites: int, parity: str) -> SectorBasis:
    """Canonical, ascending basis of one fermion-number parity sector."""
    if not 1 <= n_sites <= MAX_SITES:
        raise ValueError(f"L={n_sites} outside supported range 1..{MAX_SITES}")
    if parity not in PARITIES:
        raise ValueError(f"parity must be 'even' or 'odd', got {parity!r}")
    allstates = np.arange(1 << n_sites, dtype=np.int64)
    want = 0 if parity == EVEN else 1
    states = allstates[(popcount(allstates) & 1) == want]
    return SectorBasis(n_sites, parity, states)


def occupations(state: int, n_sites: int) -> str:
    """Ket label with site 1 first, e.g. ``'10'`` for site 1 occupied."""
    return "".join("1" if state >> j & 1 else "0" for j in range(n_sites))
