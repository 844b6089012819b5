"""Manifold-averaged correlators, feature vectors and the correlation entropy.

Every observable ``A`` is reduced over the ground-state manifold
``{psi_1 .. psi_n}`` as ``|det M|`` with ``M[l, l'] = <psi_l| A |psi_l'>``.
The manifold vectors live in the full 2^L Fock space, so matrix elements
between different parity sectors vanish without special casing.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .fock import apply_product
from .spectra import GroundManifold

CLAMP_TOL = 1e-6
NAMES = ("d", "f", "k", "p")
N_WINDOW = 4


class DataQualityWarning(UserWarning):
    pass


def manifold_expectation(elements) -> float:
    """``|det|`` of the square matrix of manifold matrix elements."""
    a = np.atleast_2d(np.asarray(elements, dtype=complex))
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if a.shape[0] == 1:
        return float(abs(a[0, 0]))
    return float(abs(np.linalg.det(a)))


def apply_operator(ops, vectors: np.ndarray) -> np.ndarray:
    """Act with an operator string on full-space vectors, shape (m, 2**L)."""
    vectors = np.atleast_2d(vectors)
    dim = vectors.shape[1]
    src = np.arange(dim, dtype=np.int64)
    out, signs, ok = apply_product(ops, src)
    result = np.zeros_like(vectors)
    result[:, out[ok]] = vectors[:, src[ok]] * signs[ok]
    return result


def matrix_elements(ops, states: np.ndarray) -> np.ndarray:
    """M[l, l'] = <states[l]| ops |states[l']>."""
    return states.conj() @ apply_operator(ops, states).T


def center_window(n_sites: int) -> tuple[int, ...]:
    """Four neighbouring sites around the chain centre, 1-indexed."""
    if n_sites < 8:
        raise ValueError(f"feature window needs L >= 8, got L={n_sites}")
    first = n_sites // 2 - 1
    return tuple(range(first, first + N_WINDOW))


def correlator_ops(name: str, i: int, j: int):
    if name == "d":
        return [("+", i), ("-", j)]
    if name == "f":
        return [("+", i), ("+", j)]
    if name == "k":  # kappa kappa^dagger with kappa = c_i c_j
        return [("-", i), ("-", j), ("+", j), ("+", i)]
    if name == "p":
        return [("+", i), ("-", i), ("+", j), ("-", j)]
    raise ValueError(f"unknown correlator {name!r}")


@dataclass
class FeatureVector:
    window: tuple[int, ...]
    d: np.ndarray
    f: np.ndarray
    k: np.ndarray
    p: np.ndarray
    two_point_only: bool = False

    def flat(self) -> np.ndarray:
        parts = (self.d, self.f) if self.two_point_only else (self.d, self.f, self.k, self.p)
        return np.concatenate([x.ravel() for x in parts])


def _correlator_block(name: str, sites, states: np.ndarray) -> np.ndarray:
    out = np.zeros((len(sites), len(sites)))
    for a, i in enumerate(sites):
        for b, j in enumerate(sites):
            out[a, b] = manifold_expectation(matrix_elements(correlator_ops(name, i, j), states))
    return out


def feature_vector(manifold: GroundManifold, n_sites: int | None = None,
                   include_four_point: bool = True, window=None) -> FeatureVector:
    """Short-range correlators d, f (and k, p) on the central four-site window.

    The k and p blocks are always computed so that the layout is the same
    whichever subset is later fed to a network; ``include_four_point`` only
    controls what ``flat()`` returns.
    """
    n_sites = n_sites or manifold.n_sites
    sites = tuple(window) if window is not None else center_window(n_sites)
    blocks = {name: _correlator_block(name, sites, manifold.states) for name in NAMES}
    return FeatureVector(sites, two_point_only=not include_four_point, **blocks)


@dataclass
class CorrelationSpectrum:
    s: np.ndarray
    c_corr: float
    raw: np.ndarray
    excursion: bool
    matrix: np.ndarray


def entropy_of(s, n_sites: int | None = None) -> float:
    """-(1/L) sum s log s with 0 log 0 = 0 (natural log)."""
    s = np.asarray(s, dtype=float)
    n_sites = n_sites or len(s)
    pos = s[s > 0]
    return float(-(pos * np.log(pos)).sum() / n_sites)


def correlation_matrix(manifold: GroundManifold, n_sites: int | None = None) -> np.ndarray:
    n_sites = n_sites or manifold.n_sites
    sites = range(1, n_sites + 1)
    return _correlator_block("d", sites, manifold.states)


def correlation_entropy(manifold: GroundManifold, n_sites: int | None = None) -> CorrelationSpectrum:
    n_sites = n_sites or manifold.n_sites
    c = correlation_matrix(manifold, n_sites)
    sym = 0.5 * (c + c.T)
    raw = np.linalg.eigvalsh(sym)
    excursion = bool(raw.min() < -CLAMP_TOL or raw.max() > 1 + CLAMP_TOL)
    if excursion:
        warnings.warn(
            f"correlation-matrix eigenvalues outside [0, 1]: [{raw.min():.3g}, {raw.max():.3g}]",
            DataQualityWarning,
            stacklevel=2,
        )
    s = np.clip(raw, 0.0, 1.0)
    return CorrelationSpectrum(s, entropy_of(s, n_sites), raw, excursion, c)
