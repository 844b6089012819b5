"""Brute-force references built from dense Kronecker products.

Independent of the bit-manipulation kernels in the package: fermion operators
are Jordan-Wigner matrices ``Z x ... x Z x a x 1 x ... x 1`` in the full
2^L space, with site j carried by bit j-1 of the basis index.
"""

from functools import lru_cache, reduce

import numpy as np

_A = np.array([[0.0, 1.0], [0.0, 0.0]])  # |1> -> |0>
_Z = np.diag([1.0, -1.0])
_I = np.eye(2)


@lru_cache(maxsize=None)
def annihilator(j: int, L: int) -> np.ndarray:
    # np.kron puts its first factor on the most significant bit -> site L first
    factors = [_I if s > j else (_A if s == j else _Z) for s in range(L, 0, -1)]
    return reduce(np.kron, factors)


def creator(j, L):
    return annihilator(j, L).T


def number(j, L):
    return creator(j, L) @ annihilator(j, L)


def bond(o, eta, j):
    return o * (1 + eta) if j % 2 else o * (1 - eta)


def dense_hamiltonian(t, delta_pair, u, delta_nh, eta, L):
    dim = 1 << L
    h = np.zeros((dim, dim), dtype=complex)
    one = np.eye(dim)
    for j in range(1, L):
        c, cn = annihilator(j, L), annihilator(j + 1, L)
        tj, dj = bond(t, eta, j), bond(delta_pair, eta, j)
        uj = bond(u, eta, j) - 1j * bond(delta_nh, eta, j)
        h -= tj * (c.T @ cn + cn.T @ c)
        h -= dj * (c.T @ cn.T + cn @ c)
        h += uj * (2 * number(j, L) - one) @ (2 * number(j + 1, L) - one)
    return h


def dense_operator(name, i, j, L):
    ci, cj = annihilator(i, L), annihilator(j, L)
    if name == "d":
        return ci.T @ cj
    if name == "f":
        return ci.T @ cj.T
    if name == "k":
        kappa = ci @ cj
        return kappa @ kappa.T
    if name == "p":
        return number(i, L) @ number(j, L)
    raise ValueError(name)


def abs_det(states, op):
    m = states.conj() @ op @ states.T
    return float(abs(np.linalg.det(m)))


def dense_features(states, L, window):
    return {name: np.array([[abs_det(states, dense_operator(name, i, j, L)) for j in window]
                            for i in window])
            for name in ("d", "f", "k", "p")}


def dense_correlation_matrix(states, L):
    return np.array([[abs_det(states, dense_operator("d", i, j, L)) for j in range(1, L + 1)]
                     for i in range(1, L + 1)])
