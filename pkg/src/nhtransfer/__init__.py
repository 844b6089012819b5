"""Exact diagonalization, correlators and neural-network transfer learning for
the non-Hermitian dimerized Kitaev-Hubbard chain."""

__version__ = "0.1.0"
