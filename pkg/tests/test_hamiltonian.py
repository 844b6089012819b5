import numpy as np
import pytest
import scipy.sparse as sp

from nhtransfer.hamiltonian import ModelParams, build_full_hamiltonian, build_hamiltonian, dimerized
from nhtransfer.fock import build_sector, popcount

from oracle import dense_hamiltonian


@pytest.mark.parametrize("o, eta, j, expected", [(1, 0.5, 1, 1.5), (1, 0.5, 2, 0.5), (2, 0, 3, 2)])
def test_dimerized(o, eta, j, expected):
    assert dimerized(o, eta, j) == pytest.approx(expected)


@pytest.mark.parametrize("kw", [dict(t=0), dict(eta=1.0), dict(eta=-1.0), dict(L=1), dict(u=np.nan)])
def test_params_invariants(kw):
    with pytest.raises(ValueError):
        ModelParams(**kw)


def l2_oracle(p):
    t1, d1 = p.t * (1 + p.eta), p.delta_pair * (1 + p.eta)
    w = p.u * (1 + p.eta) - 1j * p.delta_nh * (1 + p.eta)
    return [w + d1, w - d1], [-w + t1, -w - t1]


def test_two_site_blocks_match_hand_calculation():
    p = ModelParams(t=1.0, delta_pair=0.7, u=0.3, delta_nh=0.2, eta=0.4, L=2)
    even, odd = l2_oracle(p)
    ev = np.sort_complex(np.linalg.eigvals(build_hamiltonian(p, "even").toarray()))
    od = np.sort_complex(np.linalg.eigvals(build_hamiltonian(p, "odd").toarray()))
    assert np.allclose(ev, np.sort_complex(even), atol=1e-12)
    assert np.allclose(od, np.sort_complex(odd), atol=1e-12)


@pytest.mark.parametrize("L", [2, 3, 5, 8])
def test_hermitian_at_zero_delta(L):
    rng = np.random.default_rng(L)
    p = ModelParams(t=1.0, delta_pair=rng.uniform(-2, 2), u=rng.uniform(-4, 4), delta_nh=0.0,
                    eta=rng.uniform(-0.9, 0.9), L=L)
    for parity in ("even", "odd"):
        h = build_hamiltonian(p, parity).toarray()
        assert np.abs(h - h.conj().T).max() <= 1e-12 * np.abs(h).max()


@pytest.mark.parametrize("L", [3, 4, 6])
def test_parity_blocks_decouple(L):
    p = ModelParams(delta_pair=0.8, u=1.3, delta_nh=0.5, eta=0.3, L=L)
    h = build_full_hamiltonian(p)
    states = np.arange(2**L)
    par = popcount(states) & 1
    coo = h.tocoo()
    cross = par[coo.row] != par[coo.col]
    assert np.abs(coo.data[cross]).sum() == 0.0


@pytest.mark.parametrize("L", [2, 3, 4, 6])
def test_full_matrix_matches_kronecker_oracle(L):
    rng = np.random.default_rng(100 + L)
    kw = dict(t=1.0, delta_pair=rng.uniform(-2, 2), u=rng.uniform(-4, 4),
              delta_nh=rng.uniform(0, 1), eta=rng.uniform(-0.9, 0.9))
    h = build_full_hamiltonian(ModelParams(L=L, **kw)).toarray()
    assert np.allclose(h, dense_hamiltonian(L=L, **kw), atol=1e-13)


def test_sector_matrix_is_restriction_of_full():
    p = ModelParams(delta_pair=0.6, u=-1.1, delta_nh=0.5, eta=-0.2, L=6)
    full = build_full_hamiltonian(p).toarray()
    for parity in ("even", "odd"):
        s = build_sector(6, parity).states
        assert np.array_equal(build_hamiltonian(p, parity).toarray(), full[np.ix_(s, s)])


def test_interaction_splits_into_real_and_imaginary_parts():
    base = dict(delta_pair=0.9, eta=0.25, L=6)
    h = lambda u, d: build_hamiltonian(ModelParams(u=u, delta_nh=d, **base), "even")
    combined = h(1.7, 0.5)
    split = h(1.7, 0.0) + h(0.0, 0.5) - h(0.0, 0.0)
    assert abs(combined - split).max() < 1e-14


def test_returns_sparse_with_sector_dimension():
    p = ModelParams(L=7)
    h = build_hamiltonian(p, "odd")
    assert sp.issparse(h) and h.shape == (64, 64)
    with pytest.raises(ValueError):
        build_hamiltonian(p, "neither")
