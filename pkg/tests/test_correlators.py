import json
import math
import warnings
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nhtransfer.correlators import (
    DataQualityWarning,
    center_window,
    correlation_entropy,
    correlation_matrix,
    entropy_of,
    feature_vector,
    manifold_expectation,
    matrix_elements,
)
from nhtransfer.hamiltonian import ModelParams
from nhtransfer.spectra import GroundManifold, ground_manifold, solve

from oracle import dense_correlation_matrix, dense_features, dense_operator

DATA = Path(__file__).parent / "data"


def basis_manifold(bits, L):
    v = np.zeros((1, 2**L), dtype=complex)
    v[0, bits] = 1.0
    return GroundManifold(chi=1.0, chi_int=1, chi_class=1, energies=np.zeros(1), states=v,
                          sector_of=["even"], n_sites=L)


def test_manifold_expectation_examples():
    assert manifold_expectation([[0.3 + 0.4j]]) == pytest.approx(0.5)
    assert manifold_expectation(np.eye(2)) == pytest.approx(1.0)
    assert manifold_expectation([[2.5, 0], [0, 0]]) == 0.0
    with pytest.raises(ValueError):
        manifold_expectation(np.ones((2, 3)))


def test_window():
    assert center_window(16) == (7, 8, 9, 10)
    assert center_window(8) == (3, 4, 5, 6)
    with pytest.raises(ValueError):
        center_window(6)


def test_vacuum_features():
    fv = feature_vector(basis_manifold(0, 8))
    off = ~np.eye(4, dtype=bool)
    assert np.all(fv.d == 0) and np.all(fv.p == 0) and np.all(fv.f == 0)
    assert np.all(fv.k[off] == 1) and np.all(np.diag(fv.k) == 0)


def test_filled_features():
    fv = feature_vector(basis_manifold(2**8 - 1, 8))
    assert np.array_equal(fv.d, np.eye(4))
    assert np.all(fv.p == 1) and np.all(fv.k == 0) and np.all(fv.f == 0)


def test_flat_layout():
    fv = feature_vector(basis_manifold(0b10110, 8))
    flat = fv.flat()
    assert flat.shape == (64,)
    assert np.array_equal(flat[:16], fv.d.ravel())
    assert np.array_equal(flat[48:], fv.p.ravel())
    fv2 = feature_vector(basis_manifold(0b10110, 8), include_four_point=False)
    assert fv2.flat().shape == (32,)


def test_sweet_spot_golden():
    gold = json.loads((DATA / "sweet_spot_L8.json").read_text())
    gm = ground_manifold(solve(ModelParams(L=8)))
    assert gm.chi_int == 2
    assert gm.chi == pytest.approx(gold["chi"], abs=1e-9)
    fv = feature_vector(gm)
    assert list(fv.window) == gold["window"]
    for name in "dfkp":
        assert np.allclose(getattr(fv, name), gold[name], atol=1e-10), name


@pytest.mark.parametrize("seed", range(4))
def test_operator_route_matches_dense_matrices(seed):
    rng = np.random.default_rng(seed)
    L = 6
    p = ModelParams(u=rng.uniform(-4, 4), eta=rng.uniform(-0.9, 0.9),
                    delta_nh=[0.0, 0.5][seed % 2], delta_pair=rng.uniform(0.5, 1.5), L=L)
    gm = ground_manifold(solve(p))
    window = (2, 3, 4, 5)
    fv = feature_vector(gm, L, window=window)
    ref = dense_features(gm.states, L, window)
    for name in "dfkp":
        assert np.allclose(getattr(fv, name), ref[name], atol=1e-10)
    assert np.allclose(correlation_matrix(gm, L), dense_correlation_matrix(gm.states, L), atol=1e-10)


def test_matrix_elements_match_dense():
    rng = np.random.default_rng(7)
    states = rng.normal(size=(3, 32)) + 1j * rng.normal(size=(3, 32))
    for name, ops in (("d", [("+", 2), ("-", 4)]), ("f", [("+", 1), ("+", 5)])):
        ref = states.conj() @ dense_operator(name, *(s for _, s in ops), 5) @ states.T
        assert np.allclose(matrix_elements(ops, states), ref)


def test_structural_zeros_and_sign():
    gm = ground_manifold(solve(ModelParams(u=1.1, eta=-0.4, delta_nh=0.5, L=8)))
    fv = feature_vector(gm)
    for name in "dfkp":
        assert np.all(getattr(fv, name) >= 0)
    assert np.all(np.diag(fv.f) == 0) and np.all(np.diag(fv.k) == 0)


@settings(max_examples=10, deadline=None)
@given(st.floats(-3, 3), st.floats(-0.9, 0.9), st.floats(0, 2 * math.pi))
def test_global_phase_invariance(u, eta, phase):
    gm = ground_manifold(solve(ModelParams(u=u, eta=eta, delta_nh=0.5, L=8)))
    rotated = GroundManifold(gm.chi, gm.chi_int, gm.chi_class, gm.energies,
                             gm.states * np.exp(1j * phase * np.arange(1, gm.chi_int + 1))[:, None],
                             gm.sector_of, gm.n_sites)
    assert np.allclose(feature_vector(gm).flat(), feature_vector(rotated).flat(), atol=1e-12)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DataQualityWarning)
        assert correlation_entropy(gm).c_corr == pytest.approx(correlation_entropy(rotated).c_corr, abs=1e-12)


def test_density_bounded_single_state():
    gm = ground_manifold(solve(ModelParams(u=2.5, eta=0.6, L=8)))
    assert gm.chi_int == 1
    fv = feature_vector(gm)
    assert np.all((np.diag(fv.d) >= 0) & (np.diag(fv.d) <= 1 + 1e-12))


def test_hermitian_limit_symmetric_correlation_matrix():
    gm = ground_manifold(solve(ModelParams(u=0.3, eta=-0.7, L=8)))
    c = correlation_matrix(gm)
    assert np.abs(c - c.T).max() <= 1e-10
    for i in range(1, 9):
        rho = matrix_elements([("+", i), ("-", i)], gm.states)
        assert np.allclose(rho, rho.conj().T, atol=1e-12)


def test_entropy_examples():
    assert entropy_of([1, 1, 0, 0]) == 0.0
    assert entropy_of([1 / math.e, 0, 0, 0]) == pytest.approx(1 / (4 * math.e), abs=1e-15)
    assert 1 / (4 * math.e) == pytest.approx(0.09197, abs=1e-5)


def test_free_chain_entropy_against_dense_oracle():
    L = 8
    gm = ground_manifold(solve(ModelParams(delta_pair=0.0, L=L)))
    assert gm.chi_int == 1
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        cs = correlation_entropy(gm)
    c = dense_correlation_matrix(gm.states, L)
    s = np.clip(np.linalg.eigvalsh(0.5 * (c + c.T)), 0, 1)
    ref = -sum(x * math.log(x) for x in s if x > 0) / L
    assert cs.c_corr == pytest.approx(ref, abs=1e-12)
    # entrywise moduli break the projector property of the Slater determinant
    assert cs.excursion and any(issubclass(w.category, DataQualityWarning) for w in caught)


@settings(max_examples=15, deadline=None)
@given(st.floats(-4, 4), st.floats(-0.95, 0.95), st.sampled_from([0.0, 0.5]))
def test_entropy_bounds(u, eta, delta):
    gm = ground_manifold(solve(ModelParams(u=u, eta=eta, delta_nh=delta, L=8)))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DataQualityWarning)
        cs = correlation_entropy(gm)
    assert 0 <= cs.c_corr <= 1 / math.e + 1e-12
    assert np.all((cs.s >= 0) & (cs.s <= 1))
