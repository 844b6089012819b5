import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nhtransfer.boundaries import (
    IMAG_ZERO,
    NO_ANALYTIC_BOUNDARY,
    REAL_GAP,
    analytic_boundaries,
    boundary_polylines,
    imag_zero_boundary,
    real_gap_boundary,
    write_polylines_csv,
)
from nhtransfer.hamiltonian import ModelParams

etas = st.floats(-0.95, 0.95)


def test_real_gap_examples():
    assert real_gap_boundary(0.0, 0.0) == pytest.approx([-1.0, 1.0])
    assert real_gap_boundary(0.0, 0.5) == pytest.approx([-math.sqrt(0.75), math.sqrt(0.75)])
    assert real_gap_boundary(1 / 3, 0.0) == pytest.approx([-2.0, -0.5, 0.5, 2.0])


def test_imag_zero_examples():
    assert imag_zero_boundary(0.0) == pytest.approx([-1.0, 1.0])
    assert imag_zero_boundary(0.5) == pytest.approx([-3, -1 / 3, 1 / 3, 3])
    assert imag_zero_boundary(-0.5) == pytest.approx(imag_zero_boundary(0.5))


@pytest.mark.parametrize("eta", [1.0, -1.0, 1.5])
def test_rejects_degenerate_dimerization(eta):
    with pytest.raises(ValueError):
        real_gap_boundary(eta)
    with pytest.raises(ValueError):
        imag_zero_boundary(eta)


@given(etas)
def test_families_coincide_without_nonhermiticity(eta):
    assert np.allclose(real_gap_boundary(eta, 0.0), imag_zero_boundary(eta), atol=1e-12, rtol=0)


@given(etas, st.floats(0, 2))
def test_symmetries(eta, delta):
    for f in (lambda e: real_gap_boundary(e, delta), imag_zero_boundary):
        vals = f(eta)
        assert np.allclose(vals, f(-eta), atol=1e-9)
        assert np.allclose(vals, sorted(-v for v in vals), atol=1e-12)
        assert all(math.isfinite(v) for v in vals)


def test_refuses_away_from_solvable_point():
    assert analytic_boundaries(ModelParams(delta_pair=0.7)) is NO_ANALYTIC_BOUNDARY
    b = analytic_boundaries(ModelParams(delta_pair=1.0, delta_nh=0.5, eta=0.0))
    assert b.real_gap == pytest.approx([-math.sqrt(0.75), math.sqrt(0.75)])


def test_polylines_pointwise():
    lines = boundary_polylines((-0.9, 0.9), 0.0, 3)
    assert {l.family for l in lines} == {REAL_GAP}
    rp = next(l for l in lines if l.branch_id == "real_gap:+r+")
    assert rp.points[:, 0] == pytest.approx([-0.9, 0.0, 0.9])
    assert rp.points[0, 1] == pytest.approx(1 / 19)
    assert rp.points[2, 1] == pytest.approx(19.0)


def test_two_families_when_nonhermitian():
    lines = boundary_polylines((-0.9, 0.9), 0.5, 50)
    assert {l.family for l in lines} == {REAL_GAP, IMAG_ZERO}
    assert len(lines) == 8


def test_empty_range_and_resolution():
    assert boundary_polylines((0.5, -0.5), 0.0, 10) == []
    with pytest.raises(ValueError):
        boundary_polylines((0, 1), 0.0, 1)


def test_csv_export(tmp_path):
    path = tmp_path / "b.csv"
    write_polylines_csv(boundary_polylines((-0.5, 0.5), 0.5, 4), path)
    rows = path.read_text().splitlines()
    assert rows[0] == "branch_id,eta,u_over_t"
    assert len(rows) == 1 + 8 * 4
