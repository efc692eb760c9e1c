import json

import numpy as np
import pytest

from cbplab.bodies import EuclideanBall, block_moduli, scale
from cbplab.busemann_petty import (ConstructionImpossibleError, HarmonicBump,
                                   _negative_weighted_square, bp_construct,
                                   bp_verify, holder_chain_check)
from cbplab.frames import make_grid, rotate
from cbplab.harmonics import c_eval
from cbplab.quadrature import SphereRule


@pytest.fixture(scope="module")
def grid6():
    return make_grid(6, 12, reduction="orbit_reduced", sort_moduli=True)


def test_scaled_ball_is_consistent(grid6):
    report = bp_verify(scale(EuclideanBall(6), 0.9), EuclideanBall(6), grid6)
    assert report.verdict == "consistent"
    assert report.max_gap < 0.0
    assert report.vol_gap.value < 0.0


def test_identical_bodies_are_consistent_with_zero_gaps(grid6):
    ball = EuclideanBall(6)
    report = bp_verify(ball, ball, grid6)
    assert report.verdict == "consistent"
    assert np.allclose(report.gaps, 0.0, atol=1e-12)
    assert report.vol_gap.value == pytest.approx(0.0, abs=1e-12)


def test_reversed_pair_is_not_dominated(grid6):
    report = bp_verify(EuclideanBall(6), scale(EuclideanBall(6), 0.9), grid6)
    assert report.verdict == "not_dominated"
    assert report.details["exceed_count"] == len(grid6.points)


def test_dimension_mismatch_rejected(grid6):
    with pytest.raises(ValueError):
        bp_verify(EuclideanBall(8), EuclideanBall(6), grid6)
    with pytest.raises(ValueError):
        bp_verify(EuclideanBall(8), EuclideanBall(8), grid6)


def test_holder_chain_for_scaled_pair():
    out = holder_chain_check(scale(EuclideanBall(6), 0.9), EuclideanBall(6))
    assert out["ok"]
    assert out["slack1"] > 0.0
    assert out["slack2"] > 0.0


def test_holder_chain_is_tight_for_equal_bodies():
    ball = EuclideanBall(6)
    out = holder_chain_check(ball, ball)
    assert out["ok"]
    assert abs(out["slack1"]) <= 3.0 * out["slack1_stderr"] + 1e-10
    assert abs(out["slack2"]) <= 3.0 * out["slack2_stderr"] + 1e-10


def test_harmonic_bump_is_invariant_and_serializable():
    bump = HarmonicBump({(2, 0, 0, 0): 1.0, (0, 1, 1, 0): -2.0}, label="b")
    g = np.random.Generator(np.random.Philox(key=3))
    x = g.standard_normal((64, 8))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    vals = bump(x)
    assert np.allclose(bump(rotate(x, 1.2)), vals, atol=1e-12)
    # scale invariance through the moduli normalization
    assert np.allclose(bump(2.5 * x), vals, atol=1e-12)
    rec = bump.as_record()
    json.dumps(rec)
    assert rec["label"] == "b"


def test_negative_weighted_square_minimizes_the_pairing():
    grid = make_grid(8, 8, reduction="orbit_reduced", sort_moduli=True)
    # an invariant weight profile that is negative near the axis orbit
    m = block_moduli(grid.points)
    values = 1.0 - 3.0 * np.max(m, axis=1) ** 4
    f_poly, coefs, lam = _negative_weighted_square(4, grid, values, 4)
    fvals = c_eval(f_poly, m ** 2)
    assert np.min(fvals) >= -1e-10
    weighted = float(np.dot(grid.weights, fvals * values))
    assert weighted == pytest.approx(lam, rel=1e-10)
    assert lam < 0.0


def test_construction_impossible_in_low_dimension():
    grid = make_grid(6, 10, reduction="orbit_reduced", sort_moduli=True)
    rule = SphereRule(4, "quasi_monte_carlo", node_count=2 ** 11, seed=7)
    with pytest.raises(ConstructionImpossibleError):
        bp_construct(3, 4.0, grid=grid, scan_rule=rule)


def test_construct_rejects_tiny_n():
    with pytest.raises(ValueError):
        bp_construct(1, 4.0)
