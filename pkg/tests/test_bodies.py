import math

import numpy as np
import pytest

from cbplab.bodies import (ComplexLqBall, EuclideanBall, RadialPerturbation,
                           ScaledBody, block_moduli, convexity_probe, mollify,
                           norm_eval, radial_eval, radial_metric, scale)
from cbplab.frames import rotate
from cbplab.quadrature import SphereRule
from cbplab.sections import volume
from cbplab.specs import parse_body


def kappa(d):
    return math.pi ** (d / 2.0) / math.gamma(d / 2.0 + 1.0)


def unit_sample(dim, count=512, seed=0):
    g = np.random.Generator(np.random.Philox(key=seed))
    x = g.standard_normal((count, dim))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def test_block_moduli():
    x = np.array([[3.0, 4.0, 0.0, 1.0]])
    assert np.allclose(block_moduli(x), [[5.0, 1.0]])


def test_ball_norm_is_euclidean():
    ball = EuclideanBall(6)
    x = unit_sample(6, 32, seed=1) * 2.5
    assert np.allclose(ball.norm(x), 2.5)
    assert radial_eval(ball, unit_sample(6, 1, seed=2)[0]) == 1.0


def test_ball_volume_oracle():
    for d in (4, 6, 8):
        rule = SphereRule(d, "quasi_monte_carlo", node_count=2 ** 14, seed=3)
        est = volume(EuclideanBall(d), rule)
        assert est.value == pytest.approx(kappa(d), rel=1e-6)


def test_clq_volume_dirichlet_oracle():
    # complex l_q ball: Vol = pi^n Gamma(2/q+1)^n / Gamma(2n/q+1);
    # n=4, q=4 gives pi^6/32
    body = ComplexLqBall(4, 4.0)
    rule = SphereRule(8, "quasi_monte_carlo", node_count=2 ** 16, seed=4)
    est = volume(body, rule)
    assert est.value == pytest.approx(math.pi ** 6 / 32.0, rel=5e-3)


def test_clq_q2_is_the_ball():
    body = ComplexLqBall(3, 2.0)
    x = unit_sample(6, 64, seed=5) * 1.7
    assert np.allclose(body.norm(x), EuclideanBall(6).norm(x), rtol=1e-13)


def test_clq_norm_homogeneous_and_invariant():
    body = ComplexLqBall(4, 4.0)
    x = unit_sample(8, 64, seed=6)
    assert np.allclose(body.norm(3.0 * x), 3.0 * body.norm(x), rtol=1e-13)
    assert np.allclose(body.norm(rotate(x, 0.8)), body.norm(x), rtol=1e-12)
    # blockwise permutation symmetry
    perm = x[:, [2, 3, 0, 1, 6, 7, 4, 5]]
    assert np.allclose(body.norm(perm), body.norm(x), rtol=1e-13)


def test_scaled_body():
    ball = EuclideanBall(6)
    big = scale(ball, 2.0)
    x = unit_sample(6, 16, seed=7)
    assert np.allclose(big.norm(x), 0.5)
    assert big.r_min == big.r_max == 2.0
    assert radial_metric(big, ball) == pytest.approx(1.0, rel=1e-12)


def test_norm_eval_rejects_zero_vector():
    with pytest.raises(ValueError):
        norm_eval(EuclideanBall(4), np.zeros(4))


def test_mollified_ball_stays_a_ball():
    # the smoothing is an average of rotations, so a ball is a fixed point
    body = mollify(EuclideanBall(6), 0.2)
    theta = unit_sample(6, 256, seed=8)
    assert np.allclose(body.radial(theta), 1.0, atol=1e-8)


def test_mollified_body_invariance_and_symmetry():
    body = mollify(ComplexLqBall(2, 4.0), 0.2)
    assert body.moduli_symmetric
    theta = unit_sample(4, 256, seed=9)
    r = body.radial(theta)
    assert np.allclose(body.radial(rotate(theta, 1.3)), r, atol=1e-10)
    # blockwise swap
    assert np.allclose(body.radial(theta[:, [2, 3, 0, 1]]), r, atol=1e-10)


def test_mollified_body_interpolates_towards_the_base():
    base = ComplexLqBall(2, 4.0)
    near = mollify(base, 0.02)
    far = mollify(base, 0.3)
    assert radial_metric(near, base) < radial_metric(far, base)
    assert radial_metric(near, base) < 5e-3


def test_mollified_body_is_convex():
    body = mollify(ComplexLqBall(2, 4.0), 0.2)
    report = convexity_probe(body, samples=2 ** 14, seed=10)
    assert report.violations == 0


def test_convexity_probe_flags_a_star_body():
    base = EuclideanBall(4)

    def wiggle(theta):
        theta = np.atleast_2d(theta)
        return np.cos(8.0 * theta[:, 0])

    body = RadialPerturbation(base, 2.0, 0.3, wiggle, bump_id="wiggle")
    report = convexity_probe(body, samples=2 ** 14, seed=11)
    assert report.violations > 0


def test_radial_perturbation_zero_amplitude_is_identity():
    base = mollify(ComplexLqBall(2, 4.0), 0.2)
    body = RadialPerturbation(base, 4.0, 0.0, lambda t: np.ones(len(np.atleast_2d(t))),
                              bump_id="const")
    assert radial_metric(body, base) < 1e-13


def test_radial_perturbation_rejects_lost_positivity():
    with pytest.raises(ValueError):
        RadialPerturbation(EuclideanBall(4), 2.0, 2.0,
                           lambda t: np.ones(len(np.atleast_2d(t))),
                           bump_id="const")


def test_spec_round_trip():
    bodies = [EuclideanBall(8), ComplexLqBall(4, 4.0),
              ScaledBody(EuclideanBall(6), 0.9),
              mollify(ComplexLqBall(2, 4.0), 0.2)]
    for body in bodies:
        again = parse_body(body.spec())
        assert again.spec() == body.spec()
        theta = unit_sample(body.dim, 64, seed=12)
        assert np.allclose(again.radial(theta), body.radial(theta),
                           rtol=1e-12, atol=1e-12)


def test_radial_bounds_bracket_the_radial_function():
    for body in (ComplexLqBall(3, 4.0), mollify(ComplexLqBall(2, 4.0), 0.2)):
        theta = unit_sample(body.dim, 512, seed=13)
        r = body.radial(theta)
        assert np.all(r >= body.r_min - 1e-9)
        assert np.all(r <= body.r_max + 1e-9)
