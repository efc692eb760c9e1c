import numpy as np
import pytest

from cbplab.bodies import ComplexLqBall, EuclideanBall, mollify
from cbplab.embedding import confirm_sample, embedding_interval, scan
from cbplab.fourier import classical_ft_constant
from cbplab.frames import make_grid


@pytest.fixture(scope="module")
def grid4():
    return make_grid(4, 48, reduction="orbit_reduced", sort_moduli=True)


@pytest.fixture(scope="module")
def b42():
    return mollify(ComplexLqBall(2, 4.0), 0.2)


def test_ball_scan_is_nonnegative_and_constant(grid4):
    verdict = scan(EuclideanBall(4), 2.0, grid4)
    assert verdict.conclusion == "nonnegative_up_to_tol"
    truth = classical_ft_constant(4, 2.0)
    assert np.allclose(verdict.values, truth, rtol=1e-6)
    assert verdict.routes["agreement_z"] < 5.0
    assert verdict.routes["confirm"] == "pairing"


def test_mollified_dim4_scan_nonnegative(grid4, b42):
    for p in (2.0, 1.5):
        verdict = scan(b42, p, grid4)
        assert verdict.conclusion == "nonnegative_up_to_tol", p
        assert verdict.min_value > -3.0 * verdict.min_stderr - 1e-3 * np.max(
            np.abs(verdict.values))


def test_scan_is_worker_independent(grid4, b42):
    a = scan(b42, 2.0, grid4, workers=1)
    b = scan(b42, 2.0, grid4, workers=4)
    assert np.array_equal(a.values, b.values)
    assert np.array_equal(a.stderrs, b.stderrs)
    assert a.conclusion == b.conclusion
    assert a.routes["confirm_value"] == b.routes["confirm_value"]


def test_embedding_interval_shares_profiles(grid4, b42):
    out = embedding_interval(b42, [2.0, 1.5, 1.0], grid4)
    assert set(out) == {2.0, 1.5, 1.0}
    for p, verdict in out.items():
        assert verdict.conclusion == "nonnegative_up_to_tol", p
    # the derivative route serves p = 2, the fractional route the others
    assert out[2.0].routes["primary"] == "derivative"
    assert out[1.5].routes["primary"] == "fractional"


def test_confirm_sample_matches_the_classical_constant():
    xi = np.array([0.6, 0.0, 0.8, 0.0])
    sample = confirm_sample(EuclideanBall(4), xi, 2.0)
    truth = classical_ft_constant(4, 2.0)
    assert abs(sample.value - truth) < 3.0 * sample.stderr + 0.01 * truth


def test_verdict_record_is_serializable(grid4):
    verdict = scan(EuclideanBall(4), 2.0, grid4)
    rec = verdict.as_record()
    assert rec["conclusion"] == "nonnegative_up_to_tol"
    assert len(rec["argmin"]) == 4
    import json
    json.dumps(rec)
