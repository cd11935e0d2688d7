import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sgcert.core import InvalidInputError, NormPair, Quadratic, RngStream
from sgcert.noise import (NoiseKind, NoiseModel, PreconditionError, StochasticOracle,
                          certify_subgaussian, mgf_lemma_check, sample)


def test_none_noise_sample():
    oracle = StochasticOracle(Quadratic([1.0, 1.0]), NoiseModel.none(2))
    ghat, xi = sample(oracle, [1.0, 0.0], RngStream(1))
    np.testing.assert_array_equal(xi, [0.0, 0.0])
    np.testing.assert_array_equal(ghat, [1.0, 0.0])


def test_gaussian_sample_replays_seeded_draw():
    oracle = StochasticOracle(Quadratic([1.0, 2.0]), NoiseModel.gaussian_iso(0.5, 2))
    x = np.array([0.3, -0.7])
    ghat, xi = sample(oracle, x, RngStream(99, 4))
    expected = 0.5 * np.random.Generator(
        np.random.PCG64(np.random.SeedSequence(99, spawn_key=(4,)))).standard_normal(2)
    np.testing.assert_array_equal(xi, expected)
    np.testing.assert_array_equal(ghat - oracle.objective.grad(x), xi)


def test_rademacher_support():
    model = NoiseModel.rademacher(1.0, 3)
    X = model.draw(RngStream(3), (1000,))
    assert set(np.unique(X)) == {-1.0, 1.0}
    assert model.sigma == pytest.approx(math.sqrt(3))


def test_white_box_identity():
    oracle = StochasticOracle(Quadratic([1.0, 3.0]), NoiseModel.gaussian_iso(1.0, 2))
    ghat, xi, g = oracle.query(np.array([1.0, 2.0]), RngStream(0))
    np.testing.assert_array_equal(ghat, g + xi)


def test_unbiasedness():
    s = 0.7
    X = NoiseModel.gaussian_iso(s, 3).draw(RngStream(5), (1_000_000,))
    assert np.all(np.abs(X.mean(axis=0)) <= 5 * s / math.sqrt(1e6))


def test_noise_independent_of_x():
    oracle = StochasticOracle(Quadratic([1.0, 1.0]), NoiseModel.gaussian_iso(0.5, 2))
    _, xi1 = sample(oracle, [0.0, 0.0], RngStream(8))
    _, xi2 = sample(oracle, [5.0, -3.0], RngStream(8))
    np.testing.assert_array_equal(xi1, xi2)


def test_invalid_models():
    with pytest.raises(InvalidInputError):
        NoiseModel.gaussian_iso(0.0, 2)
    with pytest.raises(InvalidInputError):
        NoiseModel(NoiseKind.NONE, 2, 0.0, 1.0)
    with pytest.raises(InvalidInputError):
        NoiseModel.gaussian_diag([1.0, -1.0])


@pytest.mark.parametrize("s", [0.1, 0.5, 2.0])
def test_certify_passes_at_twice_std(s):
    rep = certify_subgaussian(NoiseModel.gaussian_iso(s, 1, 2 * s), 100_000, 16, RngStream(2))
    assert rep.passed, rep.reason
    assert len(rep.lambdas) == 16
    assert rep.lambdas[-1] == pytest.approx(1 / (2 * s))


def test_certify_fails_divergent():
    rep = certify_subgaussian(NoiseModel.gaussian_iso(0.5, 1, 0.5), 100_000, 16, RngStream(2))
    assert not rep.passed
    assert rep.reason == "divergent MGF"


def test_certify_none_noise():
    rep = certify_subgaussian(NoiseModel.none(3), 100_000, 16, RngStream(0))
    assert rep.passed
    assert rep.estimates == [1.0] * 16


def test_certify_needs_enough_samples():
    with pytest.raises(PreconditionError):
        certify_subgaussian(NoiseModel.gaussian_iso(1.0, 1), 1000)


def test_certify_per_coordinate():
    model = NoiseModel.gaussian_diag([0.5, 1.0], per_coordinate=True)
    rep = certify_subgaussian(model, 100_000, 8, RngStream(4))
    assert rep.passed
    assert len(rep.estimates) == 2


def test_certify_report_serializes():
    d = certify_subgaussian(NoiseModel.rademacher(1.0, 2), 100_000, 4, RngStream(0)).to_dict()
    assert set(d) >= {"lambda_grid", "estimates", "bounds", "pass", "worst_margin"}


def test_mgf_lemma_degenerate():
    model = NoiseModel.gaussian_iso(0.5, 2)
    rep = mgf_lemma_check([0.0, 0.0], 0.0, model, NormPair.EUCLIDEAN_L2, 10_000, RngStream(0))
    assert rep.estimate == 1.0
    assert rep.bound == 1.0
    assert rep.passed


def test_mgf_lemma_gaussian_b0():
    rep = mgf_lemma_check([1.0], 0.0, NoiseModel.gaussian_iso(0.5, 1), NormPair.EUCLIDEAN_L2,
                          1_000_000, RngStream(1))
    assert rep.passed
    assert rep.estimate == pytest.approx(1.1331484530668263, rel=5e-3)
    assert rep.details["sharp_bound"] == pytest.approx(7.38905609893065, rel=1e-14)


def test_mgf_lemma_gaussian_b_quarter():
    rep = mgf_lemma_check([1.0], 0.25, NoiseModel.gaussian_iso(0.5, 1), NormPair.EUCLIDEAN_L2,
                          1_000_000, RngStream(1))
    assert rep.passed
    assert rep.bound == pytest.approx(24.227782212610978, rel=1e-14)
    # closed form of E exp(X + X^2/16), X ~ N(0, 1/4)
    assert rep.estimate == pytest.approx(1.155931609562306, rel=5e-3)


def test_mgf_lemma_precondition():
    with pytest.raises(PreconditionError):
        mgf_lemma_check([1.0], 0.6, NoiseModel.gaussian_iso(0.5, 1))


@given(st.floats(0.0, 0.25))
def test_gaussian_log_mgf_factor_two(u):
    assert -0.5 * math.log1p(-2 * u) <= 4 * u + 1e-15
