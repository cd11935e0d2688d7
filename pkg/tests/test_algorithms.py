import math

import numpy as np
import pytest
from conftest import assert_bit_identical, iso_std_for_sigma

from sgcert.algorithms import (StepSchedule, run_adagrad_coord, run_adagrad_norm, run_asmd,
                               run_sgd, run_smd)
from sgcert.core import (AbsSum, ConfigError, InvalidInputError, Quadratic, RngStream,
                         SimplexLinEntropy, SmoothNonconvex)
from sgcert.geometry import MirrorMap, mirror_step
from sgcert.noise import NoiseModel, StochasticOracle


def quad_oracle(dim=1, noise=None):
    return StochasticOracle(Quadratic(np.ones(dim)), noise or NoiseModel.none(dim))


def test_smd_two_steps():
    tr = run_smd(quad_oracle(), MirrorMap.EUCLIDEAN, StepSchedule.make("constant", eta=0.5),
                 [1.0], 2, RngStream(0))
    np.testing.assert_array_equal(tr.x[:, 0], [1.0, 0.5, 0.25])
    assert tr.summary()["avg_gap"] == 0.3125
    assert tr.summary()["gap_of_average"] == pytest.approx(0.5 * 0.75 ** 2)


def test_smd_entropy_one_step_matches_mirror_step():
    c = np.array([math.log(4), 0.0])
    obj = SimplexLinEntropy(c, 0.0)
    tr = run_smd(StochasticOracle(obj, NoiseModel.none(2)), MirrorMap.NEG_ENTROPY,
                 StepSchedule.make("constant", eta=1.0), [0.5, 0.5], 1, RngStream(0))
    assert_bit_identical(tr.x[1], mirror_step(MirrorMap.NEG_ENTROPY, [0.5, 0.5], c, 1.0))


@pytest.mark.parametrize("T", [0, -1])
def test_empty_run_rejected(T):
    with pytest.raises(InvalidInputError):
        run_smd(quad_oracle(), MirrorMap.EUCLIDEAN, StepSchedule.make("constant", eta=0.5),
                [1.0], T, RngStream(0))


def test_mirror_domain_mismatch():
    with pytest.raises(ConfigError):
        run_smd(quad_oracle(2), MirrorMap.NEG_ENTROPY, StepSchedule.make("constant", eta=0.5),
                [0.5, 0.5], 3, RngStream(0))


def test_asmd_first_step():
    sched = StepSchedule.make("constant", eta=0.5)
    tr = run_asmd(quad_oracle(), MirrorMap.EUCLIDEAN, sched, [1.0], 1, RngStream(0))
    assert tr.alphas[0] == 1.0
    assert tr.x[0, 0] == tr.z[0, 0] == 1.0
    assert tr.z[1, 0] == 0.5 == tr.y[1, 0]


def test_asmd_relation_and_simplex():
    obj = SimplexLinEntropy(np.array([0.3, -0.2, 0.5, 0.1]), 0.0)
    noise = NoiseModel.rademacher(0.3, 4)
    tr = run_asmd(StochasticOracle(obj, noise), MirrorMap.NEG_ENTROPY,
                  StepSchedule.make("inv_sqrt_t", eta=0.2), obj.default_x1(), 200, RngStream(1))
    T = tr.T
    alpha = tr.alphas[:, None]
    np.testing.assert_allclose(tr.y[1:] - tr.x, alpha * (tr.z[1:] - tr.z[:T]), atol=1e-12, rtol=0)
    np.testing.assert_array_equal(tr.alphas, 2.0 / (np.arange(1, T + 1) + 1.0))
    for arr in (tr.x, tr.y, tr.z):
        assert np.all(arr >= 0)
        np.testing.assert_allclose(arr.sum(axis=-1), 1.0, atol=1e-12)


def test_sgd_examples():
    tr = run_sgd(quad_oracle(), StepSchedule.make("constant", eta=0.5), [1.0], 2, RngStream(0))
    assert tr.summary()["avg_grad_sq"] == 0.625
    sched = StepSchedule.make("sgd_fixed", Delta1=1.0, sigma=0.0, L=4.0, T=10)
    np.testing.assert_array_equal(sched.etas(10), np.full(10, 0.25))


def test_sgd_single_step_reports_start_gradient():
    # schedules keep eta_t > 0, so a frozen iterate is a one-step run
    oracle = StochasticOracle(Quadratic([1.0, 2.0]), NoiseModel.none(2))
    tr = run_sgd(oracle, StepSchedule.make("constant", eta=1.0), [1.0, 1.0], 1, RngStream(0))
    assert tr.summary()["avg_grad_sq"] == 5.0


def test_schedule_validation():
    with pytest.raises(ConfigError):
        StepSchedule.make("constant", eta=0.0)
    with pytest.raises(ConfigError):
        StepSchedule.make("md_fixed", D1=1.0, G=1.0, sigma=1.0, delta=0.1)
    with pytest.raises(ConfigError):
        StepSchedule.make("nope")
    with pytest.raises(ConfigError):
        StepSchedule.make("asmd_linear", eta=1.0, L=1.0)
    sched = StepSchedule.make("md_fixed", D1=1.0, G=1.0, sigma=1.0, delta=0.1, T=5)
    with pytest.raises(InvalidInputError):
        sched.etas(6)
    with pytest.raises(InvalidInputError):
        sched.eta(6)


def test_schedule_values():
    s = StepSchedule.make("md_fixed", D1=1.0, G=1.0, sigma=1.0, delta=0.1, T=100)
    assert s.eta(7) == pytest.approx(0.019681565537603495, rel=1e-12)
    s = StepSchedule.make("asmd_min", eta=1.0, L=1.0)
    np.testing.assert_allclose(s.etas(3), [0.25, 0.5, 1 / math.sqrt(3)])
    s = StepSchedule.make("asmd_varying", D0=1.0, G=1.0, sigma=1.0, L=1.0, delta=0.1)
    assert np.all(s.etas(50) > 0)
    assert np.all(s.etas(50) <= np.arange(1, 51) / 4.0)


def test_adagrad_norm_example():
    tr = run_adagrad_norm(quad_oracle(2), 1.0, 1.0, [0.6, 0.8], 1, RngStream(0))
    assert tr.b[1] == pytest.approx(math.sqrt(2), rel=1e-15)
    np.testing.assert_allclose(tr.x[1], [0.17573593128807149, 0.23431457505076198], rtol=1e-14)


def test_adagrad_stationary_start():
    tr = run_adagrad_norm(quad_oracle(2), 1.0, 1.0, [0.0, 0.0], 3, RngStream(0))
    assert tr.b[1] == tr.b[0] == 1.0
    np.testing.assert_array_equal(tr.x[1], tr.x[0])


def test_adagrad_coord_example():
    obj = Quadratic([3.0, 1.0], [0.0, 1.0])  # gradient at [1, 1] is [3, 0]
    tr = run_adagrad_coord(StochasticOracle(obj, NoiseModel.none(2)), 1.0, [1.0, 1.0],
                           [1.0, 1.0], 1, RngStream(0))
    np.testing.assert_allclose(tr.b[1], [math.sqrt(10), 1.0], rtol=1e-15)
    np.testing.assert_allclose(tr.x[1], [0.0513167019494862, 1.0], rtol=1e-13)


def test_adagrad_coord_zero_coordinate_frozen():
    obj = Quadratic([1.0, 1.0], [0.0, 2.0])
    noise = NoiseModel.gaussian_diag([1.0, 1e-300])
    tr = run_adagrad_coord(StochasticOracle(obj, noise), 0.5, [1.0, 1.0], [1.0, 2.0], 50,
                           RngStream(3))
    assert np.all(tr.x[:, 1] == 2.0)


def test_adagrad_input_errors():
    with pytest.raises(InvalidInputError):
        run_adagrad_norm(quad_oracle(), 1.0, 0.0, [1.0], 2, RngStream(0))
    with pytest.raises(InvalidInputError):
        run_adagrad_norm(quad_oracle(), 0.0, 1.0, [1.0], 2, RngStream(0))
    with pytest.raises(InvalidInputError):
        run_adagrad_coord(quad_oracle(2), 1.0, [1.0], [1.0, 1.0], 2, RngStream(0))


@pytest.mark.parametrize("coord", [False, True])
def test_adagrad_b_monotone_and_log_sum(coord):
    obj = SmoothNonconvex(3)
    oracle = StochasticOracle(obj, NoiseModel.gaussian_iso(0.5, 3))
    if coord:
        tr = run_adagrad_coord(oracle, 0.7, [0.5, 1.0, 2.0], obj.default_x1(), 500, RngStream(4))
    else:
        tr = run_adagrad_norm(oracle, 0.7, 0.5, obj.default_x1(), 500, RngStream(4))
        ratio = np.sum(np.sum(tr.ghat ** 2, axis=-1) / tr.b[1:] ** 2)
        bound = 2 * math.log(tr.b[-1] / tr.b[0])
        assert ratio <= bound * (1 + 1e-9)
    assert np.all(np.diff(tr.b, axis=0) >= 0)


def test_adagrad_coord_d1_matches_norm():
    obj = Quadratic([2.0])
    oracle = StochasticOracle(obj, NoiseModel.gaussian_iso(0.4, 1))
    a = run_adagrad_norm(oracle, 0.8, 1.5, [3.0], 300, RngStream(11, 2))
    b = run_adagrad_coord(oracle, 0.8, [1.5], [3.0], 300, RngStream(11, 2))
    assert_bit_identical(a.x, b.x)
    assert_bit_identical(a.b, b.b[..., 0])


def test_euclidean_smd_matches_sgd():
    obj = SmoothNonconvex(3)
    oracle = StochasticOracle(obj, NoiseModel.gaussian_iso(iso_std_for_sigma(1.0, 3), 3))
    sched = StepSchedule.make("sgd_varying", L=8.0)
    a = run_smd(oracle, MirrorMap.EUCLIDEAN, sched, obj.default_x1(), 400, RngStream(5))
    b = run_sgd(oracle, sched, obj.default_x1(), 400, RngStream(5))
    assert_bit_identical(a.x, b.x)
    assert_bit_identical(a.f_x, b.f_x)


def test_determinism():
    obj = AbsSum(4)
    oracle = StochasticOracle(obj, NoiseModel.gaussian_iso(0.3, 4))
    sched = StepSchedule.make("inv_sqrt_t", eta=0.1)
    a = run_smd(oracle, MirrorMap.EUCLIDEAN, sched, obj.default_x1(), 300, RngStream(9, 1))
    b = run_smd(oracle, MirrorMap.EUCLIDEAN, sched, obj.default_x1(), 300, RngStream(9, 1))
    for name in ("x", "xi", "ghat", "f_x"):
        assert_bit_identical(getattr(a, name), getattr(b, name))
    c = run_smd(oracle, MirrorMap.EUCLIDEAN, sched, obj.default_x1(), 300, RngStream(9, 2))
    assert not np.array_equal(a.x, c.x)


@pytest.mark.parametrize("alg", ["smd", "asmd", "sgd", "adagrad_norm", "adagrad_coord"])
def test_summary_only_matches_full(alg):
    obj = Quadratic([1.0, 2.0])
    oracle = StochasticOracle(obj, NoiseModel.gaussian_iso(0.2, 2))
    sched = StepSchedule.make("constant", eta=0.1)

    def go(summary_only):
        rng = RngStream(21)
        x1 = obj.default_x1()
        if alg == "smd":
            return run_smd(oracle, MirrorMap.EUCLIDEAN, sched, x1, 100, rng, summary_only)
        if alg == "asmd":
            return run_asmd(oracle, MirrorMap.EUCLIDEAN, sched, x1, 100, rng, summary_only)
        if alg == "sgd":
            return run_sgd(oracle, sched, x1, 100, rng, summary_only)
        if alg == "adagrad_norm":
            return run_adagrad_norm(oracle, 0.5, 1.0, x1, 100, rng, summary_only)
        return run_adagrad_coord(oracle, 0.5, [1.0, 1.0], x1, 100, rng, summary_only)

    full, short = go(False), go(True)
    assert short.x is None and full.x is not None
    for k, v in full.summary().items():
        assert short.summary()[k] == v


def test_batched_run_rows_are_independent_runs():
    obj = Quadratic([1.0])
    oracle = StochasticOracle(obj, NoiseModel.gaussian_iso(0.5, 1))
    sched = StepSchedule.make("constant", eta=0.1)
    tr = run_sgd(oracle, sched, np.ones((8, 1)), 50, RngStream(2))
    assert tr.x.shape == (51, 8, 1)
    assert tr.f_gap.shape == (50, 8)
    assert len(np.unique(tr.x[-1, :, 0])) == 8
