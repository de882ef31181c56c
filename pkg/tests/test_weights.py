import numpy as np
import pytest

from treataccel import (AccelFactor, AccelerationSpec, CENSOR, COVARIATE,
                        Event, StepFunction, SubjectPath, TREATMENT,
                        likelihood_ratio_path, weight_diagnostics)

BASE = {"x_lci": 4.0, "x_disease": 0.0, "physical": 70.0, "dial2yr": 0.0}


def untreated_subject():
    return SubjectPath("u", dict(BASE), [Event(3.0, CENSOR)])


def treated_at(t):
    return SubjectPath("t", dict(BASE),
                       [Event(t, TREATMENT), Event(3.0, CENSOR)])


def test_no_event_steps_multiply_down():
    # g=2: each eventless step multiplies by 1 - dLambda
    cum = StepFunction.from_increments([1.0, 2.0], [0.1, 0.2])
    lr = likelihood_ratio_path(untreated_subject(), cum,
                               AccelerationSpec.constant(2.0))
    np.testing.assert_allclose(lr.path.levels, [0.9, 0.72], atol=1e-15)
    assert lr.floor_hits == 0
    assert lr(0.5) == 1.0


def test_event_step_multiplies_up():
    cum = StepFunction.from_increments([1.0, 2.0], [0.1, 0.2])
    lr = likelihood_ratio_path(treated_at(2.0), cum,
                               AccelerationSpec.constant(2.0))
    # 0.9 at the missed first time, then x(1 + (2-1)(1 - 0.2)) = 1.8
    np.testing.assert_allclose(lr.path.levels, [0.9, 1.62], atol=1e-15)


def test_three_eventless_steps():
    cum = StepFunction.from_increments([1.0, 2.0, 3.0], [0.1, 0.1, 0.1])
    lr = likelihood_ratio_path(untreated_subject(), cum,
                               AccelerationSpec.constant(2.0))
    assert lr(3.0) == pytest.approx(0.9 ** 3, abs=1e-15)
    assert lr.at_left(3.0) == pytest.approx(0.9 ** 2, abs=1e-15)


def test_identity_is_exactly_one():
    cum = StepFunction.from_increments([1.0, 2.0], [0.3, 0.4])
    lr = likelihood_ratio_path(treated_at(1.0), cum,
                               AccelerationSpec.identity())
    assert np.all(lr.path.levels == 1.0)
    assert lr.floor_hits == 0


def test_floor_truncation_is_counted():
    cum = StepFunction.from_increments([1.0], [0.9])
    lr = likelihood_ratio_path(untreated_subject(), cum,
                               AccelerationSpec.constant(50.0), floor=1e-6)
    # 1 + 49*(0 - 0.9) is far below zero, so the path sits at the floor
    assert lr(1.0) == 1e-6
    assert lr.floor_hits == 1


def test_floor_must_be_positive():
    cum = StepFunction.from_increments([1.0], [0.1])
    with pytest.raises(ValueError):
        likelihood_ratio_path(untreated_subject(), cum,
                              AccelerationSpec.constant(2.0), floor=0.0)


def test_process_factor_reads_state_at_left_limit():
    spec = AccelerationSpec((AccelFactor("process_indicator", 2.0,
                                         process="dial2yr", when="nonzero"),))
    s = SubjectPath("c", dict(BASE),
                    [Event(1.0, COVARIATE, "dial2yr", 1.0), Event(3.0, CENSOR)])
    cum = StepFunction.from_increments([1.0, 2.0], [0.1, 0.1])
    lr = likelihood_ratio_path(s, cum, spec)
    # at t=1 the crossing has not happened from the left: g=1, no change;
    # at t=2 the factor is active: 1 - 0.1
    np.testing.assert_allclose(lr.path.levels, [1.0, 0.9], atol=1e-15)


def test_weight_diagnostics_summary():
    cum = StepFunction.from_increments([1.0], [0.1])
    spec = AccelerationSpec.constant(2.0)
    paths = [likelihood_ratio_path(untreated_subject(), cum, spec),
             likelihood_ratio_path(treated_at(1.0), cum, spec)]
    summ = weight_diagnostics(paths, 1.5)
    assert summ.n == 2
    assert summ.min == pytest.approx(0.9)
    assert summ.max == pytest.approx(1.9)
    assert summ.mean == pytest.approx((0.9 + 1.9) / 2)
    assert summ.floor_hit_count == 0
    with pytest.raises(ValueError):
        weight_diagnostics([], 1.0)
