import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from treataccel import (AccelFactor, AccelerationSpec, CENSOR, COVARIATE,
                        Event, StepFunction, SubjectPath, gamma_from_rate,
                        gamma_inverse, mc_check_intensity, shift_path)


def crossing_subject(cross_at=2.0):
    return SubjectPath("s", {"x_lci": 4.0, "x_disease": 0.0,
                             "physical": 70.0, "dial2yr": 0.0},
                       [Event(cross_at, COVARIATE, "dial2yr", 1.0),
                        Event(20.0, CENSOR)])


def process_spec(b, when="nonzero"):
    return AccelerationSpec((AccelFactor("process_indicator", b,
                                         process="dial2yr", when=when),))


def test_constant_rate_is_linear():
    gam = gamma_from_rate(AccelerationSpec.constant(2.0), crossing_subject())
    for t in (0.0, 0.5, 1.0, 7.25):
        assert gam(t) == pytest.approx(2.0 * t, abs=1e-15)


def test_piecewise_hand_values():
    # rate 1 before the crossing at t=2, rate 2 after
    gam = gamma_from_rate(process_spec(2.0), crossing_subject(cross_at=2.0))
    assert gam(1.0) == pytest.approx(1.0, abs=1e-15)
    assert gam(2.0) == pytest.approx(2.0, abs=1e-15)
    assert gam(3.0) == pytest.approx(4.0, abs=1e-15)
    assert gam(4.5) == pytest.approx(7.0, abs=1e-15)

    inv = gamma_inverse(gam)
    assert inv(4.0) == pytest.approx(3.0, abs=1e-15)
    assert inv(2.0) == pytest.approx(2.0, abs=1e-15)
    assert inv(1.0) == pytest.approx(1.0, abs=1e-15)


def test_decelerating_branch():
    gam = gamma_from_rate(process_spec(0.5, when="zero"),
                          crossing_subject(cross_at=4.0))
    # the factor reads the state on the changed clock, so the half-rate
    # segment lasts until Gamma reaches the crossing: Gamma(8) = 4
    assert gam(4.0) == pytest.approx(2.0, abs=1e-15)
    assert gam(6.0) == pytest.approx(3.0, abs=1e-15)
    assert gam(8.0) == pytest.approx(4.0, abs=1e-15)
    assert gam(10.0) == pytest.approx(6.0, abs=1e-15)


def test_inverse_round_trip_on_grid():
    gam = gamma_from_rate(process_spec(3.0), crossing_subject())
    inv = gamma_inverse(gam)
    pts = np.linspace(0.0, 15.0, 301)
    np.testing.assert_allclose(inv(gam(pts)), pts, atol=1e-12)
    np.testing.assert_allclose(gam(inv(pts)), pts, atol=1e-12)


def test_shift_path_moves_jumps():
    # doubling clock: observational jump at s lands at s/2
    gam = gamma_from_rate(AccelerationSpec.constant(2.0), crossing_subject())
    path = StepFunction.from_jumps([1.0, 3.0])
    shifted = shift_path(path, gam)
    np.testing.assert_allclose(shifted.times, [0.5, 1.5], atol=1e-15)
    np.testing.assert_array_equal(shifted.levels, path.levels)
    assert shifted.initial == path.initial


def test_monotonicity_guard():
    with pytest.raises(ValueError):
        from treataccel.timechange import TimeChange
        TimeChange([0.0, 1.0], [0.0, 2.0], [1.0, -1.0])


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(min_value=0.05, max_value=3.0), min_size=1,
                max_size=6),
       st.floats(min_value=0.2, max_value=5.0))
def test_inverse_round_trip_random_specs(gaps, b):
    times = np.cumsum(gaps)
    events = [Event(float(t), COVARIATE, "dial2yr", float(k % 2 == 0))
              for k, t in enumerate(times)]
    events.append(Event(float(times[-1] + 1.0), CENSOR))
    subj = SubjectPath("z", {"x_lci": 4.0, "x_disease": 0.0,
                             "physical": 70.0, "dial2yr": 0.0}, events)
    gam = gamma_from_rate(process_spec(b), subj)
    inv = gamma_inverse(gam)
    pts = np.linspace(0.0, float(times[-1] + 3.0), 200)
    np.testing.assert_allclose(inv(gam(pts)), pts, atol=1e-12)


def test_mc_check_runs_and_reports():
    chk = mc_check_intensity(1.0, AccelerationSpec.identity(), horizon=1.0,
                             n_paths=500, seed=3)
    assert chk.predicted == 1.0
    assert chk.ok
    row = chk.row()
    assert set(row) >= {"lambda", "horizon", "paths", "seed", "scenario",
                        "empirical_mean", "predicted", "std_error", "z", "ok"}


def test_mc_check_determinism():
    a = mc_check_intensity(2.0, AccelerationSpec.constant(0.5), 1.0, 300, 11)
    b = mc_check_intensity(2.0, AccelerationSpec.constant(0.5), 1.0, 300, 11)
    assert a.empirical_mean == b.empirical_mean
    assert a.std_error == b.std_error


def test_mc_check_validation():
    with pytest.raises(ValueError):
        mc_check_intensity(0.0, AccelerationSpec.identity(), 1.0, 300, 1)
    with pytest.raises(ValueError):
        mc_check_intensity(1.0, AccelerationSpec.identity(), 1.0, 50, 1)
