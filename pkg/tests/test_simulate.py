import numpy as np
import pytest

from dataclasses import replace

from treataccel import (AccelerationSpec, CENSOR, COVARIATE, DgpConfig,
                        OUTCOME, TREATMENT, aalen_recovery_config,
                        default_config, oracle_survival, simulate_cohort,
                        simulate_hypothetical)


def cohorts_equal(a, b):
    if a.n != b.n or a.horizon != b.horizon:
        return False
    for sa, sb in zip(a.subjects, b.subjects):
        if (sa.subject_id, sa.baseline, sa.events) != \
                (sb.subject_id, sb.baseline, sb.events):
            return False
    return True


def test_same_seed_reproduces_exactly():
    cfg = default_config()
    assert cohorts_equal(simulate_cohort(cfg, n=200, seed=5),
                         simulate_cohort(cfg, n=200, seed=5))


def test_different_seeds_differ():
    cfg = default_config()
    assert not cohorts_equal(simulate_cohort(cfg, n=200, seed=5),
                             simulate_cohort(cfg, n=200, seed=6))


def test_observational_equals_identity_scenario():
    cfg = default_config()
    assert cohorts_equal(
        simulate_cohort(cfg, n=300, seed=11),
        simulate_hypothetical(cfg, AccelerationSpec.identity(), 300, 11))


def test_prefix_stability():
    # subject i's path depends only on (seed, i), not on cohort size
    cfg = default_config()
    big = simulate_cohort(cfg, n=120, seed=9)
    small = simulate_cohort(cfg, n=40, seed=9)
    for sa, sb in zip(small.subjects, big.subjects):
        assert sa.baseline == sb.baseline
        assert sa.events == sb.events


def test_acceleration_shifts_treatment_uptake():
    cfg = default_config()
    frac = {}
    for name, accel in (("half", AccelerationSpec.constant(0.5)),
                        ("obs", AccelerationSpec.identity()),
                        ("double", AccelerationSpec.constant(2.0))):
        c = simulate_hypothetical(cfg, accel, 4000, 17)
        frac[name] = np.mean([s.treatment_time is not None
                              for s in c.subjects])
    assert frac["half"] < frac["obs"] < frac["double"]


def test_cohort_calibration_targets():
    cohort = simulate_cohort(default_config(), n=10_000, seed=7)
    treated = np.mean([s.treatment_time is not None for s in cohort.subjects])
    severe = np.mean([s.baseline["x_lci"] > 6.0 for s in cohort.subjects])
    assert 0.70 <= treated <= 0.76
    assert 0.092 <= severe <= 0.132


def test_path_structure_invariants():
    cfg = default_config()
    cohort = simulate_cohort(cfg, n=500, seed=13)
    for s in cohort.subjects:
        assert s.terminal_kind in (OUTCOME, CENSOR)
        assert s.terminal_time <= cfg.horizon + 1e-12
        if s.terminal_kind == CENSOR:
            assert s.terminal_time >= cfg.horizon - cfg.entry_spread - 1e-12
        tt = s.treatment_time
        crossings = [e for e in s.events
                     if e.kind == COVARIATE and e.name == "dial2yr"]
        assert len(crossings) <= 1
        for e in s.events:
            if e.kind == COVARIATE:
                # covariate history freezes once treatment starts
                assert tt is None or e.time <= tt
                if e.name == "physical":
                    assert 0.0 <= e.value <= 100.0
                    steps = e.time / cfg.physical_update
                    assert abs(steps - round(steps)) < 1e-9
                else:
                    assert e.value == 1.0
        assert 0.0 <= s.baseline["x_lci"] <= 10.0
        assert s.baseline["x_disease"] in (0.0, 1.0, 2.0)
        # a long enough backlog means the two-year mark passed before entry
        assert s.baseline["dial2yr"] in (0.0, 1.0)
        if s.baseline["dial2yr"] == 1.0:
            assert not crossings


def test_oracle_survival_matches_hand_km():
    from treataccel import Cohort, CovariateSchema, Event, SubjectPath
    schema = CovariateSchema(baseline=("x",))
    c = Cohort([SubjectPath("a", {"x": 0.0}, [Event(1.0, OUTCOME)]),
                SubjectPath("b", {"x": 0.0}, [Event(2.0, CENSOR)]),
                SubjectPath("c", {"x": 0.0}, [Event(3.0, CENSOR)])],
               5.0, schema)
    curve = oracle_survival(c, [0.5, 1.0, 4.0])
    np.testing.assert_allclose(curve.estimate, [1.0, 2 / 3, 2 / 3],
                               atol=1e-15)


class TestConfigValidation:

    def test_defaults_validate(self):
        default_config().validate()
        aalen_recovery_config().validate()

    def test_negative_intensity_rejected(self):
        with pytest.raises(ValueError, match="treatment intensity negative"):
            replace(default_config(), trt_severe=-10.0).validate()
        with pytest.raises(ValueError, match="outcome hazard negative"):
            replace(default_config(), out_treated=-10.0).validate()

    def test_disease_probs_must_sum_to_one(self):
        with pytest.raises(ValueError, match="disease_probs"):
            replace(default_config(), disease_probs=(0.5, 0.2, 0.2)).validate()

    def test_entry_spread_bounds(self):
        with pytest.raises(ValueError, match="entry_spread"):
            replace(default_config(), entry_spread=0.0).validate()
        with pytest.raises(ValueError, match="entry_spread"):
            replace(default_config(), entry_spread=99.0).validate()

    def test_bad_n_rejected(self):
        with pytest.raises(ValueError):
            simulate_cohort(default_config(), n=0, seed=1)


def test_config_json_round_trip(tmp_path):
    cfg = replace(default_config(), trt_base=0.5, label="variant")
    path = str(tmp_path / "cfg.json")
    cfg.to_json(path)
    assert DgpConfig.from_json(path) == cfg


def test_recovery_config_is_distinct():
    assert aalen_recovery_config() != default_config()
    assert aalen_recovery_config().label != default_config().label
