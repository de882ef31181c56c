import pytest

from treataccel import (AccelFactor, AccelerationSpec, CENSOR, COVARIATE,
                        Event, SubjectPath, parse_accel_spec)
from treataccel.acceleration import evaluate_g


def subject_with_crossing(cross_at=2.0, x=4.0):
    events = [Event(cross_at, COVARIATE, "dial2yr", 1.0), Event(9.0, CENSOR)]
    return SubjectPath("s", {"x_lci": x, "x_disease": 1.0,
                             "physical": 70.0, "dial2yr": 0.0}, events)


def test_constant_factor():
    spec = AccelerationSpec.constant(2.0)
    assert evaluate_g(spec, subject_with_crossing(), 1.0) == 2.0
    assert evaluate_g(spec, subject_with_crossing(), 8.0) == 2.0
    assert not spec.is_identity()


def test_identity_properties():
    ident = AccelerationSpec.identity()
    assert ident.is_identity()
    assert evaluate_g(ident, subject_with_crossing(), 3.0) == 1.0
    assert AccelerationSpec.constant(1.0).is_identity()
    assert ident.describe() == "observational (g=1)"


def test_baseline_indicator_directions():
    above = AccelerationSpec((AccelFactor("baseline_indicator", 2.0,
                                          cov="x_lci", threshold=6.0,
                                          direction="gt"),))
    below = AccelerationSpec((AccelFactor("baseline_indicator", 2.0,
                                          cov="x_lci", threshold=6.0,
                                          direction="le"),))
    hi = subject_with_crossing(x=7.0)
    lo = subject_with_crossing(x=6.0)
    assert evaluate_g(above, hi, 1.0) == 2.0
    assert evaluate_g(above, lo, 1.0) == 1.0
    assert evaluate_g(below, hi, 1.0) == 1.0
    assert evaluate_g(below, lo, 1.0) == 2.0


def test_process_indicator_uses_left_limit():
    spec = AccelerationSpec((AccelFactor("process_indicator", 3.0,
                                         process="dial2yr", when="nonzero"),))
    s = subject_with_crossing(cross_at=2.0)
    # at the crossing instant the factor still reads the pre-jump state
    assert evaluate_g(spec, s, 2.0) == 1.0
    assert evaluate_g(spec, s, 2.0 + 1e-9) == 3.0

    flipped = AccelerationSpec((AccelFactor("process_indicator", 3.0,
                                            process="dial2yr", when="zero"),))
    assert evaluate_g(flipped, s, 2.0) == 3.0
    assert evaluate_g(flipped, s, 5.0) == 1.0


def test_factor_product():
    spec = AccelerationSpec((
        AccelFactor("constant", 2.0),
        AccelFactor("process_indicator", 1.5, process="dial2yr",
                    when="nonzero")))
    s = subject_with_crossing(cross_at=2.0)
    assert evaluate_g(spec, s, 1.0) == 2.0
    assert evaluate_g(spec, s, 4.0) == 3.0
    assert spec.driving_processes() == ("dial2yr",)


def test_evaluate_rejects_nonpositive_time():
    with pytest.raises(ValueError):
        evaluate_g(AccelerationSpec.constant(2.0), subject_with_crossing(), 0.0)


def test_factor_validation():
    with pytest.raises(ValueError):
        AccelFactor("constant", -1.0)
    with pytest.raises(ValueError):
        AccelFactor("baseline_indicator", 2.0)  # needs cov + threshold
    with pytest.raises(ValueError):
        AccelFactor("process_indicator", 2.0)   # needs process
    with pytest.raises(ValueError):
        AccelerationSpec(())


class TestSpecParsing:

    def test_constant(self):
        spec = parse_accel_spec("form=constant b=2")
        assert spec.factors == (AccelFactor("constant", 2.0),)

    def test_baseline(self):
        spec = parse_accel_spec(
            "form=baseline_indicator cov=x_lci threshold=6 b=2 direction=le")
        (f,) = spec.factors
        assert f.form == "baseline_indicator"
        assert (f.cov, f.direction, f.threshold) == ("x_lci", "le", 6.0)

    def test_process(self):
        spec = parse_accel_spec(
            "form=process_indicator process=dial2yr b=2 when=zero")
        (f,) = spec.factors
        assert f.form == "process_indicator"
        assert (f.process, f.when) == ("dial2yr", "zero")

    def test_product_marker_and_two_factors(self):
        spec = parse_accel_spec(
            "form=product\n"
            "form=constant b=2\n"
            "form=process_indicator b=1.5 process=dial2yr\n")
        assert len(spec.factors) == 2

    def test_comments_and_semicolons(self):
        spec = parse_accel_spec("form=constant b=2  # doubled clock")
        assert spec.factors[0].b == 2.0
        assert len(parse_accel_spec("form=constant b=2; form=constant b=3")
                   .factors) == 2

    def test_errors(self):
        with pytest.raises(ValueError, match="missing b="):
            parse_accel_spec("form=constant")
        with pytest.raises(ValueError):
            parse_accel_spec("form=warp b=2")
        with pytest.raises(ValueError):
            parse_accel_spec("")
        with pytest.raises(ValueError, match="unknown acceleration keys"):
            parse_accel_spec("form=constant b=2 extra=1")
        with pytest.raises(ValueError, match="nonpositive"):
            parse_accel_spec("form=constant b=0")

    def test_file_source(self, tmp_path):
        p = tmp_path / "accel.txt"
        p.write_text("form=constant b=0.5\n")
        assert parse_accel_spec(str(p)).factors[0].b == 0.5
