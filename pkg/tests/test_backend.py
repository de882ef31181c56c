"""Bitwise and near-bitwise agreement between the two backend
implementations of the hot kernels."""

import numpy as np
import pytest

from treataccel import AccelFactor, AccelerationSpec, backend_name, \
    default_config
from treataccel import _purepy
from treataccel._pack import pack_subjects, sweep_data
from treataccel.simulate import _scenario_codes

kernels = pytest.importorskip("treataccel._kernels")

SCENARIOS = {
    "identity": AccelerationSpec.identity(),
    "double": AccelerationSpec.constant(2.0),
    "post_crossing": AccelerationSpec((
        AccelFactor("process_indicator", 2.0, process="dial2yr",
                    when="nonzero"),)),
}


def test_backend_name_reports_selection():
    assert backend_name() in ("python", "compiled")


@pytest.mark.parametrize("name", sorted(SCENARIOS))
def test_simulated_paths_bitwise_equal(name):
    cfg = default_config()
    codes = _scenario_codes(SCENARIOS[name])
    a = _purepy.simulate_paths(cfg, codes, 400, 7)
    b = kernels.simulate_paths(cfg, codes, 400, 7)
    assert len(a) == len(b)
    for arr_a, arr_b in zip(a, b):
        if np.asarray(arr_a).dtype.kind == "f":
            assert np.array_equal(arr_a, arr_b, equal_nan=True)
        else:
            assert np.array_equal(arr_a, arr_b)


@pytest.fixture(scope="module")
def packed(small_cohort, default_design):
    sa = pack_subjects(small_cohort, default_design,
                       AccelerationSpec.constant(2.0))
    return sweep_data(sa)


def test_aalen_sweep_agreement(packed):
    inc_py, flags_py = _purepy.aalen_sweep(packed)
    inc_c, flags_c = kernels.aalen_sweep(packed)
    np.testing.assert_array_equal(flags_py, flags_c)
    np.testing.assert_allclose(inc_c, inc_py, atol=1e-12)


def test_weight_sweep_agreement(packed):
    incs, _ = _purepy.aalen_sweep(packed)
    probes = np.linspace(1.0, 9.0, 5)
    na_py, pr_py, hits_py, neg_py = _purepy.weight_na_sweep(
        packed, incs, 1e-6, probes)
    na_c, pr_c, hits_c, neg_c = kernels.weight_na_sweep(
        packed, incs, 1e-6, probes)
    np.testing.assert_allclose(na_c, na_py, atol=1e-12)
    np.testing.assert_allclose(pr_c, pr_py, atol=1e-12)
    np.testing.assert_array_equal(hits_py, hits_c)
    assert neg_py == neg_c
