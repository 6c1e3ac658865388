import math
import random
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from singlab.errors import BadSymbol, DimensionMismatch, OSCViolation, ROutOfXi, ValidationError
from singlab.fractal import (IFS, PRESETS, ProductFractal, cell_anchors, cell_count, coding_map,
                             covering_levels, holder_constant, sample_mu, sample_mu_r,
                             stratified_expectation, subdivision_levels)
from singlab.weights import equal_weights, validate_weights

from oracles import compare_power, subdivision_level_oracle, unit_interval_decay


def test_presets_and_dimensions():
    assert PRESETS["unit_interval"]().dimension_exact == 1
    assert PRESETS["cantor3"]().dimension == pytest.approx(math.log(2) / math.log(3))
    assert PRESETS["cantor5"]().diameter == 1
    assert IFS.make(F(1, 4), [0, F(3, 4), F(1, 4), F(1, 2)]).dimension_exact == 1
    assert IFS.make(F(1, 4), [0, F(3, 4)]).dimension_exact == F(1, 2)


def test_normalization_and_osc():
    ifs = IFS.make(F(1, 3), [F(1, 3), 1])
    assert ifs.hull() == (0, 1)
    with pytest.raises(OSCViolation):
        IFS.make(F(2, 3), [0, F(1, 3)])
    with pytest.raises(ValidationError):
        IFS.make(F(3, 2), [0, 1])
    # touching images are allowed
    IFS.make(F(1, 2), [0, F(1, 2)])


def test_coding_map():
    c3 = PRESETS["cantor3"]()
    assert coding_map(c3, [1, 0]) == F(2, 3)
    assert coding_map(c3, [1, 1]) == F(8, 9)
    with pytest.raises(BadSymbol):
        coding_map(c3, [2])


def test_samples_lie_in_the_attractor():
    K = ProductFractal.uniform("cantor3", 1, 1)
    x = sample_mu(K, 20000, seed=1)[:, 0, 0]
    assert x.min() >= 0 and x.max() <= 1
    assert not np.any((x > 1 / 3 + 1e-12) & (x < 2 / 3 - 1e-12))
    assert np.mean(x < 0.5) == pytest.approx(0.5, abs=0.02)
    y = sample_mu_r(K, 2.0, 10, seed=1)
    assert y.max() <= 2


def test_sampling_is_deterministic():
    K = ProductFractal.uniform("unit_interval", 2, 1)
    np.testing.assert_array_equal(sample_mu(K, 50, seed=7), sample_mu(K, 50, seed=7))
    assert not np.array_equal(sample_mu(K, 50, seed=7), sample_mu(K, 50, seed=8))


def test_r_range():
    K = ProductFractal.uniform("cantor3", 1, 1)
    with pytest.raises(ROutOfXi):
        K.check_r(4.0)
    K.check_r(3.0)


def test_product_fractal_json():
    K = ProductFractal.from_json({"c": "1/5", "w": [0, "4/5"]}, 1, 2)
    assert K.shape == (1, 2)
    assert ProductFractal.from_json(K.to_json()).to_json() == K.to_json()
    with pytest.raises(DimensionMismatch):
        ProductFractal.from_json(K.to_json(), 2, 2)
    assert ProductFractal.uniform("unit_interval", 2, 2).is_full_box()
    assert not ProductFractal.uniform("cantor3", 1, 1).is_full_box()


def test_subdivision_level_examples():
    K = ProductFractal.uniform("cantor3", 1, 1)
    lv = subdivision_levels(K, equal_weights(1, 1), 3, 5)
    assert lv["N"][0, 0] == 10 and lv["r"][0, 0] == pytest.approx(1.0)
    K = ProductFractal.uniform("unit_interval", 1, 1)
    lv = subdivision_levels(K, equal_weights(1, 1), F(3, 2), 2)
    # (3/2)^-4 = 16/81 lies in (1/8, 1/4]: N = 2, r = (81/16)/4
    assert lv["N"][0, 0] == 2 and lv["r"][0, 0] == pytest.approx(81 / 64)


@settings(max_examples=80)
@given(st.sampled_from([F(1, 2), F(1, 3), F(1, 5), F(2, 7)]),
       st.sampled_from([F(2), F(3), F(3, 2), F(10), F(5, 4)]),
       st.integers(1, 12))
def test_subdivision_levels_match_exact_oracle(c, t, k):
    K = ProductFractal.make([[IFS.make(c, [0, 1 - c])] * 2])
    W = validate_weights([1], ["2/3", "1/3"])
    lv = subdivision_levels(K, W, t, k)
    for j, bj in enumerate(W.b):
        e = k * (1 + bj)
        N = int(lv["N"][0, j])
        assert N == subdivision_level_oracle(c, t, e)
        assert compare_power(c, N + 1, t, e) < 0 <= compare_power(c, N, t, e)
        assert 1 <= lv["r"][0, j] * (1 + 1e-12) and lv["r"][0, j] < 1 / c


def test_covering_levels_and_counts():
    K = ProductFractal.uniform("unit_interval", 1, 1)
    W = equal_weights(1, 1)
    assert covering_levels(K, W, 2, 5)[0, 0] == 10
    assert cell_count(K, covering_levels(K, W, 2, 5)) == 2**10
    K3 = ProductFractal.uniform("cantor3", 2, 1)
    P = covering_levels(K3, equal_weights(2, 1), 3, 4)
    assert (P == 6).all()
    total, bound = cell_count(K3, P, equal_weights(2, 1), 3, 4)
    assert total == 2**12 and total <= bound


def test_cell_anchors():
    c3 = PRESETS["cantor3"]()
    a = cell_anchors(c3, 2)
    np.testing.assert_allclose(sorted(a), [0, 2 / 9, 2 / 3, 8 / 9])


def test_holder_constant_is_finite():
    assert 1 <= holder_constant(PRESETS["cantor3"]()) < 100


@pytest.mark.parametrize("t,eta", [(2.0, 1.0), (64.0, 1.0), (1024.0, 1.0), (100.0, 0.5)])
def test_stratified_integral_resolves_singularity(t, eta):
    K = ProductFractal.uniform("unit_interval", 1, 1)
    res = stratified_expectation(K, 1, lambda x: np.maximum(t * x[:, 0, 0], 1 / t) ** -eta, 40000, seed=3)
    assert res.mean == pytest.approx(unit_interval_decay(t, eta), rel=2e-3)
    assert abs(res.mean - unit_interval_decay(t, eta)) < 6 * res.stderr + 1e-9


def test_stratified_matches_plain_on_smooth_integrand():
    K = ProductFractal.uniform("cantor3", 1, 2)
    f = lambda x: np.cos(x[:, 0, 0]) + x[:, 0, 1] ** 2
    res = stratified_expectation(K, 1, f, 20000, seed=0)
    plain = f(sample_mu(K, 200000, seed=1)).mean()
    assert res.mean == pytest.approx(plain, abs=5e-3)
