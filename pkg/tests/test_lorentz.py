import math

import numpy as np
import pytest

from app.core.errors import InvalidData
from app.geometry.lorentz import (
    SL2C,
    HermPoint,
    SpacetimeVec,
    bilinear,
    from_components,
    from_herm,
    minkowski_inner,
    sl2_act,
    to_components,
    to_herm,
)


def test_to_herm():
    np.testing.assert_array_equal(to_herm(SpacetimeVec(1, 0, 0, 0)).as_matrix(), np.eye(2))
    np.testing.assert_array_equal(to_herm(SpacetimeVec(0, 0, 0, 0)).as_matrix(), np.zeros((2, 2)))
    np.testing.assert_array_equal(to_herm(SpacetimeVec(1, 0, 0, 1)).as_matrix(), [[2, 0], [0, 0]])


def test_from_herm():
    assert from_herm(HermPoint(1, 0, 1)) == SpacetimeVec(1, 0, 0, 0)
    assert from_herm(HermPoint(0, 1, 0)) == SpacetimeVec(0, 1, 0, 0)
    assert from_herm(HermPoint(2, 1j, 0)) == SpacetimeVec(1, 0, 1, 1)


def test_herm_round_trip_is_exact():
    v = SpacetimeVec(0.25, -1.5, 3.0, 0.75)
    assert from_herm(to_herm(v)) == v


def test_hermitian_constraint():
    m = HermPoint(1.0, 2 - 3j, -4.0)
    assert m.h21 == 2 + 3j
    with pytest.raises(InvalidData):
        HermPoint.from_matrix([[1, 1j], [1j, 1]])


def test_minkowski_inner():
    identity = HermPoint(1, 0, 1)
    null = HermPoint(2, 0, 0)
    spacelike = HermPoint(0, 1, 0)
    assert minkowski_inner(identity, identity) == pytest.approx(-1)
    assert minkowski_inner(null, null) == pytest.approx(0)
    assert minkowski_inner(spacelike, spacelike) == pytest.approx(1)


def test_minkowski_inner_matches_components():
    rng = np.random.default_rng(1)
    for _ in range(50):
        x = rng.normal(size=4)
        m = to_herm(SpacetimeVec.from_array(x))
        assert minkowski_inner(m, m) == pytest.approx(-x[0] ** 2 + x[1] ** 2 + x[2] ** 2 + x[3] ** 2)


def test_sl2_action_boost():
    t = 0.7
    phi = SL2C(math.exp(t / 2), 0, 0, math.exp(-t / 2))
    image = from_herm(sl2_act(phi, HermPoint(1, 0, 1)))
    assert image.x0 == pytest.approx(math.cosh(t))
    assert image.x3 == pytest.approx(math.sinh(t))
    assert sl2_act(SL2C.identity(), HermPoint(3, 1 + 1j, -2)) == HermPoint(3, 1 + 1j, -2)


def test_sl2_action_is_an_isometry():
    rng = np.random.default_rng(7)
    for _ in range(200):
        entries = rng.normal(size=3) + 1j * rng.normal(size=3)
        m11, m12, m21 = entries
        m22 = (1 + m12 * m21) / m11
        phi = SL2C(m11, m12, m21, m22)
        m = to_herm(SpacetimeVec.from_array(rng.normal(size=4)))
        n = to_herm(SpacetimeVec.from_array(rng.normal(size=4)))
        before = minkowski_inner(m, n)
        after = minkowski_inner(sl2_act(phi, m), sl2_act(phi, n))
        scale = max(1.0, abs(before), np.abs(phi.as_matrix()).max() ** 4)
        assert abs(after - before) <= 1e-10 * scale


def test_sl2c_rejects_wrong_determinant():
    with pytest.raises(InvalidData):
        SL2C(2, 0, 0, 1)
    phi = SL2C(2, 1, 1, 1)
    np.testing.assert_allclose(phi.as_matrix() @ phi.inverse().as_matrix(), np.eye(2))


def test_array_helpers():
    x = np.array([[0.5, 1.0, -2.0, 0.25], [1.0, 0.0, 0.0, 1.0]])
    m = from_components(x)
    np.testing.assert_allclose(to_components(m).real, x)
    np.testing.assert_allclose(bilinear(m, m).real, [-0.25 + 1 + 4 + 0.0625, 0.0])
