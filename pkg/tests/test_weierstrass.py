import numpy as np
import pytest

from app.core.errors import C1Violation, C2Violation, InvalidData, ZeroOfF
from app.geometry.polynomials import PolyC
from app.geometry.weierstrass import (
    FField,
    build_f,
    derive,
    hopf_density,
    mask_singularities,
    pole_indicial_report,
    validate_C1,
    validate_C2,
)
from tests.conftest import make_data


def test_epsilon_must_be_a_sign():
    with pytest.raises(InvalidData):
        make_data("z", eps=0)
    with pytest.raises(InvalidData):
        make_data("z", w="0")


def test_f_is_constant_when_c_and_k_vanish(settings):
    data = make_data("z", a=1.0, b=1.0)
    _, f = build_f(data, settings)
    np.testing.assert_allclose(f.values, 1)
    assert f.closed_form.degree == 0


def test_f_closed_form_for_c_zero(settings):
    data = make_data("z", a=2.0)
    _, f = build_f(data, settings)
    z = data.grid.nodes
    np.testing.assert_allclose(f.values, 1 + z**2, atol=1e-13)
    assert f.closed_form.coeffs == pytest.approx((1, 0, 1))


def test_zeros_of_f_are_masked_when_c_is_nonzero(settings):
    data = make_data("z", c=1, f0=0)
    masked, f = build_f(data, settings)
    assert f.closed_form.coeffs == pytest.approx((0, 1, 0, -1 / 3), abs=1e-14)
    assert f.zero_nodes == (0j,)
    assert masked.grid.mask[masked.grid.base_index]


def test_zeros_of_f_are_rejected_when_c_is_zero(settings):
    data = make_data("z", a=2.0, n=13, half=1.5)
    with pytest.raises(ZeroOfF):
        build_f(data, settings)


def test_c1_positivity(settings):
    data = make_data("2*z", eps=1, half=0.6, n=25)
    with pytest.raises(C1Violation):
        validate_C1(data, settings)
    report = validate_C1(make_data("2*z", eps=-1), settings)
    assert report.min_margin == pytest.approx(1)


def test_c1_pole_matching(settings):
    data = make_data("1/z", w="z^2", n=21, z0=0.4 + 0j)
    masked, centers = mask_singularities(data, settings)
    assert centers[0] == pytest.approx(0, abs=1e-9)
    report = validate_C1(masked, settings)
    assert len(report.pole_matches) == 1
    root, k, order = report.pole_matches[0]
    assert (k, order) == (1, 2)


def test_c1_rejects_unmatched_zero_of_omega(settings):
    with pytest.raises(C1Violation):
        validate_C1(make_data("z", w="z"), settings)


def test_c1_rejects_wrong_zero_order(settings):
    data = make_data("1/z", w="z", n=21, z0=0.4 + 0j)
    masked, _ = mask_singularities(data, settings)
    with pytest.raises(C1Violation):
        validate_C1(masked, settings)


def test_c2_and_hopf_density(settings):
    data = make_data("z")
    data, f = build_f(data, settings)
    report = validate_C2(data, f, settings)
    assert report.max_q == pytest.approx(1)
    np.testing.assert_allclose(hopf_density(data, f, settings).values, 1)

    data = make_data("z^2")
    data, f = build_f(data, settings)
    hopf = hopf_density(data, f, settings)
    np.testing.assert_allclose(hopf.values, 2 * data.grid.nodes, atol=1e-14)
    assert not hopf.flat


def test_c2_rejects_uncancelled_zero_of_f(settings, enneper):
    grid = enneper.grid
    f = FField(grid.nodes.astype(complex), grid, closed_form=PolyC.z())
    with pytest.raises(C2Violation):
        validate_C2(enneper, f, settings)


def test_constant_g_is_flat(settings):
    data = make_data("3")
    data, f = build_f(data, settings)
    assert hopf_density(data, f, settings).flat


def test_derive_collects_reports(settings, enneper):
    derived = derive(enneper, settings)
    assert derived.parallel_H
    assert not derived.flat
    assert derived.c1.min_margin == pytest.approx(1)
    np.testing.assert_allclose(derived.q, 1)


def test_indicial_roots_at_a_pole(settings):
    data = make_data("1/(z-0.3)", w="(z-0.3)^2", n=21, half=0.5, z0=-0.3 + 0j)
    masked, _ = mask_singularities(data, settings)
    masked, f = build_f(masked, settings)
    entries = pole_indicial_report(masked, f)
    assert len(entries) == 1
    assert (entries[0].k, entries[0].delta, entries[0].roots, entries[0].consistent) == (1, 0, (-1, 0), True)
