import numpy as np
import pytest

from app.core.errors import FlatData
from app.geometry.frames import (
    build_frame_field,
    integrate_F,
    integrate_psi,
    psi_z_form,
    recover_Omega,
    second_order_check,
)
from app.geometry.limits import cmc_omega
from app.geometry.lorentz import det2, from_components, to_components
from app.geometry.weierstrass import derive
from tests.conftest import make_data


def test_minimal_frame_is_explicit(settings, enneper):
    derived = derive(enneper, settings)
    F = integrate_F(derived.data, derived.f, settings)
    z = enneper.grid.nodes
    np.testing.assert_allclose(F[..., 0, 0], 1, atol=1e-13)
    np.testing.assert_allclose(F[..., 0, 1], 0, atol=1e-13)
    np.testing.assert_allclose(F[..., 1, 0], z, atol=1e-13)
    np.testing.assert_allclose(F[..., 1, 1], 1, atol=1e-13)


def test_frame_starts_at_identity(settings, admissible):
    derived = derive(admissible, settings)
    F = integrate_F(derived.data, derived.f, settings)
    np.testing.assert_allclose(F[admissible.grid.base_index], np.eye(2), atol=1e-15)
    assert np.nanmax(np.abs(det2(F) - 1)) <= settings.tolerances.tol_det


def test_enneper_sample(settings, enneper):
    frame = build_frame_field(derive(enneper, settings), settings)
    x = to_components(frame.psi[enneper.grid.nearest_index(0.5 + 0j)]).real
    np.testing.assert_allclose(x, [0, 0.458333333333, 0, -0.25], atol=1e-9)
    mirrored = x * np.array([1, 1, 1, -1])
    np.testing.assert_allclose(mirrored, [0, 0.458333, 0, 0.25], atol=1e-6)


def test_psi_z_form_where_g_vanishes(enneper):
    F = np.array([[[1.0, 2.0 + 1j], [0.5j, 2.0 + 0.5j]]])
    phi = psi_z_form(enneper, np.array([1.0 + 0j]), F, np.array([0j]))
    expected = F[0] @ np.array([[0, 1], [0, 0]]) @ F[0].conj().T
    np.testing.assert_allclose(phi[0], expected)


def test_psi_starts_at_base_point(settings, admissible):
    derived = derive(admissible, settings)
    F = integrate_F(derived.data, derived.f, settings)
    base = from_components(np.array([1.0, 0.5, -0.25, 0.0]))
    psi = integrate_psi(derived.data, derived.f, F, base, settings)
    np.testing.assert_allclose(psi[admissible.grid.base_index], base)
    np.testing.assert_allclose(psi, np.conj(np.swapaxes(psi, -1, -2)))


def test_frame_integrity(settings, admissible):
    frame = build_frame_field(derive(admissible, settings), settings)
    assert frame.det_drift <= 1e-9
    assert frame.loop_residual <= settings.tolerances.tol_loop
    assert frame.path_residual <= settings.tolerances.tol_path


def test_flat_data_is_refused(settings):
    with pytest.raises(FlatData):
        build_frame_field(derive(make_data("3"), settings), settings)


def test_recovered_omega_for_cmc_data(settings, bryant):
    eps, r = bryant.eps, bryant.a
    derived = derive(bryant, settings)
    frame = build_frame_field(derived, settings, base=cmc_omega(0j, eps, r))
    result = recover_Omega(derived.data, frame, settings)
    g = bryant.grid.nodes
    np.testing.assert_allclose(result.Omega, cmc_omega(g, eps, r), atol=1e-6)
    np.testing.assert_allclose(result.Omega[bryant.grid.base_index], np.diag([-eps, 1.0]) / r, atol=1e-12)
    np.testing.assert_allclose(-det2(result.Omega).real, eps / r**2, atol=1e-6)
    assert result.pde_residual <= settings.tolerances.tol_pde
    assert result.mixed_partials_residual <= settings.tolerances.tol_pde


def test_second_order_equation_minimal(settings, enneper):
    derived = derive(enneper, settings)
    frame = build_frame_field(derived, settings)
    report = second_order_check(derived.data, frame.f, frame.F, frame.grid, settings)
    assert report.ode_residual <= 1e-10
    assert report.wronskian_residual <= 1e-10


def test_second_order_equation_cmc(settings):
    data = make_data("z", a=1.0, b=1.0)
    derived = derive(data, settings)
    frame = build_frame_field(derived, settings)
    report = second_order_check(derived.data, frame.f, frame.F, frame.grid, settings)
    assert report.ode_residual <= settings.tolerances.tol_ode
    assert report.wronskian_residual <= settings.tolerances.tol_wronskian
