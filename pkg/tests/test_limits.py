import numpy as np
import pytest

from app.core.config import Settings, Tolerances
from app.core.errors import FVanishes, GNotZeroAtBase, InvalidData
from app.geometry.frames import build_frame_field, integrate_F
from app.geometry.limits import (
    LimitKind,
    bryant_null_curve,
    c_zero_family,
    cmc_omega,
    deformation_family,
    detect_limit_case,
    integral_frame,
    neville_at_zero,
    procrustes_residual,
    weierstrass_closed_form,
)
from app.geometry.lorentz import det2, to_components
from app.geometry.weierstrass import derive
from tests.conftest import make_data


@pytest.mark.parametrize(
    "eps, a, b, c, expected",
    [
        (-1, 0, 0, 0, LimitKind.MINIMAL_R3),
        (1, 0, 0, 0, LimitKind.MAXIMAL_L3),
        (-1, 2.0, 2.0, 0, LimitKind.CMC_H3),
        (1, 0.5, -0.5, 0, LimitKind.CMC_S3),
        (-1, 1.0, 0.5, 0, None),
        (-1, 1.0, 1.0, 0.1j, None),
    ],
)
def test_detect_limit_case(eps, a, b, c, expected):
    case = detect_limit_case(eps, a, b, c)
    assert (case.kind if case else None) == expected
    if expected in (LimitKind.CMC_H3, LimitKind.CMC_S3):
        assert case.r == a


@pytest.mark.parametrize("eps", [-1, 1])
def test_cmc_omega_lies_on_the_quadric(eps):
    g = np.array([0, 0.3 + 0.1j, -0.5j])
    omega = cmc_omega(g, eps, 2.0)
    np.testing.assert_allclose(-det2(omega), eps / 4)
    np.testing.assert_allclose(omega, np.conj(np.swapaxes(omega, -1, -2)))


def test_closed_form_enneper(settings, enneper, maximal_enneper):
    grid = enneper.grid
    idx = grid.nearest_index(0.5 + 0j)
    minimal = weierstrass_closed_form(enneper.g, enneper.w, -1, grid, settings=settings)
    np.testing.assert_allclose(minimal.components[idx], [0, 0.458333333333, 0, -0.25], atol=1e-10)

    maximal = weierstrass_closed_form(maximal_enneper.g, maximal_enneper.w, 1, grid, settings=settings)
    np.testing.assert_allclose(maximal.components[..., 3], 0, atol=1e-14)
    np.testing.assert_allclose(maximal.components[..., 0], np.real(grid.nodes**2), atol=1e-12)


@pytest.mark.parametrize("eps", [-1, 1])
def test_pipeline_matches_closed_form(settings, eps):
    data = make_data("z", eps=eps, n=65)
    frame = build_frame_field(derive(data, settings), settings)
    oracle = weierstrass_closed_form(data.g, data.w, eps, data.grid, settings=settings)
    error = np.abs(to_components(frame.psi).real - oracle.components).max()
    assert error <= settings.tolerances.tol_oracle


def test_pipeline_converges_at_fourth_order(tmp_path):
    settings = Settings(
        data_dir=tmp_path,
        database_path=str(tmp_path / "jobs.json"),
        min_substeps=1,
        substep_norm_target=1e3,
        tolerances=Tolerances().merged({"tol_loop": 1e-4, "tol_path": 1e-3}),
    )
    errors = []
    for n in (33, 65):
        data = make_data("exp(z) - 1", n=n)
        frame = build_frame_field(derive(data, settings), settings)
        oracle = weierstrass_closed_form(data.g, data.w, -1, data.grid, settings=settings)
        errors.append(np.abs(to_components(frame.psi).real - oracle.components).max())
    assert errors[0] > 1e-12
    assert errors[0] / errors[1] >= 12


def test_closed_form_tracks_the_frame_normalization(settings):
    data = make_data("exp(z)", f0=2 - 1j)
    derived = derive(data, settings)
    frame = build_frame_field(derived, settings)
    plain = weierstrass_closed_form(data.g, data.w, -1, data.grid, settings=settings)
    normalized = weierstrass_closed_form(data.g, data.w, -1, data.grid, settings=settings, g0=1, f0=2 - 1j)
    psi = to_components(frame.psi).real
    assert np.abs(psi - normalized.components).max() <= settings.tolerances.tol_oracle
    assert np.abs(psi - plain.components).max() > 1e-2


def test_bryant_null_curve(settings, bryant):
    curve = bryant_null_curve(bryant.g, bryant.w, bryant.eps, bryant.a, bryant.grid, settings)
    for check in curve.checks:
        assert check.passed, check
    np.testing.assert_allclose(det2(curve.B), 1, atol=1e-9)


def test_bryant_null_curve_needs_positive_r(settings, enneper):
    with pytest.raises(InvalidData):
        bryant_null_curve(enneper.g, enneper.w, -1, 0.0, enneper.grid, settings)


def test_neville_recovers_polynomial_limit():
    r = [0.3, 0.2, 0.1]
    samples = [np.array([1 + 2 * x + 3 * x**2, -x]) for x in r]
    np.testing.assert_allclose(neville_at_zero(r, samples), [1, 0], atol=1e-14)


def test_procrustes_ignores_rigid_motions():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(5, 4, 4))
    theta = 0.7
    rotation = np.array([[np.cos(theta), -np.sin(theta), 0], [np.sin(theta), np.cos(theta), 0], [0, 0, -1]])
    Y = X.copy()
    Y[..., 1:] = X[..., 1:] @ rotation + np.array([1.0, -2.0, 0.5])
    residual, _ = procrustes_residual(X, Y, (2, 1))
    assert residual < 1e-12
    Y[..., 0] += X[..., 1]
    assert procrustes_residual(X, Y, (2, 1))[0] > 0.1


def test_deformation_to_the_minimal_surface(settings, enneper):
    family = deformation_family(enneper.g, enneper.w, -1, enneper.grid, settings=settings)
    assert family.slope == pytest.approx(1, abs=0.1)
    assert list(family.sup_difference) == sorted(family.sup_difference, reverse=True)
    for check in family.checks:
        assert check.passed, check
    rows = family.rows()
    assert [row[0] for row in rows] == list(family.r_values)


def test_deformation_needs_g_zero_at_base(settings):
    data = make_data("z + 1")
    with pytest.raises(GNotZeroAtBase):
        deformation_family(data.g, data.w, -1, data.grid, settings=settings)
    enneper = make_data("z")
    with pytest.raises(InvalidData):
        deformation_family(enneper.g, enneper.w, -1, enneper.grid, r_list=[0.1], settings=settings)


def test_c_zero_family_vanishing_f(settings):
    data = make_data("z", a=2.0, n=13, half=1.5)
    with pytest.raises(FVanishes):
        c_zero_family(data.g, data.w, -1, 2.0, 0.0, 1, data.grid, settings)


def test_c_zero_family_with_zero_f0_and_no_growth(settings, enneper):
    with pytest.raises(FVanishes) as info:
        c_zero_family(enneper.g, enneper.w, -1, 0.0, 0.0, 0, enneper.grid, settings)
    assert info.value.details["f0"] == 0


def test_c_zero_family_parallel_case(settings, enneper):
    family = c_zero_family(enneper.g, enneper.w, -1, 1.0, 1.0, 2.0, enneper.grid, settings)
    assert family.parallel_H
    np.testing.assert_allclose(family.f.values, 2.0)


def test_integral_frame(settings):
    data = make_data("z", a=0.0, b=-1.0)
    derived = derive(data, settings)
    F = integral_frame(derived.data, derived.f, settings)
    z = data.grid.nodes
    np.testing.assert_allclose(F[..., 1, 0], np.sqrt(2) * np.arctan(z / np.sqrt(2)), atol=1e-10)
    np.testing.assert_allclose(F, integrate_F(derived.data, derived.f, settings), atol=1e-10)
    with pytest.raises(InvalidData):
        integral_frame(make_data("z", a=1.0, b=1.0), derived.f, settings)
