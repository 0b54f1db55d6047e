import numpy as np
import pytest

from app.core.errors import CommonFactor, InvalidData
from app.geometry.classifier import (
    ParallelKind,
    RationalData,
    RejectReason,
    ScreenKind,
    completeness_screen,
    ftc_classify,
    mobius_transform,
    parallel_H_classify,
)
from app.geometry.polynomials import PolyC
from app.geometry.weierstrass import build_f
from tests.conftest import make_data


def rational(P1, P2=(1,), W=(1,), eps=-1, a=0.0, b=0.0, c=0j):
    return RationalData(PolyC(P1), PolyC(P2), PolyC(W), eps, a, b, c)


def test_enneper_is_admissible():
    verdict = ftc_classify(rational((0, 1)))
    assert verdict.admissible
    assert verdict.label == "AdmissibleFTC"
    assert verdict.A == pytest.approx(1)
    assert verdict.f_degree == 0
    assert not verdict.normalization.applied


def test_pole_at_origin_is_normalized():
    verdict = ftc_classify(rational((1,), (0, 1), (0, 0, 1)))
    assert verdict.admissible
    assert verdict.normalization.applied


@pytest.mark.parametrize(
    "rd, reason",
    [
        (dict(P1=(2,)), RejectReason.CONSTANT_G),
        (dict(P1=(0, 1), eps=1), RejectReason.POSITIVE_EPSILON),
        (dict(P1=(0, 1), W=(0, 1)), RejectReason.OMEGA_FORM),
        (dict(P1=(0, 1), P2=(1, 1), W=(1,)), RejectReason.OMEGA_FORM),
        (dict(P1=(0, 1), c=0.1 + 0j), RejectReason.DEGREE_OBSTRUCTION),
        (dict(P1=(0, 1), a=0.1), RejectReason.DEGREE_OBSTRUCTION),
    ],
)
def test_rejections(rd, reason):
    verdict = ftc_classify(rational(**rd))
    assert not verdict.admissible
    assert verdict.reason == reason
    assert verdict.label == f"Reject({reason.value})"


def test_degree_obstruction_names_its_cause():
    assert ftc_classify(rational((0, 1), c=0.1 + 0j)).cause == "c"
    verdict = ftc_classify(rational((0, 1), a=0.1))
    assert verdict.cause == "a+eps*b"
    assert verdict.f_degree == 2
    assert verdict.omega_dg_degree == 0


def test_rational_data_validation():
    with pytest.raises(InvalidData):
        rational((0, 1), eps=0)
    with pytest.raises(InvalidData):
        rational((0, 1), W=(0,))
    with pytest.raises(CommonFactor):
        rational((-1, 1), (-1, 0, 1))


def test_from_weierstrass():
    rd = RationalData.from_weierstrass(make_data("1/(z - 2)", w="(z - 2)^2"))
    assert ftc_classify(rd).admissible
    with pytest.raises(InvalidData):
        RationalData.from_weierstrass(make_data("exp(z)"))


def random_rotation(rng):
    v = rng.normal(size=4)
    v /= np.linalg.norm(v)
    return complex(v[0], v[1]), complex(v[2], v[3]), float(rng.uniform(0, 2 * np.pi))


@pytest.mark.parametrize("seed", range(20))
def test_verdict_is_mobius_invariant(seed):
    tau, gamma, beta = random_rotation(np.random.default_rng(seed))
    admissible = rational((0, 1))
    assert ftc_classify(mobius_transform(admissible, tau, gamma, beta)).admissible
    for rejected in (rational((0, 1), c=0.1 + 0j), rational((0, 1), a=0.1)):
        moved = mobius_transform(rejected, tau, gamma, beta)
        assert ftc_classify(moved).reason == RejectReason.DEGREE_OBSTRUCTION


@pytest.mark.parametrize("seed", range(5))
def test_mobius_keeps_df_up_to_phase(seed):
    rng = np.random.default_rng(100 + seed)
    tau, gamma, beta = random_rotation(rng)
    rd = rational((0.2, 1, 0.3j), (1, -0.1j), W=(1, -0.2j, -0.01), a=0.3, b=-0.1, c=0.2 - 0.1j)
    moved = mobius_transform(rd, tau, gamma, beta)
    z = np.array([0.1 + 0.2j, -0.3 + 0.05j, 0.25 - 0.4j])

    def df(data, g):
        return (data.c + data.k * g + data.eps * np.conj(data.c) * g**2) * data.W(z)

    g = rd.P1(z) / rd.P2(z)
    g_moved = moved.P1(z) / moved.P2(z)
    np.testing.assert_allclose(g_moved, (tau * g - np.conj(gamma)) / (gamma * g + np.conj(tau)))
    np.testing.assert_allclose(df(moved, g_moved), np.exp(1j * beta) * df(rd, g), atol=1e-9)
    assert moved.b == rd.b


def test_mobius_needs_unit_determinant():
    with pytest.raises(InvalidData):
        mobius_transform(rational((0, 1)), 2.0, 0.0)


def test_completeness_screen():
    flat = completeness_screen(make_data("3"))
    assert flat.kind == ScreenKind.DEGENERATE_FLAT
    assert not flat.constructible

    warned = completeness_screen(make_data("z", eps=1), assert_complete=True)
    assert warned.kind == ScreenKind.COMPLETENESS_WARNING
    assert warned.constructible
    assert "impossible" in warned.message

    assert completeness_screen(make_data("z")).kind == ScreenKind.NONE


@pytest.mark.parametrize(
    "kwargs, kind, space",
    [
        (dict(eps=-1), ParallelKind.ZERO_MEAN_CURVATURE, "R3"),
        (dict(eps=1), ParallelKind.ZERO_MEAN_CURVATURE, "L3"),
        (dict(eps=-1, a=1.0, b=1.0), ParallelKind.HYPERQUADRIC, "H3"),
        (dict(eps=1, a=1.0, b=-1.0), ParallelKind.HYPERQUADRIC, "S3_1"),
        (dict(eps=-1, a=2.0), ParallelKind.NON_PARALLEL, None),
    ],
)
def test_parallel_mean_curvature(settings, kwargs, kind, space):
    data, f = build_f(make_data("z", **kwargs), settings)
    verdict = parallel_H_classify(f, data, settings)
    assert verdict.kind == kind
    assert verdict.hyperquadric == space
    assert verdict.parallel == (kind != ParallelKind.NON_PARALLEL)
