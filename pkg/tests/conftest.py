import numpy as np
import pytest

from app.core.config import Settings
from app.geometry.grid import DomainGrid
from app.geometry.parser import parse_expression
from app.geometry.weierstrass import WeierstrassData


def make_data(g, w="1", eps=-1, a=0.0, b=0.0, c=0j, f0=1, n=33, half=0.5, z0=0j):
    grid = DomainGrid.rectangle(-half, half, -half, half, n, z0)
    return WeierstrassData(parse_expression(g), parse_expression(w), eps, grid, a=a, b=b, c=c, f0=f0)


@pytest.fixture
def settings(tmp_path):
    return Settings(
        data_dir=tmp_path,
        database_path=str(tmp_path / "jobs.json"),
        api_port=8765,
        workers=2,
    )


@pytest.fixture
def enneper():
    return make_data("z")


@pytest.fixture
def maximal_enneper():
    return make_data("z", eps=1)


@pytest.fixture(params=[(-1, 0.5), (-1, 1.0), (-1, 2.0), (1, 0.5), (1, 1.0), (1, 2.0)], ids=lambda p: f"eps{p[0]}-r{p[1]}")
def bryant(request):
    eps, r = request.param
    return make_data("z", eps=eps, a=r, b=-eps * r)


def random_admissible(seed):
    """Low-degree data on the unit-width square, eps = -1, with f and g' bounded away from zero"""
    rng = np.random.default_rng(seed)
    alpha = complex(*rng.uniform(-0.3, 0.3, 2))
    beta = complex(*rng.uniform(-0.2, 0.2, 2))
    c = complex(*rng.uniform(-0.15, 0.15, 2))
    a, b = rng.uniform(-0.15, 0.15, 2)
    g = f"z + ({alpha.real!r} + {alpha.imag!r}*i)*z^2"
    w = f"1 + ({beta.real!r} + {beta.imag!r}*i)*z"
    return make_data(g, w, eps=-1, a=float(a), b=float(b), c=c)


@pytest.fixture(params=range(3), ids=lambda s: f"seed{s}")
def admissible(request):
    return random_admissible(request.param)
