import numpy as np
import pytest
import sympy as sp

from oseen_ale.fem import FeField, field_norms, interpolate, taylor_hood
from oseen_ale.mesh_motion import build_discrete_map, uniform_grid
from oseen_ale.problems import PROBLEMS, forcing_field, make_problem, manufactured_symbols, stream_bump
from oseen_ale.timestepper import SchemeConfig, steady_state

MU = 0.05


def numeric(mu):
    t, x1, x2 = sp.symbols("t x1 x2")
    u, p, ustar, f = manufactured_symbols(mu)
    lam = lambda e: sp.lambdify((t, x1, x2), e, "numpy")  # noqa: E731
    return lam(u), lam(p), lam(ustar), lam(f)


@pytest.fixture(scope="module")
def points():
    return np.random.default_rng(7).uniform(0.05, 0.95, (40, 2))


def test_manufactured_forcing_matches_finite_differences(points):
    # f = du/dt + (u*.grad) u - 2 mu Lap u + grad p, every derivative by central differences
    u, p, us, f = numeric(MU)
    h, t = 1e-4, 0.3
    U = lambda tt, x, y: np.array(u(tt, x, y), float)  # noqa: E731
    for x, y in points:
        dt_u = (U(t + h, x, y) - U(t - h, x, y)) / (2 * h)
        dx = (U(t, x + h, y) - U(t, x - h, y)) / (2 * h)
        dy = (U(t, x, y + h) - U(t, x, y - h)) / (2 * h)
        H = 1e-3
        lap = (U(t, x + H, y) + U(t, x - H, y) + U(t, x, y + H) + U(t, x, y - H) - 4 * U(t, x, y)) / H ** 2
        gp = np.array([(p(t, x + h, y) - p(t, x - h, y)), (p(t, x, y + h) - p(t, x, y - h))]) / (2 * h)
        a = np.array(us(t, x, y), float)
        fd = dt_u + a[0] * dx + a[1] * dy - 2 * MU * lap + gp
        np.testing.assert_allclose(np.array(f(t, x, y), float), fd, atol=2e-4 * (1 + np.abs(fd).max()))


def test_manufactured_velocity_divergence_free_with_zero_trace(points):
    u, _, us, _ = numeric(MU)
    h = 1e-5
    for x, y in points:
        div = ((u(0.7, x + h, y)[0] - u(0.7, x - h, y)[0]) + (u(0.7, x, y + h)[1] - u(0.7, x, y - h)[1])) / (2 * h)
        assert abs(div) < 1e-7
        np.testing.assert_allclose(us(0.4, x, y), u(0.0, x, y))
    s = np.linspace(0, 1, 11)
    for bx, by in [(s, 0 * s), (s, 1 + 0 * s), (0 * s, s), (1 + 0 * s, s)]:
        assert np.abs(np.array(u(0.5, bx, by), float)).max() < 1e-14


def test_stream_bump_gradient_and_divergence(points):
    b = stream_bump(2.0)
    g = b.gradient(0.0, points)
    h = 1e-6
    for j in range(2):
        e = np.zeros(2)
        e[j] = h
        fd = (b(0.0, points + e) - b(0.0, points - e)) / (2 * h)
        np.testing.assert_allclose(g[:, :, j], fd, atol=1e-6)
    assert np.abs(b.divergence(0.0, points)).max() < 1e-12
    edge = np.array([[0.0, 0.3], [1.0, 0.6], [0.2, 0.0], [0.8, 1.0]])
    assert np.abs(b(0.0, edge)).max() < 1e-14


def test_forcing_field_values():
    x = np.array([[0.5, 0.5], [0.0, 0.0]])
    np.testing.assert_allclose(forcing_field()(1.0, x), [[2.0, 0.0], [0.0, 2.0]], atol=1e-15)


@pytest.mark.parametrize("name", PROBLEMS)
def test_registry_builds(name):
    prob = make_problem(name, mu=MU, mu_T=0.01, nx=3, ny=3, final_time=0.5)
    assert prob.name == name and prob.final_time == 0.5 and prob.mu == MU
    assert (prob.f is None) == (name in ("zero", "decay"))


def test_unknown_problem():
    with pytest.raises(KeyError):
        make_problem("lid-driven")


def test_steady_problem_starts_at_steady_state():
    prob = make_problem("steady", mu=MU, mu_T=0.01, nx=3, ny=3)
    ref = steady_state(SchemeConfig(mu=MU, mu_T=0.01), prob.mesh, prob.ustar, prob.f)
    np.testing.assert_array_equal(prob.u0.coefficients, ref.coefficients)


def test_manufactured_start_close_to_interpolant():
    prob = make_problem("manufactured", mu=MU, mu_T=0.01, nx=8, ny=8)
    V, _ = taylor_hood(prob.mesh)
    amap = build_discrete_map(prob.mesh, prob.motion, uniform_grid(0.1, 1))
    I = interpolate(V, amap, 0.0, lambda x: prob.exact(0.0, x))
    bd = V.component_dofs(V.boundary_nodes())
    np.testing.assert_allclose(prob.u0.coefficients[bd], I.coefficients[bd], atol=1e-14)
    diff = FeField(V, prob.u0.coefficients - I.coefficients, 0.0)
    rel = field_norms(diff, amap, 0.0)["l2"] / field_norms(I, amap, 0.0)["l2"]
    assert rel < 0.05
