import numpy as np
import pytest
import scipy.linalg as sla

from oseen_ale.errors import NegativeViscosity
from oseen_ale.fem import FeField, evaluate, geometry, interpolate, stiffness_matrix, taylor_hood
from oseen_ale.mesh_motion import build_discrete_map, make_motion, unit_square
from oseen_ale.vms import (
    assemble_fine_scale_diffusion,
    build_projector,
    fine_scale_matrix,
    scale_split,
)


@pytest.fixture
def setup():
    amap = build_discrete_map(unit_square(4, 4), make_motion("shear", gamma=0.5), [0.0, 1.0])
    V, _ = taylor_hood(amap.reference)
    return amap, V, build_projector(V, amap, 0.6)


def test_projector_idempotent_and_reproduces_constants(setup, rng):
    _, _, P = setup
    G = rng.standard_normal((P.geo.dx.shape[0], P.geo.dx.shape[1], 2, 2))
    PG = P.apply(G)
    np.testing.assert_allclose(P.apply(PG), PG, atol=1e-12)
    C = np.broadcast_to(rng.standard_normal((PG.shape[0], 1, 2, 2)), PG.shape)
    np.testing.assert_allclose(P.apply(C), C, atol=1e-12)


def test_projector_orthogonality(setup, rng):
    _, _, P = setup
    G = rng.standard_normal((P.geo.dx.shape[0], P.geo.dx.shape[1], 2, 2))
    R = G - P.apply(G)
    C = np.broadcast_to(rng.standard_normal((G.shape[0], 1, 2, 2)), G.shape)
    assert abs(P.inner(R, C)) <= 1e-10 * np.sqrt(P.inner(G, G) * P.inner(C, C))
    assert abs(P.inner(R, P.apply(G))) <= 1e-10 * P.inner(G, G)


def test_p1_field_has_no_fine_part(setup):
    amap, V, P = setup
    u = interpolate(V, amap, 0.6, lambda x: np.column_stack([2 * x[:, 0] - x[:, 1], 3 * x[:, 1]]))
    coarse, fine = scale_split(u, P)
    assert np.abs(fine).max() <= 1e-12
    S = fine_scale_matrix(V, P.geo)
    assert np.abs(S @ u.coefficients).max() <= 1e-12


def test_projection_of_linear_gradient_is_cell_average():
    # one reference cell, u = (x^2, 0): grad u1 = (2x, 0); the cell average of x
    # over the triangle (0,0),(1,0),(0,1) is the centroid value 1/3.
    from oseen_ale.mesh_motion import ReferenceMesh

    mesh = ReferenceMesh([[0, 0], [1, 0], [0, 1]], [[0, 1, 2]], [1, 1, 1])
    amap = build_discrete_map(mesh, make_motion("stationary"), [0.0, 1.0])
    V, _ = taylor_hood(mesh)
    P = build_projector(V, amap, 0.0)
    u = interpolate(V, amap, 0.0, lambda x: np.column_stack([x[:, 0] ** 2, 0 * x[:, 0]]))
    coarse, fine = scale_split(u, P)
    np.testing.assert_allclose(coarse[0, :, 0, 0], 2 / 3, atol=1e-14)
    np.testing.assert_allclose(coarse[0, :, 0, 1], 0.0, atol=1e-14)
    _, g = evaluate(u, P.geo)
    np.testing.assert_allclose(coarse + fine, g, atol=1e-15)


def test_energy_split_and_fine_operator(setup, rng):
    amap, V, P = setup
    S = fine_scale_matrix(V, P.geo)
    A = stiffness_matrix(V, P.geo)
    for _ in range(20):
        u = FeField(V, rng.standard_normal(V.num_dofs))
        coarse, fine = scale_split(u, P)
        total = P.inner(coarse + fine, coarse + fine)
        assert P.inner(coarse, coarse) + P.inner(fine, fine) == pytest.approx(total, rel=1e-10)
        c = u.coefficients
        assert c @ A @ c == pytest.approx(total, rel=1e-10)
        assert c @ S @ c == pytest.approx(P.inner(fine, fine), rel=1e-10)


def test_fine_operator_symmetric_psd(setup):
    _, V, P = setup
    S = fine_scale_matrix(V, P.geo).toarray()
    assert np.abs(S - S.T).max() <= 1e-12 * np.abs(S).max()
    assert sla.eigvalsh(S).min() >= -1e-12 * np.abs(S).max()


def test_fine_scale_diffusion_scaling(setup):
    _, V, P = setup
    assert abs(assemble_fine_scale_diffusion(P, 0.0).operator).max() == 0.0
    S1 = assemble_fine_scale_diffusion(P, 1.0).operator
    S3 = assemble_fine_scale_diffusion(P, 0.03)
    assert S3.mu_T == 0.03
    assert abs(S3.operator - 0.03 * S1).max() <= 1e-15 * abs(S1).max()
    with pytest.raises(NegativeViscosity):
        assemble_fine_scale_diffusion(P, -0.1)


def test_adding_fine_scale_never_decreases_energy(setup, rng):
    _, V, P = setup
    A = stiffness_matrix(V, P.geo)
    S = fine_scale_matrix(V, P.geo)
    for _ in range(10):
        v = rng.standard_normal(V.num_dofs)
        assert v @ (A + S) @ v >= v @ A @ v


def test_consistency_limit_degree_one_coarse_space(setup):
    # P2 gradients are cellwise linear, so a cellwise-P1 coarse space captures them.
    amap, V, _ = setup
    geo = geometry(amap, 0.6)
    S0 = fine_scale_matrix(V, geo, degree=0)
    S1 = fine_scale_matrix(V, geo, degree=1)
    assert abs(S1).max() <= 1e-10 * abs(S0).max()


def test_projector_degree_validated(setup):
    amap, V, _ = setup
    with pytest.raises(ValueError):
        build_projector(V, amap, 0.0, degree=2)
