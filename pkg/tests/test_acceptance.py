"""Acceptance criteria at their pinned tolerances, one printed line each."""
import itertools
import time

import numpy as np
import pytest
import scipy.linalg as sla
import sympy as sp

from conftest import record
from oracles import X1, X2, align, gronwall_instance, two_cell_step
from oseen_ale.analysis import (
    calibrate_c_prime,
    certify_gcl_stability,
    certify_nogcl_stability,
    gronwall_envelope,
    map_dt_condition,
    max_gcl_residual,
    nogcl_ratio,
    temporal_convergence,
)
from oseen_ale.fem import FeField, field_norms, interpolate, taylor_hood
from oseen_ale.fields import from_sympy
from oseen_ale.mesh_motion import (
    STANDARD_MOTIONS,
    build_discrete_map,
    make_motion,
    transport_residual,
    uniform_grid,
    unit_square,
)
from oseen_ale.problems import make_problem
from oseen_ale.timestepper import SchemeConfig, run_simulation, step_gcl
from oseen_ale.vms import build_projector, fine_scale_matrix, scale_split

pytestmark = pytest.mark.acceptance

NX = 8


def simulate(motion, mu, mu_T, problem, dt, variant, T=1.0, nx=NX):
    p = make_problem(problem, mu=mu, mu_T=mu_T, nx=nx, ny=nx, motion=motion, final_time=T)
    cfg = SchemeConfig(mu=mu, mu_T=mu_T, dt=dt, n_steps=int(round(T / dt)), variant=variant)
    return p, run_simulation(cfg, p.mesh, p.motion, p.ustar, p.f, p.u0, p.boundary)


def test_c1_gcl_midpoint_residual():
    worst = 0.0
    for name in STANDARD_MOTIONS:
        amap = build_discrete_map(unit_square(NX, NX), make_motion(name), uniform_grid(0.1, 10))
        worst = max(worst, max_gcl_residual(amap, samples=50, seed=1))
    amap = build_discrete_map(unit_square(NX, NX), make_motion("expansion", alpha=0.5), uniform_grid(0.1, 10))
    mid = max_gcl_residual(amap, samples=50, seed=1)
    left = max_gcl_residual(amap, samples=50, seed=1, time_rule_name="left")
    ok = worst <= 1e-12 and left > 1e-12 and left > mid
    assert record("C1 GCL midpoint residual", ok,
                  f"max midpoint {worst:.2e} <= 1e-12; left rule on expansion {left:.2e} > {mid:.2e}")


def test_c2_gcl_certificate_sweep():
    failures, monotone_bad, worst = [], [], np.inf
    for name, mu, mu_T, problem in itertools.product(STANDARD_MOTIONS, (0.1, 0.01), (0.0, 0.01),
                                                     ("decay", "forced")):
        _, tr = simulate(make_motion(name), mu, mu_T, problem, 0.1, "gcl")
        cert = certify_gcl_stability(tr, mu, mu_T)
        worst = min(worst, cert.slack / max(cert.rhs, 1.0))
        if not cert.holds:
            failures.append((name, mu, mu_T, problem))
        if problem == "decay":
            k = np.array([r.kinetic for r in tr.reports])
            if np.any(np.diff(k) > 1e-14 * k[0]):
                monotone_bad.append((name, mu, mu_T))
    ok = not failures and not monotone_bad
    assert record("C2 GCL certificate sweep", ok,
                  f"32 runs, min relative slack {worst:.3g} (>= -1e-10); failures {failures}; "
                  f"non-monotone f=0 runs {monotone_bad}")


def test_c3_endpoint_certificate_calibrated():
    calib = []
    for name, mu, mu_T, problem in itertools.product(STANDARD_MOTIONS, (0.1, 0.01), (0.0, 0.01),
                                                     ("decay", "forced")):
        _, tr = simulate(make_motion(name), mu, mu_T, problem, 0.1, "endpoint")
        calib.append((tr, (mu, mu_T)))
    C_prime = calibrate_c_prime([t for t, _ in calib], [p for _, p in calib])

    verify_motions = [("translation", dict(vx=0.5, vy=0.5)), ("expansion", dict(alpha=0.3)),
                      ("shear", dict(gamma=1.0)), ("pulsating", {})]
    checked, failures, excluded, worst = 0, [], [], 0.0
    for (name, kw), mu, mu_T, problem in itertools.product(verify_motions, (0.05, 0.02), (0.0, 0.02),
                                                           ("decay", "forced")):
        p, tr = simulate(make_motion(name, **kw), mu, mu_T, problem, 0.05, "endpoint")
        cond = map_dt_condition(tr.ale_map, p.ustar)
        if not cond.admissible:
            excluded.append((name, mu, mu_T, problem, cond.lhs))
            continue
        cert = certify_nogcl_stability(tr, mu, mu_T, C_prime, cond)
        worst = max(worst, nogcl_ratio(tr, mu, mu_T))
        checked += 1
        if not cert.holds:
            failures.append((name, mu, mu_T, problem))

    # one huge step on a fast expansion with a large condition constant
    p, tr = simulate(make_motion("expansion", alpha=1.0), 0.1, 0.0, "decay", 2.0, "endpoint", T=2.0, nx=4)
    cond = map_dt_condition(tr.ale_map, p.ustar, C=50.0)
    excluded.append(("expansion alpha=1 dt=2 C=50", cond.lhs))
    ok = checked > 0 and not failures and not cond.admissible
    assert record("C3 endpoint certificate", ok,
                  f"C'={C_prime:.4f} frozen from {len(calib)} calibration runs; {checked} disjoint "
                  f"admissible runs verified, max ratio {worst:.4f}; failures {failures}; "
                  f"excluded inadmissible {excluded}")


def test_c4_manufactured_temporal_rate():
    problem = make_problem("manufactured", mu=0.05, mu_T=0.01, nx=NX, ny=NX, final_time=1.0)
    start = time.perf_counter()
    table = temporal_convergence(problem, [1 / 10, 1 / 20, 1 / 40, 1 / 80])
    elapsed = time.perf_counter() - start
    rate = table.finest_rate
    ok = rate is not None and 0.85 <= rate <= 1.15 and elapsed <= 180
    rates = ", ".join(f"{r.rate:.3f}" for r in table.rows[1:])
    assert record("C4 manufactured temporal rate", ok,
                  f"L2 rates {rates}; finest {rate:.3f} in [0.85, 1.15]; runtime {elapsed:.0f}s <= 180s")


def test_c5_gronwall_random_instances():
    rng = np.random.default_rng(2024)
    bad, sigma_needed = 0, 0
    for _ in range(1000):
        n = int(rng.integers(1, 60))
        dt = float(rng.uniform(1e-3, 0.5))
        A, gam, B, C, f0 = gronwall_instance(rng, n, dt)
        bound, valid = gronwall_envelope(dt, gam, B, C, f0)
        lhs = A + dt * np.cumsum(B)
        bad += int(not valid or np.any(lhs > bound * (1 + 1e-12)))
        no_sigma = np.exp(dt * np.cumsum(gam)) * (dt * np.cumsum(C) + f0)
        sigma_needed += int(np.any(lhs > no_sigma))
    assert record("C5 Gronwall conclusion", bad == 0,
                  f"1000 instances, {bad} violations; {sigma_needed} would fail without the sigma weight")


def test_c6_componentwise_norm_inequality():
    amap = build_discrete_map(unit_square(NX, NX), make_motion("shear"), [0.0, 1.0])
    V, _ = taylor_hood(amap.reference)
    rng = np.random.default_rng(6)
    worst = 0.0
    for _ in range(100):
        n = field_norms(FeField(V, rng.standard_normal(V.num_dofs)), amap, 0.5)
        worst = max(worst, n["l12"] / n["l2"])
    phi = lambda x: np.sin(3 * x[:, 0]) + x[:, 1] ** 2  # noqa: E731
    eq = field_norms(interpolate(V, amap, 0.5, lambda x: np.column_stack([phi(x), phi(x)])), amap, 0.5)
    ratio = eq["l12"] / eq["l2"]
    ok = worst <= np.sqrt(2) * (1 + 1e-14) and ratio >= 1.39
    assert record("C6 L12 <= sqrt2 L2", ok,
                  f"max ratio over 100 random fields {worst:.6f} <= {np.sqrt(2):.6f}; "
                  f"equal-component field {ratio:.6f} >= 1.39")


def test_c7_two_cell_oracle():
    t = sp.Symbol("t")
    ustar = [1 + X2 ** 2 + 0 * t, X1 + 0 * t]
    f = [(1 + t) * X1 * X2, 1 - X1 ** 2 * t]
    half = sp.Rational(1, 2)
    keys, expected = two_cell_step(scale=lambda s: 1 + half * s, mu=sp.Rational(1, 10),
                                   mu_T=sp.Rational(1, 20), dt=half, t0=0, t_op=half / 2,
                                   ustar=ustar, f=f, u0=[X2, X1 * X2])
    mesh = unit_square(1, 1)
    V, _ = taylor_hood(mesh)
    amap = build_discrete_map(mesh, make_motion("expansion", alpha=0.5), [0.0, 0.5])
    cfg = SchemeConfig(mu=0.1, mu_T=0.05, dt=0.5, n_steps=1, dirichlet_tags=(1,), quadrature_order=6)
    rep = step_gcl(lambda x: np.column_stack([x[:, 1], x[:, 0] * x[:, 1]]), cfg, amap,
                   from_sympy(ustar), from_sympy(f))
    idx = align(keys, V.node_positions(mesh.nodes))
    c = rep.velocity.coefficients
    got = np.concatenate([c[idx], c[V.num_scalar + idx]])
    rel = np.abs(got - expected).max() / np.abs(expected).max()
    assert record("C7 two-cell oracle", rel <= 1e-10, f"relative difference {rel:.2e} <= 1e-10")


def test_c8_vms_split_and_psd():
    amap = build_discrete_map(unit_square(6, 6), make_motion("pulsating"), [0.0, 1.0])
    V, _ = taylor_hood(amap.reference)
    P = build_projector(V, amap, 0.3)
    rng = np.random.default_rng(8)
    worst = 0.0
    for _ in range(100):
        coarse, fine = scale_split(FeField(V, rng.standard_normal(V.num_dofs)), P)
        total = P.inner(coarse + fine, coarse + fine)
        worst = max(worst, abs(P.inner(coarse, coarse) + P.inner(fine, fine) - total) / total)
    S = fine_scale_matrix(V, P.geo).toarray()
    scale = np.abs(S).max()
    lo = sla.eigvalsh(0.5 * (S + S.T)).min()
    ok = worst <= 1e-10 and lo >= -1e-12 * scale
    assert record("C8 VMS split and PSD", ok,
                  f"max relative split defect {worst:.2e} <= 1e-10; min eigenvalue {lo:.2e} "
                  f">= {-1e-12 * scale:.2e}")


def test_c9_transport_theorem():
    phi = lambda Y: 1.0 + Y[..., 0] * Y[..., 1] ** 2  # noqa: E731
    poly = 0.0
    for name in ("translation", "expansion", "shear", "quadratic"):
        amap = build_discrete_map(unit_square(NX, NX), make_motion(name), uniform_grid(0.25, 4))
        poly = max(poly, max(transport_residual(amap, phi, n) for n in range(4)))
    mo = make_motion("smooth-expansion", amplitude=0.3)
    res = []
    for dt in (0.2, 0.1, 0.05, 0.025):
        amap = build_discrete_map(unit_square(NX, NX), mo, uniform_grid(dt, int(round(0.2 / dt))))
        res.append(transport_residual(amap, phi, 0, "right"))
    rates = np.log2(np.array(res[:-1]) / np.array(res[1:]))
    ok = poly <= 1e-10 and np.all(np.abs(rates - 1) < 0.15)
    assert record("C9 transport theorem", ok,
                  f"polynomial motions max residual {poly:.2e} <= 1e-10; smooth motion decay rates "
                  f"{', '.join(f'{r:.3f}' for r in rates)}")
