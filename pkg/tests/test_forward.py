import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from taperscat.forward import (MAX_CONDITION, ExteriorDomainError, ForwardSolverError, NystromSolver,
                               boundary_traces, eval_scattered, fundamental_matrix, greens_rep_eval,
                               mie_series_reference, solve_density)
from taperscat.geometry import GeometryError, contains, sample_nodes, shape_registry
from taperscat.incident import PlaneWave, TaperedWave, eval_point_source
from taperscat.validation import RESONANT_K, mie_error, receivers_on_circle

CIRCLE = shape_registry("circle")
KITE = shape_registry("kite")


@pytest.fixture(scope="module")
def circle25():
    return NystromSolver(CIRCLE, 25.0, 512)


def test_mie_example_single_point():
    sol = solve_density(CIRCLE, PlaneWave(5.0, (1.0, 0.0)), 5.0, 128)
    ref = mie_series_reference(1.0, 5.0, (1.0, 0.0), np.array([2.0, 0.0]))
    assert abs(eval_scattered(sol, np.array([2.0, 0.0])) - ref) <= 1e-8 * abs(ref)


def test_mie_sixteen_points(circle25):
    d = (0.6, -0.8)
    x = np.random.default_rng(1).uniform(-4, 4, (40, 2))
    x = x[np.hypot(x[:, 0], x[:, 1]) > 1.5][:16]
    assert len(x) == 16
    u = eval_scattered(circle25.solve(PlaneWave(25.0, d)), x)
    ref = mie_series_reference(1.0, 25.0, d, x)
    assert np.max(np.abs(u - ref)) <= 1e-8 * np.max(np.abs(ref))


def test_boundary_condition_off_nodes(circle25):
    pw = PlaneWave(25.0, (1.0, 0.0))
    sol = circle25.solve(pw)
    tr = boundary_traces(sol, upsample=4, neumann=False)
    off = np.arange(len(tr.dirichlet)) % 4 != 0
    assert off.sum() == 3 * 512
    ui = pw(tr.nodes.position[off])
    assert np.max(np.abs(tr.dirichlet[off] + ui)) <= 1e-6 * np.max(np.abs(ui))


def test_kite_tapered_self_convergence():
    wave = TaperedWave.from_angle(25.0, 0.01, 0.9 * math.pi)
    x = receivers_on_circle(5.0, 64)
    coarse = eval_scattered(solve_density(KITE, wave, 25.0, 512), x)
    fine = eval_scattered(solve_density(KITE, wave, 25.0, 1024), x)
    assert np.linalg.norm(coarse - fine) <= 1e-7 * np.linalg.norm(fine)


@pytest.mark.parametrize("k,n", [(5.0, 32), (10.0, 32), (15.0, 64), (20.0, 64), (25.0, 128)])
def test_spectral_convergence(k, n):
    assert mie_error(k, 2 * n) <= 1e-2 * mie_error(k, n)


def test_multiple_bodies_reproduce_interior_source():
    # u^i = -Phi(., y0) with y0 inside one body has the exact scattered field
    # Phi(., y0) for any collection of sound-soft bodies
    curves = shape_registry("multi")
    y0 = np.array([-2.0, 2.1])
    assert contains(curves[0], y0)
    k = 6.0
    sol = NystromSolver(curves, k, 256).solve(lambda x: -eval_point_source(k, y0, x))
    x = receivers_on_circle(10.0, 32)
    ref = eval_point_source(k, y0, x)
    assert np.max(np.abs(eval_scattered(sol, x) - ref)) <= 1e-8 * np.max(np.abs(ref))


def test_interior_points_rejected(circle25):
    sol = circle25.solve(PlaneWave(25.0, (1.0, 0.0)))
    rng = np.random.default_rng(7)
    r = np.sqrt(rng.uniform(0, 0.999, 100))
    a = rng.uniform(0, 2 * np.pi, 100)
    pts = np.stack([r * np.cos(a), r * np.sin(a)], -1)
    for p in pts:
        with pytest.raises(ExteriorDomainError):
            eval_scattered(sol, p)
    with pytest.raises(ExteriorDomainError):
        eval_scattered(sol, np.array([1.0, 0.0]))


def test_kernel_reciprocity():
    nodes = sample_nodes(KITE[0], 128)
    phi = fundamental_matrix(nodes, 25.0)
    assert np.max(np.abs(phi - phi.T)) <= 1e-13


def test_radiation_decay(circle25):
    sol = circle25.solve(PlaneWave(25.0, (0.6, 0.8)))
    xhat = np.array([math.cos(0.4), math.sin(0.4)])
    near = abs(eval_scattered(sol, 50 * xhat)) * math.sqrt(50)
    far = abs(eval_scattered(sol, 200 * xhat)) * math.sqrt(200)
    assert abs(near / far - 1) < 0.02


def test_linearity(circle25):
    pw = PlaneWave(25.0, (0.6, 0.8))
    c = 2.5 - 1.5j
    a = circle25.solve(pw)
    b = circle25.solve(lambda x: c * pw(x))
    assert np.allclose(b.density, c * a.density, rtol=1e-13, atol=0)
    x = np.array([[3.0, 0.5], [-2.0, 2.0]])
    assert np.allclose(eval_scattered(b, x), c * eval_scattered(a, x), rtol=1e-12, atol=0)


def test_resolve_is_bit_identical():
    wave = TaperedWave.from_angle(25.0, 0.01, 2.0)
    a = solve_density(KITE, wave, 25.0, 256)
    b = solve_density(KITE, wave, 25.0, 256)
    assert a.density.tobytes() == b.density.tobytes()


@pytest.mark.parametrize("n", [31, 30, 16, 0])
def test_bad_node_count(n):
    with pytest.raises(GeometryError):
        NystromSolver(CIRCLE, 5.0, n)


def test_nonpositive_wavenumber():
    with pytest.raises(ValueError):
        NystromSolver(CIRCLE, 0.0, 64)


def test_ill_conditioned_system_reported():
    # the pure double-layer equation is singular at an interior eigenvalue
    with pytest.raises(ForwardSolverError):
        NystromSolver(CIRCLE, RESONANT_K, 128, eta=0.0)
    assert NystromSolver(CIRCLE, RESONANT_K, 128).condition < MAX_CONDITION


def test_mie_boundary_limit():
    d = (0.6, 0.8)
    a = np.linspace(0, 2 * np.pi, 13)
    x = (1 + 1e-10) * np.stack([np.cos(a), np.sin(a)], -1)
    ui = PlaneWave(25.0, d)(x)
    assert np.max(np.abs(mie_series_reference(1.0, 25.0, d, x) + ui)) <= 1e-6


@given(theta=st.floats(0, 2 * np.pi), r=st.floats(1.1, 6.0), phi=st.floats(0, 2 * np.pi))
def test_mie_mirror_symmetry(theta, r, phi):
    d = np.array([math.cos(theta), math.sin(theta)])
    x = r * np.array([math.cos(phi), math.sin(phi)])
    mirror = 2 * (x @ d) * d - x
    u1 = mie_series_reference(1.0, 10.0, d, x)
    u2 = mie_series_reference(1.0, 10.0, d, mirror)
    assert abs(u1 - u2) <= 1e-11 * max(1.0, abs(u1))


def test_mie_truncation_stability():
    x = receivers_on_circle(2.0, 16)
    n0 = math.ceil(25 + 12 + 4 * 25 ** (1 / 3))
    a = mie_series_reference(1.0, 25.0, (1.0, 0.0), x, N=n0)
    b = mie_series_reference(1.0, 25.0, (1.0, 0.0), x, N=n0 + 8)
    assert np.max(np.abs(a - b)) <= 1e-12


def test_mie_domain_errors():
    with pytest.raises(ExteriorDomainError):
        mie_series_reference(1.0, 5.0, (1.0, 0.0), np.array([0.5, 0.5]))
    with pytest.raises(ValueError):
        mie_series_reference(1.0, 25.0, (1.0, 0.0), np.array([2.0, 0.0]), N=10)


def test_green_representation_full_boundary(circle25):
    wave = TaperedWave.from_angle(25.0, 0.01, 0.9 * math.pi)
    sol = circle25.solve(wave)
    x = receivers_on_circle(5.0, 16)
    direct = eval_scattered(sol, x)
    rep = greens_rep_eval(sol, x)
    assert np.linalg.norm(rep - direct) <= 1e-6 * np.linalg.norm(direct)


def test_zero_density_zero_field(circle25):
    sol = circle25.solve(lambda x: np.zeros(len(x), complex))
    x = receivers_on_circle(3.0, 8)
    assert np.all(sol.density == 0)
    assert np.all(eval_scattered(sol, x) == 0)
    assert np.all(greens_rep_eval(sol, x) == 0)


def test_traces_need_single_body():
    sol = NystromSolver(shape_registry("multi"), 4.0, 64).solve(PlaneWave(4.0, (1.0, 0.0)))
    with pytest.raises(NotImplementedError):
        boundary_traces(sol)


def test_projected_and_sampled_rhs_agree_for_resolved_beam():
    # a wide beam is band-limited on the nodes, so both right-hand sides coincide
    wave = TaperedWave.from_angle(5.0, 2.0, 2.5)
    solver = NystromSolver(CIRCLE, 5.0, 128)
    a = solver.boundary_data(wave, "project")
    b = solver.boundary_data(wave, "sample")
    assert np.max(np.abs(a - b)) <= 1e-10


def test_concurrent_solves_match_serial():
    from concurrent.futures import ThreadPoolExecutor

    solver = NystromSolver(KITE, 10.0, 256)
    waves = [PlaneWave(10.0, (math.cos(a), math.sin(a))) for a in np.linspace(0, 6, 24)]
    serial = [solver.solve(w).density for w in waves]
    with ThreadPoolExecutor(max_workers=6) as pool:
        parallel = [s.density for s in pool.map(solver.solve, waves)]
    assert all(a.tobytes() == b.tobytes() for a, b in zip(serial, parallel))
