import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geoflow import curvature as C
from geoflow.errors import ExtinctError, PositivityLost
from geoflow.flows import einstein as E
from geoflow.flows import hodge as H
from geoflow.flows import warped as W


# Hodge heat flow

def example_one_form(K=4):
    """dx2 + cos(2 pi x1) dx1 on T^2."""
    a = H.FourierForm.zeros(2, 1, K)
    a.set_mode((0, 0), np.array([0, 1], dtype=complex))
    a.set_mode((1, 0), np.array([0.5, 0], dtype=complex))
    a.set_mode((-1, 0), np.array([0.5, 0], dtype=complex))
    return a


def test_fourier_samples_round_trip():
    a = example_one_form()
    M = 16
    x = np.arange(M) / M
    X1, _ = np.meshgrid(x, x, indexing="ij")
    vals = a.evaluate(M)
    assert np.abs(vals[..., 0] - np.cos(2 * np.pi * X1)).max() < 1e-14
    assert np.abs(vals[..., 1] - 1).max() < 1e-14
    b = H.FourierForm.from_samples(vals, 2, 4)
    assert np.abs(b.coeffs - a.coeffs).max() < 1e-14
    assert a.reality_residual() == 0 and a.antisymmetry_residual() == 0


def test_mode_decay_and_limit():
    a = example_one_form()
    for t in (0.01, 0.1, 0.5):
        out = H.hodge_heat_step(a, t)
        factor = out.mode((1, 0))[0] / a.mode((1, 0))[0]
        assert abs(factor - math.exp(-4 * math.pi ** 2 * t)) < 1e-10
        assert np.array_equal(out.mode((0, 0)), a.mode((0, 0)))
    lim = H.hodge_heat_limit(a)
    assert np.array_equal(lim.mode((0, 0)), [0, 1])
    assert np.count_nonzero(lim.coeffs) == 1
    with pytest.raises(ValueError):
        H.hodge_heat_step(a, -1.0)


def test_harmonic_fixed_point():
    a = H.FourierForm.zeros(3, 2, 3)
    c = np.zeros((3, 3), dtype=complex)
    c[0, 1], c[1, 0] = 2.0, -2.0
    a.set_mode((0, 0, 0), c)
    for dt in (0.0, 0.3, 10.0):
        assert np.array_equal(H.hodge_heat_step(a, dt).coeffs, a.coeffs)


def test_l2_monotone_random_steps():
    rng = np.random.default_rng(1)
    a = H.random_real_form(2, 1, 6, rng)
    norms = [H.l2_norm(a)]
    for _ in range(100):
        a = H.hodge_heat_step(a, float(rng.uniform(0, 1e-3)))
        norms.append(H.l2_norm(a))
    assert all(y <= x * (1 + 1e-15) for x, y in zip(norms, norms[1:]))


def test_closedness_and_class_preserved():
    rng = np.random.default_rng(2)
    f = H.random_real_form(2, 0, 6, rng)
    closed = H.exterior_derivative(f)
    closed.set_mode((0, 0), np.array([0.3, -0.2], dtype=complex))
    assert H.closedness_residual(closed) < 1e-12
    out = H.hodge_heat_step(closed, 0.01)
    assert H.closedness_residual(out) < 1e-12
    assert np.array_equal(out.mode((0, 0)), closed.mode((0, 0)))


def test_exterior_derivative_squares_to_zero():
    rng = np.random.default_rng(3)
    a = H.random_real_form(3, 1, 3, rng)
    assert np.abs(H.exterior_derivative(H.exterior_derivative(a)).coeffs).max() < 1e-12


def test_d_of_sine_is_exact():
    K = 4
    f = H.FourierForm.zeros(2, 0, K)
    f.set_mode((1, 0), -0.5j)
    f.set_mode((-1, 0), 0.5j)
    df = H.exterior_derivative(f)
    harm, exact, coexact = H.hodge_decompose(df)
    assert np.abs(exact.coeffs - df.coeffs).max() < 1e-14
    assert not np.any(harm.coeffs) and np.abs(coexact.coeffs).max() < 1e-14


@pytest.mark.parametrize("n,k", [(2, 1), (3, 1), (3, 2)])
def test_decomposition_orthogonal(n, k):
    rng = np.random.default_rng(4 + n + k)
    a = H.random_real_form(n, k, 4, rng)
    parts = H.hodge_decompose(a)
    total = sum(p.coeffs for p in parts)
    assert np.abs(total - a.coeffs).max() < 1e-12
    for i in range(3):
        for j in range(i + 1, 3):
            assert abs(H.l2_inner(parts[i], parts[j])) < 1e-12
    assert H.closedness_residual(parts[1]) < 1e-12


def test_harmonic_part_of_closed_form_is_zero_mode():
    rng = np.random.default_rng(5)
    closed = H.exterior_derivative(H.random_real_form(2, 0, 5, rng))
    closed.set_mode((0, 0), np.array([1.5, -2.0], dtype=complex))
    harm, _, coexact = H.hodge_decompose(closed)
    assert np.array_equal(harm.mode((0, 0)), [1.5, -2.0])
    assert np.abs(coexact.coeffs).max() < 1e-12


# Einstein flow

def test_einstein_examples():
    assert E.extinction_time(1.0) == 0.5
    assert E.einstein_flow(1.0, 0.25).c == 0.5
    with pytest.raises(ExtinctError):
        E.einstein_flow(1.0, 0.5)
    assert E.einstein_flow(0.0, 100.0).c == 1.0
    assert E.extinction_time(0.0) == math.inf
    assert E.einstein_flow(-1.0, 3.0).c == 7.0
    with pytest.raises(ValueError):
        E.einstein_flow(1.0, -0.1)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.01, 100.0))
def test_extinction_exact(lam):
    T = E.extinction_time(lam)
    assert T == 1 / (2 * lam)
    with pytest.raises(ExtinctError):
        E.einstein_flow(lam, T)


def test_sphere_patch_flow_and_scale_invariance():
    grid = C.sphere_patch(128)
    mask = grid.interior_mask(2)
    assert E.flow_residual(grid, 1.0, 0.2, mask) < 1e-3
    assert E.scale_invariance_residual(grid, 0.37, mask) < 1e-3


# warped coflow

def test_fd_weights_exact_on_polynomials():
    offs = (0, 1, 2, 3, 4, 5)
    w = W.fd_weights(offs, 2)
    for p in range(5):
        vals = np.array(offs, dtype=float) ** p
        assert np.dot(w, vals) == pytest.approx(2.0 if p == 2 else 0.0, abs=1e-10)


def test_laplacian_examples():
    r = W.circle_grid(64)
    st_ = W.WarpedState.from_exprs("CY", r, "1", "sin(2*pi*r)", "1")
    assert np.abs(W.warped_laplacian(st_.theta, st_) - st_.theta.d2).max() == 0
    assert np.abs(W.warped_laplacian(st_.theta, st_) + 4 * np.pi ** 2 * np.sin(2 * np.pi * r)).max() < 1e-12
    fd = W.WarpedState.from_arrays("CY", r, 1.0, np.sin(2 * np.pi * r), 1.0)
    assert np.abs(W.warped_laplacian(fd.theta, fd) + 4 * np.pi ** 2 * np.sin(2 * np.pi * r)).max() < 1e-3


def _fd_error(N, periodic):
    if periodic:
        r = W.circle_grid(N)
    else:
        r = W.interval_grid(N, 0.0, 1.0)
    ex = W.WarpedState.from_exprs("NK", r, "1.5 + 0.3*sin(2*pi*r)", "0.2*cos(2*pi*r)", "1 + 0.2*sin(4*pi*r)",
                                  periodic=periodic)
    fd = W.WarpedState.from_arrays("NK", r, *ex.arrays(), periodic=periodic)
    return max(np.abs(W.warped_laplacian(ex.theta, ex) - W.warped_laplacian(fd.theta.v, fd)).max(),
               np.abs(W.warped_gradsq(ex.theta, ex) - W.warped_gradsq(fd.theta.v, fd)).max())


@pytest.mark.parametrize("periodic", [True, False])
def test_fourth_order_convergence(periodic):
    e1, e2 = _fd_error(40, periodic), _fd_error(80, periodic)
    assert math.log2(e1 / e2) >= 3.8


def test_cy_constant_stationary():
    r = W.circle_grid(32)
    s = W.WarpedState.from_arrays("CY", r, 1.0, 0.3, 1.7)
    assert all(not np.any(a) for a in W.coflow_rhs(s))
    tr = W.coflow_integrate(s, 0.05)
    assert tr.status == "completed"
    for state in tr.states:
        assert np.array_equal(np.array(state), np.array(tr.states[0]))


def test_cy_requires_unit_ell():
    with pytest.raises(ValueError):
        W.WarpedState.from_arrays("CY", W.circle_grid(16), 1.1, 0.0, 1.0)


def test_positivity_lost():
    r = W.circle_grid(16)
    with pytest.raises(PositivityLost):
        W.WarpedState.from_arrays("NK", r, 1.0, 0.0, np.cos(2 * np.pi * r))
    bad = W.WarpedState.from_arrays("NK", r, 1.0, 0.0, np.cos(2 * np.pi * r), validate=False)
    with pytest.raises(PositivityLost):
        W.coflow_rhs(bad)


def test_nk_cone_exact():
    r = W.interval_grid(41, 1.0, 2.0)
    s = W.WarpedState.from_exprs("NK", r, "r", "0", "1", periodic=False)
    for a in W.coflow_rhs(s) + W.warped_torsion_forms(s) + W.nk_soliton_residual(s, W.Jet.constant(0, r), 0.0):
        assert np.abs(a).max() < 1e-10
    r3 = W.nk_soliton_residual(s, W.Jet.constant(0, r), 1.0)[2]
    assert np.abs(r3 + 0.25 * r ** 4).max() < 1e-12


def test_nk_cone_integration_first_steps():
    r = W.interval_grid(41, 1.0, 2.0)
    s = W.WarpedState.from_arrays("NK", r, r, 0 * r, 1 + 0 * r, periodic=False)
    dt = W.stable_dt(s)
    tr = W.coflow_integrate(s, 4 * dt, dt)
    assert tr.status == "completed" and len(tr.diagnostics) == 4
    assert all(d["rhs_sup"] < 1e-10 for d in tr.diagnostics)


def test_nk_cone_long_horizon():
    r = W.interval_grid(41, 1.0, 2.0)
    s = W.WarpedState.from_arrays("NK", r, r, 0 * r, 1 + 0 * r, periodic=False)
    tr = W.coflow_integrate(s, 500 * W.stable_dt(s), record_every=100)
    assert tr.status == "completed" and len(tr.diagnostics) == 500
    assert max(d["rhs_sup"] for d in tr.diagnostics) < 1e-10
    assert np.abs(np.array(tr.states[-1]) - np.array(tr.states[0])).max() < 1e-10


def test_dt_bound_enforced():
    s = W.WarpedState.from_arrays("CY", W.circle_grid(16), 1.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        W.coflow_integrate(s, 0.1, 2 * W.stable_dt(s))


def test_dG_consistency():
    r = W.circle_grid(64)
    s = W.WarpedState.from_exprs("CY", r, "1", "sin(3*2*pi*r)", "1")
    _, _, dG = W.coflow_rhs(s)
    assert np.abs(dG - 9 * (6 * np.pi * np.cos(6 * np.pi * r)) ** 2).max() < 1e-9
    assert np.abs(dG - 9 * W.warped_gradsq(s.theta, s)).max() == 0
    nk = W.WarpedState.from_exprs("NK", r, "1.2 + 0.1*cos(2*pi*r)", "0.4*sin(2*pi*r)", "1 + 0.1*sin(2*pi*r)")
    _, _, dG = W.coflow_rhs(nk)
    ell, th, G = nk.arrays()
    combo = 9 * W.warped_gradsq(nk.theta, nk) + 3 * np.sin(3 * th) ** 2 / ell ** 2
    assert np.abs(dG / G - combo).max() < 1e-12


def test_cy_high_frequency_diagnostics():
    r = W.circle_grid(64)
    theta = 0.3 + 1e-3 * np.sin(2 * np.pi * r) + 1e-3 * np.sin(16 * np.pi * r)
    s = W.WarpedState.from_arrays("CY", r, 1.0, theta, 1.0)
    tr = W.coflow_integrate(s, 1e-3)
    assert tr.status == "completed"
    assert set(tr.mode_growth) == set(range(1, 9))
    assert tr.mode_growth[1] is not None and tr.mode_growth[8] is not None


def test_torsion_examples():
    r = W.circle_grid(16)
    cy = W.WarpedState.from_arrays("CY", r, 1.0, 0.7, 1.0)
    assert all(not np.any(t) for t in W.warped_torsion_forms(cy))
    nk = W.WarpedState.from_exprs("NK", r, "1", "pi/3", "1")
    tau0, tau1 = W.warped_torsion_forms(nk)
    assert np.abs(tau0).max() < 1e-14 and np.abs(tau1 - 1).max() < 1e-15


def test_nk_residual_sin_branch_and_linearity():
    r = W.interval_grid(21, 1.0, 2.0)
    s = W.WarpedState.from_exprs("NK", r, "1 + r**2", "0", "2 + r", periodic=False)
    sj = W.Jet.from_expr("sin(r)", r)
    assert not np.any(W.nk_soliton_residual(s, sj, 3.0)[1])
    t = W.WarpedState.from_exprs("NK", r, "1 + r**2/3", "0.1*r", "1", periodic=False)
    s1, s2 = W.Jet.from_expr("r", r), W.Jet.from_expr("cos(r)", r)
    base = np.array(W.nk_soliton_residual(t, W.Jet.constant(0, r), 0.0))
    f = lambda s_, lam: np.array(W.nk_soliton_residual(t, s_, lam)) - base
    assert np.abs(f(s1 + s2, 0.7 + 0.2) - f(s1, 0.7) - f(s2, 0.2)).max() < 1e-10


def test_cy_family_values():
    r = np.array([-50.0, 0.0, 50.0])
    theta, s = W.cy_soliton_family(1.0, 1.0, r)
    assert theta.v[1] == pytest.approx(math.pi / 6)
    assert theta.v[0] == pytest.approx(0, abs=1e-12) and theta.v[2] == pytest.approx(math.pi / 3)
    assert s.v[1] == 0 and s.v[0] == pytest.approx(1) and s.v[2] == pytest.approx(-1)


def test_cy_trivial_residual():
    r = np.linspace(0, 1, 21)
    z = W.Jet.constant(0.0, r)
    G = W.Jet.from_expr("1 + r**2", r)
    assert not np.any(W.cy_soliton_residual(z, z, G, r))


def test_cy_calibration_and_gauge():
    r = np.linspace(-3, 3, 601)
    cal = W.calibrate_cy_convention(1.0, 1.0, r)
    assert cal["best"] in {W.CY_CONVENTION, tuple(-x for x in W.CY_CONVENTION)}
    assert cal["residuals"][W.CY_CONVENTION] < 1e-12
    assert cal["residuals"][W.PRINTED_CONVENTION] > 0.5
    for b, c in ((1.0, 1.0), (2.0, 0.5), (-1.0, 3.0)):
        theta, s = W.cy_soliton_family(b, c, r)
        G = W.cy_gauge_G(theta, s)
        assert np.abs(G - 1).max() < 1e-10
        assert np.abs(W.cy_soliton_residual(theta, s, G, r)).max() < 1e-6
