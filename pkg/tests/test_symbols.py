from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geoflow import g2
from geoflow import symbols as S


def test_frame_orthonormal():
    for n in (2, 3, 7):
        f = S.Sym2Frame(n)
        assert len(f.basis) == n * (n + 1) // 2
        assert np.abs(f.gram() - np.eye(f.dim)).max() < 1e-15


def test_symbol_A_examples():
    e = np.eye(3)
    assert np.array_equal(S.apply_A(e[0], e[1]), 0.5 * (np.outer(e[0], e[1]) + np.outer(e[1], e[0])))
    assert np.array_equal(S.apply_A(e[0], e[0]), np.outer(e[0], e[0]))
    for n in (2, 3, 7):
        assert np.linalg.matrix_rank(S.symbol_A(np.arange(1, n + 1))) == n
    with pytest.raises(ValueError):
        S.symbol_A(np.zeros(3))


def test_symbol_B_on_identity():
    B = S.symbol_B_ricci(np.eye(7)[0])
    assert np.allclose(B.apply(np.eye(7)), np.diag([6, 1, 1, 1, 1, 1, 1]))
    exact = S.apply_B(np.eye(7, dtype=np.int64), np.eye(7, dtype=np.int64)[0])
    assert np.array_equal(exact, np.eye(7) + 5 * np.outer(np.eye(7)[0], np.eye(7)[0]))


def test_B_not_self_adjoint_but_B_plus_Q_is():
    xi = [1.0, 2.0, -1.0]
    B = S.symbol_B_ricci(xi)
    assert not np.allclose(B.matrix, B.matrix.T)
    BQ = B.matrix + S.symbol_Q_deturck(xi).matrix
    assert np.allclose(BQ, np.eye(6), atol=1e-14)


@pytest.mark.parametrize("n", [2, 3, 7])
def test_kernel_equals_image_exact(n):
    rep = S.exact_kernel_report(list(range(1, n + 1)))
    assert rep["kernel_equals_im_A"] and rep["kernel_dim"] == n


@pytest.mark.parametrize("n", [2, 3, 7])
def test_B_plus_Q_exact(n):
    assert S.exact_b_plus_q_residual([1, -2, 3, 1, 1, 2, 5][:n]).is_zero_matrix


def test_B_annihilates_image_random():
    rng = np.random.default_rng(10)
    for _ in range(100):
        xi, X = rng.normal(size=(2, 5))
        assert np.abs(S.apply_B(S.apply_A(xi, X), xi)).max() < 1e-12


def test_breve_projection():
    e = np.eye(4)
    assert np.allclose(S.breve_projection(np.eye(4), e[0]), np.eye(4) - np.outer(e[0], e[0]))
    rng = np.random.default_rng(11)
    xi = rng.normal(size=4)
    assert np.abs(S.breve_projection(S.apply_A(xi, rng.normal(size=4)), xi)).max() < 1e-12
    h = rng.normal(size=(4, 4))
    h = h + h.T
    hb = S.breve_projection(h, xi)
    assert np.abs(hb @ xi).max() < 1e-12
    assert np.allclose(S.breve_projection(hb, xi), hb)
    for _ in range(10):
        assert abs(np.sum(hb * S.apply_A(xi, rng.normal(size=4)))) < 1e-12


def test_B_positive_on_breve():
    rng = np.random.default_rng(12)
    for n in (2, 3, 7):
        for _ in range(50):
            xi = rng.normal(size=n)
            h = rng.normal(size=(n, n))
            hb = S.breve_projection(h + h.T, xi)
            lhs = np.sum(S.apply_B(hb, xi) * hb)
            assert abs(lhs - xi @ xi * np.sum(hb * hb)) < 1e-12 * max(1.0, abs(lhs))


def test_Q_examples():
    n = 5
    e = np.eye(n, dtype=np.int64)
    assert np.array_equal(S.apply_Q(np.eye(n, dtype=np.int64), e[0]), (2 - n) * np.outer(e[0], e[0]))
    h = np.zeros((n, n))
    h[1, 2] = h[2, 1] = 1.0
    assert not np.any(S.apply_Q(h, e[0]))


def test_scalar_examples():
    n = 4
    e = np.eye(n, dtype=np.int64)
    assert np.array_equal(S.apply_scalar(np.eye(n, dtype=np.int64), e[0]), (1 - n) * np.eye(n))
    assert np.array_equal(S.apply_scalar(np.outer(e[1], e[1]), e[0]), -np.eye(n))
    h = np.zeros((n, n))
    h[1, 1], h[2, 2] = 1.0, -1.0
    assert not np.any(S.apply_scalar(h, e[0]))


def test_rb_symbol():
    xi = np.array([0.3, -1.0, 0.4])
    assert np.allclose(S.rb_symbol(xi, 3, 0.0).matrix, np.eye(6))
    C = S.rb_symbol(xi, 3, 1.0)
    assert not np.allclose(C.matrix, C.matrix.T)
    rng = np.random.default_rng(13)
    h0 = rng.normal(size=(3, 3))
    h0 = h0 + h0.T
    h0 -= np.trace(h0) / 3 * np.eye(3)
    lam, b = 0.7, 0.3
    xi_u = xi / np.linalg.norm(xi)
    h = lam * np.eye(3) + h0
    direct = np.sum(S.apply_rb(h, xi_u, b) * h)
    assert direct == pytest.approx(S.rb_quadratic_expansion(lam, h0, xi_u, b), rel=1e-12)


def test_rb_kernel_without_deturck():
    for b in (Fraction(1, 3), Fraction(-2), Fraction(5, 7)):
        assert S.exact_kernel_report([1, 2, 3], b=b)["kernel_equals_im_A"]
    # n = 2, b = 1 adds a direction outside im A
    assert S.exact_kernel_report([1, 0], b=1)["kernel_dim"] == 3


def test_parabolicity_counterexample():
    rep = S.parabolicity_report(S.COUNTEREXAMPLE_MATRIX)
    assert not rep["positive"] and rep["real_eigs_positive"]
    assert S.quadratic_form(S.COUNTEREXAMPLE_MATRIX, S.COUNTEREXAMPLE_VECTOR) == -2


def test_parabolicity_identity_and_B():
    rep = S.parabolicity_report(np.eye(6) * 2.5)
    assert rep["positive"] and rep["min_sym_eig"] == pytest.approx(2.5)
    xi = np.array([1.0, 2.0, 2.0])
    B = S.symbol_B_ricci(xi)
    rep = S.parabolicity_report(B, S.orthogonal_complement_of_A(xi))
    assert rep["positive"] and rep["min_sym_eig"] == pytest.approx(1.0)
    assert not S.parabolicity_report(B)["positive"]


def test_rb_interval_values():
    lo, hi = S.rb_parabolic_interval(3)
    assert lo == pytest.approx(-3.09717, abs=1e-5) and hi == pytest.approx(0.43050, abs=1e-5)
    lo, hi = S.rb_parabolic_interval(7)
    assert lo == pytest.approx(-3.58784, abs=1e-5) and hi == pytest.approx(0.15927, abs=1e-5)
    for n in range(2, 11):
        lo, hi = S.rb_parabolic_interval(n)
        assert lo < 0 < hi


@pytest.mark.parametrize("n", [3, 7])
def test_rb_bound_scan_endpoints(n):
    ends = S.scan_endpoints(S.rb_scan(n, -5, 1, 0.001))
    assert len(ends) == 2
    assert np.abs(np.array(ends) - np.array(S.rb_parabolic_interval(n))).max() < 1e-3


@pytest.mark.parametrize("n", [2, 3, 7])
def test_rb_symbol_scan_is_sharper(n):
    ends = S.scan_endpoints(S.rb_scan(n, -6, 2, 0.001, form="symbol"))
    sharp = S.rb_symbol_positive_interval(n)
    assert np.abs(np.array(ends) - np.array(sharp)).max() < 1e-3
    lo, hi = S.rb_parabolic_interval(n)
    assert sharp[0] < lo and hi < sharp[1]


@settings(max_examples=25, deadline=None)
@given(st.floats(-6, 2), st.integers(2, 5))
def test_symbol_positivity_matches_sharp_interval(b, n):
    lo, hi = S.rb_symbol_positive_interval(n)
    if min(abs(b - lo), abs(b - hi)) < 1e-6:
        return
    rng = np.random.default_rng(0)
    rep = S.parabolicity_report(S.rb_symbol(rng.normal(size=n), n, b))
    assert rep["positive"] == (lo < b < hi)


def test_dgk():
    ok = S.dgk_admissible(S.FlowCoefficients(-0.5, 0, 1, 0))
    bad = S.dgk_admissible(S.FlowCoefficients(0, 0, 0, 0))
    iso = S.dgk_admissible(S.FlowCoefficients(0, 0, 1, 0))
    assert ok["admissible"] and not bad["admissible"] and iso["admissible"]
    assert "0 ≤ b1−a−1" in bad["failed"]
    assert not S.dgk_admissible(S.FlowCoefficients(-0.5, 0.3, 1, 0))["admissible"]


def test_bianchi():
    p = g2.standard_structure()
    e = np.eye(7, dtype=np.int64)
    b1, b2 = S.bianchi_operators(np.eye(7, dtype=np.int64), e[1], e[0], p)
    assert b1[0] == Fraction(-5, 2) and not np.any(b1[1:])
    assert np.array_equal(b2, e[2])
    _, z = S.bianchi_operators(np.eye(7, dtype=np.int64), e[0], e[0], p)
    assert not np.any(z)
