"""Principal symbols of linearised curvature operators as matrices on Sym^2(R^n).

A symbol is obtained by replacing each derivative d/dx^i by the covector
component xi_i (no factor of sqrt(-1)).  Operators are returned as matrices
in the orthonormal frame of ``Sym2Frame``, so adjointness is matrix symmetry.
Exact (integer / Fraction) covectors give exact matrices in the coordinate
basis through ``coordinate_matrix``; ranks there are computed with sympy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np
import sympy

from .g2 import G2Point

POSITIVITY_TOL = 1e-9


def _is_exact(a: np.ndarray) -> bool:
    return a.dtype == object or np.issubdtype(a.dtype, np.integer)


def prepare_xi(xi, normalize: bool = True) -> np.ndarray:
    """Validate xi and optionally rescale it to unit length.

    Exact input stays exact when |xi|^2 is a rational square; otherwise
    normalisation falls back to floats.
    """
    xi = np.asarray(xi)
    if xi.ndim != 1 or not np.any(xi != 0):
        raise ValueError("xi must be a nonzero covector")
    if not normalize:
        return xi
    if _is_exact(xi):
        sq = Fraction(sum(Fraction(int(v)) if not isinstance(v, Fraction) else v for v in xi * xi))
        num, ok_n = sympy.integer_nthroot(sq.numerator, 2)
        den, ok_d = sympy.integer_nthroot(sq.denominator, 2)
        if ok_n and ok_d:
            r = Fraction(int(num), int(den))
            return np.array([Fraction(v) / r for v in xi.tolist()], dtype=object)
        xi = xi.astype(float)
    return xi / np.linalg.norm(xi)


@dataclass(frozen=True)
class Sym2Frame:
    """Orthonormal basis E_ii, (E_ij + E_ji)/sqrt(2) (i < j), lexicographic."""

    n: int
    pairs: tuple = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "pairs", tuple((i, j) for i in range(self.n) for j in range(i, self.n)))

    @property
    def dim(self) -> int:
        return self.n * (self.n + 1) // 2

    @property
    def basis(self) -> list[np.ndarray]:
        return [self.to_matrix(np.eye(self.dim)[k]) for k in range(self.dim)]

    def coords(self, h: np.ndarray) -> np.ndarray:
        r2 = math.sqrt(2.0)
        return np.array([h[i, j] if i == j else r2 * h[i, j] for i, j in self.pairs], dtype=float)

    def to_matrix(self, v: np.ndarray) -> np.ndarray:
        h = np.zeros((self.n, self.n))
        for c, (i, j) in zip(v, self.pairs):
            if i == j:
                h[i, i] = c
            else:
                h[i, j] = h[j, i] = c / math.sqrt(2.0)
        return h

    def gram(self) -> np.ndarray:
        B = self.basis
        return np.array([[np.sum(P * Q) for Q in B] for P in B])


@dataclass(frozen=True)
class SymbolOperator:
    n: int
    matrix: np.ndarray
    xi: np.ndarray
    name: str = ""

    def apply(self, h: np.ndarray) -> np.ndarray:
        frame = Sym2Frame(self.n)
        return frame.to_matrix(self.matrix @ frame.coords(h))


# pointwise actions (work on float or exact object arrays)

def _h_xi(h, xi):
    return h @ xi


def _norm2(xi):
    return np.dot(xi, xi)


def apply_A(xi, X) -> np.ndarray:
    """A X = (xi (x) X + X (x) xi) / 2."""
    xi, X = np.asarray(xi), np.asarray(X)
    s = np.outer(xi, X) + np.outer(X, xi)
    return s * Fraction(1, 2) if _is_exact(s) else s / 2.0


def apply_B(h, xi) -> np.ndarray:
    """B h = -xi (x) h(xi) - h(xi) (x) xi + |xi|^2 h + (tr h) xi (x) xi."""
    hx = _h_xi(h, xi)
    return -np.outer(xi, hx) - np.outer(hx, xi) + _norm2(xi) * h + np.trace(h) * np.outer(xi, xi)


def apply_Q(h, xi) -> np.ndarray:
    """Q h = xi (x) h(xi) + h(xi) (x) xi - (tr h) xi (x) xi."""
    hx = _h_xi(h, xi)
    return np.outer(xi, hx) + np.outer(hx, xi) - np.trace(h) * np.outer(xi, xi)


def apply_scalar(h, xi) -> np.ndarray:
    """Symbol of h -> D(R)(h) g on a flat background: (-|xi|^2 tr h + h(xi, xi)) g."""
    n = h.shape[0]
    c = -_norm2(xi) * np.trace(h) + xi @ h @ xi
    eye = np.eye(n, dtype=np.int64) if _is_exact(np.asarray(c)) or isinstance(c, Fraction) else np.eye(n)
    return c * eye


def apply_rb(h, xi, b, deturck: bool = True) -> np.ndarray:
    """Ricci-Bourguignon symbol B h + b * scalar(h), plus Q h when DeTurck-modified.

    With ``deturck`` this is |xi|^2 h - b|xi|^2 (tr h) g + b h(xi, xi) g.
    """
    out = apply_B(h, xi) + b * apply_scalar(h, xi)
    if deturck:
        out = out + apply_Q(h, xi)
    return out


def breve_projection(h, xi) -> np.ndarray:
    """Orthogonal projection of h onto (im A)^perp: h - (xi (x) X + X (x) xi)."""
    h = np.asarray(h, dtype=float)
    xi = prepare_xi(xi, normalize=False).astype(float)
    n2 = _norm2(xi)
    X = h @ xi / n2 - (xi @ h @ xi) / (2 * n2 * n2) * xi
    return h - np.outer(xi, X) - np.outer(X, xi)


# matrices

def operator_matrix(action: Callable[[np.ndarray], np.ndarray], n: int) -> np.ndarray:
    frame = Sym2Frame(n)
    cols = [frame.coords(action(E)) for E in frame.basis]
    return np.array(cols).T


def _operator(name, action, xi, n, normalize):
    xi = prepare_xi(xi, normalize)
    if xi.shape[0] != n:
        raise ValueError("xi has the wrong dimension")
    xf = xi.astype(float)
    return SymbolOperator(n, operator_matrix(lambda h: action(h, xf), n), xf, name)


def symbol_A(xi, normalize: bool = True) -> np.ndarray:
    """(n(n+1)/2, n) matrix of X -> A X in the Sym2Frame."""
    xi = prepare_xi(xi, normalize).astype(float)
    n = xi.shape[0]
    frame = Sym2Frame(n)
    return np.array([frame.coords(apply_A(xi, e)) for e in np.eye(n)]).T


def symbol_B_ricci(xi, n: int | None = None, normalize: bool = True) -> SymbolOperator:
    """B = -2 sigma(D Rc)(xi)."""
    n = len(xi) if n is None else n
    return _operator("B", apply_B, xi, n, normalize)


def symbol_Q_deturck(xi, n: int | None = None, normalize: bool = True) -> SymbolOperator:
    n = len(xi) if n is None else n
    return _operator("Q", apply_Q, xi, n, normalize)


def symbol_scalar_g(xi, n: int | None = None, normalize: bool = True) -> SymbolOperator:
    n = len(xi) if n is None else n
    return _operator("scalar", apply_scalar, xi, n, normalize)


def rb_symbol(xi, n: int | None = None, b: float = 0.0, deturck: bool = True,
              normalize: bool = True) -> SymbolOperator:
    n = len(xi) if n is None else n
    name = "rb_deturck" if deturck else "rb"
    return _operator(name, lambda h, x: apply_rb(h, x, b, deturck), xi, n, normalize)


def rb_quadratic_expansion(lam: float, h0: np.ndarray, xi, b: float) -> float:
    """<C h, h> for h = lam g + h0 (h0 trace-free), expanded by hand.

    |xi|^2 (lam^2 (n - b n^2 + b n) + |h0|^2) + b n lam h0(xi, xi).
    """
    xi = np.asarray(xi, dtype=float)
    n = xi.shape[0]
    return (_norm2(xi) * (lam ** 2 * (n - b * n * n + b * n) + np.sum(h0 * h0))
            + b * n * lam * (xi @ h0 @ xi))


# exact coordinate-basis matrices and ranks

def coordinate_basis(n: int) -> list[np.ndarray]:
    out = []
    for i in range(n):
        for j in range(i, n):
            E = np.zeros((n, n), dtype=np.int64)
            E[i, j] = E[j, i] = 1
            out.append(E)
    return out


def _coord_vector(h: np.ndarray, n: int) -> list:
    # coefficients in the E_ii, E_ij + E_ji basis are just the upper triangle
    return [h[i, j] for i in range(n) for j in range(i, n)]


def coordinate_matrix(action: Callable[[np.ndarray], np.ndarray], n: int) -> sympy.Matrix:
    """Exact matrix of an action in the unnormalised coordinate basis."""
    cols = []
    for E in coordinate_basis(n):
        out = action(E.astype(object))
        cols.append([sympy.Rational(str(Fraction(v))) for v in _coord_vector(out, n)])
    return sympy.Matrix(cols).T


def exact_A_matrix(xi) -> sympy.Matrix:
    xi = np.array([Fraction(v) for v in xi], dtype=object)
    n = len(xi)
    cols = []
    for e in np.eye(n, dtype=np.int64):
        cols.append([sympy.Rational(str(Fraction(v))) for v in _coord_vector(apply_A(xi, e.astype(object)), n)])
    return sympy.Matrix(cols).T


def exact_kernel_report(xi, b: float | None = None, deturck: bool = False) -> dict:
    """Exact ranks proving ker(op) = im(A) (or reporting that it fails).

    With ``b is None`` the operator is B; otherwise the Ricci-Bourguignon
    symbol with coefficient b (a rational).
    """
    xi_e = np.array([Fraction(v) for v in xi], dtype=object)
    n = len(xi_e)
    if b is None:
        M = coordinate_matrix(lambda h: apply_B(h, xi_e), n)
    else:
        bq = Fraction(b)
        M = coordinate_matrix(lambda h: apply_rb(h, xi_e, bq, deturck), n)
    A = exact_A_matrix(xi_e)
    N = n * (n + 1) // 2
    kernel_dim = N - M.rank()
    rank_A = A.rank()
    annihilates = (M * A).is_zero_matrix
    return {"n": n, "kernel_dim": int(kernel_dim), "rank_A": int(rank_A),
            "annihilates_im_A": bool(annihilates),
            "kernel_equals_im_A": bool(annihilates and kernel_dim == rank_A)}


def exact_b_plus_q_residual(xi) -> sympy.Matrix:
    """(B + Q) - |xi|^2 I as an exact matrix (zero when the identity holds)."""
    xi_e = np.array([Fraction(v) for v in xi], dtype=object)
    n = len(xi_e)
    M = coordinate_matrix(lambda h: apply_B(h, xi_e) + apply_Q(h, xi_e), n)
    n2 = sympy.Rational(str(Fraction(np.dot(xi_e, xi_e))))
    return M - n2 * sympy.eye(n * (n + 1) // 2)


# parabolicity

def parabolicity_report(op, subspace: np.ndarray | None = None, tol: float = POSITIVITY_TOL) -> dict:
    """Minimum eigenvalue of the symmetric part, optionally restricted.

    ``op`` is a SymbolOperator or a raw square matrix; ``subspace`` holds
    spanning column vectors (orthonormalised internally).
    """
    M = np.asarray(op.matrix if isinstance(op, SymbolOperator) else op, dtype=float)
    S = 0.5 * (M + M.T)
    if subspace is not None:
        V = np.asarray(subspace, dtype=float)
        U, sv, _ = np.linalg.svd(V, full_matrices=False)
        U = U[:, sv > 1e-12 * sv.max()]
        S = U.T @ S @ U
    eig_sym = np.linalg.eigvalsh(S)
    eig = np.linalg.eigvals(M)
    min_eig = float(eig_sym[0])
    return {"min_sym_eig": min_eig, "positive": bool(min_eig > tol),
            "min_real_eig": float(np.min(eig.real)),
            "real_eigs_positive": bool(np.min(eig.real) > tol)}


def quadratic_form(M, v):
    """<M v, v> in the arithmetic of the inputs (exact for integers)."""
    M, v = np.asarray(M), np.asarray(v)
    return (M @ v) @ v


COUNTEREXAMPLE_MATRIX = np.array([[1, 4], [0, 1]], dtype=np.int64)
COUNTEREXAMPLE_VECTOR = np.array([1, -1], dtype=np.int64)


def orthogonal_complement_of_A(xi, normalize: bool = True) -> np.ndarray:
    """Orthonormal columns spanning (im A)^perp in the Sym2Frame."""
    A = symbol_A(xi, normalize)
    U, _, _ = np.linalg.svd(A, full_matrices=True)
    return U[:, A.shape[1]:]


# Ricci-Bourguignon interval

def rb_parabolic_interval(n: int) -> tuple[float, float]:
    """Interval of b where the bounding quadratic form is positive definite.

    |b + 2(n-1)/n| < (2/n) sqrt(n^2 - n + 1).
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    c = -2.0 * (n - 1) / n
    r = 2.0 / n * math.sqrt(n * n - n + 1)
    return c - r, c + r


def rb_symbol_positive_interval(n: int) -> tuple[float, float]:
    """Exact region where the symmetrised DeTurck-modified symbol is positive.

    Uses the sharp bound |h0(xi, xi)| <= sqrt((n-1)/n) |h0| |xi|^2 on trace-free
    h0, giving b^2 + 4b - 4/(n-1) < 0.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    r = 2.0 * math.sqrt(n / (n - 1))
    return -2.0 - r, -2.0 + r


def rb_bound_matrix(n: int, b) -> np.ndarray:
    """Bounding quadratic form in (lambda, mu) = (trace coefficient, |h0|)."""
    return np.array([[1, -b * n / 2], [-b * n / 2, n - b * n * n + b * n]], dtype=object
                    if isinstance(b, Fraction) else float)


def rb_bound_determinant_poly(n: int, b) -> object:
    """b^2 + (4/n)(n-1) b - 4/n; negative exactly on the bound interval."""
    if isinstance(b, Fraction):
        return b * b + Fraction(4 * (n - 1), n) * b - Fraction(4, n)
    return b * b + 4.0 * (n - 1) / n * b - 4.0 / n


def _b_grid(b_min, b_max, step) -> list[Fraction]:
    lo, hi, st = Fraction(str(b_min)), Fraction(str(b_max)), Fraction(str(step))
    if st <= 0 or hi < lo:
        raise ValueError("need step > 0 and b_max >= b_min")
    count = int((hi - lo) / st)
    return [lo + k * st for k in range(count + 1)]


def rb_scan(n: int, b_min: float, b_max: float, step: float, form: str = "bound",
            xi=None) -> list[tuple[float, float, bool]]:
    """Rows (b, min_sym_eig, positive) over an evenly spaced b grid.

    ``form="bound"`` scans the bounding 2x2 quadratic form and decides
    positivity by the exact sign of its determinant polynomial;
    ``form="symbol"`` scans the symmetrised DeTurck-modified symbol itself.
    """
    grid = _b_grid(b_min, b_max, step)
    rows = []
    if form == "bound":
        for b in grid:
            bf = float(b)
            eig = float(np.linalg.eigvalsh(rb_bound_matrix(n, bf))[0])
            rows.append((bf, eig, bool(rb_bound_determinant_poly(n, b) < 0)))
    elif form == "symbol":
        xi = np.eye(n)[0] if xi is None else xi
        M0 = rb_symbol(xi, n, 0.0).matrix
        M1 = rb_symbol(xi, n, 1.0).matrix - M0
        S0, S1 = 0.5 * (M0 + M0.T), 0.5 * (M1 + M1.T)
        for b in grid:
            bf = float(b)
            eig = float(np.linalg.eigvalsh(S0 + bf * S1)[0])
            rows.append((bf, eig, bool(eig > POSITIVITY_TOL)))
    else:
        raise ValueError(f"unknown scan form {form!r}")
    return rows


def scan_endpoints(rows) -> list[float]:
    """Midpoints between consecutive rows where the positivity flag changes."""
    out = []
    for (b0, _, p0), (b1, _, p1) in zip(rows, rows[1:]):
        if p0 != p1:
            out.append(0.5 * (b0 + b1))
    return out


# DGK admissibility

DGK_LABELS = ("0 ≤ b1−a−1", "b1−a−1 < 4", "b1+b2 ≥ 1", "|λ| < ¼(1 − ¼(b1−a−1))")


@dataclass(frozen=True)
class FlowCoefficients:
    a: float
    lam: float
    b1: float
    b2: float


def dgk_admissible(c: FlowCoefficients) -> dict:
    """Evaluate the DGK inequalities exactly (rational arithmetic)."""
    a, lam, b1, b2 = (Fraction(str(v)) if isinstance(v, float) else Fraction(v)
                      for v in (c.a, c.lam, c.b1, c.b2))
    d = b1 - a - 1
    checks = {
        DGK_LABELS[0]: 0 <= d,
        DGK_LABELS[1]: d < 4,
        DGK_LABELS[2]: b1 + b2 >= 1,
        DGK_LABELS[3]: abs(lam) < Fraction(1, 4) * (1 - Fraction(1, 4) * d),
    }
    failed = [k for k, ok in checks.items() if not ok]
    return {"admissible": not failed, "checks": checks, "failed": failed}


# Bianchi operators

def bianchi_operators(h, X, xi, point: G2Point | None = None):
    """(B1 h)_k = xi_a h_ak - xi_k tr(h)/2 and (B2 X)_k = xi_a X_b phi_abk."""
    h = np.asarray(h)
    xi = np.asarray(xi)
    tr = np.trace(h)
    half = Fraction(1, 2) if _is_exact(h) and _is_exact(xi) else 0.5
    b1 = xi @ h - half * tr * xi
    b2 = None
    if point is not None and X is not None:
        b2 = np.einsum("a,b,abk->k", xi, np.asarray(X), point.phi)
    return b1, b2
