"""Pointwise exterior algebra of G2-structures on R^7 and the SU(2) triple on R^4.

All index conventions are 0-based in code; docstrings quote 1-based indices
when naming basis forms (``e_1 ^ e_2 ^ e_3`` is ``basis_form(7, (0, 1, 2))``).
Identities are stated in an orthonormal frame for the point's metric.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from sympy import integer_nthroot

from .errors import NotAG2Structure
from .tensors import (_sort_sign, basis_form, components, from_components,
                      hodge_star, is_antisymmetric, wedge)

# e_123 + e_145 - e_167 + e_246 - e_275 + e_347 - e_356, 1-based
PHI0_TERMS = (
    ((1, 2, 3), 1), ((1, 4, 5), 1), ((1, 6, 7), -1), ((2, 4, 6), 1),
    ((2, 7, 5), -1), ((3, 4, 7), 1), ((3, 5, 6), -1),
)
# e_4567 - e_23(e_45 - e_67) - e_31(e_46 - e_75) - e_12(e_47 - e_56), 1-based
PSI0_TERMS = (
    ((4, 5, 6, 7), 1),
    ((2, 3, 4, 5), -1), ((2, 3, 6, 7), 1),
    ((3, 1, 4, 6), -1), ((3, 1, 7, 5), 1),
    ((1, 2, 4, 7), -1), ((1, 2, 5, 6), 1),
)


def _form_from_terms(terms, n: int, k: int) -> np.ndarray:
    comps: dict[tuple[int, ...], int] = {}
    for idx, coeff in terms:
        sign, srt = _sort_sign(tuple(i - 1 for i in idx))
        comps[srt] = comps.get(srt, 0) + sign * coeff
    return from_components(comps, n, k, dtype=np.int64)


def standard_phi(flip: tuple[int, int, int] | None = None) -> np.ndarray:
    """Integer array of the standard 3-form.

    ``flip`` (1-based increasing triple) negates that one component; it exists
    so the identity suite can be shown to catch a corrupted table.
    """
    terms = list(PHI0_TERMS)
    if flip is not None:
        target = tuple(sorted(flip))
        hit = False
        for i, (idx, c) in enumerate(terms):
            if tuple(sorted(idx)) == target:
                terms[i] = (idx, -c)
                hit = True
        if not hit:
            raise ValueError(f"{flip} is not a component of the standard 3-form")
    return _form_from_terms(terms, 7, 3)


def standard_psi() -> np.ndarray:
    return _form_from_terms(PSI0_TERMS, 7, 4)


@dataclass(frozen=True)
class G2Point:
    phi: np.ndarray
    psi: np.ndarray
    metric: np.ndarray
    volume: float  # sqrt(det g) times the orientation sign

    @property
    def orientation(self) -> int:
        return 1 if self.volume > 0 else -1


def standard_structure(flip: tuple[int, int, int] | None = None) -> G2Point:
    """The standard G2-structure with exact integer entries."""
    return G2Point(standard_phi(flip), standard_psi(), np.eye(7, dtype=np.int64), 1)


def _exact_det(m: np.ndarray) -> Fraction:
    """Determinant by fraction-exact Gaussian elimination."""
    a = [[Fraction(x) for x in row] for row in m.tolist()]
    n = len(a)
    det = Fraction(1)
    for c in range(n):
        piv = next((r for r in range(c, n) if a[r][c] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != c:
            a[c], a[piv] = a[piv], a[c]
            det = -det
        det *= a[c][c]
        for r in range(c + 1, n):
            f = a[r][c] / a[c][c]
            if f:
                a[r] = [x - f * y for x, y in zip(a[r], a[c])]
    return det


def _exact_root(q: Fraction, k: int) -> Fraction | None:
    """Exact real k-th root of a positive rational, or None."""
    def iroot(v: int) -> int | None:
        r, is_exact = integer_nthroot(v, k)
        return r if is_exact else None
    num, den = iroot(q.numerator), iroot(q.denominator)
    if num is None or den is None:
        return None
    return Fraction(num, den)


def bilinear_b(phi: np.ndarray) -> np.ndarray:
    """B_ij defined by (e_i ⨼ phi) ^ (e_j ⨼ phi) ^ phi = -6 B_ij vol."""
    exact = phi.dtype == object or np.issubdtype(phi.dtype, np.integer)
    B = np.zeros((7, 7), dtype=object if exact else float)
    top = tuple(range(7))
    slices = [phi[i] for i in range(7)]
    for i in range(7):
        wi = wedge(slices[i], phi)
        for j in range(i, 7):
            c = wedge(slices[j], wi)[top]
            val = (c if isinstance(c, Fraction) else Fraction(int(c))) / -6 if exact else -c / 6.0
            B[i, j] = B[j, i] = val
    return B


def metric_from_3form(phi: np.ndarray, allow_reversed: bool = False) -> tuple[np.ndarray, object]:
    """Metric and volume induced by a 3-form on R^7.

    Returns ``(g, vol)`` with ``vol = sqrt(det g)`` for the orientation in
    which ``det B > 0``.  Raises NotAG2Structure when ``det B <= 0`` or the
    result is not positive definite.  With ``allow_reversed`` a negative
    ``det B`` is read through the real ninth root and ``vol`` carries the sign
    -1 (``-phi_0`` then induces the Euclidean metric, reversed orientation).
    """
    if phi.shape != (7, 7, 7) or not is_antisymmetric(phi, tol=1e-12):
        raise NotAG2Structure("input is not an antisymmetric 3-form on R^7")
    B = bilinear_b(phi)
    exact = B.dtype == object
    if exact:
        det = _exact_det(B)
        if det == 0 or (det < 0 and not allow_reversed):
            raise NotAG2Structure(f"det B = {det} is not positive")
        sign = 1 if det > 0 else -1
        root = _exact_root(abs(det), 9)
        if root is not None:
            g = B * (sign / root)
            if all(x.denominator == 1 for x in g.reshape(-1)):
                g = g.astype(np.int64)
        else:
            g = B.astype(float) * (sign * float(abs(det)) ** (-1.0 / 9.0))
    else:
        det = np.linalg.det(B)
        if det == 0 or not np.isfinite(det) or (det < 0 and not allow_reversed):
            raise NotAG2Structure(f"det B = {det} is not positive")
        sign = 1 if det > 0 else -1
        g = B * (sign * abs(det) ** (-1.0 / 9.0))
    gf = np.asarray(g, dtype=float)
    try:
        np.linalg.cholesky(gf)
    except np.linalg.LinAlgError as exc:
        raise NotAG2Structure("induced bilinear form is not positive definite") from exc
    vol = None
    if exact and g.dtype != float:
        root = _exact_root(_exact_det(g), 2)
        if root is not None:
            vol = sign * (int(root) if root.denominator == 1 else root)
    if vol is None:
        vol = sign * math.sqrt(np.linalg.det(gf))
    return g, vol


def point_from_phi(phi: np.ndarray, allow_reversed: bool = False) -> G2Point:
    g, vol = metric_from_3form(phi, allow_reversed=allow_reversed)
    orient = 1 if vol > 0 else -1
    if np.array_equal(np.asarray(g, dtype=float), np.eye(7)):
        psi = hodge_star(phi, orientation=orient)
    else:
        psi = hodge_star(phi, np.asarray(g, dtype=float), orientation=orient)
    return G2Point(phi, psi, g, vol)


def orthonormal_frame_point(point: G2Point) -> G2Point:
    """Components of (phi, psi) in an orthonormal frame of the point's metric."""
    g = np.asarray(point.metric, dtype=float)
    if np.array_equal(g, np.eye(7)):
        return point
    E = np.linalg.inv(np.linalg.cholesky(g)).T  # columns orthonormal for g

    def pull(a):
        for axis in range(a.ndim):
            a = np.moveaxis(np.tensordot(E, a, axes=([0], [axis])), 0, axis)
        return a

    return G2Point(pull(np.asarray(point.phi, dtype=float)),
                   pull(np.asarray(point.psi, dtype=float)), np.eye(7), point.volume)


def _identity_sides(which: int, p: G2Point) -> tuple[np.ndarray, np.ndarray]:
    p = orthonormal_frame_point(p)
    phi, psi, g = p.phi, p.psi, p.metric
    es = np.einsum
    if which == 1:
        lhs = es("ijk,abk->ijab", phi, phi)
        rhs = es("ia,jb->ijab", g, g) - es("ib,ja->ijab", g, g) - psi
    elif which == 2:
        lhs = es("ijk,ajk->ia", phi, phi)
        rhs = 6 * g
    elif which == 3:
        lhs = es("ijk,abck->ijabc", phi, psi)
        rhs = (es("ia,jbc->ijabc", g, phi) + es("ib,ajc->ijabc", g, phi)
               + es("ic,abj->ijabc", g, phi) - es("ja,ibc->ijabc", g, phi)
               - es("jb,aic->ijabc", g, phi) - es("jc,abi->ijabc", g, phi))
    elif which == 4:
        lhs = es("ijk,abjk->iab", phi, psi)
        rhs = -4 * phi
    elif which == 5:
        lhs = es("ijkl,abkl->ijab", psi, psi)
        rhs = 4 * es("ia,jb->ijab", g, g) - 4 * es("ib,ja->ijab", g, g) - 2 * psi
    elif which == 6:
        lhs = es("ijkl,ajkl->ia", psi, psi)
        rhs = 24 * g
    else:
        raise ValueError("identity index must be in 1..6")
    return lhs, rhs


def contraction_identity_residual(which: int, point: G2Point):
    """Max over free indices of |LHS - RHS| for contraction identity 1..6.

    Evaluated in an orthonormal frame; exact (integer) for the standard structure.
    """
    lhs, rhs = _identity_sides(which, point)
    return np.max(np.abs(lhs - rhs))


def full_traces(point: G2Point) -> tuple:
    """(phi_ijk phi_ijk, psi_ijkl psi_ijkl) as raw full contractions."""
    return np.sum(point.phi * point.phi), np.sum(point.psi * point.psi)


def cross_product(X: np.ndarray, Y: np.ndarray, point: G2Point) -> np.ndarray:
    """X x Y = phi(X, Y, .)."""
    return np.einsum("i,j,ijk->k", X, Y, point.phi)


def diamond(A: np.ndarray, gamma: np.ndarray) -> np.ndarray:
    """(A ⋄ gamma)_{i1..ik} = sum over slots s of A_{i_s m} gamma_{.. m ..}."""
    k = gamma.ndim
    out = None
    for s in range(k):
        # contract A's second index into slot s of gamma, then move A's free index to s
        term = np.moveaxis(np.tensordot(A, gamma, axes=([1], [s])), 0, s)
        out = term if out is None else out + term
    return out


def cross_product_identity_residual(X, Y, Z, W, point: G2Point) -> float:
    """<X x Y, Z x W> - <X ^ Y, Z ^ W> + psi(X, Y, Z, W) for the Euclidean frame."""
    lhs = float(np.dot(cross_product(X, Y, point), cross_product(Z, W, point)))
    wedge_inner = float(np.dot(X, Z) * np.dot(Y, W) - np.dot(X, W) * np.dot(Y, Z))
    psi_val = float(np.einsum("i,j,k,l,ijkl->", X, Y, Z, W, point.psi))
    return lhs - wedge_inner + psi_val


# 2-forms

def psi_operator(beta: np.ndarray, point: G2Point) -> np.ndarray:
    """M(beta)_ab = beta_ij psi_ijab."""
    return np.einsum("ij,ijab->ab", beta, point.psi)


def decompose_2form(beta: np.ndarray, point: G2Point) -> tuple[np.ndarray, np.ndarray]:
    """Split beta into its Omega^2_7 and Omega^2_14 parts.

    M has eigenvalue -4 on Omega^2_7 and 2 on Omega^2_14, giving
    pi_7 = (2 - M)/6 and pi_14 = (M + 4)/6.
    """
    M = psi_operator(beta, point)
    if beta.dtype == object or np.issubdtype(beta.dtype, np.integer):
        b7 = (2 * beta - M) * Fraction(1, 6)
        b14 = (M + 4 * beta) * Fraction(1, 6)
    else:
        b7 = (2 * beta - M) / 6.0
        b14 = (M + 4 * beta) / 6.0
    return b7, b14


def two_form_basis(n: int = 7) -> list[np.ndarray]:
    return [basis_form(n, (i, j)) for i in range(n) for j in range(i + 1, n)]


def projector_matrices(point: G2Point) -> tuple[np.ndarray, np.ndarray]:
    """21x21 matrices of pi_7 and pi_14 on the e_i ^ e_j basis."""
    basis = two_form_basis()
    idx = [(i, j) for i in range(7) for j in range(i + 1, 7)]

    def col(beta):
        return [beta[i, j] for i, j in idx]

    P7, P14 = [], []
    for b in basis:
        b7, b14 = decompose_2form(b.astype(float), point)
        P7.append(col(b7))
        P14.append(col(b14))
    return np.array(P7).T, np.array(P14).T


# 3-forms

def sym2_basis(n: int) -> list[np.ndarray]:
    """Unnormalised coordinate basis E_ii, E_ij + E_ji (i < j)."""
    out = []
    for i in range(n):
        for j in range(i, n):
            E = np.zeros((n, n))
            E[i, j] = E[j, i] = 1.0
            out.append(E)
    return out


def compose_3form(h: np.ndarray, X: np.ndarray, point: G2Point) -> np.ndarray:
    """h ⋄ phi + X ⨼ psi."""
    return diamond(h, point.phi) + np.tensordot(X, point.psi, axes=([0], [0]))


_THREE_IDX = [(i, j, k) for i in range(7) for j in range(i + 1, 7) for k in range(j + 1, 7)]


def compose_matrix(point: G2Point) -> np.ndarray:
    """35x35 matrix of (h, X) -> compose_3form(h, X) in coordinate bases."""
    cols = []
    phi = np.asarray(point.phi, dtype=float)
    psi = np.asarray(point.psi, dtype=float)
    fp = G2Point(phi, psi, np.asarray(point.metric, dtype=float), float(point.volume))
    for E in sym2_basis(7):
        g3 = compose_3form(E, np.zeros(7), fp)
        cols.append([g3[t] for t in _THREE_IDX])
    for a in range(7):
        X = np.zeros(7)
        X[a] = 1.0
        g3 = compose_3form(np.zeros((7, 7)), X, fp)
        cols.append([g3[t] for t in _THREE_IDX])
    return np.array(cols).T


def decompose_3form(gamma: np.ndarray, point: G2Point):
    """Inverse of compose_3form: returns (f, h0, X).

    ``f`` is the Omega^3_1 coefficient (gamma = f phi + ...), ``h0`` the
    trace-free symmetric part and ``X`` the vector; ``h = (f/3) g + h0``.
    """
    rhs = np.array([float(gamma[t]) for t in _THREE_IDX])
    sol = np.linalg.solve(compose_matrix(point), rhs)
    h = np.zeros((7, 7))
    for c, E in zip(sol[:28], sym2_basis(7)):
        h += c * E
    X = sol[28:]
    f = 3.0 * np.trace(h) / 7.0
    h0 = h - np.trace(h) / 7.0 * np.eye(7)
    return f, h0, X


def three_form_type_parts(gamma: np.ndarray, point: G2Point):
    """Components of gamma in Omega^3_1, Omega^3_27 and Omega^3_7."""
    f, h0, X = decompose_3form(gamma, point)
    zero = np.zeros(7)
    return (compose_3form(f / 3.0 * np.eye(7), zero, point),
            compose_3form(h0, zero, point),
            compose_3form(np.zeros((7, 7)), X, point))


def omega3_1_coefficient(gamma: np.ndarray, point: G2Point) -> float:
    """<gamma, phi>/|phi|^2 via full contractions (|phi|^2 = 42)."""
    return float(np.sum(gamma * point.phi)) / float(np.sum(point.phi * point.phi))


# torsion

def torsion_from_nabla_phi(nabla_phi: np.ndarray, point: G2Point) -> np.ndarray:
    """T_iq = (1/24) nabla_i phi_jkl psi_qjkl.

    ``nabla_phi[i]`` is the 3-form nabla_{e_i} phi.
    """
    for i in range(nabla_phi.shape[0]):
        if not is_antisymmetric(nabla_phi[i], tol=1e-12):
            raise ValueError(f"slice {i} of nabla phi is not antisymmetric")
    T = np.einsum("ijkl,qjkl->iq", nabla_phi, point.psi)
    if T.dtype == object or np.issubdtype(T.dtype, np.integer):
        return T * Fraction(1, 24)
    return T / 24.0


def nabla_phi_from_torsion(T: np.ndarray, point: G2Point) -> np.ndarray:
    """nabla_i phi_jkl = T_ip psi_pjkl."""
    return np.einsum("ip,pjkl->ijkl", T, point.psi)


def torsion_decomposition(T: np.ndarray, point: G2Point) -> dict:
    """Split T into trace, trace-free symmetric, Omega^2_7 and Omega^2_14 parts."""
    T = np.asarray(T, dtype=float)
    sym = 0.5 * (T + T.T)
    skew = 0.5 * (T - T.T)
    trace_part = np.trace(sym) / 7.0 * np.eye(7)
    t7, t14 = decompose_2form(skew, point)
    return {"trace": trace_part, "sym0": sym - trace_part, "skew7": t7, "skew14": t14}


def ricci_from_torsion(T: np.ndarray, nabla_T: np.ndarray, point: G2Point) -> np.ndarray:
    """Ricci tensor from the torsion and its covariant derivative.

    ``nabla_T[p, i, q]`` is nabla_p T_iq; the frame is orthonormal.
    """
    phi, psi = point.phi, point.psi
    es = np.einsum
    a = es("piq,pjq->ij", nabla_T, phi)
    b = es("ipq,jpq->ij", nabla_T, phi)
    c = es("im,pq,pqmj->ij", T, T, psi)
    tr = np.trace(T)
    d = T @ T
    half = Fraction(1, 2) if T.dtype == object else 0.5
    return (-half * (a + a.T) - half * (b + b.T) - half * (c + c.T)
            + half * tr * (T + T.T) - half * (d + d.T))


def ricci_from_torsion_loops(T, nabla_T, point: G2Point) -> np.ndarray:
    """Term-by-term loop evaluation of the same formula (cross-check)."""
    phi = np.asarray(point.phi, dtype=float)
    psi = np.asarray(point.psi, dtype=float)
    T = np.asarray(T, dtype=float)
    dT = np.asarray(nabla_T, dtype=float)
    n = 7
    R = np.zeros((n, n))
    trT = sum(T[m, m] for m in range(n))
    for i in range(n):
        for j in range(n):
            s = 0.0
            for p in range(n):
                for q in range(n):
                    s -= 0.5 * (dT[p, i, q] * phi[p, j, q] + dT[p, j, q] * phi[p, i, q])
                    s -= 0.5 * (dT[i, p, q] * phi[j, p, q] + dT[j, p, q] * phi[i, p, q])
                    for m in range(n):
                        s -= 0.5 * (T[i, m] * T[p, q] * psi[p, q, m, j]
                                    + T[j, m] * T[p, q] * psi[p, q, m, i])
            s += 0.5 * trT * (T[i, j] + T[j, i])
            for m in range(n):
                s -= 0.5 * (T[i, m] * T[m, j] + T[j, m] * T[m, i])
            R[i, j] = s
    return R


# SU(2) triple on R^4 (basis e_0..e_3)

def su2_forms() -> tuple[list[np.ndarray], list[np.ndarray]]:
    def f(terms):
        comps = {}
        for (i, j), c in terms:
            sign, srt = _sort_sign((i, j))
            comps[srt] = comps.get(srt, 0) + sign * c
        return from_components(comps, 4, 2, dtype=np.int64)

    omega = [f([((0, 1), 1), ((2, 3), 1)]), f([((0, 2), 1), ((3, 1), 1)]),
             f([((0, 3), 1), ((1, 2), 1)])]
    omega_bar = [f([((0, 1), 1), ((2, 3), -1)]), f([((0, 2), 1), ((3, 1), -1)]),
                 f([((0, 3), 1), ((1, 2), -1)])]
    return omega, omega_bar


def _span_coeffs(target: np.ndarray, basis: list[np.ndarray]) -> tuple[np.ndarray, float]:
    A = np.array([b.reshape(-1) for b in basis], dtype=float).T
    coeffs, *_ = np.linalg.lstsq(A, target.reshape(-1).astype(float), rcond=None)
    return coeffs, float(np.max(np.abs(A @ coeffs - target.reshape(-1))))


def su2_algebra_check() -> dict:
    """Exact checks of the SU(2) triple and the diamond bracket on R^4.

    ``J_i`` is read off from omega_i(X, Y) = g(J_i X, Y).  With that reading
    the quaternionic relation holds as J_i X ⨼ omega_j = -X ⨼ omega_k; the
    sign is reported as ``J_relation_sign`` rather than asserted.
    """
    omega, omega_bar = su2_forms()
    J = [w.T.copy() for w in omega]
    vol = basis_form(4, (0, 1, 2, 3))
    report: dict = {}
    report["J_squared_is_minus_identity"] = all(
        np.array_equal(Ji @ Ji, -np.eye(4, dtype=np.int64)) for Ji in J)
    report["half_omega_squared_is_volume"] = all(
        np.array_equal(wedge(w, w), 2 * vol) for w in omega)
    # J_i X ⨼ omega_j = s X ⨼ omega_k for cyclic (i, j, k); record the sign s
    signs = set()
    for i, j, k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
        for a in range(4):
            X = np.zeros(4, dtype=np.int64)
            X[a] = 1
            lhs, rhs = (J[i] @ X) @ omega[j], X @ omega[k]
            signs.add(1 if np.array_equal(lhs, rhs) else -1 if np.array_equal(lhs, -rhs) else 0)
    report["J_relation_consistent"] = 0 not in signs and len(signs) == 1
    closes, closes_bar, cross_zero = True, True, True
    for a in omega:
        for b in omega:
            _, res = _span_coeffs(diamond(a, b), omega)
            closes &= res == 0.0
        for b in omega_bar:
            cross_zero &= not np.any(diamond(a, b))
            cross_zero &= not np.any(diamond(b, a))
    for a in omega_bar:
        for b in omega_bar:
            _, res = _span_coeffs(diamond(a, b), omega_bar)
            closes_bar &= res == 0.0
    report["omega_closes"] = bool(closes)
    report["omega_bar_closes"] = bool(closes_bar)
    report["cross_products_vanish"] = bool(cross_zero)
    report["passed"] = all(v for v in report.values())
    report["J_relation_sign"] = signs.pop() if len(signs) == 1 else 0
    return report
