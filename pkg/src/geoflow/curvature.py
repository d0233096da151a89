"""Finite-difference Riemannian geometry on uniform grids in dimension 1 to 3.

Fields carry the grid axes first, then tensor axes: a metric on an
``(N1, N2)`` grid has shape ``(N1, N2, 2, 2)``.  Periodic grids cover the
unit torus ``[0, 1)^n``; patches are non-periodic boxes with one-sided
second-order stencils at the boundary.

Conventions::

    Gamma^k_ij = 1/2 g^kl (d_j g_il + d_i g_jl - d_l g_ij)
    R^m_ijk    = d_i Gamma^m_jk - d_j Gamma^m_ik + Gamma^m_ia Gamma^a_jk - Gamma^m_ja Gamma^a_ik
    Rm_ijkl    = g_ml R^m_ijk,   Rc_jk = g^il Rm_ijkl,   R = g^jk Rc_jk

so the round sphere has positive scalar curvature.  Derivatives of Gamma use
the product rule with direct second differences of g, which keeps the
discrete linearisation identical to the discretised linearised formulas.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.ndimage import map_coordinates


@dataclass
class MetricGrid:
    """Metric components on a uniform grid.

    ``g`` has shape ``shape + (n, n)``.  Periodic grids use spacing ``1/N``
    on ``[0, 1)``; patches need explicit ``spacing`` and ``origin``.
    """

    g: np.ndarray
    periodic: bool = True
    spacing: tuple[float, ...] | None = None
    origin: tuple[float, ...] | None = None
    g0: np.ndarray | None = None
    n: int = field(init=False)
    shape: tuple[int, ...] = field(init=False)

    def __post_init__(self):
        g = np.asarray(self.g, dtype=float)
        n = g.shape[-1]
        if n not in (1, 2, 3) or g.ndim != n + 2 or g.shape[-2] != n:
            raise ValueError("metric array must have shape grid + (n, n) with n in 1..3")
        self.g = g
        self.n = n
        self.shape = g.shape[:n]
        if self.spacing is None:
            if not self.periodic:
                raise ValueError("patches need an explicit spacing")
            self.spacing = tuple(1.0 / s for s in self.shape)
        if self.origin is None:
            self.origin = (0.0,) * n
        _check_spd(g, "g")
        if self.g0 is not None:
            self.g0 = np.asarray(self.g0, dtype=float)
            if self.g0.shape != g.shape:
                raise ValueError("g0 must match g in shape")
            _check_spd(self.g0, "g0")

    def coords(self) -> list[np.ndarray]:
        axes = [self.origin[a] + self.spacing[a] * np.arange(self.shape[a]) for a in range(self.n)]
        return np.meshgrid(*axes, indexing="ij")

    def with_metric(self, g: np.ndarray, g0: np.ndarray | None = None) -> "MetricGrid":
        return MetricGrid(g, self.periodic, self.spacing, self.origin, g0)

    def interior_mask(self, margin: int = 2) -> np.ndarray:
        mask = np.ones(self.shape, dtype=bool)
        if not self.periodic and margin > 0:
            for a in range(self.n):
                idx = [slice(None)] * self.n
                idx[a] = slice(0, margin)
                mask[tuple(idx)] = False
                idx[a] = slice(-margin, None)
                mask[tuple(idx)] = False
        return mask

    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    # serialisation

    def to_dict(self) -> dict:
        fields = {"g": self.g.reshape(-1).tolist()}
        if self.g0 is not None:
            fields["g0"] = self.g0.reshape(-1).tolist()
        d = {"n": self.n, "shape": list(self.shape), "fields": fields}
        if not self.periodic:
            d["periodic"] = False
            d["spacing"] = list(self.spacing)
            d["origin"] = list(self.origin)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "MetricGrid":
        n, shape = int(d["n"]), tuple(int(s) for s in d["shape"])
        full = shape + (n, n)
        g = np.asarray(d["fields"]["g"], dtype=float).reshape(full)
        g0 = d["fields"].get("g0")
        g0 = None if g0 is None else np.asarray(g0, dtype=float).reshape(full)
        periodic = bool(d.get("periodic", True))
        spacing = tuple(d["spacing"]) if "spacing" in d else None
        origin = tuple(d["origin"]) if "origin" in d else None
        return cls(g, periodic, spacing, origin, g0)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, s: str) -> "MetricGrid":
        return cls.from_dict(json.loads(s))


def _check_spd(g: np.ndarray, name: str) -> None:
    if not np.allclose(g, np.swapaxes(g, -1, -2), atol=1e-12):
        raise ValueError(f"{name} is not symmetric at every node")
    if np.min(np.linalg.eigvalsh(g)) <= 0:
        raise ValueError(f"{name} is not positive definite at every node")


def flat_grid(shape: tuple[int, ...], metric: np.ndarray | None = None) -> MetricGrid:
    n = len(shape)
    m = np.eye(n) if metric is None else np.asarray(metric, dtype=float)
    return MetricGrid(np.broadcast_to(m, tuple(shape) + (n, n)).copy())


def conformal_grid(u: np.ndarray, base: MetricGrid | None = None, periodic: bool = True,
                   spacing=None, origin=None) -> MetricGrid:
    """Grid for e^{2u} delta sampled on u's grid."""
    n = u.ndim
    g = np.exp(2 * u)[..., None, None] * np.eye(n)
    return MetricGrid(g, periodic, spacing, origin)


def sphere_patch(N: int, L: float = 1.0) -> MetricGrid:
    """Unit round sphere in stereographic coordinates, 4/(1+|x|^2)^2 delta, on [-L/2, L/2]^2.

    Scalar curvature is 2 and Rc = g.
    """
    h = L / (N - 1)
    x = -L / 2 + h * np.arange(N)
    X1, X2 = np.meshgrid(x, x, indexing="ij")
    g = (4 / (1 + X1 ** 2 + X2 ** 2) ** 2)[..., None, None] * np.eye(2)
    return MetricGrid(g, periodic=False, spacing=(h, h), origin=(-L / 2, -L / 2))

# stencils

def d1(f: np.ndarray, axis: int, grid: MetricGrid) -> np.ndarray:
    """Second-order first derivative along a grid axis."""
    h = grid.spacing[axis]
    if grid.periodic:
        return (np.roll(f, -1, axis) - np.roll(f, 1, axis)) / (2 * h)
    return np.gradient(f, h, axis=axis, edge_order=2)


def d2(f: np.ndarray, a: int, b: int, grid: MetricGrid) -> np.ndarray:
    """Second derivative: compact 3-point on one axis, nested central otherwise."""
    if a != b:
        return d1(d1(f, a, grid), b, grid)
    h = grid.spacing[a]
    if grid.periodic:
        return (np.roll(f, -1, a) - 2 * f + np.roll(f, 1, a)) / (h * h)
    out = np.empty_like(f)
    sl = lambda s: tuple(slice(None) if ax != a else s for ax in range(f.ndim))
    out[sl(slice(1, -1))] = (f[sl(slice(2, None))] - 2 * f[sl(slice(1, -1))] + f[sl(slice(None, -2))]) / (h * h)
    out[sl(0)] = (2 * f[sl(0)] - 5 * f[sl(1)] + 4 * f[sl(2)] - f[sl(3)]) / (h * h)
    out[sl(-1)] = (2 * f[sl(-1)] - 5 * f[sl(-2)] + 4 * f[sl(-3)] - f[sl(-4)]) / (h * h)
    return out


def gradient(f: np.ndarray, grid: MetricGrid) -> np.ndarray:
    """d_l f stacked on a new axis placed right after the grid axes."""
    return np.stack([d1(f, a, grid) for a in range(grid.n)], axis=grid.n)


def hessian(f: np.ndarray, grid: MetricGrid) -> np.ndarray:
    """d_m d_l f with (m, l) axes right after the grid axes."""
    n = grid.n
    rows = []
    for m in range(n):
        rows.append(np.stack([d2(f, m, l, grid) for l in range(n)], axis=n))
    return np.stack(rows, axis=n)


# curvature

@dataclass
class CurvatureBundle:
    Gamma: np.ndarray  # [..., k, i, j]
    Rm: np.ndarray  # [..., i, j, k, l]
    Rc: np.ndarray  # [..., j, k]
    R: np.ndarray  # [...]


def _christoffel_from(ginv: np.ndarray, dg: np.ndarray) -> np.ndarray:
    # dg[..., l, i, j] = d_l g_ij
    comb = (np.einsum("...jil->...lij", dg) + np.einsum("...ijl->...lij", dg) - dg)
    return 0.5 * np.einsum("...kl,...lij->...kij", ginv, comb)


def christoffel(grid: MetricGrid, g: np.ndarray | None = None) -> np.ndarray:
    g = grid.g if g is None else g
    return _christoffel_from(np.linalg.inv(g), gradient(g, grid))


def christoffel_derivative(grid: MetricGrid, g: np.ndarray | None = None):
    """(Gamma, dGamma) with dGamma[..., m, k, i, j] = d_m Gamma^k_ij."""
    g = grid.g if g is None else g
    ginv = np.linalg.inv(g)
    dg = gradient(g, grid)
    ddg = hessian(g, grid)  # [..., m, l, i, j]
    Gamma = _christoffel_from(ginv, dg)
    # d_m of the bracket (d_j g_il + d_i g_jl - d_l g_ij)
    comb = (np.einsum("...mjil->...mlij", ddg) + np.einsum("...mijl->...mlij", ddg) - ddg)
    dGamma = (-np.einsum("...kp,...mpq,...qij->...mkij", ginv, dg, Gamma)
              + 0.5 * np.einsum("...kl,...mlij->...mkij", ginv, comb))
    return Gamma, dGamma


def curvature(grid: MetricGrid, g: np.ndarray | None = None) -> CurvatureBundle:
    g = grid.g if g is None else g
    ginv = np.linalg.inv(g)
    Gamma, dGamma = christoffel_derivative(grid, g)
    # R^m_ijk
    Rup = (np.einsum("...imjk->...mijk", dGamma) - np.einsum("...jmik->...mijk", dGamma)
           + np.einsum("...mia,...ajk->...mijk", Gamma, Gamma)
           - np.einsum("...mja,...aik->...mijk", Gamma, Gamma))
    Rm = np.einsum("...ml,...mijk->...ijkl", g, Rup)
    Rc = np.einsum("...il,...ijkl->...jk", ginv, Rm)
    R = np.einsum("...jk,...jk->...", ginv, Rc)
    return CurvatureBundle(Gamma, Rm, Rc, R)


# divergence and its adjoint

def covariant_derivative_sym2(h: np.ndarray, grid: MetricGrid, Gamma: np.ndarray | None = None) -> np.ndarray:
    """(nabla h)[..., p, q, k] = nabla_p h_qk."""
    Gamma = christoffel(grid) if Gamma is None else Gamma
    dh = gradient(h, grid)
    return (dh - np.einsum("...apq,...ak->...pqk", Gamma, h)
            - np.einsum("...apk,...qa->...pqk", Gamma, h))


def div(h: np.ndarray, grid: MetricGrid) -> np.ndarray:
    """(Div h)_k = g^pq nabla_p h_qk."""
    ginv = np.linalg.inv(grid.g)
    return np.einsum("...pq,...pqk->...k", ginv, covariant_derivative_sym2(h, grid))


def divstar(X: np.ndarray, grid: MetricGrid) -> np.ndarray:
    """(Div* X)_ij = -(nabla_i X_j + nabla_j X_i)/2 for a 1-form X."""
    Gamma = christoffel(grid)
    nX = gradient(X, grid) - np.einsum("...aij,...a->...ij", Gamma, X)
    return -0.5 * (nX + np.swapaxes(nX, -1, -2))


def integrate(f: np.ndarray, grid: MetricGrid) -> float:
    """Riemannian integral of a scalar field (rectangle rule)."""
    vol = np.sqrt(np.linalg.det(grid.g))
    return float(np.sum(f * vol) * grid.cell_volume())


def adjointness_sides(h: np.ndarray, X: np.ndarray, grid: MetricGrid) -> tuple[float, float]:
    """(integral <Div h, X>, integral <h, Div* X>); equal up to discretisation error."""
    ginv = np.linalg.inv(grid.g)
    lhs = integrate(np.einsum("...kl,...k,...l->...", ginv, div(h, grid), X), grid)
    rhs = integrate(np.einsum("...ia,...jb,...ij,...ab->...", ginv, ginv, h, divstar(X, grid)), grid)
    return lhs, rhs


# linearisations on a flat background

def _require_flat(grid: MetricGrid) -> np.ndarray:
    g = grid.g.reshape(-1, grid.n, grid.n)
    if np.max(np.abs(g - g[0])) > 0:
        raise ValueError("linearised formulas need a constant (flat) background metric")
    return np.linalg.inv(g[0])


def _hess_sym2(h: np.ndarray, grid: MetricGrid) -> np.ndarray:
    return hessian(h, grid)  # [..., a, b, i, j] = d_a d_b h_ij


def linearized_ricci_exact(h: np.ndarray, grid: MetricGrid) -> np.ndarray:
    """D Rc(h)_jk = 1/2 g^ab (d_a d_j h_bk + d_a d_k h_bj - d_a d_b h_jk - d_j d_k h_ab)."""
    gi = _require_flat(grid)
    H = _hess_sym2(h, grid)
    t1 = np.einsum("ab,...ajbk->...jk", gi, H)
    t2 = np.einsum("ab,...akbj->...jk", gi, H)
    t3 = np.einsum("ab,...abjk->...jk", gi, H)
    t4 = np.einsum("ab,...jkab->...jk", gi, H)
    return 0.5 * (t1 + t2 - t3 - t4)


def linearized_scalar_exact(h: np.ndarray, grid: MetricGrid) -> np.ndarray:
    """D(R g)(h) = (-Delta tr h + Div Div h) g on a flat background."""
    gi = _require_flat(grid)
    H = _hess_sym2(h, grid)
    lap_tr = np.einsum("ab,pq,...abpq->...", gi, gi, H)
    divdiv = np.einsum("ab,pq,...apqb->...", gi, gi, H)
    g = grid.g
    return (divdiv - lap_tr)[..., None, None] * g


def ricci_operator(grid: MetricGrid) -> np.ndarray:
    return curvature(grid).Rc


def scalar_times_metric(grid: MetricGrid) -> np.ndarray:
    return curvature(grid).R[..., None, None] * grid.g


def fd_linearization_oracle(operator: Callable[[MetricGrid], np.ndarray], grid: MetricGrid,
                            h: np.ndarray, eps: float = 1e-4) -> np.ndarray:
    """Central difference (op(g + eps h) - op(g - eps h)) / (2 eps)."""
    plus = operator(grid.with_metric(grid.g + eps * h))
    minus = operator(grid.with_metric(grid.g - eps * h))
    return (plus - minus) / (2 * eps)


def plane_wave(hbar: np.ndarray, k: np.ndarray, grid: MetricGrid) -> tuple[np.ndarray, np.ndarray]:
    """(h, c) with h = hbar cos(2 pi k.x) and c the cosine profile."""
    X = grid.coords()
    phase = 2 * np.pi * sum(k[a] * X[a] for a in range(grid.n))
    c = np.cos(phase)
    return c[..., None, None] * hbar, c


# DeTurck field

def deturck_field(grid: MetricGrid) -> np.ndarray:
    """W^k = g^ij (Gamma(g)^k_ij - Gamma(g0)^k_ij); g0 defaults to delta."""
    g0 = grid.g0 if grid.g0 is not None else np.broadcast_to(np.eye(grid.n), grid.g.shape)
    ginv = np.linalg.inv(grid.g)
    diff = christoffel(grid) - christoffel(grid, g0)
    return np.einsum("...ij,...kij->...k", ginv, diff)


def deturck_linearization_exact(h: np.ndarray, grid: MetricGrid) -> np.ndarray:
    """Y_l = 1/2 g^ab (d_a h_bl + d_b h_al - d_l h_ab) at a flat background."""
    gi = _require_flat(grid)
    dh = gradient(h, grid)  # [..., c, i, j]
    t = (np.einsum("ab,...abl->...l", gi, dh) + np.einsum("ab,...bal->...l", gi, dh)
         - np.einsum("ab,...lab->...l", gi, dh))
    return 0.5 * t


# harmonic map Laplacian

@dataclass
class TorusMap:
    """F(x) = W x + u(x) with integer winding matrix W and periodic u."""

    winding: np.ndarray  # (n, n) integers
    displacement: np.ndarray  # grid + (n,)

    def values(self, grid: MetricGrid) -> np.ndarray:
        X = np.stack(grid.coords(), axis=-1)
        return np.einsum("ai,...i->...a", self.winding, X) + self.displacement

    def jacobian(self, grid: MetricGrid) -> np.ndarray:
        """dF^a/dx^i with shape grid + (a, i)."""
        du = gradient(self.displacement, grid)  # [..., i, a]
        return self.winding + np.swapaxes(du, -1, -2)

    def second(self, grid: MetricGrid) -> np.ndarray:
        """d_i d_j F^a with shape grid + (a, i, j)."""
        H = hessian(self.displacement, grid)  # [..., i, j, a]
        return np.moveaxis(H, -1, grid.n)


def identity_map(grid: MetricGrid) -> TorusMap:
    return TorusMap(np.eye(grid.n, dtype=np.int64), np.zeros(grid.shape + (grid.n,)))


def sample_periodic(field_: np.ndarray, grid: MetricGrid, points: np.ndarray) -> np.ndarray:
    """Cubic-spline values of a periodic field at arbitrary points of the torus.

    ``field_`` has grid axes first; ``points`` has shape P + (n,).
    """
    n = grid.n
    idx = np.stack([(points[..., a] % 1.0) / grid.spacing[a] for a in range(n)], axis=0)
    tail = field_.shape[n:]
    flat = field_.reshape(grid.shape + (-1,))
    out = np.stack([map_coordinates(flat[..., c], idx, order=3, mode="grid-wrap")
                    for c in range(flat.shape[-1])], axis=-1)
    return out.reshape(points.shape[:-1] + tail)


def map_laplacian(F: TorusMap, grid: MetricGrid, target: MetricGrid | None = None) -> np.ndarray:
    """(Delta_{g,h} F)^a = g^ij (d_i d_j F^a - Gamma_g^k_ij d_k F^a + d_i F^b d_j F^c Gamma_h^a_bc(F)).

    ``target=None`` means the flat target metric.
    """
    if not grid.periodic:
        raise ValueError("map Laplacian is defined on periodic grids")
    ginv = np.linalg.inv(grid.g)
    J = F.jacobian(grid)
    out = F.second(grid) - np.einsum("...kij,...ak->...aij", christoffel(grid), J)
    if target is not None:
        Gh = sample_periodic(christoffel(target), target, F.values(grid))
        out = out + np.einsum("...bi,...cj,...abc->...aij", J, J, Gh)
    return np.einsum("...ij,...aij->...a", ginv, out)


def map_laplacian_pushforward_formula(F: TorusMap, grid: MetricGrid,
                                      target: MetricGrid | None = None) -> np.ndarray:
    """Evaluate ((F^-1)^* g)^ab (-Gamma_{(F^-1)^* g} + Gamma_h)^c_ab at F(x).

    F must be a diffeomorphism with identity winding.  The push-forward metric
    is sampled on the grid by inverting F node-wise with a fixed-point
    iteration, differentiated there and read back at F(x).
    """
    if not np.array_equal(F.winding, np.eye(grid.n)):
        raise ValueError("push-forward formula implemented for unit winding")
    Y = np.stack(grid.coords(), axis=-1)
    # x = F^{-1}(y) solves x = y - u(x)
    x = Y.copy()
    for _ in range(100):
        x_new = Y - sample_periodic(F.displacement, grid, x)
        if np.max(np.abs(x_new - x)) < 1e-14:
            x = x_new
            break
        x = x_new
    J = sample_periodic(F.jacobian(grid), grid, x)  # dF at F^{-1}(y)
    gx = sample_periodic(grid.g, grid, x)
    Jinv = np.linalg.inv(J)
    push = np.einsum("...ia,...ij,...jb->...ab", Jinv, gx, Jinv)
    push = 0.5 * (push + np.swapaxes(push, -1, -2))
    pgrid = grid.with_metric(push)
    gam = -christoffel(pgrid)
    if target is not None:
        gam = gam + christoffel(target)
    field_ = np.einsum("...ab,...cab->...c", np.linalg.inv(push), gam)
    if np.max(np.abs(F.displacement)) == 0:
        return field_
    return sample_periodic(field_, grid, F.values(grid))


def random_smooth_metric(grid_shape: tuple[int, ...], rng: np.random.Generator,
                         amplitude: float = 0.2, modes: int = 2) -> np.ndarray:
    """Smooth periodic SPD metric: identity plus a few low Fourier modes."""
    n = len(grid_shape)
    axes = [np.arange(s) / s for s in grid_shape]
    X = np.meshgrid(*axes, indexing="ij")
    g = np.broadcast_to(np.eye(n), tuple(grid_shape) + (n, n)).copy()
    for _ in range(modes):
        k = rng.integers(-2, 3, size=n)
        ph = rng.uniform(0, 2 * np.pi)
        A = rng.normal(size=(n, n))
        A = 0.5 * (A + A.T)
        A *= amplitude / max(1.0, np.abs(np.linalg.eigvalsh(A)).max()) / modes
        wave = np.sin(2 * np.pi * sum(k[a] * X[a] for a in range(n)) + ph)
        g += wave[..., None, None] * A
    return g
