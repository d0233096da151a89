"""Reduced Laplacian coflow for warped G2-structures over a 6-dimensional base.

The state is a triple of functions of one variable r: the warping modulus
ell, the phase theta (together F = ell e^{i theta}) and the radial length
element G.  The base is Calabi-Yau ("CY", ell fixed to 1) or nearly Kaehler
("NK").  The operator used throughout is

    Delta f = f''/G^2 + 6 ell' f'/(ell G^2) - f' G'/G^3,   |grad f|^2 = f'^2/G^2.

Derivatives come either from analytic jets (value, first, second derivative)
or from fourth-order finite differences on a circle or an interval.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import sympy

from ..errors import BlowUp, PositivityLost

GEOMETRIES = ("CY", "NK")
BLOWUP_LIMIT = 1e6


# finite differences

@lru_cache(maxsize=None)
def fd_weights(offsets: tuple[int, ...], order: int) -> np.ndarray:
    """Weights w with sum_j w_j f(x + o_j h) = h^order f^(order)(x) + O(h^len(offsets))."""
    o = np.asarray(offsets, dtype=float)
    V = np.vander(o, increasing=True).T
    rhs = np.zeros(len(o))
    rhs[order] = math.factorial(order)
    return np.linalg.solve(V, rhs)


def fd_derivative(f: np.ndarray, h: float, order: int, periodic: bool) -> np.ndarray:
    """Fourth-order accurate first or second derivative of samples ``f``.

    Stencils act on differences f[i+o] - f[i] (the weights sum to zero), so
    constants have exactly zero derivatives.
    """
    N = f.shape[0]
    if periodic:
        w = fd_weights((-2, -1, 0, 1, 2), order)
        out = sum(wj * (np.roll(f, -o) - f) for wj, o in zip(w, (-2, -1, 0, 1, 2)) if o)
        return out / h ** order
    width = 5 if order == 1 else 6
    if N < width:
        raise ValueError("too few nodes for fourth-order stencils")
    out = np.empty_like(f)
    for i in range(N):
        if 2 <= i <= N - 3:
            offs = (-2, -1, 0, 1, 2)
        elif i < 2:
            offs = tuple(range(-i, -i + width))
        else:
            offs = tuple(range(N - 1 - i - width + 1, N - i))
        w = fd_weights(offs, order)
        out[i] = sum(wj * (f[i + o] - f[i]) for wj, o in zip(w, offs) if o)
    return out / h ** order


# jets

@dataclass
class Jet:
    """A function sampled with its first two derivatives."""

    v: np.ndarray
    d1: np.ndarray
    d2: np.ndarray

    @classmethod
    def constant(cls, c, like: np.ndarray) -> "Jet":
        return cls(np.full_like(like, c, dtype=float), np.zeros_like(like, dtype=float),
                   np.zeros_like(like, dtype=float))

    @classmethod
    def from_expr(cls, expr, r: np.ndarray, symbol: str = "r") -> "Jet":
        """Exact derivatives of a sympy expression (or string) in ``symbol``."""
        x = sympy.Symbol(symbol)
        e = sympy.sympify(expr) if isinstance(expr, str) else expr
        fs = [sympy.lambdify(x, d, "numpy") for d in (e, sympy.diff(e, x), sympy.diff(e, x, 2))]
        return cls(*(np.broadcast_to(np.asarray(f(r), dtype=float), r.shape).copy() for f in fs))

    @classmethod
    def from_samples(cls, f: np.ndarray, h: float, periodic: bool) -> "Jet":
        f = np.asarray(f, dtype=float)
        return cls(f, fd_derivative(f, h, 1, periodic), fd_derivative(f, h, 2, periodic))

    def __add__(self, o):
        if isinstance(o, Jet):
            return Jet(self.v + o.v, self.d1 + o.d1, self.d2 + o.d2)
        return Jet(self.v + o, self.d1, self.d2)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.v, -self.d1, -self.d2)

    def __sub__(self, o):
        return self + (-o)

    def __rsub__(self, o):
        return (-self) + o

    def __mul__(self, o):
        if isinstance(o, Jet):
            return Jet(self.v * o.v, self.d1 * o.v + self.v * o.d1,
                       self.d2 * o.v + 2 * self.d1 * o.d1 + self.v * o.d2)
        return Jet(self.v * o, self.d1 * o, self.d2 * o)

    __rmul__ = __mul__

    def __pow__(self, p: int):
        return Jet(self.v ** p, p * self.v ** (p - 1) * self.d1,
                   p * (p - 1) * self.v ** (p - 2) * self.d1 ** 2 + p * self.v ** (p - 1) * self.d2)

    def _compose(self, f, df, ddf):
        return Jet(f, df * self.d1, ddf * self.d1 ** 2 + df * self.d2)

    def sin(self):
        return self._compose(np.sin(self.v), np.cos(self.v), -np.sin(self.v))

    def cos(self):
        return self._compose(np.cos(self.v), -np.sin(self.v), -np.cos(self.v))


# state

@dataclass
class WarpedState:
    """Warped-product data on a uniform r grid.

    ``r`` holds the nodes; on a circle the period is ``L`` (nodes r_j = j L / N);
    on an interval the endpoints are part of the grid and stay frozen under flow.
    """

    geometry: str
    r: np.ndarray
    ell: Jet
    theta: Jet
    G: Jet
    periodic: bool = True
    L: float | None = None
    validate: bool = field(default=True, repr=False)

    def __post_init__(self):
        if self.geometry not in GEOMETRIES:
            raise ValueError(f"geometry must be one of {GEOMETRIES}")
        if self.validate:
            check_positivity(self)
            if self.geometry == "CY" and np.max(np.abs(self.ell.v - 1.0)) > 0:
                raise ValueError("CY geometry requires ell = 1")

    @property
    def h(self) -> float:
        return float(self.r[1] - self.r[0])

    @classmethod
    def from_arrays(cls, geometry: str, r: np.ndarray, ell, theta, G, periodic: bool = True,
                    L: float | None = None, validate: bool = True) -> "WarpedState":
        r = np.asarray(r, dtype=float)
        h = float(r[1] - r[0])
        jets = [Jet.from_samples(np.broadcast_to(np.asarray(f, dtype=float), r.shape), h, periodic)
                for f in (ell, theta, G)]
        return cls(geometry, r, *jets, periodic=periodic, L=L, validate=validate)

    @classmethod
    def from_exprs(cls, geometry: str, r: np.ndarray, ell: str, theta: str, G: str,
                   periodic: bool = True, L: float | None = None) -> "WarpedState":
        r = np.asarray(r, dtype=float)
        return cls(geometry, r, Jet.from_expr(ell, r), Jet.from_expr(theta, r), Jet.from_expr(G, r),
                   periodic=periodic, L=L)

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.ell.v, self.theta.v, self.G.v

    def replace(self, ell: np.ndarray, theta: np.ndarray, G: np.ndarray, validate: bool = True) -> "WarpedState":
        return WarpedState.from_arrays(self.geometry, self.r, ell, theta, G, self.periodic, self.L, validate)


def circle_grid(N: int, L: float = 1.0) -> np.ndarray:
    return L * np.arange(N) / N


def interval_grid(N: int, a: float, b: float) -> np.ndarray:
    return np.linspace(a, b, N)


def check_positivity(state: WarpedState) -> None:
    if np.min(state.ell.v) <= 0 or not np.all(np.isfinite(state.ell.v)):
        raise PositivityLost(f"ell lost positivity (min {float(np.min(state.ell.v))!r})")
    if np.min(state.G.v) <= 0 or not np.all(np.isfinite(state.G.v)):
        raise PositivityLost(f"G lost positivity (min {float(np.min(state.G.v))!r})")


def _as_jet(f, state: WarpedState) -> Jet:
    if isinstance(f, Jet):
        return f
    return Jet.from_samples(np.asarray(f, dtype=float), state.h, state.periodic)


def warped_laplacian(f, state: WarpedState) -> np.ndarray:
    """f''/G^2 + 6 ell' f'/(ell G^2) - f' G'/G^3."""
    f = _as_jet(f, state)
    G, ell = state.G, state.ell
    return f.d2 / G.v ** 2 + 6 * ell.d1 * f.d1 / (ell.v * G.v ** 2) - f.d1 * G.d1 / G.v ** 3


def warped_gradsq(f, state: WarpedState) -> np.ndarray:
    f = _as_jet(f, state)
    return f.d1 ** 2 / state.G.v ** 2


def coflow_rhs(state: WarpedState) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(d ell/dt, d theta/dt, dG/dt); interval endpoints are held fixed."""
    check_positivity(state)
    ell, th, G = state.ell, state.theta, state.G
    if state.geometry == "CY":
        dl = np.zeros_like(ell.v)
        dth = -warped_laplacian(th, state)
        dG = 9 * G.v * warped_gradsq(th, state)
    else:
        dl = -warped_laplacian(ell, state) + 3 * (1 + warped_gradsq(ell, state)) / ell.v
        dth = -warped_laplacian(th, state) + np.sin(6 * th.v) / ell.v ** 2
        dG = (9 * warped_gradsq(th, state) + 3 * np.sin(3 * th.v) ** 2 / ell.v ** 2) * G.v
    if not state.periodic:
        for arr in (dl, dth, dG):
            arr[0] = arr[-1] = 0.0
    return dl, dth, dG


def stable_dt(state: WarpedState, safety: float = 0.25) -> float:
    """safety * dr^2 * min(G)^2."""
    return safety * state.h ** 2 * float(np.min(state.G.v)) ** 2


@dataclass
class Trajectory:
    times: list = field(default_factory=list)
    states: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)
    status: str = "completed"
    reason: str = ""
    mode_growth: dict = field(default_factory=dict)
    error: Exception | None = None


def _mode_amplitudes(theta: np.ndarray, modes: int) -> np.ndarray:
    spec = np.fft.rfft(theta - theta.mean()) / theta.shape[0]
    return np.abs(spec[1:modes + 1])


def coflow_integrate(state: WarpedState, t_final: float, dt: float | None = None,
                     record_every: int = 1, modes: int = 8, raise_on_failure: bool = False) -> Trajectory:
    """Classical RK4 in time with per-step diagnostics.

    Halts (status ``positivity_lost`` or ``blow_up``) instead of regularising;
    the last good state is then the final recorded one.
    Each diagnostics row holds t, the sup norm of the right-hand side, min ell,
    min G and the sup norm of the state.
    """
    bound = stable_dt(state)
    if dt is None:
        dt = bound
    elif dt > bound * (1 + 1e-12):
        raise ValueError(f"dt={dt!r} exceeds the stability bound {bound!r}")
    steps = max(1, int(math.ceil(t_final / dt - 1e-12)))
    dt = t_final / steps
    traj = Trajectory()
    amp0 = _mode_amplitudes(state.theta.v, modes) if state.periodic else None
    cur = state
    t = 0.0
    traj.times.append(t)
    traj.states.append(cur.arrays())

    def rhs(s):
        return np.array(coflow_rhs(s))

    def shifted(base, k, c):
        y = np.array(base.arrays()) + c * k
        return base.replace(*y, validate=False)

    t_good = 0.0
    try:
        for step in range(steps):
            k1 = rhs(cur)
            k2 = rhs(shifted(cur, k1, dt / 2))
            k3 = rhs(shifted(cur, k2, dt / 2))
            k4 = rhs(shifted(cur, k3, dt))
            y = np.array(cur.arrays()) + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            t = (step + 1) * dt
            sup = float(np.max(np.abs(y)))
            if not np.isfinite(sup) or sup > BLOWUP_LIMIT:
                raise BlowUp(f"state sup norm {sup!r} exceeded {BLOWUP_LIMIT} at t={t!r}")
            nxt = cur.replace(*y, validate=False)
            check_positivity(nxt)
            cur, t_good = nxt, t
            traj.diagnostics.append({"t": t, "rhs_sup": float(np.max(np.abs(k1))),
                                     "min_ell": float(np.min(cur.ell.v)),
                                     "min_G": float(np.min(cur.G.v)), "state_sup": sup})
            if (step + 1) % record_every == 0 or step + 1 == steps:
                traj.times.append(t)
                traj.states.append(cur.arrays())
    except (PositivityLost, BlowUp) as exc:
        traj.status = "positivity_lost" if isinstance(exc, PositivityLost) else "blow_up"
        traj.reason, traj.error = str(exc), exc
        if traj.times[-1] != t_good:
            traj.times.append(t_good)
            traj.states.append(cur.arrays())
        if raise_on_failure:
            raise
    if amp0 is not None:
        amp1 = _mode_amplitudes(traj.states[-1][1], modes)
        traj.mode_growth = {m + 1: (float(amp1[m] / amp0[m]) if amp0[m] > 1e-14 else None)
                            for m in range(len(amp0))}
    return traj


# torsion and solitons

def warped_torsion_forms(state: WarpedState) -> tuple[np.ndarray, np.ndarray]:
    """(tau0, dr-coefficient of tau1)."""
    ell, th, G = state.ell, state.theta, state.G
    if state.geometry == "CY":
        tau0 = 12.0 * th.d1 / (7.0 * G.v)
        tau1 = ell.d1 / ell.v
    else:
        tau0 = 12.0 / 7.0 * (th.d1 / G.v + 2 * np.sin(3 * th.v) / ell.v)
        tau1 = (ell.d1 - G.v * np.cos(3 * th.v)) / ell.v
    return tau0, tau1


def nk_soliton_residual(state: WarpedState, s, lam: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Residuals of the reduced nearly-Kaehler soliton system (k' = s).

    r1 = ell' - cos 3 theta
    r2 = (ell^3 sin 3 theta)'' - 12 ell sin 3 theta - lam ell^3 sin 3 theta - (s ell^3 sin 3 theta)'
    r3 = (ell^3 cos 3 theta)' - 3 ell^2 - lam ell^4 / 4 - s ell^3 cos 3 theta
    """
    ell = state.ell
    s = _as_jet(s, state)
    three_theta = 3 * state.theta
    sn, cs = three_theta.sin(), three_theta.cos()
    l3 = ell ** 3
    A = l3 * sn
    Bc = l3 * cs
    sA = s * A
    r1 = ell.d1 - cs.v
    r2 = A.d2 - 12 * ell.v * sn.v - lam * A.v - sA.d1
    r3 = Bc.d1 - 3 * ell.v ** 2 - 0.25 * lam * ell.v ** 4 - s.v * Bc.v
    return r1, r2, r3


def cy_soliton_family(b: float, c: float, r: np.ndarray) -> tuple[Jet, Jet]:
    """theta = (2/3) arctan(c e^{b r}), s = b (1 - c^2 e^{2br}) / (1 + c^2 e^{2br}), as jets."""
    x = sympy.Symbol("r")
    w = sympy.Float(c) * sympy.exp(sympy.Float(b) * x)
    theta = sympy.Rational(2, 3) * sympy.atan(w)
    s = sympy.Float(b) * (1 - w ** 2) / (1 + w ** 2)
    return Jet.from_expr(theta, r), Jet.from_expr(s, r)


# (p, q) in D = p d/dr[(3 theta'/(2G)) e^{3 i theta}] - q d/dr[(i s G/2) e^{3 i theta}];
# chosen by calibrate_cy_convention over the four sign choices
CY_CONVENTION = (1, -1)
PRINTED_CONVENTION = (1, 1)


def cy_first_integral(theta: Jet, s: Jet, G: Jet, convention=CY_CONVENTION) -> np.ndarray:
    """E = (p 3 theta'/(2G) - q i s G/2) e^{3 i theta}; the residual is E'."""
    p, q = convention
    A = p * 1.5 * theta.d1 / G.v - q * 0.5j * s.v * G.v
    return A * np.exp(3j * theta.v)


def cy_soliton_residual(theta, s, G, r: np.ndarray, periodic: bool = False,
                        convention=CY_CONVENTION) -> np.ndarray:
    """D = d/dr of the first integral, via the jets' derivatives (complex array)."""
    h = float(r[1] - r[0])
    theta, s, G = (f if isinstance(f, Jet) else Jet.from_samples(f, h, periodic) for f in (theta, s, G))
    p, q = convention
    A = p * 1.5 * theta.d1 / G.v - q * 0.5j * s.v * G.v
    dA = (p * 1.5 * (theta.d2 / G.v - theta.d1 * G.d1 / G.v ** 2)
          - q * 0.5j * (s.d1 * G.v + s.v * G.d1))
    return (dA + 3j * theta.d1 * A) * np.exp(3j * theta.v)


def calibrate_cy_convention(b: float, c: float, r: np.ndarray) -> dict:
    """Residual sup norm of the family (with G = 1) for each of the four sign choices."""
    theta, s = cy_soliton_family(b, c, r)
    G = Jet.constant(1.0, r)
    out = {}
    for p in (1, -1):
        for q in (1, -1):
            out[(p, q)] = float(np.max(np.abs(cy_soliton_residual(theta, s, G, r, convention=(p, q)))))
    best = min(out, key=out.get)
    return {"residuals": out, "best": best}


def cy_gauge_G(theta: Jet, s: Jet, re_C: float = 0.0, convention=CY_CONVENTION) -> np.ndarray:
    """Pointwise G > 0 solving Re E = re_C.

    Multiplying Re E = re_C by G gives
    (q s sin(3 theta)/2) G^2 - re_C G + p (3 theta'/2) cos(3 theta) = 0.
    Where both the quadratic and constant coefficients vanish (a removable 0/0)
    G is filled by linear interpolation from the neighbouring nodes.
    """
    p, q = convention
    a = q * 0.5 * s.v * np.sin(3 * theta.v)
    c0 = p * 1.5 * theta.d1 * np.cos(3 * theta.v)
    G = np.full_like(a, np.nan)
    with np.errstate(invalid="ignore", divide="ignore"):
        if re_C == 0.0:
            G = np.sqrt(-c0 / a)
        else:
            disc = np.sqrt(re_C ** 2 - 4 * a * c0)
            roots = np.stack([(re_C + disc) / (2 * a), (re_C - disc) / (2 * a)])
            roots = np.where(roots > 0, roots, -np.inf)
            G = np.max(roots, axis=0)
            linear = np.abs(a) < 1e-300
            G = np.where(linear, c0 / re_C, G)
    bad = ~np.isfinite(G) | (G <= 0)
    if np.all(bad):
        raise ValueError("no positive gauge solution")
    if np.any(bad):
        idx = np.arange(G.shape[0])
        G = G.copy()
        G[bad] = np.interp(idx[bad], idx[~bad], G[~bad])
    return G
