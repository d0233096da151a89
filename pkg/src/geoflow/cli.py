"""Command-line front end: ``geoflow <command> [--config FILE] [--output PREFIX] [--seed N] [--quiet]``.

Exit codes: 0 success, 1 a checked property failed (selftest, identities),
2 invalid configuration, 3 numerical failure (a JSON error report is written
to stderr and, with ``--output``, to ``PREFIX + "error.json"``).
"""

from __future__ import annotations

import os

_THREADS = os.environ.get("GEOFLOW_THREADS")
if _THREADS:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(_var, _THREADS)

import argparse  # noqa: E402
import io  # noqa: E402
import json  # noqa: E402
import math  # noqa: E402
import sys  # noqa: E402
from concurrent.futures import ThreadPoolExecutor  # noqa: E402
from fractions import Fraction  # noqa: E402
from typing import Any, Callable  # noqa: E402

import numpy as np  # noqa: E402
import sympy  # noqa: E402

from . import acceptance  # noqa: E402
from . import curvature as C  # noqa: E402
from . import g2  # noqa: E402
from . import symbols as S  # noqa: E402
from . import tensors  # noqa: E402
from .errors import ConfigError, NumericalFailure  # noqa: E402
from .flows import einstein as E  # noqa: E402
from .flows import hodge as H  # noqa: E402
from .flows import warped as W  # noqa: E402

ANY = object()

# defaults double as the schema: a key's default fixes its accepted type
SCHEMAS: dict[str, dict[str, Any]] = {
    "identities": {"flip": None},
    "symbols": {"n": 7, "xi": None, "b": 0.0, "deturck": True},
    "rb-scan": {"n": 3, "b_min": -4.0, "b_max": 1.0, "step": 0.01, "form": "bound"},
    "dgk-check": {"a": 0.0, "lambda": 0.0, "b1": 0.0, "b2": 0.0},
    "curvature": {"case": "sphere", "N": 64, "L": 1.0, "amplitude": 0.2, "grid_file": None,
                  "linearization": True, "torus_checks": True},
    "hodge-demo": {"n": 2, "k": 1, "K": 8, "t_final": 0.05, "steps": 10},
    "einstein-flow": {"lambda": 1.0, "t_final": 0.25, "steps": 5, "N": 128},
    "coflow": {"geometry": "CY", "N": 64, "L": 1.0, "domain": "circle", "interval": None, "dt": None,
               "t_final": 0.001, "record_every": 1, "modes": 8, "initial": ANY},
    "soliton-scan": {"family": "cy", "b_values": [1.0], "c_values": [1.0], "r_min": -3.0, "r_max": 3.0,
                     "N": 601, "ell": "r", "theta": "0", "s": "0", "G": "1", "lambda_values": [0.0]},
    "selftest": {"mutate": False},
}
COMMANDS = tuple(SCHEMAS)
RUNCONFIG_KEYS = {"command", "params", "output", "seed"}
DEFAULT_COFLOW_INITIAL = {"ell": "1", "theta": "0.3 + 0.001*sin(2*pi*r)", "G": "1"}

# module operations each command reaches (checked by the test suite)
OPERATIONS: dict[str, list[str]] = {
    "identities": ["g2.standard_structure", "g2.contraction_identity_residual", "g2.metric_from_3form",
                   "tensors.hodge_star_flat", "g2.cross_product", "g2.diamond", "g2.decompose_2form",
                   "g2.decompose_3form", "g2.compose_3form", "g2.torsion_from_nabla_phi",
                   "g2.ricci_from_torsion", "g2.su2_algebra_check"],
    "symbols": ["S.symbol_A", "S.symbol_B_ricci", "S.breve_projection", "S.symbol_Q_deturck",
                "S.symbol_scalar_g", "S.rb_symbol", "S.parabolicity_report", "S.rb_parabolic_interval",
                "S.bianchi_operators"],
    "rb-scan": ["S.rb_scan", "S.rb_parabolic_interval"],
    "dgk-check": ["S.dgk_admissible"],
    "curvature": ["C.christoffel", "C.curvature", "C.div", "C.divstar", "C.linearized_ricci_exact",
                  "C.fd_linearization_oracle", "C.linearized_scalar_exact", "C.deturck_field",
                  "C.map_laplacian"],
    "hodge-demo": ["H.hodge_heat_step", "H.hodge_heat_limit", "H.hodge_decompose"],
    "einstein-flow": ["E.einstein_flow"],
    "coflow": ["W.warped_laplacian", "W.warped_gradsq", "W.coflow_rhs", "W.coflow_integrate",
               "W.warped_torsion_forms"],
    "soliton-scan": ["W.cy_soliton_family", "W.cy_soliton_residual", "W.nk_soliton_residual"],
    "selftest": [],
}

CSV_FORMATS = {
    "identities": "identity,residual",
    "rb-scan": "b,min_sym_eig,positive",
    "curvature": "i,j,R (scalar curvature per node; other dimensions use i0,...,R)",
    "hodge-demo": "t,l2_norm,closedness,harmonic_norm,exact_norm,coexact_norm",
    "einstein-flow": "t,c,flow_residual",
    "coflow": "t,ell_sup,theta_sup,G_sup,min_ell,min_G,rhs_sup,tau0_sup,tau1_sup",
    "soliton-scan": "cy: b,c,gauge_G_deviation,residual_sup | nk: lambda,r1_sup,r2_sup,r3_sup",
    "selftest": "criterion,name,passed,runtime_seconds (timing file)",
}


# formatting

def fmt(x) -> str:
    """CSV cell: 17 significant digits for floats, exact text otherwise."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if x.is_integer() and abs(x) < 1e16:
            return str(int(x))
        return format(x, ".17g")
    return str(x)


def csv_text(header: str, rows) -> str:
    buf = io.StringIO()
    buf.write(header + "\n")
    for row in rows:
        buf.write(",".join(fmt(v) for v in row) + "\n")
    return buf.getvalue()


def to_jsonable(x):
    if isinstance(x, dict):
        return {str(k): to_jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [to_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return to_jsonable(x.tolist())
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, Fraction):
        return int(x) if x.denominator == 1 else str(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    if isinstance(x, complex):
        return [x.real, x.imag]
    return x


def json_text(obj) -> str:
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


class Artifacts:
    """Named outputs of one run; written under a prefix or echoed to stdout."""

    def __init__(self):
        self.files: dict[str, str] = {}
        self.primary: str | None = None

    def add(self, name: str, text: str, primary: bool = False):
        self.files[name] = text
        if primary or self.primary is None:
            self.primary = name

    def emit(self, prefix: str | None, quiet: bool, out=sys.stdout):
        if prefix is None:
            if not quiet and self.primary is not None:
                out.write(self.files[self.primary])
            return
        d = os.path.dirname(prefix)
        if d:
            os.makedirs(d, exist_ok=True)
        for name, text in self.files.items():
            with open(prefix + name, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
        if not quiet:
            for name in self.files:
                out.write(f"wrote {prefix + name}\n")


# configuration

def _check_type(cmd: str, key: str, value, default):
    if default is ANY or default is None or value is None:
        return value
    ok = True
    if isinstance(default, bool):
        ok = isinstance(value, bool)
    elif isinstance(default, int):
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif isinstance(default, float):
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
        value = float(value) if ok else value
    elif isinstance(default, str):
        ok = isinstance(value, str)
    elif isinstance(default, list):
        ok = isinstance(value, list)
    if not ok:
        raise ConfigError(f"{cmd}: parameter {key!r} has the wrong type ({type(value).__name__})")
    return value


def validate_params(cmd: str, raw: dict | None) -> dict:
    if cmd not in SCHEMAS:
        raise ConfigError(f"unknown command {cmd!r}")
    raw = {} if raw is None else raw
    if not isinstance(raw, dict):
        raise ConfigError("params must be a JSON object")
    schema = SCHEMAS[cmd]
    unknown = sorted(set(raw) - set(schema))
    if unknown:
        raise ConfigError(f"{cmd}: unknown parameter(s) {unknown}")
    out = {}
    for key, default in schema.items():
        val = raw.get(key, None if default is ANY else default)
        out[key] = _check_type(cmd, key, val, default)
    return out


def load_config(path: str | None, command: str | None) -> tuple[str, dict, str | None, int | None]:
    """Returns (command, params, output, seed) from a config file and/or the positional command."""
    data: dict = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
    if "command" in data or "params" in data:
        unknown = sorted(set(data) - RUNCONFIG_KEYS)
        if unknown:
            raise ConfigError(f"unknown config key(s) {unknown}")
        cfg_cmd = data.get("command")
        if command is not None and cfg_cmd is not None and cfg_cmd != command:
            raise ConfigError(f"config command {cfg_cmd!r} does not match {command!r}")
        cmd = command or cfg_cmd
        params, output, seed = data.get("params"), data.get("output"), data.get("seed")
        if seed is not None and (not isinstance(seed, int) or isinstance(seed, bool)):
            raise ConfigError("seed must be an integer")
        if output is not None and not isinstance(output, str):
            raise ConfigError("output must be a string")
    else:
        cmd, params, output, seed = command, data, None, None
    if cmd is None:
        raise ConfigError("no command given")
    return cmd, validate_params(cmd, params), output, seed


# commands

def cmd_identities(p: dict, seed: int, art: Artifacts) -> int:
    flip = tuple(p["flip"]) if p["flip"] is not None else None
    point = g2.standard_structure(flip)
    res = [g2.contraction_identity_residual(k, point) for k in range(1, 7)]
    art.add("identities.csv", csv_text(CSV_FORMATS["identities"], [(k, r) for k, r in enumerate(res, 1)]),
            primary=True)
    phi2, psi2 = g2.full_traces(point)
    extra: dict = {"phi_trace": phi2, "psi_trace": psi2}
    try:
        _structure_checks(point, np.random.default_rng(seed), extra)
    except (NumericalFailure, np.linalg.LinAlgError) as exc:
        extra["structure_check_error"] = f"{type(exc).__name__}: {exc}"
    art.add("identities_extra.json", json_text(extra))
    return 0 if all(r == 0 for r in res) else 1


def _structure_checks(point: g2.G2Point, rng, extra: dict) -> None:
    g, vol = g2.metric_from_3form(point.phi)
    extra["metric_is_identity"] = bool(np.array_equal(np.asarray(g, dtype=float), np.eye(7)))
    extra["volume"] = vol
    extra["hodge_star_residual"] = float(np.abs(tensors.hodge_star_flat(point.phi) - point.psi).max())
    X, Y = rng.normal(size=(2, 7))
    XY = g2.cross_product(X, Y, point)
    extra["cross_product_norm_residual"] = float(abs(XY @ XY - ((X @ X) * (Y @ Y) - (X @ Y) ** 2)))
    beta = rng.normal(size=(7, 7))
    b7, b14 = g2.decompose_2form(beta - beta.T, point)
    extra["two_form_split_residual"] = float(np.abs(b7 + b14 - (beta - beta.T)).max())
    extra["diamond_omega2_14_on_phi"] = float(np.abs(g2.diamond(b14, point.phi)).max())
    h = rng.normal(size=(7, 7))
    h = h + h.T
    V = rng.normal(size=7)
    f, h0, X3 = g2.decompose_3form(g2.compose_3form(h, V, point), point)
    extra["three_form_round_trip"] = float(max(abs(f - 3 * np.trace(h) / 7),
                                               np.abs(h0 - (h - np.trace(h) / 7 * np.eye(7))).max(),
                                               np.abs(X3 - V).max()))
    T = rng.normal(size=(7, 7))
    extra["torsion_round_trip"] = float(np.abs(
        g2.torsion_from_nabla_phi(g2.nabla_phi_from_torsion(T, point), point) - T).max())
    lam = Fraction(1, 2)
    Tl = np.array([[lam if i == j else Fraction(0) for j in range(7)] for i in range(7)], dtype=object)
    Rc = g2.ricci_from_torsion(Tl, np.full((7, 7, 7), Fraction(0), dtype=object), point)
    extra["nearly_parallel_ricci_is_6_lambda_squared"] = bool(
        all(Rc[i, j] == (6 * lam * lam if i == j else 0) for i in range(7) for j in range(7)))
    extra["su2"] = g2.su2_algebra_check()


def cmd_symbols(p: dict, seed: int, art: Artifacts) -> int:
    n = p["n"]
    if n < 2:
        raise ConfigError("n must be at least 2")
    xi = list(range(1, n + 1)) if p["xi"] is None else p["xi"]
    if len(xi) != n:
        raise ConfigError("xi must have n entries")
    rng = np.random.default_rng(seed)
    A = S.symbol_A(xi)
    B = S.symbol_B_ricci(xi, n)
    Q = S.symbol_Q_deturck(xi, n)
    Rg = S.symbol_scalar_g(xi, n)
    h = rng.normal(size=(n, n))
    hb = S.breve_projection(h + h.T, S.prepare_xi(xi))
    report = {
        "n": n, "xi": xi,
        "rank_A": int(np.linalg.matrix_rank(A)),
        "B_plus_Q_minus_identity": float(np.abs(B.matrix + Q.matrix - np.eye(B.matrix.shape[0])).max()),
        "B_full": S.parabolicity_report(B),
        "B_on_complement_of_im_A": S.parabolicity_report(B, S.orthogonal_complement_of_A(xi)),
        "scalar_symbol_min_sym_eig": S.parabolicity_report(Rg)["min_sym_eig"],
        "breve_orthogonal_to_xi": float(np.abs(hb @ S.prepare_xi(xi)).max()),
        "rb_parabolic_interval": S.rb_parabolic_interval(n),
        "rb_symbol_positive_interval": S.rb_symbol_positive_interval(n),
    }
    if all(isinstance(v, int) for v in xi):
        report["exact_kernel"] = S.exact_kernel_report(xi)
    report["rb_symbol"] = S.parabolicity_report(S.rb_symbol(xi, n, p["b"], p["deturck"]))
    report["rb_symbol"]["b"] = p["b"]
    if n == 7:
        e = np.eye(7, dtype=np.int64)
        b1, b2 = S.bianchi_operators(np.eye(7, dtype=np.int64), e[1], e[0], g2.standard_structure())
        report["bianchi_example"] = {"h": "identity", "X": "e2", "xi": "e1", "B1": b1, "B2": b2}
    art.add("symbols.json", json_text(report), primary=True)
    return 0


def cmd_rb_scan(p: dict, seed: int, art: Artifacts) -> int:
    if p["form"] not in ("bound", "symbol"):
        raise ConfigError("form must be 'bound' or 'symbol'")
    rows = S.rb_scan(p["n"], p["b_min"], p["b_max"], p["step"], form=p["form"])
    art.add("rb_scan.csv", csv_text(CSV_FORMATS["rb-scan"], rows), primary=True)
    summary = {"n": p["n"], "form": p["form"], "sign_changes": S.scan_endpoints(rows),
               "rb_parabolic_interval": S.rb_parabolic_interval(p["n"]),
               "rb_symbol_positive_interval": S.rb_symbol_positive_interval(p["n"])}
    art.add("rb_scan_summary.json", json_text(summary))
    return 0


def cmd_dgk(p: dict, seed: int, art: Artifacts) -> int:
    rep = S.dgk_admissible(S.FlowCoefficients(p["a"], p["lambda"], p["b1"], p["b2"]))
    art.add("dgk.json", json_text(rep), primary=True)
    return 0


def _hyperbolic_patch(N: int, L: float) -> C.MetricGrid:
    h = L / (N - 1)
    x = -L / 2 + h * np.arange(N)
    X1, X2 = np.meshgrid(x, x, indexing="ij")
    g = (4 / (1 - X1 ** 2 - X2 ** 2) ** 2)[..., None, None] * np.eye(2)
    return C.MetricGrid(g, periodic=False, spacing=(h, h), origin=(-L / 2, -L / 2))


def _curvature_grid(p: dict, rng) -> C.MetricGrid:
    if p["grid_file"] is not None:
        with open(p["grid_file"], encoding="utf-8") as fh:
            return C.MetricGrid.from_json(fh.read())
    case, N = p["case"], p["N"]
    if case == "sphere":
        return C.sphere_patch(N, p["L"])
    if case == "hyperbolic":
        return _hyperbolic_patch(N, p["L"])
    if case == "flat":
        return C.flat_grid((N, N))
    if case == "random":
        return C.MetricGrid(C.random_smooth_metric((N, N), rng, amplitude=p["amplitude"]))
    raise ConfigError("case must be one of sphere, hyperbolic, flat, random")


def cmd_curvature(p: dict, seed: int, art: Artifacts) -> int:
    rng = np.random.default_rng(seed)
    grid = _curvature_grid(p, rng)
    Gamma = C.christoffel(grid)
    cb = C.curvature(grid)
    mask = grid.interior_mask(2) if not grid.periodic else np.ones(grid.shape, dtype=bool)
    R = cb.R
    idx = np.argwhere(np.ones(grid.shape, dtype=bool))
    rows = [(*(int(v) for v in ij), R[tuple(ij)]) for ij in idx]
    header = CSV_FORMATS["curvature"].split(" ")[0] if grid.n == 2 else \
        ",".join(f"i{a}" for a in range(grid.n)) + ",R"
    art.add("curvature.csv", csv_text(header, rows), primary=False)
    summary: dict = {"n": grid.n, "shape": list(grid.shape), "periodic": grid.periodic,
                     "Gamma_sup": float(np.abs(Gamma).max()),
                     "R_min": float(R[mask].min()), "R_max": float(R[mask].max()),
                     "Rc_asymmetry": float(np.abs(cb.Rc - np.swapaxes(cb.Rc, -1, -2))[mask].max())}
    if p["linearization"]:
        flat = C.flat_grid((p["N"], p["N"]))
        X1, X2 = flat.coords()
        a, b, c = np.sin(2 * np.pi * X1), np.cos(2 * np.pi * (X1 + X2)), np.sin(2 * np.pi * X2) ** 2
        h = np.stack([np.stack([a, b], -1), np.stack([b, c], -1)], -2)
        summary["linearized_ricci_vs_oracle"] = float(np.abs(
            C.linearized_ricci_exact(h, flat) - C.fd_linearization_oracle(C.ricci_operator, flat, h)).max())
        summary["linearized_scalar_vs_oracle"] = float(np.abs(
            C.linearized_scalar_exact(h, flat) - C.fd_linearization_oracle(C.scalar_times_metric, flat, h)).max())
    if p["torus_checks"]:
        summary["torus"] = _torus_checks(p["N"], rng)
    art.add("curvature_summary.json", json_text(summary), primary=True)
    return 0


def _torus_checks(N: int, rng) -> dict:
    """Operator checks on a random smooth periodic metric."""
    g = C.random_smooth_metric((N, N), rng)
    g0 = np.broadcast_to(np.eye(2), g.shape).copy()
    grid = C.MetricGrid(g, g0=g0)
    X1, X2 = grid.coords()
    X = np.stack([np.cos(2 * np.pi * X2), np.sin(4 * np.pi * X1)], -1)
    hs = C.divstar(X, grid)
    lhs, rhs = C.adjointness_sides(hs, X, grid)
    F = C.identity_map(grid)
    return {"div_divstar_adjointness": abs(lhs - rhs), "div_divstar_X_sup": float(np.abs(C.div(hs, grid)).max()),
            "deturck_field_sup": float(np.abs(C.deturck_field(grid)).max()),
            "map_laplacian_identity_cross_check": float(np.abs(
                C.map_laplacian(F, grid) - C.map_laplacian_pushforward_formula(F, grid)).max())}


def cmd_hodge(p: dict, seed: int, art: Artifacts) -> int:
    n, k, K = p["n"], p["k"], p["K"]
    if not 1 <= n <= 3 or not 0 <= k <= n:
        raise ConfigError("need 1 <= n <= 3 and 0 <= k <= n")
    if p["steps"] < 1 or p["t_final"] < 0:
        raise ConfigError("need steps >= 1 and t_final >= 0")
    rng = np.random.default_rng(seed)
    alpha = H.random_real_form(n, k, K, rng)
    dt = p["t_final"] / p["steps"]
    rows = []

    def row(t, a):
        harm, ex, co = H.hodge_decompose(a)
        return (t, H.l2_norm(a), H.closedness_residual(a), H.l2_norm(harm), H.l2_norm(ex), H.l2_norm(co))

    rows.append(row(0.0, alpha))
    a = alpha
    for s in range(p["steps"]):
        a = H.hodge_heat_step(a, dt)
        rows.append(row((s + 1) * dt, a))
    art.add("hodge.csv", csv_text(CSV_FORMATS["hodge-demo"], rows), primary=True)
    harm, ex, co = H.hodge_decompose(a)
    lim = H.hodge_heat_limit(a)
    final = {"n": n, "k": k, "K": K, "t_final": p["t_final"],
             "harmonic_coefficient": lim.mode((0,) * n),
             "orthogonality": max(abs(H.l2_inner(harm, ex)), abs(H.l2_inner(harm, co)), abs(H.l2_inner(ex, co))),
             "distance_to_limit": H.l2_norm(H.FourierForm(n, k, K, a.coeffs - lim.coeffs))}
    art.add("hodge_final.json", json_text(final))
    return 0


def _einstein_grid(lam: float, N: int) -> C.MetricGrid:
    if lam > 0:
        s = C.sphere_patch(N)
        return s.with_metric(s.g / lam)
    if lam < 0:
        hp = _hyperbolic_patch(N, 1.0)
        return hp.with_metric(hp.g / abs(lam))
    return C.flat_grid((N, N))


def cmd_einstein(p: dict, seed: int, art: Artifacts) -> int:
    lam, steps = p["lambda"], p["steps"]
    if steps < 1:
        raise ConfigError("steps must be at least 1")
    grid = _einstein_grid(lam, p["N"])
    mask = grid.interior_mask(2) if not grid.periodic else None
    rows = []
    for s in range(steps + 1):
        t = p["t_final"] * s / steps
        state = E.einstein_flow(lam, t)
        rows.append((t, state.c, E.flow_residual(grid, lam, t, mask)))
    art.add("einstein.csv", csv_text(CSV_FORMATS["einstein-flow"], rows), primary=True)
    art.add("einstein_summary.json", json_text({"lambda": lam, "extinction_time": E.extinction_time(lam)}))
    return 0


def _coflow_state(p: dict) -> W.WarpedState:
    geometry = p["geometry"]
    if geometry not in W.GEOMETRIES:
        raise ConfigError(f"geometry must be one of {W.GEOMETRIES}")
    N = p["N"]
    if p["domain"] == "circle":
        r, periodic = W.circle_grid(N, p["L"]), True
    elif p["domain"] == "interval":
        if p["interval"] is None or len(p["interval"]) != 2:
            raise ConfigError("interval domain needs interval: [a, b]")
        r, periodic = W.interval_grid(N, *map(float, p["interval"])), False
    else:
        raise ConfigError("domain must be 'circle' or 'interval'")
    init = DEFAULT_COFLOW_INITIAL if p["initial"] is None else p["initial"]
    if not isinstance(init, dict) or set(init) != {"ell", "theta", "G"}:
        raise ConfigError("initial must map exactly ell, theta, G to expressions or sample lists")
    vals = {}
    for key in ("ell", "theta", "G"):
        v = init[key]
        if isinstance(v, str):
            try:
                expr = sympy.sympify(v, locals={"L": sympy.Float(p["L"])})
            except (sympy.SympifyError, TypeError) as exc:
                raise ConfigError(f"cannot parse initial {key}: {exc}") from exc
            vals[key] = W.Jet.from_expr(expr, r).v
        elif isinstance(v, (list, int, float)) and not isinstance(v, bool):
            arr = np.broadcast_to(np.asarray(v, dtype=float), r.shape).copy() if not isinstance(v, list) \
                else np.asarray(v, dtype=float)
            if arr.shape != r.shape:
                raise ConfigError(f"initial {key} needs {N} samples")
            vals[key] = arr
        else:
            raise ConfigError(f"initial {key} must be an expression or samples")
    return W.WarpedState.from_arrays(geometry, r, vals["ell"], vals["theta"], vals["G"], periodic=periodic,
                                     L=p["L"] if periodic else None)


def cmd_coflow(p: dict, seed: int, art: Artifacts) -> int:
    state = _coflow_state(p)
    try:
        traj = W.coflow_integrate(state, p["t_final"], p["dt"], record_every=p["record_every"],
                                  modes=p["modes"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    rows = []
    for t, (ell, th, G) in zip(traj.times, traj.states):
        s = state.replace(ell, th, G, validate=False)
        rhs = W.coflow_rhs(s)
        tau0, tau1 = W.warped_torsion_forms(s)
        rows.append((t, np.abs(ell).max(), np.abs(th).max(), np.abs(G).max(), ell.min(), G.min(),
                     max(float(np.abs(a).max()) for a in rhs), np.abs(tau0).max(), np.abs(tau1).max()))
    art.add("coflow.csv", csv_text(CSV_FORMATS["coflow"], rows), primary=True)
    ell, th, G = traj.states[-1]
    lap = W.warped_laplacian(th, state.replace(ell, th, G, validate=False))
    grad = W.warped_gradsq(th, state.replace(ell, th, G, validate=False))
    final = {"geometry": state.geometry, "status": traj.status, "reason": traj.reason,
             "t": traj.times[-1], "r": state.r, "ell": ell, "theta": th, "G": G,
             "laplacian_theta_sup": float(np.abs(lap).max()), "gradsq_theta_sup": float(np.abs(grad).max()),
             "mode_growth": traj.mode_growth, "steps": len(traj.diagnostics)}
    art.add("coflow_final.json", json_text(final))
    if traj.error is not None:
        raise traj.error
    return 0


def _cy_row(b: float, c: float, r: np.ndarray):
    theta, s = W.cy_soliton_family(b, c, r)
    G = W.cy_gauge_G(theta, s)
    D = W.cy_soliton_residual(theta, s, G, r)
    return (b, c, float(np.abs(G - 1).max()), float(np.abs(D).max()))


def _pool_map(fn: Callable, items: list):
    workers = int(os.environ.get("GEOFLOW_THREADS", "1") or "1")
    if workers <= 1:
        return [fn(*it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(lambda it: fn(*it), items))


def cmd_soliton(p: dict, seed: int, art: Artifacts) -> int:
    r = np.linspace(p["r_min"], p["r_max"], p["N"])
    if p["family"] == "cy":
        items = [(float(b), float(c), r) for b in p["b_values"] for c in p["c_values"]]
        rows = _pool_map(_cy_row, items)
        art.add("soliton_scan.csv", csv_text("b,c,gauge_G_deviation,residual_sup", rows), primary=True)
        cal = W.calibrate_cy_convention(float(p["b_values"][0]), float(p["c_values"][0]), r)
        art.add("soliton_calibration.json", json_text({
            "convention": W.CY_CONVENTION, "best": cal["best"],
            "residuals": {f"p={k[0]},q={k[1]}": v for k, v in sorted(cal["residuals"].items())}}))
    elif p["family"] == "nk":
        state = W.WarpedState("NK", r, W.Jet.from_expr(p["ell"], r), W.Jet.from_expr(p["theta"], r),
                              W.Jet.from_expr(p["G"], r), periodic=False)
        s = W.Jet.from_expr(p["s"], r)
        items = [(float(lam),) for lam in p["lambda_values"]]

        def one(lam):
            res = W.nk_soliton_residual(state, s, lam)
            return (lam, *(float(np.abs(x).max()) for x in res))

        rows = _pool_map(one, items)
        art.add("soliton_scan.csv", csv_text("lambda,r1_sup,r2_sup,r3_sup", rows), primary=True)
    else:
        raise ConfigError("family must be 'cy' or 'nk'")
    return 0


def cmd_selftest(p: dict, seed: int, art: Artifacts, log=None) -> int:
    results = acceptance.run_all(seed=seed, mutate=p["mutate"])
    art.add("selftest.json", acceptance.report_bytes(results).decode() + "\n", primary=True)
    art.add("selftest_timing.csv", csv_text("criterion,name,passed,runtime_seconds",
                                            [(r.number, r.name, r.passed, r.runtime) for r in results]))
    if log is not None:
        for r in results:
            log.write(f"criterion {r.number:2d} {'PASS' if r.passed else 'FAIL'} {r.runtime:8.3f}s  {r.name}\n")
        log.write(f"total {sum(r.runtime for r in results):.3f}s\n")
    return 0 if all(r.passed for r in results) else 1


HANDLERS = {
    "identities": cmd_identities, "symbols": cmd_symbols, "rb-scan": cmd_rb_scan, "dgk-check": cmd_dgk,
    "curvature": cmd_curvature, "hodge-demo": cmd_hodge, "einstein-flow": cmd_einstein,
    "coflow": cmd_coflow, "soliton-scan": cmd_soliton, "selftest": cmd_selftest,
}


def build_parser() -> argparse.ArgumentParser:
    cols = "\n".join(f"  {k}: {v}" for k, v in CSV_FORMATS.items())
    epilog = ("CSV columns by command:\n" + cols + "\n\nExit codes: 0 ok, 1 check failed, "
              "2 invalid configuration, 3 numerical failure.\nGEOFLOW_THREADS caps parallelism.")
    ap = argparse.ArgumentParser(prog="geoflow", description="Geometric-flow computational laboratory.",
                                 epilog=epilog, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("command", nargs="?", choices=COMMANDS, help="subcommand (may come from --config)")
    ap.add_argument("--config", help="JSON file: a params object or {command, params, output, seed}")
    ap.add_argument("--output", help="path prefix for artifacts; without it the main artifact goes to stdout")
    ap.add_argument("--seed", type=int, help="seed for randomized inputs (default 0)")
    ap.add_argument("--quiet", action="store_true", help="suppress stdout")
    return ap


def _error_report(kind: str, exc: BaseException, code: int) -> str:
    return json_text({"error": kind, "type": type(exc).__name__, "message": str(exc), "exit_code": code})


def run(argv: list[str] | None = None, stdout=None, stderr=None) -> int:
    stdout = sys.stdout if stdout is None else stdout
    stderr = sys.stderr if stderr is None else stderr
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    output = args.output
    try:
        cmd, params, cfg_output, cfg_seed = load_config(args.config, args.command)
        output = output if output is not None else cfg_output
        seed = args.seed if args.seed is not None else (cfg_seed if cfg_seed is not None else 0)
        art = Artifacts()
        handler = HANDLERS[cmd]
        if cmd == "selftest":
            code = handler(params, seed, art, log=None if args.quiet else stderr)
        else:
            code = handler(params, seed, art)
        art.emit(output, args.quiet, stdout)
        return code
    except ConfigError as exc:
        stderr.write(_error_report("validation", exc, 2))
        return 2
    except NumericalFailure as exc:
        report = _error_report("numerical", exc, 3)
        stderr.write(report)
        if output is not None:
            if "art" in locals():
                art.emit(output, True, stdout)
            with open(output + "error.json", "w", encoding="utf-8") as fh:
                fh.write(report)
        return 3


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
