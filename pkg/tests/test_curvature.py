import numpy as np
import pytest

from geoflow import curvature as C
from geoflow import symbols as S


def _torus_coords(N, n=2):
    x = np.arange(N) / N
    return np.meshgrid(*([x] * n), indexing="ij")


def _conformal_gamma_error(N):
    X1, _ = _torus_coords(N)
    u = 0.1 * np.sin(2 * np.pi * X1)
    du = [0.2 * np.pi * np.cos(2 * np.pi * X1), np.zeros_like(X1)]
    G = C.christoffel(C.conformal_grid(u))
    d = np.eye(2)
    ex = np.zeros_like(G)
    for k in range(2):
        for i in range(2):
            for j in range(2):
                ex[..., k, i, j] = d[k, i] * du[j] + d[k, j] * du[i] - d[i, j] * du[k]
    return np.abs(G - ex).max()


sphere_patch = C.sphere_patch


def sphere_error(N):
    grid = sphere_patch(N)
    return np.abs(C.curvature(grid).R - 2)[grid.interior_mask(2)].max()


def test_flat_is_exactly_zero():
    for shape in ((16,), (16, 16), (8, 8, 8)):
        grid = C.flat_grid(shape, np.diag(np.arange(1.0, len(shape) + 1)))
        cb = C.curvature(grid)
        for arr in (cb.Gamma, cb.Rm, cb.Rc, cb.R):
            assert not np.any(arr)


def test_construction_rejects_non_spd():
    g = np.broadcast_to(np.diag([1.0, -1.0]), (4, 4, 2, 2)).copy()
    with pytest.raises(ValueError):
        C.MetricGrid(g)


def test_conformal_christoffel_order_two():
    e32, e64 = _conformal_gamma_error(32), _conformal_gamma_error(64)
    assert e64 < 2e-3
    assert 1.8 <= np.log2(e32 / e64) <= 2.2


def test_sphere_patch():
    e64, e128 = sphere_error(64), sphere_error(128)
    assert e128 < 5e-3
    assert 1.8 <= np.log2(e64 / e128) <= 2.2


def test_bundle_symmetries_and_traces():
    grid = sphere_patch(48)
    cb = C.curvature(grid)
    m = grid.interior_mask(2)
    Rm = cb.Rm[m]
    assert np.abs(Rm + Rm.transpose(0, 2, 1, 3, 4)).max() < 1e-9
    assert np.abs(Rm + Rm.transpose(0, 1, 2, 4, 3)).max() < 1e-9
    assert np.abs(Rm - Rm.transpose(0, 3, 4, 1, 2)).max() < 1e-3
    assert np.abs(cb.Rc - np.swapaxes(cb.Rc, -1, -2)).max() < 1e-3
    ginv = np.linalg.inv(grid.g)
    assert np.allclose(np.einsum("...jk,...jk->...", ginv, cb.Rc), cb.R)


def test_scale_invariance():
    grid = sphere_patch(32)
    cb = C.curvature(grid)
    cb4 = C.curvature(grid.with_metric(4 * grid.g))
    assert np.allclose(cb4.Gamma, cb.Gamma, rtol=1e-10, atol=1e-12)
    assert np.allclose(cb4.Rc, cb.Rc, rtol=1e-10, atol=1e-12)
    assert np.allclose(cb4.Rm, 4 * cb.Rm, rtol=1e-10, atol=1e-12)
    assert np.allclose(cb4.R, cb.R / 4, rtol=1e-10, atol=1e-12)


def test_divstar_examples():
    grid = C.flat_grid((64, 64))
    X = np.broadcast_to(np.array([0.3, -1.2]), (64, 64, 2))
    assert not np.any(C.divstar(X, grid))
    X1, _ = grid.coords()
    Y = np.stack([np.sin(2 * np.pi * X1), np.zeros_like(X1)], axis=-1)
    D = C.divstar(Y, grid)
    # central-difference error 2 pi (2 pi h)^2 / 6 is about 1e-2 at 64 nodes
    assert np.abs(D[..., 0, 0] + 2 * np.pi * np.cos(2 * np.pi * X1)).max() < 1.1e-2
    assert not np.any(D[..., 0, 1]) and not np.any(D[..., 1, 1])


def _smooth_fields(grid):
    X1, X2 = grid.coords()
    a = np.sin(2 * np.pi * X1)
    b = np.cos(2 * np.pi * (X1 + X2))
    c = np.sin(2 * np.pi * X2) ** 2
    h = np.stack([np.stack([a, b], -1), np.stack([b, c], -1)], -2)
    X = np.stack([np.cos(2 * np.pi * X2), np.sin(4 * np.pi * X1)], -1)
    return h, X


def test_div_divstar_adjoint():
    rng = np.random.default_rng(20)
    grid = C.MetricGrid(C.random_smooth_metric((64, 64), rng))
    h, X = _smooth_fields(grid)
    lhs, rhs = C.adjointness_sides(h, X, grid)
    assert abs(lhs - rhs) < 1e-3


def test_linearized_ricci_matches_oracle():
    grid = C.flat_grid((64, 64))
    X1, _ = grid.coords()
    h = np.sin(2 * np.pi * X1)[..., None, None] * np.eye(2)
    a = C.linearized_ricci_exact(h, grid)
    b = C.fd_linearization_oracle(C.ricci_operator, grid, h, 1e-4)
    assert np.abs(a - b).max() < 1e-4
    const = np.broadcast_to(np.array([[1.0, 2.0], [2.0, 5.0]]), (64, 64, 2, 2))
    assert not np.any(C.linearized_ricci_exact(const, grid))


def test_linearized_scalar_matches_oracle():
    grid = C.flat_grid((64, 64))
    h, _ = _smooth_fields(grid)
    a = C.linearized_scalar_exact(h, grid)
    b = C.fd_linearization_oracle(C.scalar_times_metric, grid, h, 1e-4)
    assert np.abs(a - b).max() < 1e-4
    assert not np.any(C.linearized_scalar_exact(np.ones((64, 64, 2, 2)), grid))


@pytest.mark.parametrize("eps", [1e-3, 1e-4, 1e-5, 1e-6])
def test_fd_step_tradeoff(eps):
    grid = C.flat_grid((32, 32))
    h, _ = _smooth_fields(grid)
    err = np.abs(C.linearized_ricci_exact(h, grid)
                 - C.fd_linearization_oracle(C.ricci_operator, grid, h, eps)).max()
    assert err < {1e-3: 1e-2, 1e-4: 1e-4, 1e-5: 1e-5, 1e-6: 1e-5}[eps]


@pytest.mark.parametrize("k", [(1, 0), (0, 1)])
def test_plane_wave_matches_symbols(k):
    grid = C.flat_grid((64, 64))
    rng = np.random.default_rng(21)
    hbar = rng.normal(size=(2, 2))
    hbar = hbar + hbar.T
    k = np.array(k, dtype=float)
    h, c = C.plane_wave(hbar, k, grid)
    pred = 0.5 * (2 * np.pi) ** 2 * S.apply_B(hbar, k)
    out = C.linearized_ricci_exact(h, grid)
    assert np.abs(out - c[..., None, None] * pred).max() / np.abs(pred).max() < 1e-3
    pred_s = -(2 * np.pi) ** 2 * S.apply_scalar(hbar, k)
    out_s = C.linearized_scalar_exact(h, grid)
    assert np.abs(out_s - c[..., None, None] * pred_s).max() / np.abs(pred_s).max() < 1e-3


def test_plane_wave_diagonal_converges():
    hbar = np.array([[1.0, 0.5], [0.5, -2.0]])
    k = np.array([1.0, 1.0])
    errs = []
    for N in (32, 64):
        grid = C.flat_grid((N, N))
        h, c = C.plane_wave(hbar, k, grid)
        pred = 0.5 * (2 * np.pi) ** 2 * S.apply_B(hbar, k)
        errs.append(np.abs(C.linearized_ricci_exact(h, grid) - c[..., None, None] * pred).max())
    assert 1.8 <= np.log2(errs[0] / errs[1]) <= 2.2


def test_deturck_field():
    rng = np.random.default_rng(22)
    g = C.random_smooth_metric((32, 32), rng)
    assert not np.any(C.deturck_field(C.MetricGrid(g, g0=g)))
    # conformal metric in 3-D: W^1 = (2 - n) e^{-2u} d_1 u
    x = np.arange(256) / 256
    X1, _, _ = np.meshgrid(x, np.arange(4) / 4, np.arange(4) / 4, indexing="ij")
    u = 0.1 * np.sin(2 * np.pi * X1)
    W = C.deturck_field(C.conformal_grid(u))
    ex = -np.exp(-2 * u) * 0.2 * np.pi * np.cos(2 * np.pi * X1)
    assert np.abs(W[..., 0] - ex).max() < 1e-4
    # n = 2: the conformal field vanishes identically
    X1, _ = _torus_coords(32)
    W2 = C.deturck_field(C.conformal_grid(0.1 * np.sin(2 * np.pi * X1)))
    assert np.abs(W2).max() < 1e-12


def test_deturck_linearization():
    grid = C.flat_grid((64, 64))
    h, _ = _smooth_fields(grid)
    eps = 1e-4
    fd = (C.deturck_field(grid.with_metric(grid.g + eps * h))
          - C.deturck_field(grid.with_metric(grid.g - eps * h))) / (2 * eps)
    assert np.abs(fd - C.deturck_linearization_exact(h, grid)).max() < 1e-4


def test_map_laplacian_identity_flat():
    grid = C.flat_grid((16, 16))
    assert np.abs(C.map_laplacian(C.identity_map(grid), grid, grid)).max() == 0


def test_map_laplacian_1d_order_two():
    errs = []
    for N in (64, 128):
        grid = C.flat_grid((N,))
        x = grid.coords()[0]
        F = C.TorusMap(np.eye(1, dtype=np.int64), (0.1 * np.sin(2 * np.pi * x))[:, None])
        errs.append(np.abs(C.map_laplacian(F, grid)[:, 0] + 0.4 * np.pi ** 2 * np.sin(2 * np.pi * x)).max())
    assert 1.8 <= np.log2(errs[0] / errs[1]) <= 2.2


def test_map_laplacian_winding():
    grid = C.flat_grid((32, 32))
    F = C.TorusMap(np.array([[2, 1], [0, 1]]), np.zeros((32, 32, 2)))
    assert np.abs(C.map_laplacian(F, grid)).max() < 1e-12


def test_map_laplacian_identity_formula():
    rng = np.random.default_rng(23)
    for _ in range(3):
        grid = C.MetricGrid(C.random_smooth_metric((64, 64), rng))
        F = C.identity_map(grid)
        a = C.map_laplacian(F, grid)
        b = C.map_laplacian_pushforward_formula(F, grid)
        assert np.abs(a - b).max() < 1e-4


def test_map_laplacian_diffeomorphism_formula_converges():
    errs = []
    for N in (32, 64):
        r = np.random.default_rng(5)
        grid = C.MetricGrid(C.random_smooth_metric((N, N), r))
        target = C.MetricGrid(C.random_smooth_metric((N, N), r))
        X1, X2 = grid.coords()
        F = C.TorusMap(np.eye(2, dtype=np.int64),
                       0.02 * np.stack([np.sin(2 * np.pi * X2), np.cos(2 * np.pi * X1)], -1))
        errs.append(np.abs(C.map_laplacian(F, grid, target)
                           - C.map_laplacian_pushforward_formula(F, grid, target)).max())
    assert 1.8 <= np.log2(errs[0] / errs[1]) <= 2.2


def test_grid_json_roundtrip():
    rng = np.random.default_rng(24)
    g = C.random_smooth_metric((8, 6), rng)
    grid = C.MetricGrid(g, g0=np.broadcast_to(np.eye(2), g.shape).copy())
    back = C.MetricGrid.from_json(grid.to_json())
    assert np.array_equal(back.g, grid.g) and np.array_equal(back.g0, grid.g0)
    patch = sphere_patch(8)
    back = C.MetricGrid.from_dict(patch.to_dict())
    assert not back.periodic and back.spacing == patch.spacing
