"""Spectral heat flow d/dt alpha = -Delta_d alpha for k-forms on the flat torus [0, 1)^n.

A form is stored by its Fourier coefficients alpha_hat(m) on the integer
frequencies |m_a| <= K, each an antisymmetric (n,)*k complex array, so that
alpha(x) = sum_m alpha_hat(m) exp(2 pi i m.x).  On this torus Delta_d acts on
each mode as multiplication by (2 pi)^2 |m|^2.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from ..tensors import _sort_sign

DEFAULT_K = 16


def _alt(a: np.ndarray, lead: int) -> np.ndarray:
    """Antisymmetrise the trailing tensor axes of ``a`` (the first ``lead`` are modes)."""
    k = a.ndim - lead
    if k <= 1:
        return a.copy()
    acc = np.zeros_like(a)
    for perm in itertools.permutations(range(k)):
        acc = acc + _sort_sign(perm)[0] * np.transpose(a, tuple(range(lead)) + tuple(lead + p for p in perm))
    return acc / math.factorial(k)


@dataclass
class FourierForm:
    n: int
    k: int
    K: int
    coeffs: np.ndarray  # (2K+1,)*n + (n,)*k, complex

    @classmethod
    def zeros(cls, n: int, k: int, K: int = DEFAULT_K) -> "FourierForm":
        return cls(n, k, K, np.zeros((2 * K + 1,) * n + (n,) * k, dtype=complex))

    @classmethod
    def from_samples(cls, samples: np.ndarray, n: int, K: int = DEFAULT_K) -> "FourierForm":
        """Project real samples on an (M,)*n grid (M >= 2K + 1) onto |m| <= K."""
        M = samples.shape[0]
        if M < 2 * K + 1:
            raise ValueError("need at least 2K + 1 samples per axis")
        k = samples.ndim - n
        spec = np.fft.fftn(samples, axes=tuple(range(n))) / M ** n
        idx = np.r_[0:K + 1, M - K:M]
        for a in range(n):
            spec = np.take(spec, idx, axis=a)
        # reorder from (0..K, -K..-1) to (-K..K)
        spec = np.roll(spec, K, axis=tuple(range(n)))
        return cls(n, k, K, spec)

    def frequencies(self) -> np.ndarray:
        """Integer frequency vectors with shape (2K+1,)*n + (n,)."""
        r = np.arange(-self.K, self.K + 1)
        return np.stack(np.meshgrid(*([r] * self.n), indexing="ij"), axis=-1)

    def _index(self, m) -> tuple[int, ...]:
        m = tuple(int(v) for v in m)
        if len(m) != self.n or any(abs(v) > self.K for v in m):
            raise ValueError(f"frequency {m} outside the truncation")
        return tuple(v + self.K for v in m)

    def mode(self, m) -> np.ndarray:
        return self.coeffs[self._index(m)]

    def set_mode(self, m, value) -> None:
        self.coeffs[self._index(m)] = value

    def copy(self) -> "FourierForm":
        return FourierForm(self.n, self.k, self.K, self.coeffs.copy())

    def evaluate(self, M: int) -> np.ndarray:
        """Real samples on the (M,)*n grid x = j/M."""
        if M < 2 * self.K + 1:
            raise ValueError("need at least 2K + 1 samples per axis")
        full = np.zeros((M,) * self.n + (self.n,) * self.k, dtype=complex)
        spec = np.roll(self.coeffs, -self.K, axis=tuple(range(self.n)))
        idx = np.r_[0:self.K + 1, M - self.K:M]
        full[np.ix_(*([idx] * self.n))] = spec
        vals = np.fft.ifftn(full, axes=tuple(range(self.n))) * M ** self.n
        return vals.real

    def reality_residual(self) -> float:
        flipped = np.flip(self.coeffs, axis=tuple(range(self.n)))
        return float(np.max(np.abs(flipped - np.conj(self.coeffs)), initial=0.0))

    def antisymmetry_residual(self) -> float:
        return float(np.max(np.abs(self.coeffs - _alt(self.coeffs, self.n)), initial=0.0))


# per-mode exterior algebra with xi = m (the factor 2 pi i is applied by d)

def _wedge_xi(xi: np.ndarray, a: np.ndarray, n: int) -> np.ndarray:
    """xi ^ a per mode, with the (k+1) combinatorial factor."""
    k = a.ndim - n
    modes = a.shape[:n]
    outer = xi.reshape(modes + (n,) + (1,) * k) * a.reshape(modes + (1,) + (n,) * k)
    return (k + 1) * _alt(outer, n)


def _interior_xi(xi: np.ndarray, a: np.ndarray, n: int) -> np.ndarray:
    """iota_xi a per mode (contraction on the first tensor slot)."""
    k = a.ndim - n
    return np.sum(xi.reshape(a.shape[:n] + (n,) + (1,) * (k - 1)) * a, axis=n)


def exterior_derivative(alpha: FourierForm) -> FourierForm:
    xi = alpha.frequencies().astype(float)
    return FourierForm(alpha.n, alpha.k + 1, alpha.K, 2j * np.pi * _wedge_xi(xi, alpha.coeffs, alpha.n))


def closedness_residual(alpha: FourierForm) -> float:
    """max over modes of |xi ^ alpha_hat|; zero exactly when alpha is closed."""
    if alpha.k == alpha.n:
        return 0.0
    xi = alpha.frequencies().astype(float)
    return float(np.max(np.abs(_wedge_xi(xi, alpha.coeffs, alpha.n))))


def hodge_heat_step(alpha: FourierForm, dt: float) -> FourierForm:
    """Exact solution operator exp(-dt Delta_d) applied mode by mode."""
    if dt < 0:
        raise ValueError("dt must be nonnegative")
    m2 = np.sum(alpha.frequencies() ** 2, axis=-1).astype(float)
    decay = np.exp(-(2 * np.pi) ** 2 * m2 * dt)
    return FourierForm(alpha.n, alpha.k, alpha.K, alpha.coeffs * decay.reshape(decay.shape + (1,) * alpha.k))


def hodge_heat_limit(alpha: FourierForm) -> FourierForm:
    """t -> infinity limit: only the zero mode survives."""
    out = FourierForm.zeros(alpha.n, alpha.k, alpha.K)
    zero = (0,) * alpha.n
    out.set_mode(zero, alpha.mode(zero))
    return out


def l2_inner(a: FourierForm, b: FourierForm) -> float:
    """L^2 inner product on the unit torus via Parseval (1/k! full contraction)."""
    return float(np.real(np.sum(np.conj(a.coeffs) * b.coeffs))) / math.factorial(a.k)


def l2_norm(a: FourierForm) -> float:
    return math.sqrt(max(l2_inner(a, a), 0.0))


def hodge_decompose(alpha: FourierForm) -> tuple[FourierForm, FourierForm, FourierForm]:
    """(harmonic, exact, coexact) parts.

    For m != 0: exact = xi ^ iota_xi a / |xi|^2, coexact = iota_xi (xi ^ a) / |xi|^2.
    """
    n, k = alpha.n, alpha.k
    xi = alpha.frequencies().astype(float)
    m2 = np.sum(xi ** 2, axis=-1)
    safe = np.where(m2 == 0, 1.0, m2).reshape(m2.shape + (1,) * k)
    if k == 0:
        exact = np.zeros_like(alpha.coeffs)
    else:
        exact = _wedge_xi(xi, _interior_xi(xi, alpha.coeffs, n), n) / safe
    if k == n:
        coexact = np.zeros_like(alpha.coeffs)
    else:
        coexact = _interior_xi(xi, _wedge_xi(xi, alpha.coeffs, n), n) / safe
    zero = tuple([alpha.K] * n)
    exact[zero] = 0
    coexact[zero] = 0
    harmonic = hodge_heat_limit(alpha)
    return (harmonic, FourierForm(n, k, alpha.K, exact), FourierForm(n, k, alpha.K, coexact))


def random_real_form(n: int, k: int, K: int, rng: np.random.Generator, decay: float = 1.0) -> FourierForm:
    """Random real-valued k-form with smooth (decaying) spectrum."""
    M = 2 * K + 2
    shape = (M,) * n + (n,) * k
    samples = _alt(rng.normal(size=shape), n) if k > 1 else rng.normal(size=shape)
    alpha = FourierForm.from_samples(samples, n, K)
    m2 = np.sum(alpha.frequencies() ** 2, axis=-1).astype(float)
    damp = np.exp(-decay * np.sqrt(m2)).reshape(m2.shape + (1,) * k)
    alpha.coeffs = alpha.coeffs * damp
    return alpha
