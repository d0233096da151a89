"""Dense antisymmetric and symmetric tensors on R^n.

Forms are stored as fully antisymmetric numpy arrays of shape ``(n,) * k``.
The inner product on k-forms is ``1/k!`` times the full contraction and the
wedge product carries the ``(p+q)!/(p!q!)`` factor, so that
``e_1 ^ e_2`` has components ``+1`` at ``(0, 1)`` and ``-1`` at ``(1, 0)``.

Entries may be integers, ``fractions.Fraction`` (object arrays) or floats.
Every routine here keeps exact inputs exact unless a square root of a
non-trivial metric determinant is needed.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

SYMMETRY_TAGS = ("none", "sym2", "antisym")


def _sort_sign(idx: tuple[int, ...]) -> tuple[int, tuple[int, ...]]:
    """Return (sign, sorted index), or (0, ()) when an index repeats."""
    if len(set(idx)) != len(idx):
        return 0, ()
    sign = 1
    arr = list(idx)
    # bubble sort keeps track of the transposition count
    for i in range(len(arr)):
        for j in range(len(arr) - 1 - i):
            if arr[j] > arr[j + 1]:
                arr[j], arr[j + 1] = arr[j + 1], arr[j]
                sign = -sign
    return sign, tuple(arr)


def levi_civita(n: int) -> np.ndarray:
    """Integer Levi-Civita symbol of rank n."""
    eps = np.zeros((n,) * n, dtype=np.int64)
    for perm in itertools.permutations(range(n)):
        eps[perm] = _sort_sign(perm)[0]
    return eps


def zeros_like_form(n: int, k: int, exact: bool = True) -> np.ndarray:
    return np.zeros((n,) * k, dtype=np.int64 if exact else float)


def components(form: np.ndarray) -> dict[tuple[int, ...], object]:
    """Nonzero components of an antisymmetric array on increasing indices."""
    n = form.shape[0] if form.ndim else 0
    out = {}
    for idx in itertools.combinations(range(n), form.ndim):
        v = form[idx] if idx else form[()]
        if v != 0:
            out[idx] = v
    return out


def from_components(comps: dict[tuple[int, ...], object], n: int, k: int,
                    dtype=None) -> np.ndarray:
    """Build the full antisymmetric array from increasing-index components."""
    if dtype is None:
        vals = list(comps.values())
        if any(isinstance(v, Fraction) for v in vals):
            dtype = object
        elif any(isinstance(v, (float, np.floating)) for v in vals):
            dtype = float
        else:
            dtype = np.int64
    arr = np.zeros((n,) * k, dtype=dtype)
    if dtype is object:
        arr[...] = 0
    for idx, v in comps.items():
        sign, srt = _sort_sign(tuple(idx))
        if sign == 0:
            continue
        v = sign * v
        for perm in itertools.permutations(range(k)):
            pidx = tuple(srt[p] for p in perm)
            arr[pidx] = _sort_sign(perm)[0] * v
    return arr


def basis_form(n: int, idx: tuple[int, ...]) -> np.ndarray:
    """The decomposable form e_{i1} ^ ... ^ e_{ik} (0-based indices)."""
    return from_components({tuple(idx): 1}, n, len(idx), dtype=np.int64)


def antisymmetrize(a: np.ndarray) -> np.ndarray:
    """Alt(a): average over all index permutations with signs."""
    k = a.ndim
    if k <= 1:
        return a.copy()
    acc = None
    for perm in itertools.permutations(range(k)):
        term = _sort_sign(perm)[0] * np.transpose(a, perm)
        acc = term if acc is None else acc + term
    if a.dtype == object:
        return acc * Fraction(1, math.factorial(k))
    return acc / math.factorial(k)


def is_antisymmetric(a: np.ndarray, tol: float = 0.0) -> bool:
    """Exhaustive check over adjacent transpositions (they generate S_k)."""
    for i in range(a.ndim - 1):
        perm = list(range(a.ndim))
        perm[i], perm[i + 1] = perm[i + 1], perm[i]
        diff = a + np.transpose(a, perm)
        if diff.size and np.max(np.abs(diff.astype(float) if diff.dtype == object else diff)) > tol:
            return False
    return True


def wedge(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Exterior product of two antisymmetric arrays of equal dimension."""
    p, q = a.ndim, b.ndim
    if p == 0:
        return a[()] * b
    if q == 0:
        return b[()] * a
    n = a.shape[0]
    if p + q > n:
        return np.zeros((n,) * (p + q), dtype=np.result_type(a, b))
    out: dict[tuple[int, ...], object] = {}
    ca, cb = components(a), components(b)
    for ia, va in ca.items():
        for ib, vb in cb.items():
            sign, srt = _sort_sign(ia + ib)
            if sign:
                out[srt] = out.get(srt, 0) + sign * va * vb
    dtype = object if (a.dtype == object or b.dtype == object) else np.result_type(a, b)
    return from_components(out, n, p + q, dtype=dtype)


def interior(X: np.ndarray, form: np.ndarray) -> np.ndarray:
    """Contraction X ⨼ form on the first slot."""
    return np.tensordot(X, form, axes=([0], [0]))


def form_inner(a: np.ndarray, b: np.ndarray, metric: np.ndarray | None = None):
    """Inner product of k-forms: 1/k! times the full metric contraction."""
    k = a.ndim
    if metric is not None:
        a = raise_all(a, np.linalg.inv(metric))
    total = np.sum(a * b)
    f = math.factorial(k)
    if isinstance(total, (int, np.integer)) or isinstance(total, Fraction):
        return Fraction(int(total) if not isinstance(total, Fraction) else total) / f
    return total / f


def raise_all(a: np.ndarray, ginv: np.ndarray) -> np.ndarray:
    out = a
    for axis in range(a.ndim):
        out = np.moveaxis(np.tensordot(ginv, out, axes=([1], [axis])), 0, axis)
    return out


def check_positive_definite(metric: np.ndarray) -> None:
    m = np.asarray(metric, dtype=float)
    if not np.allclose(m, m.T, atol=1e-12):
        raise ValueError("metric is not symmetric")
    try:
        np.linalg.cholesky(m)
    except np.linalg.LinAlgError as exc:
        raise ValueError("metric is not positive definite") from exc


def hodge_star(alpha: np.ndarray, metric: np.ndarray | None = None,
               orientation: int = 1, n: int | None = None) -> np.ndarray:
    """Hodge star defined by alpha ^ *beta = <alpha, beta> vol.

    With ``metric=None`` the Euclidean metric is used and integer or rational
    input stays exact.  ``n`` is only needed for 0-forms.
    """
    k = alpha.ndim
    if n is None:
        if k == 0:
            raise ValueError("dimension required for a 0-form")
        n = alpha.shape[0]
    if metric is not None:
        check_positive_definite(metric)
        up = raise_all(alpha.astype(float), np.linalg.inv(metric))
        scale = math.sqrt(np.linalg.det(metric))
    else:
        up = alpha
        scale = 1
    out: dict[tuple[int, ...], object] = {}
    if k == 0:
        out[tuple(range(n))] = orientation * scale * up[()]
    else:
        for idx, v in components(up).items():
            comp = tuple(i for i in range(n) if i not in idx)
            sign = _sort_sign(idx + comp)[0]
            out[comp] = orientation * sign * v * scale
    if n - k == 0:
        val = out.get((), 0)
        return np.array(val, dtype=object if isinstance(val, Fraction) else type(val))
    dtype = float if metric is not None else (object if alpha.dtype == object else alpha.dtype)
    return from_components(out, n, n - k, dtype=dtype)


@dataclass(frozen=True)
class DenseTensor:
    """Rank-k array over R^dim with a symmetry tag.

    ``entries`` holds the full array of shape ``(dim,) * rank``.
    """

    dim: int
    rank: int
    symmetry: str
    entries: np.ndarray

    def __post_init__(self):
        if self.symmetry not in SYMMETRY_TAGS:
            raise ValueError(f"unknown symmetry tag {self.symmetry!r}")
        if self.entries.shape != (self.dim,) * self.rank:
            raise ValueError("entries shape does not match dim and rank")
        if self.symmetry == "sym2":
            if self.rank != 2:
                raise ValueError("sym2 tensors must have rank 2")
            if np.any(self.entries != self.entries.T):
                raise ValueError("sym2 entries are not transpose invariant")
        if self.symmetry == "antisym" and not is_antisymmetric(self.entries):
            raise ValueError("antisym entries change sign incorrectly")

    @property
    def exact(self) -> bool:
        return self.entries.dtype == object or np.issubdtype(self.entries.dtype, np.integer)

    def to_dict(self) -> dict:
        flat = []
        for v in self.entries.reshape(-1):
            if isinstance(v, Fraction):
                flat.append(str(v) if v.denominator != 1 else int(v.numerator))
            elif isinstance(v, (int, np.integer)):
                flat.append(int(v))
            else:
                flat.append(float(v))
        return {"dim": self.dim, "rank": self.rank, "symmetry": self.symmetry, "entries": flat}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "DenseTensor":
        raw = d["entries"]
        if any(isinstance(v, str) for v in raw):
            vals = np.array([Fraction(v) for v in raw], dtype=object)
        elif all(isinstance(v, int) for v in raw):
            vals = np.array(raw, dtype=np.int64)
        else:
            vals = np.array(raw, dtype=float)
        shape = (d["dim"],) * d["rank"]
        return cls(d["dim"], d["rank"], d["symmetry"], vals.reshape(shape))

    @classmethod
    def from_json(cls, s: str) -> "DenseTensor":
        return cls.from_dict(json.loads(s))


hodge_star_flat = hodge_star
