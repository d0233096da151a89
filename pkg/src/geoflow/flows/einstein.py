"""Ricci flow along the ray of an Einstein metric, g(t) = c(t) g0 with Rc(g0) = lam g0."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..curvature import MetricGrid, curvature
from ..errors import ExtinctError


@dataclass(frozen=True)
class EinsteinFlowState:
    lam: float
    c: float
    t: float


def extinction_time(lam: float) -> float:
    """1/(2 lam) for lam > 0, infinity otherwise."""
    return 1.0 / (2.0 * lam) if lam > 0 else math.inf


def einstein_flow(lam: float, t: float) -> EinsteinFlowState:
    """Scale factor c(t) = 1 - 2 lam t; raises ExtinctError at or past extinction."""
    if t < 0:
        raise ValueError("time must be nonnegative")
    c = 1.0 - 2.0 * lam * t
    if c <= 0 or t >= extinction_time(lam):
        raise ExtinctError(f"flow with lambda={lam} is extinct at t={extinction_time(lam)!r}; requested t={t!r}")
    return EinsteinFlowState(lam, c, t)


def flow_residual(grid: MetricGrid, lam: float, t: float, mask: np.ndarray | None = None) -> float:
    """max |d/dt g + 2 Rc(g(t))| for g(t) = c(t) g0, with Rc from finite differences.

    ``grid`` holds g0, assumed Einstein with constant lam.
    """
    state = einstein_flow(lam, t)
    gt = grid.with_metric(state.c * grid.g)
    dgdt = -2.0 * lam * grid.g
    res = np.abs(dgdt + 2.0 * curvature(gt).Rc)
    if mask is not None:
        res = res[mask]
    return float(res.max())


def scale_invariance_residual(grid: MetricGrid, c: float, mask: np.ndarray | None = None) -> float:
    """max |Rc(c g) - Rc(g)|."""
    a = curvature(grid).Rc
    b = curvature(grid.with_metric(c * grid.g)).Rc
    res = np.abs(a - b)
    if mask is not None:
        res = res[mask]
    return float(res.max())
