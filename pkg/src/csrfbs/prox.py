"""Proximity operators and projections."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np


def _nonneg(name, value):
    if value < 0:
        raise ValueError(f"{name} must be nonnegative, got {value}")


def soft_threshold(x, alpha):
    """``sgn(x) * max(|x| - alpha, 0)`` elementwise; ties map to exactly 0."""
    _nonneg("alpha", alpha)
    x = np.asarray(x, dtype=np.float64)
    return np.sign(x) * np.maximum(np.abs(x) - alpha, 0.0)


def prox_half_sq(x, alpha):
    """Prox of ``(alpha/2) ||.||^2``."""
    _nonneg("alpha", alpha)
    return np.asarray(x, dtype=np.float64) / (1.0 + alpha)


def project_l2_ball(x, center, eps):
    _nonneg("eps", eps)
    x = np.asarray(x, dtype=np.float64)
    r = x - center
    nrm = np.linalg.norm(r)
    if nrm <= eps:
        return x.copy()
    return center + (eps / nrm) * r


def _l1_threshold_sort(a, eta):
    # a: flat array of magnitudes with sum(a) > eta
    u = np.sort(a)[::-1]
    css = np.cumsum(u)
    k = np.arange(1, u.size + 1)
    # >= keeps index 0 active when eta is below the rounding of css[0] - eta
    rho = np.nonzero(u * k >= css - eta)[0][-1]
    return (css[rho] - eta) / (rho + 1.0)


def _l1_threshold_pivot(a, eta):
    # drop entries at or below the current threshold until the active set is stable;
    # theta increases monotonically to theta*
    theta = (a.sum() - eta) / a.size
    while True:
        keep = a[a > theta]
        if keep.size in (0, a.size):
            return theta
        a = keep
        theta = (a.sum() - eta) / a.size


def project_l1_ball(x, eta, method: str = "sort"):
    """Euclidean projection onto ``{y : ||y||_1 <= eta}``.

    ``method="sort"`` is the exact sort-and-scan rule; ``"pivot"`` is an
    active-set fixed point that avoids the sort and reaches the same threshold
    in a handful of vectorized passes.
    """
    _nonneg("eta", eta)
    x = np.asarray(x, dtype=np.float64)
    a = np.abs(x).ravel()
    if a.sum() <= eta:
        return x.copy()
    if eta == 0:
        return np.zeros_like(x)
    if method == "sort":
        theta = _l1_threshold_sort(a, eta)
    elif method == "pivot":
        theta = _l1_threshold_pivot(a, eta)
    else:
        raise ValueError(f"unknown l1 projection method {method!r}")
    return np.sign(x) * np.maximum(np.abs(x) - theta, 0.0)


def prox_conjugate(prox_h: Callable, y, gamma):
    """Prox of ``gamma * h^*`` through the Moreau decomposition.

    ``prox_h(x, alpha)`` must return ``prox_{alpha h}(x)``.
    """
    if gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    y = np.asarray(y, dtype=np.float64)
    return y - gamma * prox_h(y / gamma, 1.0 / gamma)


def svt(B, gamma):
    """Singular value soft-thresholding, the prox of ``gamma ||.||_*``."""
    _nonneg("gamma", gamma)
    B = np.asarray(B, dtype=np.float64)
    if not np.all(np.isfinite(B)):
        raise np.linalg.LinAlgError("svt: matrix has non-finite entries")
    U, s, Vt = np.linalg.svd(B, full_matrices=False)
    s = np.maximum(s - gamma, 0.0)
    keep = s > 0
    return (U[:, keep] * s[keep]) @ Vt[keep]


def project_unit_l2(d):
    d = np.asarray(d, dtype=np.float64)
    nrm = np.linalg.norm(d)
    if nrm <= 1.0:
        return d.copy()
    return d / nrm


@dataclass(frozen=True)
class BallSpec:
    """A norm ball: ``l1`` centered at zero or ``l2`` centered at ``center``."""

    kind: str
    radius: float
    center: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind not in ("l1", "l2"):
            raise ValueError(f"unknown ball kind {self.kind!r}")
        _nonneg("radius", self.radius)
        if (self.kind == "l2") != (self.center is not None):
            raise ValueError("center is required for l2 balls and forbidden for l1 balls")

    def project(self, x):
        if self.kind == "l1":
            return project_l1_ball(x, self.radius)
        return project_l2_ball(x, self.center, self.radius)

    def contains(self, x, rtol: float = 0.0) -> bool:
        x = np.asarray(x, dtype=np.float64)
        if self.kind == "l1":
            return np.abs(x).sum() <= self.radius * (1 + rtol)
        return np.linalg.norm(x - self.center) <= self.radius * (1 + rtol)
