"""Background models plugged into the inner primal-dual solver.

A model supplies the primal prox of ``g_0`` for the background update, and a
list of dual blocks ``(L_i, conjugate prox of g_i)``.  The background
stepsize follows the operator-norm rule ``1 / (9 + sum_i ||L_i||^2)``, where
9 accounts for the TV stack (8) and the fidelity coupling (1).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linop import DIFF_NORM_SQ, LinearMap, diff_t, diff_t_map
from .prox import svt

BASE_NORM_SQ = 9.0


def mat(b) -> np.ndarray:
    """Background video ``(n1, n2, n3)`` as an ``n3 x n1*n2`` matrix, one frame per row."""
    b = np.asarray(b)
    n1, n2, n3 = b.shape
    return b.reshape((n1 * n2, n3), order="F").T


def unmat(B, shape) -> np.ndarray:
    n1, n2, n3 = shape
    return np.asarray(B).T.reshape((n1, n2, n3), order="F")


class BackgroundModel:
    """Base class: no ``g_0`` and no linear blocks."""

    kind = "none"

    @property
    def op_norms_sq(self) -> tuple:
        return ()

    def linear_maps(self, shape) -> list[LinearMap]:
        return []

    def primal_prox(self, b, gamma_b):
        return b

    def dual_prox(self, index: int, w, gamma_z):
        raise IndexError(index)

    def value(self, b) -> float:
        """``g_0(b) + sum_i g_i(L_i b)`` with indicator terms left out."""
        return 0.0

    def finalize(self, b):
        return b


@dataclass(frozen=True)
class LowRank(BackgroundModel):
    """Nuclear-norm background, ``g_0 = lambda_lr ||mat(b)||_*``, no dual blocks."""

    lambda_lr: float = 1.0
    kind = "lowrank"

    def __post_init__(self):
        if self.lambda_lr <= 0:
            raise ValueError("lambda_lr must be positive")

    def primal_prox(self, b, gamma_b):
        return lowrank_prox_b(b, gamma_b, self.lambda_lr)

    def value(self, b) -> float:
        return self.lambda_lr * float(np.linalg.svd(mat(b), compute_uv=False).sum())


@dataclass(frozen=True)
class StaticScene(BackgroundModel):
    """Static background, ``D_t b = 0`` as a single dual block."""

    kind = "static"

    @property
    def op_norms_sq(self) -> tuple:
        return (DIFF_NORM_SQ,)

    def linear_maps(self, shape) -> list[LinearMap]:
        return [diff_t_map(shape)]

    def dual_prox(self, index: int, w, gamma_z):
        # the conjugate of the indicator of {0} is zero; its prox is the identity
        if index != 0:
            raise IndexError(index)
        return w

    def finalize(self, b):
        """Replace ``b`` by its temporal mean so ``D_t b = 0`` holds exactly."""
        b = np.asarray(b)
        mean = b.mean(axis=2, keepdims=True)
        return np.repeat(mean, b.shape[2], axis=2)


def lowrank_prox_b(b, gamma_b, lambda_lr):
    if gamma_b <= 0 or lambda_lr <= 0:
        raise ValueError("gamma_b and lambda_lr must be positive")
    b = np.asarray(b, dtype=np.float64)
    return unmat(svt(mat(b), gamma_b * lambda_lr), b.shape)


def static_scene_dual_step(y, b_tilde, gamma_z):
    """Dual update for the static constraint: ``y + gamma_z D_t b_tilde``."""
    return np.asarray(y) + gamma_z * diff_t(b_tilde)


def model_stepsize(model: BackgroundModel) -> float:
    return 1.0 / (BASE_NORM_SQ + sum(model.op_norms_sq))


def make_background(kind: str, lambda_lr: float = 1.0) -> BackgroundModel:
    if kind == "lowrank":
        return LowRank(lambda_lr)
    if kind == "static":
        return StaticScene()
    raise ValueError(f"unknown background model {kind!r}; expected 'lowrank' or 'static'")
