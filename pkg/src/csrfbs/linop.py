"""Linear operators of the separation model.

All video operators act on arrays of shape ``(n1, n2, n3)``.  Differences use
the Neumann rule (the last slice along the differenced axis is zero).
Convolutions are per-frame 2-D circular convolutions with a small filter that
is zero-padded to the frame size and anchored at pixel (0, 0); the same filter
is used for every frame.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.fft as sfft

# analytic squared operator-norm bounds
DIFF_NORM_SQ = 4.0
STACK2_NORM_SQ = 8.0


@dataclass(frozen=True)
class LinearMap:
    """A linear operator with its adjoint and an upper bound on ``||L||^2``."""

    apply: Callable[[np.ndarray], np.ndarray]
    adjoint: Callable[[np.ndarray], np.ndarray]
    op_norm_sq: float
    in_shape: tuple
    out_shape: tuple
    name: str = ""

    @property
    def in_dim(self) -> int:
        return int(np.prod(self.in_shape))

    @property
    def out_dim(self) -> int:
        return int(np.prod(self.out_shape))

    def __call__(self, x):
        return self.apply(x)


# -- differences ---------------------------------------------------------------

def _fwd_diff(x, axis):
    y = np.zeros_like(x)
    n = x.shape[axis]
    if n > 1:
        hi = [slice(None)] * x.ndim
        lo = [slice(None)] * x.ndim
        hi[axis] = slice(1, None)
        lo[axis] = slice(None, -1)
        y[tuple(lo)] = x[tuple(hi)] - x[tuple(lo)]
    return y


def _fwd_diff_adj(y, axis):
    x = np.zeros_like(y)
    n = y.shape[axis]
    if n > 1:
        hi = [slice(None)] * y.ndim
        lo = [slice(None)] * y.ndim
        hi[axis] = slice(1, None)
        lo[axis] = slice(None, -1)
        x[tuple(lo)] -= y[tuple(lo)]
        x[tuple(hi)] += y[tuple(lo)]
    return x


def diff_v(x):
    """Vertical difference ``x[i+1, j] - x[i, j]`` within each frame."""
    return _fwd_diff(np.asarray(x, dtype=np.float64), 0)


def diff_v_adjoint(y):
    return _fwd_diff_adj(np.asarray(y, dtype=np.float64), 0)


def diff_h(x):
    """Horizontal difference ``x[i, j+1] - x[i, j]`` within each frame."""
    return _fwd_diff(np.asarray(x, dtype=np.float64), 1)


def diff_h_adjoint(y):
    return _fwd_diff_adj(np.asarray(y, dtype=np.float64), 1)


def diff_t(x):
    """Temporal difference between consecutive frames."""
    return _fwd_diff(np.asarray(x, dtype=np.float64), 2)


def diff_t_adjoint(y):
    return _fwd_diff_adj(np.asarray(y, dtype=np.float64), 2)


def tv_stack(x):
    """Spatial gradient ``[D_v x; D_h x]`` as an array of shape ``(2, n1, n2, n3)``."""
    x = np.asarray(x, dtype=np.float64)
    return np.stack([_fwd_diff(x, 0), _fwd_diff(x, 1)])


def tv_adjoint(y):
    return _fwd_diff_adj(y[0], 0) + _fwd_diff_adj(y[1], 1)


def flat_stack(l, time_invariant: bool = True):
    """Flatness operator for stripe fields.

    ``[D_v l; D_t l]`` (shape ``(2, n1, n2, n3)``) for time-invariant stripes,
    ``D_v l`` (shape ``(1, n1, n2, n3)``) otherwise.
    """
    l = np.asarray(l, dtype=np.float64)
    if time_invariant:
        return np.stack([_fwd_diff(l, 0), _fwd_diff(l, 2)])
    return _fwd_diff(l, 0)[None]


def flat_adjoint(y, time_invariant: bool = True):
    if time_invariant:
        return _fwd_diff_adj(y[0], 0) + _fwd_diff_adj(y[1], 2)
    return _fwd_diff_adj(y[0], 0)


def flat_norm_sq(time_invariant: bool) -> float:
    return STACK2_NORM_SQ if time_invariant else DIFF_NORM_SQ


# -- per-frame circular convolution ------------------------------------------------

def _check_filter(d, n1, n2):
    d = np.asarray(d, dtype=np.float64)
    if d.ndim != 2:
        raise ValueError(f"filter must be 2-D, got shape {d.shape}")
    if d.shape[0] > n1 or d.shape[1] > n2:
        raise ValueError(f"filter {d.shape} larger than frame {(n1, n2)}")
    return d


def pad_filter(d, n1: int, n2: int) -> np.ndarray:
    d = _check_filter(d, n1, n2)
    out = np.zeros((n1, n2))
    out[: d.shape[0], : d.shape[1]] = d
    return out


def filter_spectrum(d, n1: int, n2: int) -> np.ndarray:
    """Half-plane 2-D DFT of the zero-padded filter, shape ``(n1, n2//2 + 1)``."""
    return sfft.rfft2(pad_filter(d, n1, n2))


def _spatial_rfft(x):
    return sfft.rfft2(x, axes=(-3, -2))


def _spatial_irfft(xh, n1, n2):
    return sfft.irfft2(xh, s=(n1, n2), axes=(-3, -2))


def conv_apply(d, a):
    """Per-frame circular convolution ``d * a`` (same filter for all frames)."""
    a = np.asarray(a, dtype=np.float64)
    n1, n2 = a.shape[0], a.shape[1]
    dh = filter_spectrum(d, n1, n2)
    return _spatial_irfft(_spatial_rfft(a) * dh[:, :, None], n1, n2)


def conv_adjoint(d, y):
    """Adjoint of :func:`conv_apply`: per-frame circular correlation with ``d``."""
    y = np.asarray(y, dtype=np.float64)
    n1, n2 = y.shape[0], y.shape[1]
    dh = filter_spectrum(d, n1, n2)
    return _spatial_irfft(_spatial_rfft(y) * np.conj(dh)[:, :, None], n1, n2)


def conv_norm_sq(d, n1: int, n2: int) -> float:
    """Exact squared norm of ``a -> d * a``: the largest ``|DFT(d)|^2`` bin."""
    return float(np.max(np.abs(filter_spectrum(d, n1, n2)) ** 2))


def kernel_norm_sq(a) -> float:
    """Squared norm bound of ``d -> d * a`` for a video-sized kernel ``a``.

    The filter is shared by every frame, so the exact norm over full-frame
    filters is ``max_w sum_k |A_k(w)|^2``; restricting ``d`` to a small
    support can only lower it.
    """
    a = np.asarray(a, dtype=np.float64)
    ah = _spatial_rfft(a)
    return float(np.max(np.sum(np.abs(ah) ** 2, axis=-1)))


# -- factories -----------------------------------------------------------------

def identity_map(shape) -> LinearMap:
    shape = tuple(shape)
    return LinearMap(lambda x: np.array(x, dtype=np.float64), lambda y: np.array(y, dtype=np.float64),
                     1.0, shape, shape, "identity")


def diff_v_map(shape) -> LinearMap:
    shape = tuple(shape)
    return LinearMap(diff_v, diff_v_adjoint, DIFF_NORM_SQ, shape, shape, "D_v")


def diff_h_map(shape) -> LinearMap:
    shape = tuple(shape)
    return LinearMap(diff_h, diff_h_adjoint, DIFF_NORM_SQ, shape, shape, "D_h")


def diff_t_map(shape) -> LinearMap:
    shape = tuple(shape)
    return LinearMap(diff_t, diff_t_adjoint, DIFF_NORM_SQ, shape, shape, "D_t")


def tv_map(shape) -> LinearMap:
    shape = tuple(shape)
    return LinearMap(tv_stack, tv_adjoint, STACK2_NORM_SQ, shape, (2,) + shape, "D")


def flat_map(shape, time_invariant: bool = True) -> LinearMap:
    shape = tuple(shape)
    k = 2 if time_invariant else 1
    return LinearMap(lambda x: flat_stack(x, time_invariant),
                     lambda y: flat_adjoint(y, time_invariant),
                     flat_norm_sq(time_invariant), shape, (k,) + shape, "D_l")


def conv_map(d, shape) -> LinearMap:
    shape = tuple(shape)
    d = _check_filter(d, shape[0], shape[1]).copy()
    return LinearMap(lambda a: conv_apply(d, a), lambda y: conv_adjoint(d, y),
                     conv_norm_sq(d, shape[0], shape[1]), shape, shape, "C_d")


def op_norm_sq_power(op: LinearMap, iters: int = 100, seed: int = 0) -> float:
    """Power-iteration estimate of the largest eigenvalue of ``L* L``.

    The Rayleigh quotients of power iteration on a PSD operator never
    decrease, so the estimate is nondecreasing in ``iters``.
    """
    if iters < 1:
        raise ValueError("iters must be >= 1")
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(op.in_shape)
    x /= np.linalg.norm(x)
    est = 0.0
    for _ in range(iters):
        y = op.adjoint(op.apply(x))
        est = max(est, float(np.vdot(x, y)))
        nrm = np.linalg.norm(y)
        if nrm == 0.0:
            break
        x = y / nrm
    return est
