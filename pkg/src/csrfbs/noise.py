"""Synthetic degradations and the matching constraint radii.

Degradations are applied in a fixed order: additive Gaussian noise, then
salt-and-pepper replacement, then additive stripes.  No clipping is done.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .video import as_array


@dataclass(frozen=True)
class NoiseSpec:
    sigma: float = 0.0
    p_s: float = 0.0
    stripe_amp: float = 0.0
    stripe_time_invariant: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")
        if not 0.0 <= self.p_s <= 1.0:
            raise ValueError("p_s must lie in [0, 1]")
        if self.stripe_amp < 0:
            raise ValueError("stripe_amp must be nonnegative")


def case_spec(case: int, seed: int = 0) -> NoiseSpec:
    """The three benchmark degradations: Gaussian; + salt-and-pepper; + stripes."""
    if case == 1:
        return NoiseSpec(sigma=0.1, seed=seed)
    if case == 2:
        return NoiseSpec(sigma=0.1, p_s=0.05, seed=seed)
    if case == 3:
        return NoiseSpec(sigma=0.1, p_s=0.05, stripe_amp=0.2, stripe_time_invariant=True, seed=seed)
    raise ValueError(f"unknown noise case {case}; expected 1, 2 or 3")


def add_gaussian(v, sigma: float, seed: int) -> np.ndarray:
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    v = as_array(v)
    if sigma == 0:
        return v.copy()
    rng = np.random.default_rng(seed)
    return v + sigma * rng.standard_normal(v.shape)


def add_salt_pepper(v, p_s: float, seed: int) -> np.ndarray:
    """Replace each pixel with probability ``p_s`` by 0 or 1 (equally likely)."""
    if not 0.0 <= p_s <= 1.0:
        raise ValueError("p_s must lie in [0, 1]")
    v = as_array(v)
    out = v.copy()
    if p_s == 0:
        return out
    rng = np.random.default_rng(seed)
    hit = rng.random(v.shape) < p_s
    salt = rng.random(v.shape) < 0.5
    out[hit] = salt[hit].astype(np.float64)
    return out


def add_stripes(v, amp: float, time_invariant: bool, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Add vertical stripes: one uniform offset in ``[-amp, amp]`` per column.

    Time-invariant stripes share the offsets across frames; otherwise each
    frame draws its own.  Returns the degraded video and the stripe field.
    """
    if amp < 0:
        raise ValueError("amp must be nonnegative")
    v = as_array(v)
    n1, n2, n3 = v.shape
    if amp == 0:
        return v.copy(), np.zeros_like(v)
    rng = np.random.default_rng(seed)
    if time_invariant:
        offsets = np.repeat(rng.uniform(-amp, amp, size=(1, n2, 1)), n3, axis=2)
    else:
        offsets = rng.uniform(-amp, amp, size=(1, n2, n3))
    field = np.repeat(offsets, n1, axis=0)
    return v + field, field


@dataclass
class Degraded:
    observed: np.ndarray
    sparse: np.ndarray     # s-bar: replacement minus the pre-replacement value
    stripes: np.ndarray    # l-bar
    gaussian: np.ndarray   # n


def degrade(clean, spec: NoiseSpec) -> Degraded:
    """Apply ``spec`` to a clean video; the three noise draws use independent sub-seeds."""
    clean = as_array(clean)
    s_gauss, s_sp, s_stripe = (int(ss.generate_state(1)[0]) for ss in np.random.SeedSequence(spec.seed).spawn(3))
    noisy = add_gaussian(clean, spec.sigma, s_gauss)
    gaussian = noisy - clean
    replaced = add_salt_pepper(noisy, spec.p_s, s_sp)
    sparse = replaced - noisy
    observed, stripes = add_stripes(replaced, spec.stripe_amp, spec.stripe_time_invariant, s_stripe)
    return Degraded(observed, sparse, stripes, gaussian)


def derive_radii(sigma: float, p_s: float, n1: int, n2: int, n3: int) -> tuple[float, float]:
    """Fidelity radius ``eps`` and sparse-noise radius ``eta_s`` from noise statistics."""
    n = n1 * n2 * n3
    eps = 0.9 * sigma * math.sqrt((1.0 - p_s) * n)
    eta_s = 0.5 * p_s * n
    return eps, eta_s
