"""Synthetic low frame-rate videos with exact foreground/background ground truth.

Bright squares or discs jump several pixels per frame across a smooth,
piecewise-textured static background.  The foreground component is the
additive difference ``object - background`` on the object support, so
``clean = foreground + background`` holds exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

OBJECT_INTENSITY = 0.95


@dataclass(frozen=True)
class Fixture:
    name: str
    clean: np.ndarray
    foreground: np.ndarray
    background: np.ndarray
    eta_f: float          # rough foreground l1 radius: contrast x area x count x frames
    filter_size: int
    n_filters: int

    @property
    def shape(self):
        return self.clean.shape


def textured_background(n1: int, n2: int) -> np.ndarray:
    i = np.arange(n1)[:, None] / n1
    j = np.arange(n2)[None, :] / n2
    bg = 0.38 + 0.10 * np.sin(2 * np.pi * 1.5 * i) * np.cos(2 * np.pi * j) + 0.06 * j
    bg[n1 // 5: n1 // 2, n2 // 2: (4 * n2) // 5] += 0.12
    bg[(2 * n1) // 3:, : n2 // 4] -= 0.08
    return bg


def _bounce(x0, vel, k, span):
    # position on [0, span] moving with constant speed and reflecting at the ends
    if span <= 0:
        return 0
    p = (x0 + vel * k) % (2 * span)
    return int(p if p <= span else 2 * span - p)


def _square_mask(n1, n2, r, c, size):
    m = np.zeros((n1, n2), dtype=bool)
    m[r: r + size, c: c + size] = True
    return m


def _disc_mask(n1, n2, r, c, size):
    rad = size / 2.0
    ii, jj = np.mgrid[0:n1, 0:n2]
    return (ii - (r + rad - 0.5)) ** 2 + (jj - (c + rad - 0.5)) ** 2 <= rad ** 2


def moving_objects(n1: int, n2: int, n3: int, shape: str = "square", size: int = 6,
                   paths=((2, 3, 3, 5), (20, 25, 4, -3)), name: str = "") -> Fixture:
    """Objects follow bouncing straight paths ``(row0, col0, vrow, vcol)``."""
    bg = textured_background(n1, n2)
    maskfn = _square_mask if shape == "square" else _disc_mask
    fg = np.zeros((n1, n2, n3))
    bgv = np.repeat(bg[:, :, None], n3, axis=2)
    for k in range(n3):
        mask = np.zeros((n1, n2), dtype=bool)
        for r0, c0, vr, vc in paths:
            r = _bounce(r0, vr, k, n1 - size)
            c = _bounce(c0, vc, k, n2 - size)
            mask |= maskfn(n1, n2, r, c, size)
        fg[:, :, k] = np.where(mask, OBJECT_INTENSITY - bg, 0.0)
    area = _square_mask(n1, n2, 0, 0, size).sum() if shape == "square" else _disc_mask(n1, n2, 0, 0, size).sum()
    eta_f = float(round((OBJECT_INTENSITY - bg.mean()) * area * len(paths) * n3, 1))
    return Fixture(name or f"{shape}s{n1}", bgv + fg, fg, bgv, eta_f,
                   filter_size=size + 2, n_filters=4)


FIXTURES = {
    "squares32": lambda: moving_objects(32, 32, 10, "square", 6, ((2, 3, 3, 5), (20, 22, 4, -3)), "squares32"),
    "discs32": lambda: moving_objects(32, 32, 10, "disc", 7, ((4, 20, 5, -3), (18, 2, -3, 4)), "discs32"),
    "squares64": lambda: moving_objects(64, 64, 20, "square", 8, ((4, 6, 5, 7), (40, 44, 6, -5)), "squares64"),
    "discs64": lambda: moving_objects(64, 64, 20, "disc", 9, ((8, 40, 7, -4), (36, 4, -5, 6)), "discs64"),
}


def load_fixture(name: str) -> Fixture:
    try:
        return FIXTURES[name]()
    except KeyError:
        raise KeyError(f"unknown fixture {name!r}; available: {sorted(FIXTURES)}") from None
