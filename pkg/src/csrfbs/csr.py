"""Convolutional sparse representation of the foreground.

A dictionary is a tuple of small 2-D filters; the matching coefficient stack is
an array of shape ``(D, n1, n2, n3)`` holding one video-sized map per filter.
The foreground model is ``sum_d d_d * a_d`` with the per-frame circular
convolution of :mod:`csrfbs.linop`.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.fft as sfft

from .linop import conv_norm_sq, filter_spectrum, kernel_norm_sq
from .prox import project_unit_l2

DICT_MAGIC = b"CFBD"
DICT_VERSION = 1


@dataclass(frozen=True)
class CsrConfig:
    n_filters: int = 8
    filter_size: int = 9
    lambda1: float = 0.05
    init_seed: int = 0

    def __post_init__(self):
        if self.n_filters < 1:
            raise ValueError("n_filters must be >= 1")
        if self.filter_size < 1:
            raise ValueError("filter_size must be >= 1")
        if self.lambda1 <= 0:
            raise ValueError("lambda1 must be positive")


@dataclass(frozen=True)
class Dictionary:
    """``D`` 2-D filters; sizes may differ between filters."""

    filters: tuple

    def __post_init__(self):
        fs = tuple(np.array(f, dtype=np.float64) for f in self.filters)
        if not fs:
            raise ValueError("dictionary needs at least one filter")
        for f in fs:
            if f.ndim != 2:
                raise ValueError(f"filters must be 2-D, got shape {f.shape}")
            f.setflags(write=False)
        object.__setattr__(self, "filters", fs)

    def __len__(self):
        return len(self.filters)

    @property
    def n_filters(self) -> int:
        return len(self.filters)

    def norms(self) -> np.ndarray:
        return np.array([np.linalg.norm(f) for f in self.filters])

    def check_fits(self, n1: int, n2: int) -> None:
        for f in self.filters:
            if f.shape[0] > n1 or f.shape[1] > n2:
                raise ValueError(f"filter {f.shape} larger than frame {(n1, n2)}")


def init_dictionary(cfg: CsrConfig) -> Dictionary:
    """Seeded Gaussian filters, each projected onto the unit l2 ball."""
    rng = np.random.default_rng(cfg.init_seed)
    p = cfg.filter_size
    return Dictionary(tuple(project_unit_l2(rng.standard_normal((p, p)))
                            for _ in range(cfg.n_filters)))


def zero_coefficients(dictionary: Dictionary, shape) -> np.ndarray:
    return np.zeros((dictionary.n_filters,) + tuple(shape))


class DictionaryOperator:
    """The map ``a -> sum_d d_d * a_d`` for a fixed dictionary and frame size.

    Filter spectra are computed once; the solver calls :meth:`apply` and
    :meth:`adjoint` every iteration.
    """

    def __init__(self, dictionary: Dictionary, shape, workers: int = 1):
        n1, n2, n3 = shape
        dictionary.check_fits(n1, n2)
        self.dictionary = dictionary
        self.shape = tuple(shape)
        self.workers = workers
        self.spectra = np.stack([filter_spectrum(f, n1, n2) for f in dictionary.filters])[..., None]

    def _fft(self, x):
        return sfft.rfft2(x, axes=(-3, -2), workers=self.workers)

    def _ifft(self, xh):
        return sfft.irfft2(xh, s=self.shape[:2], axes=(-3, -2), workers=self.workers)

    def apply(self, a):
        return self._ifft(np.sum(self._fft(a) * self.spectra, axis=0))

    def adjoint(self, y):
        return self._ifft(self._fft(y)[None] * np.conj(self.spectra))

    def norm_sq_sum(self) -> float:
        """``sum_d ||C_{d_d}||^2`` with the exact per-filter norms."""
        return float(sum(np.max(np.abs(s) ** 2) for s in self.spectra))


def reconstruct(dictionary: Dictionary, a) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 4 or a.shape[0] != dictionary.n_filters:
        raise ValueError(f"coefficient stack shape {a.shape} does not match {dictionary.n_filters} filters")
    return DictionaryOperator(dictionary, a.shape[1:]).apply(a)


def csr_data_term(f, dictionary: Dictionary, a) -> float:
    f = np.asarray(f, dtype=np.float64)
    rec = reconstruct(dictionary, a)
    if rec.shape != f.shape:
        raise ValueError(f"foreground shape {f.shape} does not match coefficients {rec.shape}")
    return 0.5 * float(np.sum((f - rec) ** 2))


def correlate_crop(a, r, shapes: Sequence[tuple]) -> list:
    """``crop_p(sum_k corr(a_d[..., k], r[..., k]))`` for every filter ``d``.

    This is the adjoint of ``d_d -> d_d * a_d`` restricted to the filter
    support; ``a`` has shape ``(D, n1, n2, n3)`` and ``r`` ``(n1, n2, n3)``.
    """
    n1, n2 = r.shape[0], r.shape[1]
    ah = sfft.rfft2(a, axes=(-3, -2))
    rh = sfft.rfft2(r, axes=(-3, -2))
    full = sfft.irfft2(np.sum(np.conj(ah) * rh[None], axis=-1), s=(n1, n2), axes=(-2, -1))
    return [full[d, : s[0], : s[1]].copy() for d, s in enumerate(shapes)]


def csr_gradient_d(f, dictionary: Dictionary, a) -> list:
    """Gradient of ``0.5 ||f - sum_d d_d * a_d||^2`` with respect to each filter."""
    f = np.asarray(f, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    r = f - reconstruct(dictionary, a)
    shapes = [fl.shape for fl in dictionary.filters]
    return [-g for g in correlate_crop(a, r, shapes)]


def coefficient_norm_sq_sum(a) -> float:
    """``sum_d ||A_{a_d}||^2``, the Lipschitz bound used by the filter update."""
    return float(sum(kernel_norm_sq(ad) for ad in np.asarray(a)))


def filter_norm_sq_sum(dictionary: Dictionary, n1: int, n2: int) -> float:
    return float(sum(conv_norm_sq(f, n1, n2) for f in dictionary.filters))


# -- I/O -----------------------------------------------------------------------

def save_dictionary(dictionary: Dictionary, path) -> None:
    """Raw format: magic, version, D, then per filter (rows, cols), then f32 data."""
    with open(path, "wb") as fh:
        fh.write(struct.pack("<4sII", DICT_MAGIC, DICT_VERSION, dictionary.n_filters))
        for f in dictionary.filters:
            fh.write(struct.pack("<II", *f.shape))
        for f in dictionary.filters:
            fh.write(f.ravel(order="F").astype("<f4").tobytes())


def load_dictionary(path) -> Dictionary:
    from .video import VideoFormatError

    raw = Path(path).read_bytes()
    if len(raw) < 12:
        raise VideoFormatError(f"{path}: file shorter than header")
    magic, version, n = struct.unpack_from("<4sII", raw)
    if magic != DICT_MAGIC:
        raise VideoFormatError(f"{path}: bad magic {magic!r}")
    if version != DICT_VERSION:
        raise VideoFormatError(f"{path}: unsupported version {version}")
    off = 12
    if len(raw) < off + 8 * n:
        raise VideoFormatError(f"{path}: truncated filter table")
    shapes = [struct.unpack_from("<II", raw, off + 8 * i) for i in range(n)]
    off += 8 * n
    need = 4 * sum(r * c for r, c in shapes)
    if len(raw) - off != need:
        raise VideoFormatError(f"{path}: payload has {len(raw) - off} bytes, expected {need}")
    filters = []
    for r, c in shapes:
        chunk = np.frombuffer(raw, dtype="<f4", count=r * c, offset=off).astype(np.float64)
        filters.append(chunk.reshape((r, c), order="F"))
        off += 4 * r * c
    return Dictionary(tuple(filters))


def dump_dictionary_images(dictionary: Dictionary, directory, scale: int = 8) -> Path:
    """Write one min-max normalized PNG tile per filter plus a grid overview."""
    from PIL import Image

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    tiles = []
    for i, f in enumerate(dictionary.filters):
        lo, hi = f.min(), f.max()
        t = (f - lo) / (hi - lo) if hi > lo else np.zeros_like(f)
        t = np.kron(t, np.ones((scale, scale)))
        img = np.round(t * 255).astype(np.uint8)
        Image.fromarray(img).save(directory / f"filter_{i:03d}.png")
        tiles.append(img)
    cols = int(np.ceil(np.sqrt(len(tiles))))
    rows = int(np.ceil(len(tiles) / cols))
    th = max(t.shape[0] for t in tiles)
    tw = max(t.shape[1] for t in tiles)
    gap = 2
    grid = np.full((rows * (th + gap) + gap, cols * (tw + gap) + gap), 128, dtype=np.uint8)
    for i, t in enumerate(tiles):
        r, c = divmod(i, cols)
        y0, x0 = gap + r * (th + gap), gap + c * (tw + gap)
        grid[y0: y0 + t.shape[0], x0: x0 + t.shape[1]] = t
    out = directory / "grid.png"
    Image.fromarray(grid).save(out)
    return out
