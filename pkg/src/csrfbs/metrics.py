"""Quality measures: MPSNR, MSSIM, ROC AUC and the parameter-tuning measure."""

from __future__ import annotations

import numpy as np
from scipy.signal import correlate2d
from scipy.stats import rankdata

from .video import as_array

PSNR_CAP_DB = 100.0
SSIM_WIN = 11
SSIM_SIGMA = 1.5
SSIM_C1 = 0.01 ** 2
SSIM_C2 = 0.03 ** 2


def _pair(estimate, reference):
    q = as_array(estimate)
    r = as_array(reference)
    if q.shape != r.shape:
        raise ValueError(f"estimate shape {q.shape} does not match reference {r.shape}")
    return q, r


def frame_psnr(estimate, reference) -> tuple[np.ndarray, np.ndarray]:
    """Per-frame PSNR (peak 1) and a mask of frames capped at ``PSNR_CAP_DB``."""
    q, r = _pair(estimate, reference)
    n1, n2, _ = q.shape
    err = np.sum((q - r) ** 2, axis=(0, 1))
    with np.errstate(divide="ignore"):
        psnr = 10.0 * np.log10(n1 * n2 / err)
    capped = ~(psnr < PSNR_CAP_DB)
    return np.where(capped, PSNR_CAP_DB, psnr), capped


def mpsnr(estimate, reference) -> float:
    return float(np.mean(frame_psnr(estimate, reference)[0]))


def gaussian_window(size: int = SSIM_WIN, sigma: float = SSIM_SIGMA) -> np.ndarray:
    x = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(x ** 2) / (2 * sigma ** 2))
    w = np.outer(g, g)
    return w / w.sum()


def ssim(x, y) -> float:
    """SSIM of two frames with dynamic range 1 over all full 11x11 windows."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape[0] < SSIM_WIN or x.shape[1] < SSIM_WIN:
        raise ValueError(f"frame {x.shape} smaller than the {SSIM_WIN}x{SSIM_WIN} SSIM window")
    w = gaussian_window()
    filt = lambda z: correlate2d(z, w, mode="valid")
    mx, my = filt(x), filt(y)
    sxx = filt(x * x) - mx * mx
    syy = filt(y * y) - my * my
    sxy = filt(x * y) - mx * my
    num = (2 * mx * my + SSIM_C1) * (2 * sxy + SSIM_C2)
    den = (mx * mx + my * my + SSIM_C1) * (sxx + syy + SSIM_C2)
    return float(np.mean(num / den))


def mssim(estimate, reference) -> float:
    q, r = _pair(estimate, reference)
    return float(np.mean([ssim(q[:, :, k], r[:, :, k]) for k in range(q.shape[2])]))


def auc(f_estimate, fg_map) -> float:
    """ROC AUC of per-pixel scores ``|f|`` against a binary foreground map.

    Computed exactly with the Mann-Whitney rank statistic; ties get midranks.
    """
    scores, labels = _pair(f_estimate, fg_map)
    scores = np.abs(scores).ravel()
    labels = labels.ravel()
    if not np.all((labels == 0) | (labels == 1)):
        raise ValueError("foreground map must be binary")
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC undefined: foreground map has a single class")
    ranks = rankdata(scores)
    return float((ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def tuning_measure(u, f, b, u_ref, f_ref, b_ref) -> float:
    """Sum of squared errors weighted by each reference's distance to its mean."""
    total = 0.0
    for est, ref in ((u, u_ref), (f, f_ref), (b, b_ref)):
        e, r = _pair(est, ref)
        total += float(np.sum(np.abs(r - r.mean()) * (e - r) ** 2))
    return total


def threshold_map(f_ref, tau: float) -> np.ndarray:
    """Binary map of pixels with ``|f_ref| > tau``."""
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    return (np.abs(as_array(f_ref)) > tau).astype(np.float64)


def default_threshold(f_ref) -> float:
    return 0.1 * float(np.abs(as_array(f_ref)).max())
