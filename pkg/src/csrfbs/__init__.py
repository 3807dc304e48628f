"""Foreground-background separation of degraded low frame-rate videos.

The foreground is modeled by a convolutional sparse representation (CSR),
the background by a low-rank or static-scene prior, and Gaussian noise,
sparse outliers and stripe noise are absorbed by constraint sets.
"""

from .video import VideoTensor, load_video, save_video
from .csr import CsrConfig, Dictionary
from .background import LowRank, StaticScene, make_background
from .noise import NoiseSpec, case_spec, degrade, derive_radii
from .solver import SeparationProblem, SolverSettings, separate, run_alm, final_refinement

__version__ = "0.1.0"

__all__ = [
    "VideoTensor", "load_video", "save_video", "CsrConfig", "Dictionary", "LowRank", "StaticScene",
    "make_background", "NoiseSpec", "case_spec", "degrade", "derive_radii", "SeparationProblem",
    "SolverSettings", "separate", "run_alm", "final_refinement",
]
