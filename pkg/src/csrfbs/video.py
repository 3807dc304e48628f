"""Video data model, vectorization conventions and file I/O.

A video with ``n3`` frames of size ``n1 x n2`` is held as a float64 array of
shape ``(n1, n2, n3)``.  Its vectorized form stacks the column-major
vectorization of every frame, frame after frame, so element ``(i, j, k)``
(0-based) sits at ``k*n1*n2 + j*n1 + i``.  That is exactly a Fortran-order
ravel of the 3-D array.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

MAGIC = b"CFBS"
VERSION = 1
_HEADER = struct.Struct("<4sIIII")


class VideoFormatError(ValueError):
    """Raised for malformed video files or inconsistent frame stacks."""


@dataclass(frozen=True)
class VideoTensor:
    """Immutable real-valued grayscale video.

    ``array`` has shape ``(n1, n2, n3)``; ``data`` is the canonical vector.
    """

    array: np.ndarray

    def __post_init__(self):
        arr = np.array(self.array, dtype=np.float64, copy=True)
        if arr.ndim != 3:
            raise ValueError(f"video array must be 3-D (n1, n2, n3), got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("video contains non-finite values")
        arr.setflags(write=False)
        object.__setattr__(self, "array", arr)

    @property
    def n1(self) -> int:
        return self.array.shape[0]

    @property
    def n2(self) -> int:
        return self.array.shape[1]

    @property
    def n3(self) -> int:
        return self.array.shape[2]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.array.shape

    @property
    def size(self) -> int:
        return self.array.size

    @property
    def data(self) -> np.ndarray:
        """Canonical vectorized form (frame-major, column-major per frame)."""
        return self.array.ravel(order="F")

    @classmethod
    def from_vector(cls, data, n1: int, n2: int, n3: int) -> "VideoTensor":
        data = np.asarray(data, dtype=np.float64)
        if data.ndim != 1 or data.size != n1 * n2 * n3:
            raise ValueError(f"vector of length {data.size} does not match {n1}x{n2}x{n3}")
        return cls(data.reshape((n1, n2, n3), order="F"))

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self.array
        return self.array.astype(dtype)


def as_array(v) -> np.ndarray:
    """Plain ndarray view of a VideoTensor or array-like."""
    if isinstance(v, VideoTensor):
        return v.array
    return np.asarray(v, dtype=np.float64)


def linear_index(i: int, j: int, k: int, n1: int, n2: int) -> int:
    """0-based position of pixel (i, j) of frame k in the vectorized video."""
    return k * n1 * n2 + j * n1 + i


def vectorize(frames: Sequence[np.ndarray]) -> VideoTensor:
    """Stack ``n3`` equally sized ``n1 x n2`` frames into a video."""
    frames = [np.asarray(fr, dtype=np.float64) for fr in frames]
    if not frames:
        raise ValueError("need at least one frame")
    shape = frames[0].shape
    if len(shape) != 2:
        raise ValueError(f"frames must be 2-D matrices, got shape {shape}")
    for k, fr in enumerate(frames):
        if fr.shape != shape:
            raise ValueError(f"frame {k + 1} has shape {fr.shape}, expected {shape}")
    return VideoTensor(np.stack(frames, axis=2))


def frame_at(v: VideoTensor, k: int) -> np.ndarray:
    """Frame ``k`` (1-based, as in the frame numbering of the model)."""
    if not 1 <= k <= v.n3:
        raise IndexError(f"frame index {k} out of range 1..{v.n3}")
    return v.array[:, :, k - 1].copy()


def save_video(v, path) -> None:
    arr = as_array(v)
    n1, n2, n3 = arr.shape
    payload = arr.ravel(order="F").astype("<f4")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, n1, n2, n3))
        fh.write(payload.tobytes())


def load_video(path) -> VideoTensor:
    """Load a raw ``.cfbs`` file, or a directory of grayscale images."""
    path = Path(path)
    if path.is_dir():
        return load_image_dir(path)
    raw = path.read_bytes()
    if len(raw) < _HEADER.size:
        raise VideoFormatError(f"{path}: file shorter than header")
    magic, version, n1, n2, n3 = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise VideoFormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise VideoFormatError(f"{path}: unsupported version {version}")
    expected = 4 * n1 * n2 * n3
    body = raw[_HEADER.size:]
    if len(body) != expected:
        raise VideoFormatError(f"{path}: payload has {len(body)} bytes, header implies {expected}")
    data = np.frombuffer(body, dtype="<f4").astype(np.float64)
    return VideoTensor.from_vector(data, n1, n2, n3)


_IMAGE_SUFFIXES = {".png", ".pgm", ".tif", ".tiff", ".bmp"}


def _image_to_unit(img) -> np.ndarray:
    mode = img.mode
    if mode == "L":
        return np.asarray(img, dtype=np.float64) / 255.0
    if mode.startswith("I;16") or mode == "I":
        # Pillow opens 16-bit PNG/PGM as "I" or "I;16*"
        return np.asarray(img, dtype=np.float64) / 65535.0
    raise VideoFormatError(f"unsupported image mode {mode!r}; only 8/16-bit grayscale is accepted")


def load_image_dir(path) -> VideoTensor:
    """Read every grayscale image in ``path`` (lexicographic order) as a frame."""
    from PIL import Image

    files = sorted(p for p in Path(path).iterdir() if p.suffix.lower() in _IMAGE_SUFFIXES)
    if not files:
        raise VideoFormatError(f"{path}: no image files found")
    frames = []
    for p in files:
        with Image.open(p) as img:
            frames.append(_image_to_unit(img))
    try:
        return vectorize(frames)
    except ValueError as exc:
        raise VideoFormatError(f"{path}: {exc}") from exc


def save_frame_png(frame: np.ndarray, path) -> None:
    """8-bit visualization dump; values are clipped to [0, 1] first."""
    from PIL import Image

    img = np.round(np.clip(frame, 0.0, 1.0) * 255.0).astype(np.uint8)
    Image.fromarray(img).save(path)
