"""Frame normalization and the shared region grid."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from skimage.color import lab2rgb, rgb2lab
from skimage.transform import resize

from .exceptions import EmptyImage, InvalidLayout, McamError

L_LEVELS = 256


@dataclass
class PersonTrack:
    """Ordered person patches observed by one camera."""

    track_id: str
    camera_id: str
    frames: list
    person_id: str | None = None

    def __post_init__(self):
        if len(self.frames) < 1:
            raise McamError(f"track {self.track_id!r} has no frames")

    @property
    def n_frames(self):
        return len(self.frames)


@dataclass(frozen=True)
class RegionLayout:
    width: int
    height: int
    region_width: int
    region_height: int
    stride: int
    regions: tuple = field(repr=False)

    @property
    def window(self):
        return (self.width, self.height)

    def __len__(self):
        return len(self.regions)

    def slices(self):
        """Yield ``(row_slice, col_slice)`` per region in layout order."""
        for x, y, w, h in self.regions:
            yield slice(y, y + h), slice(x, x + w)


@dataclass
class NormalizedFrame:
    """A resized, lightness-equalized frame.

    ``rgb`` holds floats in [0, 1] regenerated from the equalized ``lab``
    array; both have shape ``(height, width, 3)``.
    """

    rgb: np.ndarray
    lab: np.ndarray

    @property
    def width(self):
        return self.rgb.shape[1]

    @property
    def height(self):
        return self.rgb.shape[0]

    @classmethod
    def from_lab(cls, lab):
        lab = np.asarray(lab, dtype=np.float64)
        with warnings.catch_warnings():
            # out-of-gamut Lab values are clipped, which is what we want
            warnings.simplefilter("ignore", UserWarning)
            rgb = lab2rgb(lab)
        return cls(rgb=np.clip(rgb, 0.0, 1.0), lab=lab)


def build_region_layout(w=64, h=192, rw=32, rh=32, stride=16):
    """Enumerate the overlapping ``rw x rh`` regions of a ``w x h`` window.

    Regions are ordered row-major: all x positions of the top row first.

    >>> len(build_region_layout())
    33
    """
    for name, v in (("w", w), ("h", h), ("rw", rw), ("rh", rh), ("stride", stride)):
        if int(v) != v or v <= 0:
            raise InvalidLayout(f"{name} must be a positive integer, got {v!r}")
    if rw > w or rh > h:
        raise InvalidLayout(f"region {rw}x{rh} exceeds window {w}x{h}")
    xs = range(0, w - rw + 1, stride)
    ys = range(0, h - rh + 1, stride)
    regions = tuple((x, y, rw, rh) for y in ys for x in xs)
    return RegionLayout(int(w), int(h), int(rw), int(rh), int(stride), regions)


def as_rgb_array(raw):
    """Coerce an image-like input to a ``(h, w, 3)`` uint8/float array."""
    arr = np.asarray(raw)
    if arr.size == 0:
        raise EmptyImage("image has zero pixels")
    if arr.ndim == 2:
        arr = np.stack([arr] * 3, axis=-1)
    elif arr.ndim == 3 and arr.shape[2] == 4:
        arr = arr[..., :3]
    elif arr.ndim != 3 or arr.shape[2] != 3:
        raise McamError(f"expected an RGB raster, got shape {arr.shape}")
    return arr


def equalize_lightness(L):
    """Histogram-equalize lightness values in [0, 100].

    L is quantized to 256 levels and each level is mapped to its cumulative
    frequency, scaled back to [0, 100].
    """
    q = np.clip(np.rint(np.asarray(L) * ((L_LEVELS - 1) / 100.0)), 0, L_LEVELS - 1).astype(np.intp)
    hist = np.bincount(q.ravel(), minlength=L_LEVELS)
    cdf = np.cumsum(hist) / q.size
    return cdf[q] * 100.0


def preprocess_frame(raw, layout):
    arr = as_rgb_array(raw)
    if np.issubdtype(arr.dtype, np.integer):
        rgb = arr.astype(np.float64) / 255.0
    else:
        rgb = np.clip(arr.astype(np.float64), 0.0, 1.0)
    if rgb.shape[:2] != (layout.height, layout.width):
        rgb = resize(
            rgb,
            (layout.height, layout.width),
            order=1,
            mode="edge",
            anti_aliasing=False,
        )
    lab = rgb2lab(rgb)
    lab[..., 0] = equalize_lightness(lab[..., 0])
    return NormalizedFrame.from_lab(lab)
