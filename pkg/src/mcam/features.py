"""Per-image descriptors computed over the region grid.

Three channels are available:

* ``csh``  -- per-region Lab histograms, 30 bins per color channel.
* ``hog``  -- per-region 8-bin signed gradient orientation histogram.
* ``bcov`` -- per-region Brownian covariance of 11 pixel features, mapped
  to the tangent space at the identity.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from ._dcov import distance_covariance_matrix
from .exceptions import LayoutMismatch, NumericalFailure, UnknownChannel

CSH_BINS = 30
HOG_BINS = 8
BCOV_CHANNELS = 11
BCOV_DIM = BCOV_CHANNELS * (BCOV_CHANNELS + 1) // 2
SPD_LOADING = 1e-6

# Fixed bin ranges: L over [0, 100]; a and b over the sRGB gamut (D65).
LAB_RANGES = ((0.0, 100.0), (-86.185, 98.235), (-107.86, 94.48))


class FeatureChannel(str, enum.Enum):
    CSH = "csh"
    HOG = "hog"
    BCOV = "bcov"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise UnknownChannel(f"unknown feature channel {value!r}") from None


def parse_channels(values):
    """Parse a nonempty collection (or comma-separated string) of channels."""
    if isinstance(values, str):
        values = [v for v in values.split(",") if v.strip()]
    channels = []
    for v in values:
        c = FeatureChannel.parse(v)
        if c not in channels:
            channels.append(c)
    if not channels:
        raise UnknownChannel("at least one feature channel is required")
    return tuple(channels)


def channel_dim(channel, layout):
    channel = FeatureChannel.parse(channel)
    per_region = {
        FeatureChannel.CSH: 3 * CSH_BINS,
        FeatureChannel.HOG: HOG_BINS,
        FeatureChannel.BCOV: BCOV_DIM,
    }[channel]
    return per_region * len(layout)


@dataclass
class FeatureDescriptor:
    channel: FeatureChannel
    values: np.ndarray

    @property
    def dim(self):
        return self.values.shape[0]


def _check_frame(frame, layout):
    if (frame.width, frame.height) != layout.window:
        raise LayoutMismatch(
            f"frame is {frame.width}x{frame.height}, layout expects "
            f"{layout.width}x{layout.height}"
        )


def lab_bin_indices(lab):
    """Map every Lab value to its histogram bin, clipping out-of-range values."""
    idx = np.empty(lab.shape, dtype=np.intp)
    for c, (lo, hi) in enumerate(LAB_RANGES):
        b = np.floor((lab[..., c] - lo) * (CSH_BINS / (hi - lo)))
        idx[..., c] = np.clip(b, 0, CSH_BINS - 1)
    return idx


def extract_csh(frame, layout):
    _check_frame(frame, layout)
    bins = lab_bin_indices(frame.lab)
    out = np.empty((len(layout), 3, CSH_BINS))
    for r, (rows, cols) in enumerate(layout.slices()):
        block = bins[rows, cols].reshape(-1, 3)
        for c in range(3):
            out[r, c] = np.bincount(block[:, c], minlength=CSH_BINS)
        out[r] /= block.shape[0]
    return FeatureDescriptor(FeatureChannel.CSH, out.ravel())


def gradient_polar(img):
    """Central-difference gradient magnitude and signed orientation in [0, 2pi)."""
    img = np.asarray(img, dtype=np.float64)
    # a single-pixel axis has no defined difference; treat it as flat
    gy = np.gradient(img, axis=0) if img.shape[0] > 1 else np.zeros_like(img)
    gx = np.gradient(img, axis=1) if img.shape[1] > 1 else np.zeros_like(img)
    mag = np.hypot(gx, gy)
    theta = np.mod(np.arctan2(gy, gx), 2 * np.pi)
    theta[theta >= 2 * np.pi] = 0.0
    return mag, theta


def extract_hog(frame, layout):
    _check_frame(frame, layout)
    mag, theta = gradient_polar(frame.lab[..., 0])
    bins = np.minimum((theta * (HOG_BINS / (2 * np.pi))).astype(np.intp), HOG_BINS - 1)
    out = np.zeros((len(layout), HOG_BINS))
    for r, (rows, cols) in enumerate(layout.slices()):
        h = np.bincount(bins[rows, cols].ravel(), weights=mag[rows, cols].ravel(), minlength=HOG_BINS)
        total = h.sum()
        if total > 0:
            out[r] = h / total
    return FeatureDescriptor(FeatureChannel.HOG, out.ravel())


def pixel_feature_maps(frame):
    """The nine image-wide maps: RGB intensities, then per-channel magnitude
    and orientation, interleaved as (R, G, B, |dR|, ang dR, |dG|, ...)."""
    rgb = frame.rgb
    maps = [rgb[..., c] for c in range(3)]
    for c in range(3):
        maps.extend(gradient_polar(rgb[..., c]))
    return np.stack(maps)


def region_feature_stack(maps, rows, cols):
    """11 x n matrix of pixel features for one region (x, y region-local in [0, 1])."""
    block = maps[:, rows, cols]
    h, w = block.shape[1:]
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    if w > 1:
        xs /= w - 1
    if h > 1:
        ys /= h - 1
    return np.concatenate([block.reshape(block.shape[0], -1), xs.reshape(1, -1), ys.reshape(1, -1)])


def regularize_spd(M):
    """Symmetrize and load the diagonal by 1e-6 of the mean eigenvalue."""
    M = 0.5 * (M + M.T)
    scale = np.trace(M) / M.shape[0]
    eps = SPD_LOADING * scale if scale > 0 else SPD_LOADING
    return M + eps * np.eye(M.shape[0]), eps


def spd_log(M):
    w, V = np.linalg.eigh(M)
    if not np.all(np.isfinite(w)) or w.min() <= 0:
        raise NumericalFailure("matrix logarithm undefined: matrix is not positive definite")
    return (V * np.log(w)) @ V.T


def sym_exp(S):
    w, V = np.linalg.eigh(0.5 * (S + S.T))
    return (V * np.exp(w)) @ V.T


def tangent_vector(M):
    """Log-map an SPD matrix at the identity and vectorize its upper triangle.

    Off-diagonal entries are scaled by sqrt(2) so the Euclidean norm of the
    vector equals the Frobenius norm of the logarithm.
    """
    n = M.shape[0]
    iu = np.triu_indices(n)
    scale = np.where(iu[0] == iu[1], 1.0, np.sqrt(2.0))
    return spd_log(M)[iu] * scale


def tangent_to_matrix(v, n=BCOV_CHANNELS):
    """Inverse of :func:`tangent_vector`."""
    iu = np.triu_indices(n)
    scale = np.where(iu[0] == iu[1], 1.0, np.sqrt(2.0))
    S = np.zeros((n, n))
    S[iu] = np.asarray(v) / scale
    S = S + np.triu(S, 1).T
    return sym_exp(S)


def region_bcov_matrices(frame, layout):
    """Regularized 11x11 Brownian covariance matrix for every region."""
    _check_frame(frame, layout)
    maps = pixel_feature_maps(frame)
    mats = []
    for rows, cols in layout.slices():
        V = distance_covariance_matrix(region_feature_stack(maps, rows, cols))
        mats.append(regularize_spd(V)[0])
    return mats


def extract_bcov(frame, layout):
    mats = region_bcov_matrices(frame, layout)
    out = np.concatenate([tangent_vector(M) for M in mats])
    return FeatureDescriptor(FeatureChannel.BCOV, out)


_EXTRACTORS = {
    FeatureChannel.CSH: extract_csh,
    FeatureChannel.HOG: extract_hog,
    FeatureChannel.BCOV: extract_bcov,
}


def extract_descriptor(frame, channel, layout):
    return _EXTRACTORS[FeatureChannel.parse(channel)](frame, layout)
