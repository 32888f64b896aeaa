"""Synthetic person tracks for dataset-free verification.

Each identity is a flat-colored figure (head, torso, legs, background strip)
with an optional striped torso.  Cameras apply a global color gain; within a
track, appearance modes apply an illumination gain to contiguous frame spans,
imitating a person walking from a bright into a dark area.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import McamError
from .imaging import PersonTrack

N_PARTS = 4


@dataclass(frozen=True)
class SyntheticSpec:
    """Generator settings.

    ``separation`` is the minimum Euclidean distance (RGB in [0, 1]) between
    the concatenated part colors of any two identities. ``noise`` is the
    standard deviation of a per-frame, per-RGB-channel illumination gain.
    ``texture`` is the amplitude of a fixed per-identity fabric pattern,
    ``mode_shift`` the magnitude of the per-mode illumination gain (defaults
    to ``separation``) and ``mode_fractions`` the share of frames per mode
    (equal when omitted).
    """

    identities: int = 50
    cameras: int = 2
    frames: int = 10
    modes: int = 1
    separation: float = 0.5
    noise: float = 0.0
    fragmentation: float = 0.0
    camera_shift: float = 0.05
    texture: float = 0.06
    mode_shift: float | None = None
    mode_fractions: tuple | None = None
    width: int = 64
    height: int = 192

    def __post_init__(self):
        for name in ("identities", "cameras", "frames", "modes", "width", "height"):
            if getattr(self, name) < 1:
                raise McamError(f"{name} must be positive")
        if min(self.separation, self.noise, self.camera_shift, self.texture) < 0:
            raise McamError("separation, noise, camera_shift and texture must be non-negative")
        if not 0.0 <= self.fragmentation <= 1.0:
            raise McamError("fragmentation must be a probability")
        if self.mode_fractions is not None:
            fr = tuple(float(f) for f in self.mode_fractions)
            if len(fr) != self.modes or min(fr) <= 0:
                raise McamError("mode_fractions needs one positive share per mode")
            object.__setattr__(self, "mode_fractions", fr)

    @property
    def effective_mode_shift(self):
        return self.separation if self.mode_shift is None else self.mode_shift


def _palettes(n, separation, rng, max_tries=20000):
    out = []
    tries = 0
    while len(out) < n:
        cand = rng.uniform(0.1, 0.9, size=(N_PARTS, 3))
        tries += 1
        if all(np.linalg.norm(cand - p) >= separation for p in out):
            out.append(cand)
        elif tries > max_tries:
            raise McamError(f"cannot place {n} identities at separation {separation}")
    return out


def _figure_masks(width, height):
    yy, xx = np.mgrid[0:height, 0:width]
    cx = width / 2.0
    head = ((xx - cx) / (0.16 * width)) ** 2 + ((yy - 0.12 * height) / (0.07 * height)) ** 2 <= 1
    torso = (np.abs(xx - cx) <= 0.28 * width) & (yy >= 0.2 * height) & (yy < 0.55 * height)
    legs = (
        (np.abs(np.abs(xx - cx) - 0.12 * width) <= 0.09 * width)
        & (yy >= 0.55 * height)
        & (yy < 0.95 * height)
    )
    return head, torso & ~head, legs


def render_identity(palette, stripe_period, width=64, height=192, shift=0):
    """Render one clean RGB float frame, optionally shifted horizontally."""
    head, torso, legs = _figure_masks(width, height)
    img = np.empty((height, width, 3))
    img[:] = palette[3]
    img[head] = palette[0]
    img[torso] = palette[1]
    if stripe_period:
        yy = np.mgrid[0:height, 0:width][0]
        stripes = torso & ((yy // stripe_period) % 2 == 1)
        img[stripes] = 0.5 * (palette[1] + palette[2])
    img[legs] = palette[2]
    if shift:
        img = np.roll(img, shift, axis=1)
    return img


def _to_uint8(img):
    return np.clip(np.rint(img * 255.0), 0, 255).astype(np.uint8)


def _mode_spans(n, fractions):
    cuts = np.rint(np.cumsum(fractions) / np.sum(fractions) * n).astype(int)
    starts = np.concatenate(([0], cuts[:-1]))
    return [(int(a), int(b)) for a, b in zip(starts, cuts)]


def generate_synthetic_tracks(spec, seed=0):
    """Render every (identity, camera) track; fully determined by ``seed``."""
    rng = np.random.default_rng([int(seed), 0x5EED])
    palettes = _palettes(spec.identities, spec.separation, rng)
    stripes = rng.choice([0, 0, 6, 12], size=spec.identities)
    cam_gain = 1.0 + rng.uniform(-spec.camera_shift, spec.camera_shift, size=(spec.cameras, 3))
    fractions = spec.mode_fractions or (1.0,) * spec.modes
    tracks = []
    for pid in range(spec.identities):
        base = render_identity(palettes[pid], stripes[pid], spec.width, spec.height)
        if spec.texture > 0:
            base = base * (1.0 + rng.normal(0.0, spec.texture, size=base.shape[:2] + (1,)))
        for cam in range(spec.cameras):
            trng = np.random.default_rng([int(seed), pid, cam])
            directions = trng.normal(size=(spec.modes, 3))
            directions /= np.linalg.norm(directions, axis=1, keepdims=True)
            # mode 0 is the reference illumination
            directions[0] = 0.0
            gains = 1.0 + spec.effective_mode_shift * directions
            frames = []
            for m, (a, b) in enumerate(_mode_spans(spec.frames, fractions)):
                for _ in range(a, b):
                    img = base * cam_gain[cam] * gains[m]
                    if spec.noise > 0:
                        img = img * (1.0 + trng.normal(0.0, spec.noise, size=3))
                    frames.append(_to_uint8(img))
            track_frames = [frames]
            if spec.frames > 1 and trng.random() < spec.fragmentation:
                cut = int(trng.integers(1, spec.frames))
                track_frames = [frames[:cut], frames[cut:]]
            for t, fr in enumerate(track_frames):
                tracks.append(
                    PersonTrack(
                        track_id=f"c{cam}/p{pid:04d}/t{t}",
                        camera_id=f"c{cam}",
                        person_id=f"p{pid:04d}",
                        frames=fr,
                    )
                )
    return tracks
