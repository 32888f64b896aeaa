"""Appearance mixtures: k-means based GMM fitting with automatic model order.

Each (track, feature channel) pair gets a diagonal-covariance Gaussian
mixture.  Means come from k-means++ seeded Lloyd iterations, the number of
components minimizes ``J(S, K) + sqrt(K)`` where ``J`` is the summed L2
distortion divided by ``K``, and variances are estimated once the final
clustering is known.
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .exceptions import EmptySet, KExceedsSamples, McamError
from .features import FeatureChannel, extract_descriptor, parse_channels
from .imaging import preprocess_frame

EPS_VAR = 1e-6
MAX_ITER = 10


@dataclass(frozen=True)
class ClusteringResult:
    k: int
    centroids: np.ndarray
    labels: np.ndarray
    distortion: float
    inertia: float
    seed_inertia: float
    n_iter: int


class GaussianComponent(NamedTuple):
    prior: float
    mean: np.ndarray
    variance: np.ndarray


@dataclass
class AppearanceMixture:
    """Diagonal-covariance Gaussian mixture for one feature channel.

    Parameters are stored as stacked arrays: ``priors`` has shape ``(K,)``,
    ``means`` and ``variances`` have shape ``(K, dim)``.
    """

    channel: FeatureChannel
    priors: np.ndarray
    means: np.ndarray
    variances: np.ndarray

    def __post_init__(self):
        self.channel = FeatureChannel.parse(self.channel)
        self.priors = np.asarray(self.priors, dtype=np.float64)
        self.means = np.atleast_2d(np.asarray(self.means, dtype=np.float64))
        self.variances = np.atleast_2d(np.asarray(self.variances, dtype=np.float64))

    @property
    def n_components(self):
        return self.priors.shape[0]

    @property
    def dim(self):
        return self.means.shape[1]

    @property
    def components(self):
        return [GaussianComponent(p, m, v) for p, m, v in zip(self.priors, self.means, self.variances)]

    def normalized_priors(self):
        """Priors divided by the largest prior."""
        return self.priors / self.priors.max()

    def validate(self, eps_var=0.0):
        k = self.priors.shape[0]
        if k < 1:
            raise McamError("mixture has no components")
        if self.means.shape != self.variances.shape or self.means.shape[0] != k:
            raise McamError(
                f"inconsistent mixture shapes: priors {self.priors.shape}, "
                f"means {self.means.shape}, variances {self.variances.shape}"
            )
        if not (np.all(np.isfinite(self.means)) and np.all(np.isfinite(self.variances))):
            raise McamError("mixture parameters must be finite")
        if np.any(self.priors <= 0) or np.any(self.priors > 1):
            raise McamError("priors must lie in (0, 1]")
        if abs(self.priors.sum() - 1.0) > 1e-9:
            raise McamError(f"priors sum to {self.priors.sum()!r}, expected 1")
        if np.any(self.variances < eps_var):
            raise McamError("variance entries below the floor")
        return self


@dataclass
class McamSignature:
    track_id: str
    camera_id: str
    n_frames: int
    mixtures: dict
    person_id: str | None = None

    def __getitem__(self, channel):
        return self.mixtures[FeatureChannel.parse(channel)]

    @property
    def channels(self):
        return tuple(self.mixtures)


def _as_samples(S):
    S = np.asarray(S, dtype=np.float64)
    if S.ndim == 1:
        S = S[:, None]
    if S.ndim != 2 or S.shape[0] < 1:
        raise EmptySet("descriptor set is empty")
    return S


def _rng(seed, k):
    base = list(seed) if isinstance(seed, (tuple, list)) else [int(seed)]
    return np.random.default_rng([*base, int(k)])


def _sq_dists(S, C):
    return ((S[:, None, :] - C[None, :, :]) ** 2).sum(axis=-1)


def _kmeanspp(S, k, rng):
    n = S.shape[0]
    idx = [int(rng.integers(n))]
    d2 = ((S - S[idx[0]]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total > 0:
            nxt = int(rng.choice(n, p=d2 / total))
        else:
            nxt = int(rng.integers(n))
        idx.append(nxt)
        d2 = np.minimum(d2, ((S - S[nxt]) ** 2).sum(axis=1))
    return S[idx].copy()


def _update(S, labels, d2, k):
    """Recompute centroids; refill empty clusters with the farthest points."""
    labels = labels.copy()
    counts = np.bincount(labels, minlength=k)
    if np.any(counts == 0):
        cost = d2[np.arange(S.shape[0]), labels].copy()
        for empty in np.flatnonzero(counts == 0):
            donors = counts[labels] > 1
            pick = int(np.argmax(np.where(donors, cost, -np.inf)))
            counts[labels[pick]] -= 1
            labels[pick] = empty
            counts[empty] = 1
            cost[pick] = -np.inf
    centroids = np.zeros((k, S.shape[1]))
    np.add.at(centroids, labels, S)
    centroids /= counts[:, None]
    return centroids, labels


def kmeans_cluster(S, K, seed, max_iter=MAX_ITER):
    """k-means++ seeding followed by at most ``max_iter`` Lloyd iterations.

    Deterministic for a given ``(S, K, seed)``. Assignment ties go to the
    lowest centroid index.
    """
    S = _as_samples(S)
    n = S.shape[0]
    K = int(K)
    if K < 1:
        raise McamError("K must be a positive integer")
    if K > n:
        raise KExceedsSamples(f"K={K} exceeds the {n} available descriptors")
    centroids = _kmeanspp(S, K, _rng(seed, K))
    d2 = _sq_dists(S, centroids)
    labels = np.argmin(d2, axis=1)
    seed_inertia = float(d2[np.arange(n), labels].sum())
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        centroids, labels = _update(S, labels, d2, K)
        d2 = _sq_dists(S, centroids)
        new_labels = np.argmin(d2, axis=1)
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
    else:
        centroids, labels = _update(S, labels, d2, K)
        d2 = _sq_dists(S, centroids)
    dist2 = d2[np.arange(n), labels]
    result = ClusteringResult(
        k=K,
        centroids=centroids,
        labels=labels,
        distortion=0.0,
        inertia=float(dist2.sum()),
        seed_inertia=seed_inertia,
        n_iter=n_iter,
    )
    return ClusteringResult(**{**result.__dict__, "distortion": distortion_J(S, result)})


def distortion_J(S, result, K=None):
    """Summed L2 distance of every descriptor to its centroid, divided by K."""
    S = _as_samples(S)
    K = result.k if K is None else K
    diffs = S - result.centroids[result.labels]
    return float(np.sqrt((diffs**2).sum(axis=1)).sum() / K)


def k_max_for(n_frames, floor=5, fraction=0.1):
    return max(int(floor), math.ceil(fraction * n_frames))


def component_objectives(S, K_max, seed, max_iter=MAX_ITER):
    """Objective ``J(S, K) + sqrt(K)`` and clustering for ``K = 1..min(K_max, |S|)``."""
    S = _as_samples(S)
    upper = min(int(K_max), S.shape[0])
    if upper < 1:
        raise McamError("K_max must be at least 1")
    out = {}
    for k in range(1, upper + 1):
        res = kmeans_cluster(S, k, seed, max_iter=max_iter)
        out[k] = (res.distortion + math.sqrt(k), res)
    return out


def select_component_count(S, K_max, seed, max_iter=MAX_ITER):
    objectives = component_objectives(S, K_max, seed, max_iter=max_iter)
    # dicts keep insertion order, so min() returns the smallest K on ties
    return min(objectives, key=lambda k: objectives[k][0])


def fit_mixture(S, channel, seed, n_frames=None, eps_var=EPS_VAR, k_max=None, max_iter=MAX_ITER):
    """Fit the appearance mixture of one channel from its descriptor set.

    ``k_max`` defaults to ``max(5, ceil(0.1 * n_frames))``; it is always capped
    at the number of descriptors.
    """
    if S is None or len(S) == 0:
        raise EmptySet("cannot fit a mixture to an empty descriptor set")
    S = _as_samples(S)
    n = S.shape[0]
    if n_frames is not None and n_frames != n:
        raise McamError(f"descriptor count {n} does not match track length {n_frames}")
    if k_max is None:
        k_max = k_max_for(n)
    objectives = component_objectives(S, min(k_max, n), seed, max_iter=max_iter)
    best = min(objectives, key=lambda k: objectives[k][0])
    res = objectives[best][1]
    counts = np.bincount(res.labels, minlength=best)
    priors = counts / n
    means = res.centroids
    variances = np.full_like(means, eps_var)
    for k in range(best):
        members = S[res.labels == k]
        if members.shape[0] > 1:
            variances[k] = np.maximum(members.var(axis=0), eps_var)
    # canonical order: descending prior, then lexicographic mean
    order = np.lexsort(tuple(means[:, d] for d in range(means.shape[1] - 1, -1, -1)) + (-priors,))
    return AppearanceMixture(channel, priors[order], means[order], variances[order])


def channel_seed(seed, track_id, channel):
    """RNG entropy for one (track, channel) unit, stable across processes."""
    channel = FeatureChannel.parse(channel)
    idx = list(FeatureChannel).index(channel)
    return (int(seed), zlib.crc32(str(track_id).encode()), idx)


def track_descriptors(track, channels, layout):
    """Descriptor matrix per channel for every frame of ``track``."""
    frames = [preprocess_frame(f, layout) for f in track.frames]
    return {
        c: np.stack([extract_descriptor(fr, c, layout).values for fr in frames])
        for c in channels
    }


def build_signature(track, F, layout, seed=0, eps_var=EPS_VAR, k_max_floor=5,
                    k_max_fraction=0.1, max_iter=MAX_ITER):
    channels = parse_channels(F)
    descs = track_descriptors(track, channels, layout)
    k_max = k_max_for(track.n_frames, k_max_floor, k_max_fraction)
    mixtures = {
        c: fit_mixture(
            descs[c],
            c,
            channel_seed(seed, track.track_id, c),
            n_frames=track.n_frames,
            eps_var=eps_var,
            k_max=k_max,
            max_iter=max_iter,
        )
        for c in channels
    }
    return McamSignature(
        track_id=str(track.track_id),
        camera_id=str(track.camera_id),
        n_frames=track.n_frames,
        mixtures=mixtures,
        person_id=None if track.person_id is None else str(track.person_id),
    )
