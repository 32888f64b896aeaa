"""Similarity between query and gallery MCAM signatures.

The score of a (query, gallery) pair sums, over feature channels, two
Gaussian-kernel similarities:

* an L2-Riemannian term built on the closest pair of mixture components,
  mixing mean distance and the affine-invariant distance between diagonal
  covariances;
* a collaborative-coding term that ridge-encodes every query component mean
  over a dictionary of all gallery component means.

Distances are normalized by the row maximum over the gallery, then centered
and scaled per gallery column with statistics taken over the query set, so
similarity is only defined for a whole query x gallery matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.spatial.distance import cdist

from .config import MetricConfig
from .exceptions import (
    ChannelMismatch,
    DimMismatch,
    EmptyGallery,
    McamError,
    UnknownGallerySignature,
    UnknownQuery,
)
from .features import FeatureChannel, parse_channels


def riemannian_distance(var1, var2):
    """Affine-invariant distance between two diagonal covariance matrices.

    For diagonals the generalized eigenvalues are the variance ratios, so the
    distance is the L2 norm of the log-ratios. Logs are differenced rather
    than divided so that swapping the arguments is exactly symmetric.
    """
    var1 = np.asarray(var1, dtype=np.float64)
    var2 = np.asarray(var2, dtype=np.float64)
    if var1.shape != var2.shape:
        raise DimMismatch(f"variance dims differ: {var1.shape} vs {var2.shape}")
    return float(np.sqrt(np.sum((np.log(var1) - np.log(var2)) ** 2)))


def lr_component_distance(g1, g2, alpha):
    """``(1 - alpha) * ||mu1 - mu2|| + alpha * d_R(var1, var2)``."""
    mu1 = np.asarray(g1.mean, dtype=np.float64)
    mu2 = np.asarray(g2.mean, dtype=np.float64)
    if mu1.shape != mu2.shape:
        raise DimMismatch(f"mean dims differ: {mu1.shape} vs {mu2.shape}")
    return (1.0 - alpha) * float(np.linalg.norm(mu1 - mu2)) + alpha * riemannian_distance(
        g1.variance, g2.variance
    )


def alpha_max(n_q, n_g, cfg=MetricConfig()):
    return min(cfg.a, min(n_q, n_g) / cfg.b)


def mixing_weight_alpha(pbar_i, pbar_j, n_q, n_g, cfg=MetricConfig()):
    """Covariance weight for one component pair; priors are max-normalized."""
    return np.minimum(alpha_max(n_q, n_g, cfg), (np.asarray(pbar_i) + np.asarray(pbar_j)) / 2.0)


def _pair_distances(mq, mg, n_q, n_g, cfg):
    """Matrix of component distances, shape ``(K_q, K_g)``."""
    mean_d = cdist(mq.means, mg.means)
    # d_R between diagonals is the Euclidean distance between log-variances
    cov_d = cdist(np.log(mq.variances), np.log(mg.variances))
    alpha = mixing_weight_alpha(
        mq.normalized_priors()[:, None], mg.normalized_priors()[None, :], n_q, n_g, cfg
    )
    return (1.0 - alpha) * mean_d + alpha * cov_d


def lr_channel_distance(mq, mg, n_q, n_g, cfg=MetricConfig()):
    """Smallest component-pair distance between two mixtures of one channel."""
    if mq.channel != mg.channel:
        raise ChannelMismatch(f"{mq.channel.value} vs {mg.channel.value}")
    if mq.dim != mg.dim:
        raise DimMismatch(f"mixture dims differ: {mq.dim} vs {mg.dim}")
    return float(_pair_distances(mq, mg, n_q, n_g, cfg).min())


@dataclass
class ChannelDictionary:
    """Gallery component means stacked as columns, with a cached ridge operator.

    ``atoms`` has shape ``(dim, n_atoms)``; ``owner[k]`` and ``component[k]``
    give the gallery index and component index of atom ``k``; ``blocks[g]``
    is the slice of atoms that belong to gallery signature ``g``.
    """

    channel: FeatureChannel
    atoms: np.ndarray
    owner: np.ndarray
    component: np.ndarray
    blocks: list
    delta: float
    operator: np.ndarray

    @property
    def n_atoms(self):
        return self.atoms.shape[1]

    @property
    def dim(self):
        return self.atoms.shape[0]


def _mixture_of(item, channel):
    return item.mixtures[channel] if hasattr(item, "mixtures") else item


def build_channel_dictionary(gallery, channel, delta=1.0):
    """Stack the component means of every gallery signature for ``channel``.

    ``gallery`` may hold signatures or bare mixtures. The ridge operator
    ``(D^T D + delta I)^-1 D^T`` is computed with a Cholesky solve.
    """
    channel = FeatureChannel.parse(channel)
    gallery = list(gallery)
    if not gallery:
        raise EmptyGallery("dictionary needs at least one gallery signature")
    mixtures = [_mixture_of(g, channel) for g in gallery]
    dims = {m.dim for m in mixtures}
    if len(dims) != 1:
        raise DimMismatch(f"gallery mixtures have differing dims {sorted(dims)}")
    atoms = np.concatenate([m.means for m in mixtures], axis=0).T
    owner = np.concatenate([np.full(m.n_components, g) for g, m in enumerate(mixtures)])
    component = np.concatenate([np.arange(m.n_components) for m in mixtures])
    bounds = np.cumsum([0] + [m.n_components for m in mixtures])
    blocks = [slice(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:])]
    gram = atoms.T @ atoms
    gram[np.diag_indices_from(gram)] += delta
    operator = cho_solve(cho_factor(gram), atoms.T)
    return ChannelDictionary(channel, atoms, owner, component, blocks, float(delta), operator)


def crc_encode(mu, dictionary):
    """Ridge coding vector(s) of ``mu`` over the dictionary atoms.

    ``mu`` may be a single vector or a ``(n, dim)`` stack; the result has
    shape ``(n_atoms,)`` or ``(n_atoms, n)`` respectively.
    """
    mu = np.asarray(mu, dtype=np.float64)
    if mu.shape[0] != dictionary.dim and not (mu.ndim == 2 and mu.shape[1] == dictionary.dim):
        raise DimMismatch(f"vector dim {mu.shape} does not match dictionary dim {dictionary.dim}")
    if mu.ndim == 2:
        return dictionary.operator @ mu.T
    return dictionary.operator @ mu


def _crcs_parts(query_means, query_priors, rho, dictionary, g):
    block = dictionary.blocks[g]
    rho_g = rho[block]
    recon = dictionary.atoms[:, block] @ rho_g
    residual = np.linalg.norm(query_means.T - recon, axis=0)
    code = np.linalg.norm(rho_g, axis=0)
    return float(query_priors @ residual), float(query_priors @ code)


def crcs_channel_distance(mq, g, dictionary, cfg=MetricConfig()):
    """Prior-weighted residual and coding-norm parts for gallery index ``g``.

    The two parts are returned separately; they are max-normalized over the
    gallery before being combined.
    """
    if mq.channel != dictionary.channel:
        raise ChannelMismatch(f"{mq.channel.value} vs {dictionary.channel.value}")
    if not 0 <= g < len(dictionary.blocks):
        raise UnknownGallerySignature(f"gallery index {g} not in dictionary")
    rho = crc_encode(mq.means, dictionary)
    return _crcs_parts(mq.means, mq.priors, rho, dictionary, g)


@dataclass
class SimilarityMatrix:
    query_ids: list
    gallery_ids: list
    values: np.ndarray
    lr: np.ndarray | None = None
    crcs: np.ndarray | None = None

    @property
    def shape(self):
        return self.values.shape

    def row(self, q):
        if isinstance(q, (int, np.integer)):
            if not 0 <= q < len(self.query_ids):
                raise UnknownQuery(f"query index {q} out of range")
            return self.values[q]
        try:
            return self.values[self.query_ids.index(q)]
        except ValueError:
            raise UnknownQuery(f"unknown query {q!r}") from None


def max_normalize_rows(D, eps):
    return D / np.maximum(D.max(axis=1, keepdims=True), eps)


def gaussian_kernel(Dbar, cfg=MetricConfig()):
    """Kernel similarity centered on the per-gallery minimum over queries.

    Column statistics: ``beta`` is the minimum over queries and ``gamma`` is
    ``kernel_range_factor`` times the range over queries (guarded).
    """
    beta = Dbar.min(axis=0, keepdims=True)
    gamma = cfg.kernel_range_factor * (Dbar.max(axis=0, keepdims=True) - beta)
    gamma = np.maximum(gamma, cfg.eps_guard)
    return np.exp(-((Dbar - beta) ** 2) / gamma)


def lr_distance_matrix(Q, G, channel, cfg=MetricConfig()):
    """Raw channel distances for every query/gallery pair."""
    D = np.empty((len(Q), len(G)))
    for i, q in enumerate(Q):
        mq = q.mixtures[channel]
        for j, g in enumerate(G):
            D[i, j] = lr_channel_distance(mq, g.mixtures[channel], q.n_frames, g.n_frames, cfg)
    return D


def crcs_distance_parts(Q, dictionary, cfg=MetricConfig()):
    """Residual and coding-norm part matrices over the dictionary's gallery."""
    channel = dictionary.channel
    n_g = len(dictionary.blocks)
    res = np.empty((len(Q), n_g))
    code = np.empty((len(Q), n_g))
    for i, q in enumerate(Q):
        mq = q.mixtures[channel]
        if mq.dim != dictionary.dim:
            raise DimMismatch(f"query dim {mq.dim} does not match dictionary dim {dictionary.dim}")
        rho = crc_encode(mq.means, dictionary)
        for g in range(n_g):
            res[i, g], code[i, g] = _crcs_parts(mq.means, mq.priors, rho, dictionary, g)
    return res, code


def _check_sets(Q, G, channels):
    if not Q:
        raise McamError("query set is empty")
    if not G:
        raise EmptyGallery("gallery set is empty")
    for s in list(Q) + list(G):
        missing = [c.value for c in channels if c not in s.mixtures]
        if missing:
            raise ChannelMismatch(f"signature {s.track_id!r} lacks channels {missing}")


def similarity_matrix(Q, G, F=None, cfg=MetricConfig(), dictionaries=None):
    """Combined similarity for every (query, gallery) pair.

    ``dictionaries`` may carry prebuilt :class:`ChannelDictionary` objects
    (keyed by channel) for ``G``; missing ones are built here.
    """
    Q, G = list(Q), list(G)
    channels = parse_channels(F if F is not None else (G[0].channels if G else ()))
    _check_sets(Q, G, channels)
    dictionaries = dict(dictionaries or {})
    sim_lr = np.zeros((len(Q), len(G)))
    sim_crcs = np.zeros((len(Q), len(G)))
    for c in channels:
        D = lr_distance_matrix(Q, G, c, cfg)
        sim_lr += gaussian_kernel(max_normalize_rows(D, cfg.eps_guard), cfg)

        if c not in dictionaries:
            dictionaries[c] = build_channel_dictionary(G, c, cfg.delta)
        res, code = crcs_distance_parts(Q, dictionaries[c], cfg)
        d = cfg.w_res * max_normalize_rows(res, cfg.eps_guard) - cfg.w_code * max_normalize_rows(
            code, cfg.eps_guard
        )
        sim_crcs += gaussian_kernel(d, cfg)
    return SimilarityMatrix(
        query_ids=[q.track_id for q in Q],
        gallery_ids=[g.track_id for g in G],
        values=sim_lr + sim_crcs,
        lr=sim_lr,
        crcs=sim_crcs,
    )


def rank_gallery(sim, q):
    """Gallery ids by descending similarity; ties keep gallery order."""
    row = sim.row(q)
    order = np.argsort(-row, kind="stable")
    return [sim.gallery_ids[j] for j in order]


def rank_indices(values):
    """Per-row gallery index order for a raw score matrix (stable on ties)."""
    return np.argsort(-np.asarray(values), axis=1, kind="stable")
