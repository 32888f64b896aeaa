"""scikit-learn style front ends.

:class:`SignatureExtractor` turns person tracks into MCAM signatures and
:class:`McamMatcher` scores query signatures against a fitted gallery. Both
follow the estimator conventions (constructor stores hyper-parameters only,
fitted state ends with an underscore) so they work with ``get_params``,
``clone`` and pipelines.
"""

from __future__ import annotations

import numpy as np
from joblib import Parallel, delayed
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .config import DEFAULT_FEATURES, MetricConfig
from .evaluation import cmc_curve
from .exceptions import ChannelMismatch, EmptyGallery, McamError
from .features import parse_channels
from .imaging import PersonTrack, build_region_layout
from .metric import build_channel_dictionary, rank_indices, similarity_matrix
from .mixture import EPS_VAR, MAX_ITER, McamSignature, build_signature


def check_tracks(X):
    """Validate an iterable of :class:`PersonTrack` and return it as a list."""
    tracks = list(X)
    if not tracks:
        raise McamError("expected at least one track")
    for t in tracks:
        if not isinstance(t, PersonTrack):
            raise McamError(f"expected PersonTrack, got {type(t).__name__}")
    return tracks


def check_signatures(X, channels=None):
    sigs = list(X)
    if not sigs:
        raise McamError("expected at least one signature")
    for s in sigs:
        if not isinstance(s, McamSignature):
            raise McamError(f"expected McamSignature, got {type(s).__name__}")
        if channels is not None:
            missing = [c.value for c in channels if c not in s.mixtures]
            if missing:
                raise ChannelMismatch(f"signature {s.track_id!r} lacks channels {missing}")
    return sigs


class SignatureExtractor(TransformerMixin, BaseEstimator):
    """Learn one appearance mixture per (track, feature channel).

    Parameters
    ----------
    features : sequence of str
        Any nonempty subset of ``("csh", "hog", "bcov")``.
    width, height : int
        Normalized frame size.
    region_width, region_height, stride : int
        Region grid inside the frame.
    seed : int
        Global seed; every (track, channel) unit derives its own stream.
    n_jobs : int or None
        Worker processes used across tracks.
    """

    def __init__(self, features=DEFAULT_FEATURES, width=64, height=192, region_width=32,
                 region_height=32, stride=16, seed=0, eps_var=EPS_VAR, k_max_floor=5,
                 k_max_fraction=0.1, max_iter=MAX_ITER, n_jobs=None):
        self.features = features
        self.width = width
        self.height = height
        self.region_width = region_width
        self.region_height = region_height
        self.stride = stride
        self.seed = seed
        self.eps_var = eps_var
        self.k_max_floor = k_max_floor
        self.k_max_fraction = k_max_fraction
        self.max_iter = max_iter
        self.n_jobs = n_jobs

    def fit(self, X=None, y=None):
        # nothing is learned across tracks; fitting only validates settings
        self.channels_ = parse_channels(self.features)
        self.layout_ = build_region_layout(
            self.width, self.height, self.region_width, self.region_height, self.stride
        )
        return self

    def _one(self, track):
        return build_signature(
            track,
            self.channels_,
            self.layout_,
            seed=self.seed,
            eps_var=self.eps_var,
            k_max_floor=self.k_max_floor,
            k_max_fraction=self.k_max_fraction,
            max_iter=self.max_iter,
        )

    def transform(self, X):
        check_is_fitted(self, "layout_")
        tracks = check_tracks(X)
        if self.n_jobs in (None, 1) or len(tracks) == 1:
            return [self._one(t) for t in tracks]
        return Parallel(n_jobs=self.n_jobs)(delayed(self._one)(t) for t in tracks)


class McamMatcher(BaseEstimator):
    """Rank gallery signatures for a set of query signatures.

    ``fit`` stores the gallery and builds one coding dictionary per channel.
    Scores are set-level: the similarity of a pair depends on the whole
    query set passed to :meth:`decision_function`.
    """

    def __init__(self, features=None, a=0.33, b=100.0, delta=1.0, w_res=0.55, w_code=0.45,
                 kernel_range_factor=0.33, eps_guard=1e-12):
        self.features = features
        self.a = a
        self.b = b
        self.delta = delta
        self.w_res = w_res
        self.w_code = w_code
        self.kernel_range_factor = kernel_range_factor
        self.eps_guard = eps_guard

    def _metric_config(self):
        return MetricConfig(
            a=self.a,
            b=self.b,
            delta=self.delta,
            w_res=self.w_res,
            w_code=self.w_code,
            kernel_range_factor=self.kernel_range_factor,
            eps_guard=self.eps_guard,
        )

    def fit(self, X, y=None):
        """Store the gallery. ``y`` optionally overrides gallery person ids."""
        if X is None or len(X) == 0:
            raise EmptyGallery("gallery is empty")
        sigs = check_signatures(X)
        self.channels_ = parse_channels(self.features if self.features is not None else sigs[0].channels)
        check_signatures(sigs, self.channels_)
        self.config_ = self._metric_config()
        self.gallery_ = sigs
        self.gallery_ids_ = [s.track_id for s in sigs]
        self.gallery_persons_ = list(y) if y is not None else [s.person_id for s in sigs]
        self.dictionaries_ = {c: build_channel_dictionary(sigs, c, self.config_.delta) for c in self.channels_}
        return self

    def similarity(self, X):
        check_is_fitted(self, "dictionaries_")
        Q = check_signatures(X, self.channels_)
        return similarity_matrix(Q, self.gallery_, self.channels_, self.config_, self.dictionaries_)

    def decision_function(self, X):
        return self.similarity(X).values

    def rank(self, X):
        """Gallery indices per query, best first."""
        return rank_indices(self.decision_function(X))

    def predict(self, X):
        """Person id of the top-ranked gallery track for every query."""
        order = self.rank(X)
        return np.asarray([self.gallery_persons_[row[0]] for row in order], dtype=object)

    def cmc(self, X, y=None):
        sim = self.similarity(X)
        persons = list(y) if y is not None else [q.person_id for q in X]
        return cmc_curve(sim, persons, self.gallery_persons_)

    def score(self, X, y=None):
        """Rank-1 recognition rate."""
        return self.cmc(X, y).at(1)
