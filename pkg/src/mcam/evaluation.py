"""CMC curves and the experimental protocols."""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field

import numpy as np

from .config import MetricConfig
from .exceptions import InsufficientIdentities, McamError, MissingTruth
from .metric import rank_indices, similarity_matrix

log = logging.getLogger(__name__)

TABLE_RANKS = (1, 5, 10, 20)
MODES = ("pairwise", "split", "fixed")


@dataclass
class CmcCurve:
    """Recognition rate at ranks ``1..len(rates)``."""

    rates: np.ndarray

    def __post_init__(self):
        self.rates = np.asarray(self.rates, dtype=np.float64)

    def __len__(self):
        return self.rates.shape[0]

    def at(self, n):
        """Rate at rank ``n``; ranks past the gallery size saturate."""
        return float(self.rates[min(n, len(self)) - 1])


def cmc_curve(sim, query_persons, gallery_persons):
    """Fraction of queries whose person appears within the top ``n`` galleries.

    ``sim`` is a :class:`SimilarityMatrix` or a raw ``(n_query, n_gallery)``
    array. A query counts at the best rank of any gallery track of its person.
    """
    values = getattr(sim, "values", sim)
    values = np.asarray(values)
    query_persons = list(query_persons)
    gallery_persons = np.asarray(list(gallery_persons), dtype=object)
    if values.shape != (len(query_persons), len(gallery_persons)):
        raise McamError(
            f"similarity shape {values.shape} does not match "
            f"{len(query_persons)} queries x {len(gallery_persons)} galleries"
        )
    order = rank_indices(values)
    first_hit = np.empty(len(query_persons), dtype=np.intp)
    for i, p in enumerate(query_persons):
        hits = np.flatnonzero(gallery_persons[order[i]] == p)
        if hits.size == 0:
            raise MissingTruth(f"query person {p!r} has no track in the gallery")
        first_hit[i] = hits[0]
    counts = np.bincount(first_hit, minlength=len(gallery_persons))
    return CmcCurve(np.cumsum(counts) / len(query_persons))


@dataclass
class ProtocolConfig:
    """How query/gallery sets are drawn from a signature collection.

    ``mode`` is ``pairwise`` (every ordered camera pair), ``split`` (random
    50/50 identity split per trial, test half only) or ``fixed`` (explicit
    track id lists, evaluated once).
    """

    mode: str = "split"
    trials: int = 10
    seed: int = 0
    min_track_length: int | None = None
    query_camera: str | None = None
    gallery_camera: str | None = None
    query_ids: list | None = None
    gallery_ids: list | None = None

    def __post_init__(self):
        if self.mode == "pairwise-cameras":
            self.mode = "pairwise"
        elif self.mode == "random-half-split":
            self.mode = "split"
        elif self.mode == "fixed-sets":
            self.mode = "fixed"
        if self.mode not in MODES:
            raise McamError(f"unknown protocol mode {self.mode!r}")
        if self.trials < 1:
            raise McamError("trials must be at least 1")


@dataclass
class ProtocolResult:
    mean: CmcCurve
    std: np.ndarray
    curves: list
    labels: list = field(default_factory=list)

    def table_row(self, ranks=TABLE_RANKS):
        return [100.0 * self.mean.at(r) for r in ranks]


def _by_camera(signatures):
    cams = {}
    for s in signatures:
        cams.setdefault(s.camera_id, []).append(s)
    return cams


def _evaluate(Q, G, cfg, features=None):
    gallery_persons = [g.person_id for g in G]
    present = set(gallery_persons)
    Q = [q for q in Q if q.person_id in present]
    if not Q:
        raise InsufficientIdentities("no query identity is present in the gallery")
    sim = similarity_matrix(Q, G, features, cfg)
    return cmc_curve(sim, [q.person_id for q in Q], gallery_persons)


def _pad(curves):
    """Bring curves of different gallery sizes to a common length (saturating)."""
    n = max(len(c) for c in curves)
    return np.stack([np.concatenate([c.rates, np.full(n - len(c), c.rates[-1])]) for c in curves])


def _aggregate(curves, labels):
    R = _pad(curves)
    std = R.std(axis=0, ddof=1) if R.shape[0] > 1 else np.zeros(R.shape[1])
    return ProtocolResult(CmcCurve(R.mean(axis=0)), std, curves, labels)


def split_identities(persons, seed, trial):
    """Seeded 50/50 partition of identities into (train, test)."""
    persons = sorted(persons)
    rng = np.random.default_rng([int(seed), int(trial)])
    perm = rng.permutation(len(persons))
    half = len(persons) // 2
    train = sorted(persons[i] for i in perm[:half])
    test = sorted(persons[i] for i in perm[half:])
    return train, test


def run_protocol(signatures, protocol, cfg=MetricConfig(), features=None):
    """Evaluate a signature collection under ``protocol``.

    Returns a :class:`ProtocolResult` whose mean curve averages the
    per-trial (or per camera pair) curves.
    """
    sigs = list(signatures)
    if protocol.min_track_length:
        sigs = [s for s in sigs if s.n_frames >= protocol.min_track_length]
    if any(s.person_id is None for s in sigs):
        raise MissingTruth("every signature needs a person id for evaluation")
    cams = _by_camera(sigs)

    if protocol.mode == "fixed":
        index = {s.track_id: s for s in sigs}
        try:
            Q = [index[t] for t in protocol.query_ids or []]
            G = [index[t] for t in protocol.gallery_ids or []]
        except KeyError as e:
            raise McamError(f"unknown track id {e.args[0]!r} in fixed set") from None
        if not Q or not G:
            raise InsufficientIdentities("fixed mode needs nonempty query and gallery lists")
        return _aggregate([_evaluate(Q, G, cfg, features)], ["fixed"])

    if protocol.mode == "pairwise":
        curves, labels = [], []
        for a, b in itertools.permutations(sorted(cams), 2):
            shared = {s.person_id for s in cams[a]} & {s.person_id for s in cams[b]}
            if not shared:
                log.warning("camera pair %s->%s shares no identity; skipped", a, b)
                continue
            Q = [s for s in cams[a] if s.person_id in shared]
            G = [s for s in cams[b] if s.person_id in shared]
            curves.append(_evaluate(Q, G, cfg, features))
            labels.append(f"{a}->{b}")
        if not curves:
            raise InsufficientIdentities("no camera pair shares an identity")
        return _aggregate(curves, labels)

    names = sorted(cams)
    qc = protocol.query_camera or (names[0] if names else None)
    gc = protocol.gallery_camera or (names[1] if len(names) > 1 else None)
    if qc not in cams or gc not in cams or qc == gc:
        raise InsufficientIdentities("split mode needs two distinct cameras")
    shared = sorted({s.person_id for s in cams[qc]} & {s.person_id for s in cams[gc]})
    if len(shared) < 2:
        raise InsufficientIdentities(f"only {len(shared)} identities seen by both cameras")
    curves, labels = [], []
    for trial in range(protocol.trials):
        _, test = split_identities(shared, protocol.seed, trial)
        test = set(test)
        Q = [s for s in cams[qc] if s.person_id in test]
        G = [s for s in cams[gc] if s.person_id in test]
        curves.append(_evaluate(Q, G, cfg, features))
        labels.append(f"trial{trial}")
    return _aggregate(curves, labels)


def format_cmc_table(results, ranks=TABLE_RANKS, sep="\t"):
    """Rank-N table, one row per named result, rates in percent."""
    lines = [sep.join(["name"] + [f"r={r}" for r in ranks])]
    for name, res in results.items():
        lines.append(sep.join([name] + [f"{v:.1f}" for v in res.table_row(ranks)]))
    return "\n".join(lines)


def format_curve_columns(result):
    """Gnuplot-friendly columns: rank, mean rate, std."""
    lines = ["# rank mean std"]
    for n, (m, s) in enumerate(zip(result.mean.rates, result.std), start=1):
        lines.append(f"{n} {m!r} {s!r}")
    return "\n".join(lines)
