"""Analytic sanity checks runnable without any dataset (``mcam selftest``)."""

from __future__ import annotations

import math

import numpy as np

from .config import MetricConfig
from .evaluation import cmc_curve
from .features import extract_csh, extract_hog
from .imaging import NormalizedFrame, build_region_layout, equalize_lightness, preprocess_frame
from .metric import (
    build_channel_dictionary,
    crc_encode,
    lr_component_distance,
    mixing_weight_alpha,
    riemannian_distance,
    similarity_matrix,
)
from .mixture import (
    AppearanceMixture,
    GaussianComponent,
    McamSignature,
    distortion_J,
    fit_mixture,
    kmeans_cluster,
    select_component_count,
)


def _close(a, b, tol=1e-9):
    return np.allclose(a, b, rtol=0, atol=tol)


def _layout_counts():
    return (
        len(build_region_layout(64, 192, 32, 32, 16)) == 33
        and len(build_region_layout(32, 32, 32, 32, 16)) == 1
        and len(build_region_layout(64, 64, 32, 32, 32)) == 4
    )


def _preprocess_size():
    raw = np.random.default_rng(0).integers(0, 256, size=(37, 23, 3), dtype=np.uint8)
    f = preprocess_frame(raw, build_region_layout())
    return f.rgb.shape == (192, 64, 3)


def _equalize_two_level():
    L = np.array([0.0] * 8 + [100.0] * 8)
    return _close(np.unique(equalize_lightness(L)) / 100.0, [0.5, 1.0])


def _csh_constant():
    lay = build_region_layout(32, 32, 32, 32, 16)
    lab = np.zeros((32, 32, 3))
    lab[..., 0] = 50.0
    h = extract_csh(NormalizedFrame.from_lab(lab), lay).values.reshape(3, -1)
    return _close(h.max(axis=1), 1.0) and _close(h.sum(axis=1), 1.0)


def _hog_step_edge():
    lay = build_region_layout(4, 4, 4, 4, 4)
    lab = np.zeros((4, 4, 3))
    lab[:, 2:, 0] = 100.0
    h = extract_hog(NormalizedFrame.from_lab(lab), lay).values
    return _close(h, [1, 0, 0, 0, 0, 0, 0, 0])


def _kmeans_separable():
    S = np.array([0, 0, 0, 100, 100, 100.0])
    r = kmeans_cluster(S, 2, seed=0)
    return _close(np.sort(r.centroids.ravel()), [0, 100]) and r.distortion == 0


def _distortion_values():
    class R:
        k = 2
        centroids = np.array([[1.0], [11.0]])
        labels = np.array([0, 0, 1, 1])

    return math.isclose(distortion_J(np.array([0, 2, 10, 12.0]), R()), 2.0)


def _select_two_clusters():
    rng = np.random.default_rng(0)
    S = np.concatenate([rng.uniform(-0.01, 0.01, 20), 100 + rng.uniform(-0.01, 0.01, 20)])
    return select_component_count(S, 5, seed=0) == 2


def _single_frame_mixture():
    m = fit_mixture(np.ones((1, 4)), "hog", seed=0)
    return m.n_components == 1 and _close(m.priors, [1.0]) and _close(m.variances, 1e-6)


def _riemannian_values():
    return (
        riemannian_distance([4.0, 9.0], [4.0, 9.0]) == 0.0
        and math.isclose(riemannian_distance([math.e**2, 1.0], [1.0, 1.0]), 2.0)
        and math.isclose(
            riemannian_distance([4.0, 9.0], [1.0, 1.0]),
            math.hypot(math.log(4), math.log(9)),
        )
    )


def _lr_component():
    g1 = GaussianComponent(1.0, np.array([0.0]), np.array([math.e**2]))
    g2 = GaussianComponent(1.0, np.array([3.0]), np.array([1.0]))
    return math.isclose(lr_component_distance(g1, g2, 0.33), 0.67 * 3 + 0.33 * 2)


def _alpha_values():
    cfg = MetricConfig()
    return (
        math.isclose(mixing_weight_alpha(1, 1, 1000, 1000, cfg), 0.33)
        and math.isclose(mixing_weight_alpha(0.5, 0.5, 10, 1000, cfg), 0.1)
        and math.isclose(mixing_weight_alpha(0.2, 0.4, 1000, 1000, cfg), 0.3)
    )


def _ridge_identity():
    m1 = AppearanceMixture("csh", [1.0], [[1.0, 0.0]], [[1.0, 1.0]])
    m2 = AppearanceMixture("csh", [1.0], [[0.0, 1.0]], [[1.0, 1.0]])
    d = build_channel_dictionary([m1, m2], "csh", 1.0)
    return _close(d.operator, 0.5 * np.eye(2)) and _close(crc_encode([2.0, 0.0], d), [1.0, 0.0])


def _self_match():
    rng = np.random.default_rng(1)
    sigs = []
    for i in range(5):
        mix = AppearanceMixture("hog", [1.0], rng.normal(size=(1, 6)), np.ones((1, 6)))
        sigs.append(McamSignature(f"t{i}", "c0", 10, {mix.channel: mix}, person_id=f"p{i}"))
    sim = similarity_matrix(sigs, sigs)
    return cmc_curve(sim, [s.person_id for s in sigs], [s.person_id for s in sigs]).at(1) == 1.0


CHECKS = [
    ("region layout counts", _layout_counts),
    ("preprocess output size", _preprocess_size),
    ("two-level equalization", _equalize_two_level),
    ("CSH constant region", _csh_constant),
    ("HOG vertical step edge", _hog_step_edge),
    ("k-means separable clusters", _kmeans_separable),
    ("distortion J by hand", _distortion_values),
    ("model order on two clusters", _select_two_clusters),
    ("single-frame mixture", _single_frame_mixture),
    ("Riemannian distance values", _riemannian_values),
    ("LR component distance", _lr_component),
    ("mixing weight alpha", _alpha_values),
    ("ridge operator closed form", _ridge_identity),
    ("self-match ranking", _self_match),
]


def run_selftest():
    """Run every check; returns ``[(name, passed, error_or_None)]``."""
    results = []
    for name, fn in CHECKS:
        try:
            results.append((name, bool(fn()), None))
        except Exception as e:  # report, never abort the suite
            results.append((name, False, f"{type(e).__name__}: {e}"))
    return results
