import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from mcam.config import MetricConfig
from mcam.exceptions import DimMismatch, EmptyGallery, UnknownQuery
from mcam.metric import (
    SimilarityMatrix,
    alpha_max,
    build_channel_dictionary,
    crc_encode,
    crcs_channel_distance,
    lr_channel_distance,
    lr_component_distance,
    lr_distance_matrix,
    mixing_weight_alpha,
    rank_gallery,
    riemannian_distance,
    similarity_matrix,
)
from mcam.mixture import AppearanceMixture, GaussianComponent, McamSignature

CFG = MetricConfig()


def mix(means, priors=None, variances=None, channel="hog"):
    means = np.atleast_2d(np.asarray(means, dtype=float))
    k = means.shape[0]
    priors = np.full(k, 1.0 / k) if priors is None else priors
    variances = np.ones_like(means) if variances is None else variances
    return AppearanceMixture(channel, priors, means, variances)


def sig(name, mixture, n=10, person=None):
    return McamSignature(name, "c0", n, {mixture.channel: mixture}, person_id=person or name)


def dense_riemannian(v1, v2):
    w = scipy.linalg.eigh(np.diag(v1), np.diag(v2), eigvals_only=True)
    return math.sqrt(np.sum(np.log(w) ** 2))


# -- Riemannian distance -----------------------------------------------------


def test_riemannian_examples():
    assert riemannian_distance([3.0, 7.0], [3.0, 7.0]) == 0.0
    assert riemannian_distance([math.e**2, 1.0], [1.0, 1.0]) == pytest.approx(2.0)
    assert riemannian_distance([4.0, 9.0], [1.0, 1.0]) == pytest.approx(2.5980, abs=1e-4)


@settings(max_examples=100, deadline=None)
@given(d=st.integers(1, 12), seed=st.integers(0, 10**6))
def test_riemannian_matches_dense_generalized_eigenvalues(d, seed):
    rng = np.random.default_rng(seed)
    v1, v2 = rng.uniform(1e-3, 10, d), rng.uniform(1e-3, 10, d)
    assert riemannian_distance(v1, v2) == pytest.approx(dense_riemannian(v1, v2), abs=1e-10)


@settings(max_examples=100, deadline=None)
@given(d=st.integers(1, 8), seed=st.integers(0, 10**6), s=st.floats(1e-3, 1e3))
def test_riemannian_scale_invariance(d, seed, s):
    rng = np.random.default_rng(seed)
    v1, v2 = rng.uniform(0.01, 5, d), rng.uniform(0.01, 5, d)
    assert abs(riemannian_distance(s * v1, s * v2) - riemannian_distance(v1, v2)) <= 1e-12 * max(
        1, riemannian_distance(v1, v2)
    ) * 10


def test_riemannian_dim_mismatch():
    with pytest.raises(DimMismatch):
        riemannian_distance([1.0], [1.0, 2.0])


# -- LR distance -------------------------------------------------------------


def test_lr_component_examples():
    g1 = GaussianComponent(1.0, np.array([0.0]), np.array([math.e**2]))
    g2 = GaussianComponent(1.0, np.array([3.0]), np.array([1.0]))
    assert lr_component_distance(g1, g2, 0.33) == pytest.approx(2.67)
    assert lr_component_distance(g1, g2, 0.0) == pytest.approx(3.0)
    g3 = GaussianComponent(1.0, np.array([9.0]), np.array([math.e**2]))
    assert lr_component_distance(g1, g3, 1.0) == 0.0


def test_alpha_examples():
    assert mixing_weight_alpha(1, 1, 1000, 1000, CFG) == pytest.approx(0.33)
    assert alpha_max(10, 1000, CFG) == pytest.approx(0.1)
    assert mixing_weight_alpha(0.5, 0.5, 10, 1000, CFG) == pytest.approx(0.1)
    assert mixing_weight_alpha(0.2, 0.4, 1000, 1000, CFG) == pytest.approx(0.3)


def brute_lr(mq, mg, nq, ng, cfg=CFG):
    best = math.inf
    pq, pg = mq.priors / mq.priors.max(), mg.priors / mg.priors.max()
    for i, gi in enumerate(mq.components):
        for j, gj in enumerate(mg.components):
            a = min(min(cfg.a, min(nq, ng) / cfg.b), (pq[i] + pg[j]) / 2)
            best = min(best, lr_component_distance(gi, gj, a))
    return best


def test_lr_best_pair_wins():
    mq = mix([[0.0], [10.0]], priors=[0.5, 0.5])
    mg = mix([[10.1]], priors=[1.0])
    d = lr_channel_distance(mq, mg, 1, 1, CFG)
    # alpha tends to 0 with tiny tracks: plain mean gap of the closest pair
    assert d == pytest.approx(0.1 * (1 - 0.01))
    assert d == pytest.approx(brute_lr(mq, mg, 1, 1))


@settings(max_examples=60, deadline=None)
@given(kq=st.integers(1, 4), kg=st.integers(1, 4), d=st.integers(1, 5), seed=st.integers(0, 10**6),
       nq=st.integers(1, 300), ng=st.integers(1, 300))
def test_lr_matches_brute_force_and_axioms(kq, kg, d, seed, nq, ng):
    rng = np.random.default_rng(seed)
    def rand_mix(k):
        p = rng.uniform(0.1, 1, k)
        return mix(rng.normal(size=(k, d)), p / p.sum(), rng.uniform(0.1, 3, (k, d)))
    mq, mg = rand_mix(kq), rand_mix(kg)
    assert lr_channel_distance(mq, mg, nq, ng) == pytest.approx(brute_lr(mq, mg, nq, ng), abs=1e-12)
    assert lr_channel_distance(mq, mq, nq, nq) == 0.0
    assert lr_channel_distance(mq, mg, nq, nq) == pytest.approx(lr_channel_distance(mg, mq, nq, nq), abs=1e-12)


def test_single_pair_equals_component_distance():
    mq = mix([[0.0, 1.0]], [1.0], [[2.0, 3.0]])
    mg = mix([[1.0, 1.0]], [1.0], [[1.0, 1.0]])
    a = alpha_max(1000, 1000, CFG)
    assert lr_channel_distance(mq, mg, 1000, 1000) == pytest.approx(
        lr_component_distance(mq.components[0], mg.components[0], a)
    )


# -- dictionary and ridge coding --------------------------------------------


def test_dictionary_atom_count_and_map():
    g1 = mix(np.random.default_rng(0).normal(size=(3, 4)))
    g2 = mix(np.random.default_rng(1).normal(size=(2, 4)))
    D = build_channel_dictionary([g1, g2], "hog", 1.0)
    assert D.n_atoms == 5
    assert D.owner.tolist() == [0, 0, 0, 1, 1] and D.component.tolist() == [0, 1, 2, 0, 1]
    assert len({(o, c) for o, c in zip(D.owner, D.component)}) == 5


def test_ridge_closed_form_examples():
    D = build_channel_dictionary([mix([[1.0, 0.0]]), mix([[0.0, 1.0]])], "hog", 1.0)
    assert np.allclose(D.operator, 0.5 * np.eye(2))
    assert np.allclose(crc_encode([2.0, 0.0], D), [1.0, 0.0])
    single = build_channel_dictionary([mix([[1.0, 0.0]])], "hog", 1.0)
    assert crc_encode([1.0, 0.0], single) == pytest.approx([0.5])


def gradient_descent_ridge(A, mu, delta, iters=20000):
    H = A.T @ A + delta * np.eye(A.shape[1])
    step = 1.0 / np.linalg.eigvalsh(H).max()
    rho = np.zeros(A.shape[1])
    for _ in range(iters):
        g = H @ rho - A.T @ mu
        rho -= step * g
        if np.abs(g).max() < 1e-14:
            break
    return rho


@pytest.mark.parametrize("seed", range(5))
def test_ridge_matches_normal_equations_and_descent(seed):
    rng = np.random.default_rng(seed)
    gallery = [mix(rng.normal(size=(4, 50))) for _ in range(5)]
    D = build_channel_dictionary(gallery, "hog", 1.0)
    mu = rng.normal(size=50)
    rho = crc_encode(mu, D)
    A = D.atoms
    direct = np.linalg.solve(A.T @ A + np.eye(20), A.T @ mu)
    assert np.linalg.norm(rho - direct) <= 1e-8 * np.linalg.norm(direct)
    gd = gradient_descent_ridge(A, mu, 1.0)
    assert np.linalg.norm(rho - gd) <= 1e-8 * np.linalg.norm(gd)
    res = (A.T @ A + np.eye(20)) @ rho - A.T @ mu
    assert np.abs(res).max() <= 1e-8 * np.abs(A.T @ mu).max()


def test_encode_stack_matches_vectors():
    rng = np.random.default_rng(2)
    D = build_channel_dictionary([mix(rng.normal(size=(3, 6)))], "hog", 1.0)
    M = rng.normal(size=(4, 6))
    assert np.allclose(crc_encode(M, D), np.stack([crc_encode(m, D) for m in M], axis=1))


def test_encode_dim_mismatch():
    D = build_channel_dictionary([mix([[1.0, 0.0]])], "hog", 1.0)
    with pytest.raises(DimMismatch):
        crc_encode([1.0, 2.0, 3.0], D)


def test_empty_gallery_dictionary():
    with pytest.raises(EmptyGallery):
        build_channel_dictionary([], "hog")


# -- CRCS ----------------------------------------------------------------------


def test_crcs_dominant_atom():
    e = np.eye(4)
    gallery = [mix([10 * e[0]]), mix([10 * e[1]]), mix([10 * e[2]])]
    D = build_channel_dictionary(gallery, "hog", 1.0)
    q = mix([10 * e[0]], [1.0])
    parts = [crcs_channel_distance(q, g, D) for g in range(3)]
    res, code = zip(*parts)
    assert res[0] < 0.2 and res[0] == min(res)
    assert code[0] == max(code)
    # orthogonal blocks contribute nothing: residual is the query norm
    assert res[1] == pytest.approx(10.0) and code[1] == pytest.approx(0.0)


def test_crcs_single_component_is_raw():
    rng = np.random.default_rng(3)
    D = build_channel_dictionary([mix(rng.normal(size=(2, 3)))], "hog", 1.0)
    mu = rng.normal(size=3)
    rho = crc_encode(mu, D)
    res, code = crcs_channel_distance(mix([mu], [1.0]), 0, D)
    assert res == pytest.approx(np.linalg.norm(mu - D.atoms @ rho))
    assert code == pytest.approx(np.linalg.norm(rho))


# -- similarity matrix -------------------------------------------------------


def hand_similarity(qs, gs, n=10, cfg=CFG):
    """Loop-level evaluation of the LR and CRCS kernels for 1-D, K=1 mixtures."""
    nq, ng = len(qs), len(gs)
    a = min(cfg.a, n / cfg.b, 1.0)
    D = [[(1 - a) * abs(q - g) for g in gs] for q in qs]
    A = np.array(gs, dtype=float)[None, :]
    op = np.linalg.inv(A.T @ A + cfg.delta * np.eye(ng)) @ A.T
    res = [[0.0] * ng for _ in qs]
    code = [[0.0] * ng for _ in qs]
    for i, q in enumerate(qs):
        rho = op @ np.array([q])
        for j in range(ng):
            res[i][j] = abs(q - gs[j] * rho[j])
            code[i][j] = abs(rho[j])

    def rownorm(M):
        return [[v / max(max(row), cfg.eps_guard) for v in row] for row in M]

    def kernel(M):
        out = [[0.0] * ng for _ in range(nq)]
        for j in range(ng):
            col = [M[i][j] for i in range(nq)]
            beta = min(col)
            gamma = max(cfg.kernel_range_factor * (max(col) - beta), cfg.eps_guard)
            for i in range(nq):
                out[i][j] = math.exp(-((M[i][j] - beta) ** 2) / gamma)
        return out

    lr = kernel(rownorm(D))
    r, c = rownorm(res), rownorm(code)
    crcs = kernel([[cfg.w_res * r[i][j] - cfg.w_code * c[i][j] for j in range(ng)] for i in range(nq)])
    return np.array(lr) + np.array(crcs)


def test_three_by_three_hand_oracle():
    qv, gv = [0.0, 1.5, 4.0], [0.5, 2.0, 3.0]
    Q = [sig(f"q{i}", mix([[v]], [1.0])) for i, v in enumerate(qv)]
    G = [sig(f"g{i}", mix([[v]], [1.0])) for i, v in enumerate(gv)]
    sim = similarity_matrix(Q, G)
    assert np.allclose(sim.values, hand_similarity(qv, gv), rtol=0, atol=1e-9)
    assert np.allclose(sim.values, sim.lr + sim.crcs)


def test_single_gallery_is_defined():
    Q = [sig(f"q{i}", mix([[float(i)]], [1.0])) for i in range(3)]
    G = [sig("g", mix([[1.0]], [1.0]))]
    sim = similarity_matrix(Q, G)
    assert sim.shape == (3, 1) and np.all(np.isfinite(sim.values))
    assert rank_gallery(sim, "q0") == ["g"]


def test_self_match_ranks_first():
    rng = np.random.default_rng(4)
    S = [sig(f"t{i}", mix(rng.normal(size=(2, 5)))) for i in range(8)]
    sim = similarity_matrix(S, S)
    assert np.all(np.argmax(sim.values, axis=1) == np.arange(8))
    assert np.all(sim.values > 0) and np.all(sim.values <= 2.0)


@settings(max_examples=25, deadline=None)
@given(nq=st.integers(1, 5), ng=st.integers(1, 5), seed=st.integers(0, 10**6))
def test_similarity_range(nq, ng, seed):
    rng = np.random.default_rng(seed)
    def one(name):
        k = int(rng.integers(1, 3))
        return McamSignature(name, "c", 10, {
            c: mix(rng.normal(size=(k, 3)), channel=c) for c in ("csh", "hog")})
    Q = [one(f"q{i}") for i in range(nq)]
    G = [one(f"g{i}") for i in range(ng)]
    v = similarity_matrix(Q, G).values
    assert np.all(np.isfinite(v)) and np.all(v > 0) and np.all(v <= 4.0 + 1e-12)


def test_monotonicity_one_sided():
    G = [sig(f"g{i}", mix([[v]], [1.0])) for i, v in enumerate([1.0, 2.0, 3.5])]
    others = [sig("o", mix([[2.5]], [1.0]))]
    prev = None
    for x in [0.9, 0.5, 0.0, -1.0, -3.0]:
        q = sig("q", mix([[x]], [1.0]))
        row = similarity_matrix([q] + others, G).lr[0]
        if prev is not None:
            assert np.all(row <= prev + 1e-12)
        prev = row


def test_adding_gallery_keeps_raw_lr_order():
    rng = np.random.default_rng(8)
    Q = [sig(f"q{i}", mix(rng.normal(size=(2, 3)))) for i in range(4)]
    G = [sig(f"g{i}", mix(rng.normal(size=(2, 3)))) for i in range(5)]
    before = lr_distance_matrix(Q, G, Q[0].channels[0])
    after = lr_distance_matrix(Q, G + [sig("x", mix(rng.normal(size=(1, 3)) + 50))], Q[0].channels[0])
    assert np.array_equal(np.argsort(before, axis=1), np.argsort(after[:, :5], axis=1))


def test_rank_gallery_examples():
    sim = SimilarityMatrix(["q"], ["a", "b", "c"], np.array([[0.2, 0.9, 0.5]]))
    assert rank_gallery(sim, "q") == ["b", "c", "a"]
    tie = SimilarityMatrix(["q"], ["a", "b", "c"], np.array([[0.4, 0.4, 0.4]]))
    assert rank_gallery(tie, 0) == ["a", "b", "c"]
    with pytest.raises(UnknownQuery):
        rank_gallery(sim, "nope")


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-10, 10, allow_nan=False), min_size=1, max_size=30))
def test_rank_gallery_matches_reference_sort(row):
    ids = [f"g{i}" for i in range(len(row))]
    sim = SimilarityMatrix(["q"], ids, np.array([row]))
    ref = [ids[i] for i in sorted(range(len(row)), key=lambda i: (-row[i], i))]
    assert rank_gallery(sim, "q") == ref
