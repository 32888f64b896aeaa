import numpy as np
import pytest

from mcam.evaluation import (
    CmcCurve,
    ProtocolConfig,
    cmc_curve,
    format_cmc_table,
    run_protocol,
    split_identities,
)
from mcam.exceptions import InsufficientIdentities, McamError, MissingTruth
from mcam.mixture import AppearanceMixture, McamSignature
from mcam.synthetic import SyntheticSpec, generate_synthetic_tracks


def toy_signatures(n_persons=6, cameras=("c0", "c1"), noise=0.05, seed=0):
    rng = np.random.default_rng(seed)
    centers = rng.normal(size=(n_persons, 4)) * 3
    out = []
    for cam in cameras:
        for p in range(n_persons):
            m = AppearanceMixture("hog", [1.0], centers[p] + noise * rng.normal(size=(1, 4)), np.ones((1, 4)))
            out.append(McamSignature(f"{cam}/p{p}", cam, 10, {m.channel: m}, person_id=f"p{p}"))
    return out


def test_identity_scores_give_perfect_rank1():
    c = cmc_curve(np.eye(5), list("abcde"), list("abcde"))
    assert c.at(1) == 1.0 and len(c) == 5


def test_cmc_monotone_and_complete():
    rng = np.random.default_rng(0)
    c = cmc_curve(rng.normal(size=(7, 7)), list(range(7)), list(range(7)))
    assert np.all(np.diff(c.rates) >= 0) and c.rates[-1] == 1.0


def test_cmc_saturates_past_gallery():
    c = CmcCurve([0.5, 1.0])
    assert c.at(20) == 1.0


def test_random_scores_expectation():
    rng = np.random.default_rng(1)
    persons = list(range(10))
    acc = np.zeros(10)
    trials = 10000
    for _ in range(trials):
        acc += cmc_curve(rng.random((1, 10)), [int(rng.integers(10))], persons).rates
    assert np.allclose(acc / trials, np.arange(1, 11) / 10, atol=0.03)


def test_multi_instance_gallery_counts_best_track():
    sim = np.array([[0.1, 0.9, 0.8]])
    assert cmc_curve(sim, ["a"], ["b", "c", "a"]).at(1) == 0.0
    assert cmc_curve(sim, ["a"], ["b", "a", "a"]).at(1) == 1.0


def test_missing_truth():
    with pytest.raises(MissingTruth):
        cmc_curve(np.ones((1, 2)), ["z"], ["a", "b"])


def test_shape_mismatch():
    with pytest.raises(McamError):
        cmc_curve(np.ones((2, 2)), ["a"], ["a", "b"])


def test_pairwise_eight_cameras():
    sigs = toy_signatures(4, cameras=[f"cam{i}" for i in range(8)])
    res = run_protocol(sigs, ProtocolConfig(mode="pairwise"))
    assert len(res.curves) == 56 and len(set(res.labels)) == 56
    assert res.mean.at(1) == 1.0


def test_split_is_deterministic_and_mean_is_average():
    sigs = toy_signatures(10, noise=2.0)
    proto = ProtocolConfig(mode="split", trials=10, seed=3)
    a, b = run_protocol(sigs, proto), run_protocol(sigs, proto)
    assert all(np.array_equal(x.rates, y.rates) for x, y in zip(a.curves, b.curves))
    R = np.stack([c.rates for c in a.curves])
    assert np.allclose(a.mean.rates, R.mean(axis=0), atol=1e-12)
    assert np.allclose(a.std, R.std(axis=0, ddof=1), atol=1e-12)
    assert len(a.curves[0]) == 5


def test_split_identities_reproducible():
    persons = [f"p{i}" for i in range(11)]
    train, test = split_identities(persons, 0, 4)
    assert (train, test) == split_identities(list(reversed(persons)), 0, 4)
    assert len(train) == 5 and len(test) == 6 and not set(train) & set(test)
    assert split_identities(persons, 0, 5) != (train, test)


def test_fixed_mode_runs_once():
    sigs = toy_signatures(4)
    ids = [s.track_id for s in sigs if s.camera_id == "c0"]
    res = run_protocol(sigs, ProtocolConfig(mode="fixed", trials=10, query_ids=ids, gallery_ids=ids))
    assert len(res.curves) == 1 and res.mean.at(1) == 1.0


def test_fixed_mode_unknown_id():
    with pytest.raises(McamError):
        run_protocol(toy_signatures(2), ProtocolConfig(mode="fixed", query_ids=["x"], gallery_ids=["y"]))


def test_split_needs_two_cameras():
    with pytest.raises(InsufficientIdentities):
        run_protocol(toy_signatures(4, cameras=("c0",)), ProtocolConfig(mode="split"))


def test_min_track_length_filter():
    sigs = toy_signatures(4)
    with pytest.raises(InsufficientIdentities):
        run_protocol(sigs, ProtocolConfig(mode="pairwise", min_track_length=11))


def test_mode_aliases_and_validation():
    assert ProtocolConfig(mode="pairwise-cameras").mode == "pairwise"
    assert ProtocolConfig(mode="random-half-split").mode == "split"
    with pytest.raises(McamError):
        ProtocolConfig(mode="loo")
    with pytest.raises(McamError):
        ProtocolConfig(trials=0)


def test_table_format():
    res = run_protocol(toy_signatures(4), ProtocolConfig(mode="pairwise"))
    lines = format_cmc_table({"toy": res}).splitlines()
    assert lines[0].split("\t") == ["name", "r=1", "r=5", "r=10", "r=20"]
    assert lines[1].split("\t")[1] == "100.0"


def test_synthetic_counts_and_identical_frames():
    spec = SyntheticSpec(identities=50, cameras=2, frames=3, width=8, height=24)
    tracks = generate_synthetic_tracks(spec, seed=0)
    assert len(tracks) == 100
    for t in tracks[:10]:
        assert all(np.array_equal(f, t.frames[0]) for f in t.frames)


def test_synthetic_fragmentation_and_determinism():
    spec = SyntheticSpec(identities=5, cameras=2, frames=6, fragmentation=1.0, width=8, height=24, noise=0.1)
    a, b = generate_synthetic_tracks(spec, 4), generate_synthetic_tracks(spec, 4)
    assert len(a) == 20 and sum(t.n_frames for t in a) == 60
    assert all(np.array_equal(x, y) for s, t in zip(a, b) for x, y in zip(s.frames, t.frames))


def test_synthetic_spec_validation():
    with pytest.raises(McamError):
        SyntheticSpec(identities=0)
    with pytest.raises(McamError):
        SyntheticSpec(noise=-1.0)
    with pytest.raises(McamError):
        SyntheticSpec(modes=2, mode_fractions=(1.0,))


@pytest.mark.slow
def test_synthetic_two_modes_recovered_in_csh():
    from mcam.imaging import build_region_layout
    from mcam.mixture import build_signature

    spec = SyntheticSpec(identities=4, cameras=1, frames=20, modes=2, mode_fractions=(0.85, 0.15))
    for t in generate_synthetic_tracks(spec, seed=0):
        m = build_signature(t, ["csh"], build_region_layout())["csh"]
        assert m.n_components == 2
        assert np.allclose(m.priors, [0.85, 0.15], atol=0.05)
