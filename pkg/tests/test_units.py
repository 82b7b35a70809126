import math

import numpy as np
import pytest

import oracles
from peakscope.convnet import ActivationMap
from peakscope.envelope import Peak, PeakSet
from peakscope.ingest import PhoneSegment, PhoneTier
from peakscope.phones import identity_mapping, load_default
from peakscope.units import (
    ARITIES,
    LabeledPeakEmbedding,
    adjusted_mutual_information,
    ami_sweep,
    arity_fractions,
    kmeans,
    label_corpus,
    label_peak,
    pca_fit,
    pca_project,
    sequence_ids,
)

RATE = 16000


def _tier(spans):
    """spans: list of (start_s, end_s, label) contiguous at sample level."""
    segs = tuple(
        PhoneSegment(int(round(a * RATE)), int(round(b * RATE)), lab)
        for a, b, lab in spans
    )
    return PhoneTier(segs, RATE)


def _peak(t, frame=0):
    return Peak(frame=frame, time_s=t, sharpness=1.0)


def test_label_peak_diphone_example():
    tier = _tier([(0.95, 1.01, "ae"), (1.01, 1.10, "tcl")])
    phones, manners, arity = label_peak(_peak(1.000), tier, load_default())
    assert phones == ("ae", "t")
    assert manners == ("vowel", "stop")
    assert arity == "di"


def test_label_peak_mono_inside_vowel():
    tier = _tier([(0.0, 0.5, "h#"), (0.5, 1.5, "iy"), (1.5, 2.0, "h#")])
    phones, manners, arity = label_peak(_peak(1.0), tier, load_default())
    assert phones == ("iy",)
    assert manners == ("vowel",)
    assert arity == "mono"


def test_label_peak_merges_closure_with_stop():
    # ae | tcl | t inside one window: tcl and t both reduce to t and merge
    tier = _tier([(0.98, 1.00, "ae"), (1.00, 1.01, "tcl"), (1.01, 1.40, "t")])
    phones, manners, arity = label_peak(_peak(1.005), tier, load_default())
    assert phones == ("ae", "t")
    assert arity == "di"


def test_label_peak_triphone():
    tier = _tier([(0.0, 0.99, "s"), (0.99, 1.01, "ih"), (1.01, 2.0, "m")])
    phones, manners, arity = label_peak(_peak(1.0), tier, load_default())
    assert phones == ("s", "ih", "m")
    assert manners == ("fricative", "vowel", "nasal")
    assert arity == "tri+"


def test_label_peak_window_is_half_open():
    # window [0.98, 1.02): a segment ending exactly at 0.98 or starting
    # exactly at 1.02 must not participate
    tier = _tier([(0.90, 0.98, "s"), (0.98, 1.02, "iy"), (1.02, 1.10, "m")])
    phones, _, arity = label_peak(_peak(1.000), tier, load_default(), window_s=0.040)
    assert phones == ("iy",)
    assert arity == "mono"


def test_label_peak_outside_span():
    tier = _tier([(0.5, 1.0, "iy")])
    with pytest.raises(ValueError, match="outside tier span"):
        label_peak(_peak(0.4), tier, load_default())
    with pytest.raises(ValueError, match=r"peak at 1\.0000 s outside tier span"):
        label_peak(_peak(1.0), tier, load_default())  # end is exclusive
    with pytest.raises(ValueError, match="window_s must be > 0"):
        label_peak(_peak(0.7), tier, load_default(), window_s=0.0)


def test_label_peak_identity_mapping_keeps_surface_labels():
    tier = _tier([(0.0, 1.0, "c0"), (1.0, 2.0, "c1")])
    phones, manners, arity = label_peak(_peak(1.0), tier, identity_mapping())
    assert phones == ("c0", "c1")
    assert manners == ("c0", "c1")
    assert arity == "di"


def _mini_corpus():
    amap = ActivationMap(
        values=np.arange(40.0).reshape(10, 4),
        frame_shift_ms=10.0,
        frame_offset_ms=12.5,
    )
    tier = _tier([(0.0, 0.05, "h#"), (0.05, 0.2, "iy")])
    ps = PeakSet(utterance_id="u", peaks=(_peak(0.0525, frame=4),))
    return {"u": ps}, {"u": amap}, {"u": tier}


def test_label_corpus_embeds_the_peak_frame_row():
    peaksets, maps, tiers = _mini_corpus()
    labeled = label_corpus(peaksets, maps, tiers, load_default())
    assert len(labeled) == 1
    item = labeled[0]
    assert item.utterance_id == "u"
    assert item.frame == 4
    assert np.array_equal(item.vector, maps["u"].values[4])
    assert item.vector.dtype == np.float64
    assert item.phone_label() == "sil_iy"
    assert item.manner_label() == "silence_vowel"
    assert item.arity == "di"


def test_label_corpus_validations():
    peaksets, maps, tiers = _mini_corpus()
    with pytest.raises(ValueError, match="share utterance ids"):
        label_corpus(peaksets, maps, {"x": tiers["u"]}, load_default())
    bad = {"u": PeakSet(utterance_id="u", peaks=(_peak(0.1, frame=10),))}
    with pytest.raises(ValueError, match="peak frame 10 out of range"):
        label_corpus(bad, maps, tiers, load_default())


def test_labeled_peak_embedding_validation():
    v = np.ones(3)
    with pytest.raises(ValueError, match="non-empty"):
        LabeledPeakEmbedding("u", 0, 0.0, v, (), (), "mono")
    with pytest.raises(ValueError, match="length must match"):
        LabeledPeakEmbedding("u", 0, 0.0, v, ("a",), (), "mono")
    with pytest.raises(ValueError, match="unknown arity"):
        LabeledPeakEmbedding("u", 0, 0.0, v, ("a",), ("x",), "quad")


def test_arity_fractions():
    def item(arity, n_labels):
        labels = tuple(f"p{i}" for i in range(n_labels))
        return LabeledPeakEmbedding("u", 0, 0.0, np.ones(2), labels, labels, arity)

    labeled = [item("mono", 1)] * 2 + [item("di", 2)] * 6 + [item("tri+", 3)] * 2
    fr = arity_fractions(labeled)
    assert fr == {"mono": 0.2, "di": 0.6, "tri+": 0.2}
    assert sum(fr.values()) == pytest.approx(1.0)
    with pytest.raises(ValueError, match="no labeled peaks"):
        arity_fractions([])


# --- PCA ---


def test_pca_collinear_example():
    model = pca_fit([[1.0, 1.0], [2.0, 2.0], [3.0, 3.0]], k=2)
    assert np.allclose(model.components[0], [math.sqrt(0.5), math.sqrt(0.5)], atol=1e-12)
    assert model.explained_variance[0] == pytest.approx(2.0)
    assert model.explained_variance[1] == pytest.approx(0.0, abs=1e-12)
    # projecting the mean lands on the origin
    assert np.allclose(pca_project(model, [2.0, 2.0]), [0.0, 0.0], atol=1e-12)


def test_pca_sign_convention():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(50, 4))
    a = pca_fit(x, k=4)
    b = pca_fit(-x, k=4)
    for comps in (a.components, b.components):
        for row in comps:
            assert row[np.argmax(np.abs(row))] > 0


def test_pca_projection_variance_matches_explained_variance():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(200, 6)) * np.array([5.0, 3.0, 2.0, 1.0, 0.5, 0.1])
    model = pca_fit(x, k=6)
    proj = pca_project(model, x)
    var = proj.var(axis=0, ddof=1)
    assert np.max(np.abs(var - model.explained_variance)) <= 1e-8
    assert np.all(np.diff(model.explained_variance) <= 1e-12)


def test_pca_components_are_orthonormal():
    rng = np.random.default_rng(2)
    model = pca_fit(rng.normal(size=(80, 5)), k=5)
    gram = model.components @ model.components.T
    assert np.allclose(gram, np.eye(5), atol=1e-10)


def test_pca_rank2_projection_preserves_distances():
    rng = np.random.default_rng(3)
    basis = rng.normal(size=(2, 7))
    coords = rng.normal(size=(60, 2))
    x = coords @ basis  # exactly rank 2
    model = pca_fit(x, k=2)
    proj = pca_project(model, x)
    d_orig = np.linalg.norm(x[:, None] - x[None, :], axis=-1)
    d_proj = np.linalg.norm(proj[:, None] - proj[None, :], axis=-1)
    assert np.max(np.abs(d_orig - d_proj)) <= 1e-6


def test_pca_isotropic_cloud_has_flat_spectrum():
    rng = np.random.default_rng(4)
    model = pca_fit(rng.normal(size=(20000, 3)), k=3)
    ev = model.explained_variance
    assert ev[0] / ev[-1] < 1.1  # within 10 percent


def test_pca_validation():
    with pytest.raises(ValueError, match="at least 2 vectors"):
        pca_fit([[1.0, 2.0]], k=1)
    with pytest.raises(ValueError, match=r"k must be in \[1, 2\]"):
        pca_fit([[1.0, 2.0], [3.0, 4.0]], k=3)
    model = pca_fit([[1.0, 2.0], [3.0, 4.0]], k=1)
    with pytest.raises(ValueError, match="dimension does not match"):
        pca_project(model, [1.0, 2.0, 3.0])


# --- kmeans ---


def test_kmeans_k_equals_n_gives_zero_inertia():
    rng = np.random.default_rng(5)
    x = rng.normal(size=(8, 3))
    c = kmeans(x, 8, seed=0)
    assert c.inertia == 0.0
    assert sorted(c.assignments.tolist()) == list(range(8))


def test_kmeans_k1_is_the_mean():
    rng = np.random.default_rng(6)
    x = rng.normal(size=(40, 2))
    c = kmeans(x, 1, seed=0)
    assert np.allclose(c.centroids[0], x.mean(axis=0), atol=1e-12)
    assert c.inertia == pytest.approx(((x - x.mean(axis=0)) ** 2).sum())


def test_kmeans_recovers_two_blobs():
    rng = np.random.default_rng(7)
    a = rng.normal(size=(30, 2)) * 0.05
    b = rng.normal(size=(30, 2)) * 0.05 + [10.0, 0.0]
    x = np.vstack([a, b])
    c = kmeans(x, 2, seed=1)
    left = set(c.assignments[:30].tolist())
    right = set(c.assignments[30:].tolist())
    assert len(left) == 1 and len(right) == 1 and left != right


def test_kmeans_postconditions():
    rng = np.random.default_rng(8)
    x = rng.normal(size=(60, 4))
    c = kmeans(x, 5, seed=3)
    d2 = ((x[:, None, :] - c.centroids[None, :, :]) ** 2).sum(axis=-1)
    assert np.array_equal(c.assignments, d2.argmin(axis=1))
    assert c.inertia == pytest.approx(d2.min(axis=1).sum(), rel=1e-12)


def test_kmeans_is_deterministic_per_seed():
    rng = np.random.default_rng(9)
    x = rng.normal(size=(50, 3))
    a = kmeans(x, 4, seed=11)
    b = kmeans(x, 4, seed=11)
    assert np.array_equal(a.assignments, b.assignments)
    assert np.array_equal(a.centroids, b.centroids)
    assert a.inertia == b.inertia


def test_kmeans_handles_duplicate_points():
    x = np.array([[0.0, 0.0]] * 5 + [[10.0, 0.0]] * 2 + [[0.0, 10.0]])
    c = kmeans(x, 3, seed=0)
    d2 = ((x[:, None, :] - c.centroids[None, :, :]) ** 2).sum(axis=-1)
    assert c.inertia == pytest.approx(d2.min(axis=1).sum(), abs=1e-12)
    assert c.inertia <= 1e-12  # three distinct sites, three clusters


def test_kmeans_validation():
    with pytest.raises(ValueError, match="non-empty 2-D"):
        kmeans(np.zeros((0, 2)), 1, seed=0)
    with pytest.raises(ValueError, match=r"n_clusters must be in \[1, 4\]"):
        kmeans(np.zeros((4, 2)), 5, seed=0)


# --- AMI ---


def test_ami_matches_comb_oracle():
    rng = np.random.default_rng(10)
    for trial in range(120):
        n = int(rng.integers(2, 61))
        ku = int(rng.integers(1, 9))
        kv = int(rng.integers(1, 9))
        u = rng.integers(0, ku, size=n)
        v = rng.integers(0, kv, size=n)
        for norm in ("mean", "max"):
            got = adjusted_mutual_information(u, v, normalizer=norm)
            want = oracles.ami_reference(u.tolist(), v.tolist(), normalizer=norm)
            assert abs(got - want) <= 1e-9, (trial, norm)


def test_ami_self_is_exactly_one():
    rng = np.random.default_rng(11)
    for _ in range(20):
        u = rng.integers(0, 5, size=int(rng.integers(2, 40)))
        if len(set(u.tolist())) < 2:
            continue
        assert adjusted_mutual_information(u, u) == 1.0


def test_ami_constant_labeling_is_exactly_zero():
    u = np.zeros(30, dtype=np.int64)
    v = np.random.default_rng(12).integers(0, 4, size=30)
    assert adjusted_mutual_information(u, v) == 0.0
    assert adjusted_mutual_information(v, u) == 0.0
    assert adjusted_mutual_information(u, u) == 0.0


def test_ami_symmetry():
    rng = np.random.default_rng(13)
    for _ in range(40):
        n = int(rng.integers(2, 50))
        u = rng.integers(0, 6, size=n)
        v = rng.integers(0, 6, size=n)
        a = adjusted_mutual_information(u, v)
        b = adjusted_mutual_information(v, u)
        assert abs(a - b) <= 1e-12


def test_ami_relabeling_invariance():
    rng = np.random.default_rng(14)
    u = rng.integers(0, 4, size=60)
    v = rng.integers(0, 4, size=60)
    perm = {0: 7, 1: 3, 2: 9, 3: 0}
    u2 = np.array([perm[i] for i in u.tolist()])
    assert abs(
        adjusted_mutual_information(u, v) - adjusted_mutual_information(u2, v)
    ) <= 1e-12


def test_ami_bounded_above_by_one():
    rng = np.random.default_rng(15)
    for _ in range(60):
        n = int(rng.integers(2, 40))
        u = rng.integers(0, 5, size=n)
        v = rng.integers(0, 5, size=n)
        assert adjusted_mutual_information(u, v) <= 1.0 + 1e-9


def test_ami_normalizers_differ_when_entropies_differ():
    u = np.array([0, 0, 0, 0, 1, 1, 1, 1])
    v = np.array([0, 1, 2, 3, 4, 5, 6, 7])
    mean_n = adjusted_mutual_information(u, v, normalizer="mean")
    max_n = adjusted_mutual_information(u, v, normalizer="max")
    assert mean_n != max_n


def test_ami_validation():
    with pytest.raises(ValueError, match="same length"):
        adjusted_mutual_information([0, 1], [0, 1, 2])
    with pytest.raises(ValueError, match="empty labelings"):
        adjusted_mutual_information([], [])
    with pytest.raises(ValueError, match="unknown normalizer"):
        adjusted_mutual_information([0, 1], [0, 1], normalizer="min")


def test_ami_against_sklearn_if_available():
    sklearn_metrics = pytest.importorskip("sklearn.metrics")
    rng = np.random.default_rng(16)
    for _ in range(30):
        n = int(rng.integers(5, 80))
        u = rng.integers(0, 6, size=n)
        v = rng.integers(0, 6, size=n)
        if len(set(u.tolist())) < 2 or len(set(v.tolist())) < 2:
            continue  # sklearn special-cases degenerate labelings
        want = sklearn_metrics.adjusted_mutual_info_score(u, v)
        got = adjusted_mutual_information(u, v)
        assert abs(got - want) <= 1e-9


# --- sweep plumbing ---


def test_sequence_ids_use_exact_equality():
    seqs = [("a", "b"), ("a",), ("a", "b"), ("b", "a"), "atomic", "atomic"]
    ids = sequence_ids(seqs)
    assert ids[0] == ids[2]
    assert ids[3] != ids[0]
    assert ids[1] != ids[0]
    assert ids[4] == ids[5]
    assert ids[0] == 0 and ids[1] == 1  # first-occurrence order


def _planted(n_per=12, noise=0.0, seed=17):
    rng = np.random.default_rng(seed)
    protos = np.eye(4) * 3.0
    vectors, phones, manners = [], [], []
    pair_names = [("a", "a"), ("a", "b"), ("b", "a"), ("b", "b")]
    for cls in range(4):
        for _ in range(n_per):
            vectors.append(protos[cls] + noise * rng.normal(size=4))
            phones.append(pair_names[cls])
            manners.append(pair_names[cls])
    return np.array(vectors), phones, manners


def test_ami_sweep_peaks_at_the_planted_k():
    vectors, phones, manners = _planted()
    rows = ami_sweep(vectors, phones, manners, k_grid=(2, 4, 8), seed=0)
    assert [k for k, _, _ in rows] == [2, 4, 8]
    ami_manner = [m for _, _, m in rows]
    best_k = rows[int(np.argmax(ami_manner))][0]
    assert best_k == 4
    assert max(ami_manner) >= 0.99


def test_ami_sweep_k1_scores_zero():
    vectors, phones, manners = _planted()
    rows = ami_sweep(vectors, phones, manners, k_grid=(1,), seed=0)
    assert rows == [(1, 0.0, 0.0)]


def test_ami_sweep_validation():
    vectors, phones, manners = _planted(n_per=3)
    with pytest.raises(ValueError, match="non-empty"):
        ami_sweep(vectors, phones, manners, k_grid=(), seed=0)
    with pytest.raises(ValueError, match="label counts"):
        ami_sweep(vectors, phones[:-1], manners, k_grid=(2,), seed=0)
