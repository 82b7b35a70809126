"""Peak-embedding analysis: labeling, PCA, k-means, and adjusted MI.

Each detected peak carries the activation row at its frame. Peaks get
labeled with the reduced-phone sequence falling inside a window around the
peak time, then the embedding cloud is studied with PCA projections and
K-means sweeps scored by adjusted mutual information against the label
sequences.
"""

import math
from dataclasses import dataclass

import numpy as np

DEFAULT_WINDOW_S = 0.040

ARITIES = ("mono", "di", "tri+")


@dataclass(frozen=True)
class LabeledPeakEmbedding:
    utterance_id: str
    frame: int
    time_s: float
    vector: np.ndarray
    phone_seq: tuple
    manner_seq: tuple
    arity: str

    def __post_init__(self):
        if not self.phone_seq:
            raise ValueError("phone_seq must be non-empty")
        if len(self.manner_seq) != len(self.phone_seq):
            raise ValueError("manner_seq length must match phone_seq")
        if self.arity not in ARITIES:
            raise ValueError(f"unknown arity: {self.arity!r}")

    def phone_label(self):
        return "_".join(self.phone_seq)

    def manner_label(self):
        return "_".join(self.manner_seq)


@dataclass(frozen=True)
class PcaModel:
    mean: np.ndarray
    components: np.ndarray  # k x F, orthonormal rows
    explained_variance: np.ndarray  # k, non-increasing


@dataclass(frozen=True)
class Clustering:
    n_clusters: int
    centroids: np.ndarray
    assignments: np.ndarray
    inertia: float
    seed: int


def _arity(n_labels):
    if n_labels == 1:
        return "mono"
    if n_labels == 2:
        return "di"
    return "tri+"


def label_peak(peak, tier, mapping, window_s=DEFAULT_WINDOW_S):
    """Label one peak with the reduced phones inside its window.

    The window is [t - window_s/2, t + window_s/2), half-open like the
    segments themselves, so boundary contact never double-counts. Adjacent
    duplicates after reduction merge (this is what collapses closure+stop).
    """
    if window_s <= 0:
        raise ValueError("window_s must be > 0")
    t = peak.time_s
    sr = tier.sample_rate
    if t < tier.start_s or t >= tier.end_s:
        raise ValueError(f"peak at {t:.4f} s outside tier span")
    half = window_s / 2.0
    w_lo, w_hi = t - half, t + half
    phone_seq = []
    for seg in tier.segments:
        s, e = seg.start_sample / sr, seg.end_sample / sr
        if s < w_hi and w_lo < e:
            reduced = mapping.reduce(seg.label)
            if not phone_seq or phone_seq[-1] != reduced:
                phone_seq.append(reduced)
    manner_seq = tuple(mapping.manner(p) for p in phone_seq)
    return tuple(phone_seq), manner_seq, _arity(len(phone_seq))


def label_corpus(peaksets, maps, tiers, mapping, window_s=DEFAULT_WINDOW_S):
    """LabeledPeakEmbedding list for every peak of every utterance."""
    if set(peaksets) != set(maps) or set(peaksets) != set(tiers):
        raise ValueError("peaksets, maps, and tiers must share utterance ids")
    labeled = []
    for utt_id, peakset in peaksets.items():
        amap = maps[utt_id]
        tier = tiers[utt_id]
        for peak in peakset.peaks:
            if peak.frame >= amap.n_frames:
                raise ValueError(f"{utt_id}: peak frame {peak.frame} out of range")
            phone_seq, manner_seq, arity = label_peak(peak, tier, mapping, window_s)
            labeled.append(LabeledPeakEmbedding(
                utterance_id=utt_id,
                frame=peak.frame,
                time_s=peak.time_s,
                vector=amap.values[peak.frame].astype(np.float64, copy=True),
                phone_seq=phone_seq,
                manner_seq=manner_seq,
                arity=arity,
            ))
    return labeled


def arity_fractions(labeled):
    if not labeled:
        raise ValueError("no labeled peaks")
    counts = {a: 0 for a in ARITIES}
    for item in labeled:
        counts[item.arity] += 1
    n = len(labeled)
    return {a: counts[a] / n for a in ARITIES}


def pca_fit(vectors, k):
    x = np.asarray(vectors, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError("need at least 2 vectors")
    n, dim = x.shape
    if not 1 <= k <= dim:
        raise ValueError(f"k must be in [1, {dim}]")
    mean = x.mean(axis=0)
    centered = x - mean
    cov = centered.T @ centered / (n - 1)
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1][:k]
    components = evecs[:, order].T.copy()
    for row in components:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1.0
    return PcaModel(
        mean=mean,
        components=components,
        explained_variance=np.maximum(evals[order], 0.0),
    )


def pca_project(model, vectors):
    x = np.asarray(vectors, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.shape[1] != model.mean.shape[0]:
        raise ValueError("vector dimension does not match the fitted model")
    out = (x - model.mean) @ model.components.T
    return out[0] if single else out


def _pairwise_d2(x, centroids):
    # |x|^2 + |c|^2 - 2 x.c, chunked over points, clipped at zero
    n = x.shape[0]
    c2 = (centroids ** 2).sum(axis=1)
    out = np.empty((n, centroids.shape[0]))
    chunk = max(1, (1 << 22) // max(1, centroids.shape[0]))
    for lo in range(0, n, chunk):
        hi = min(n, lo + chunk)
        block = x[lo:hi]
        d2 = (block ** 2).sum(axis=1)[:, None] + c2[None, :] - 2.0 * block @ centroids.T
        np.maximum(d2, 0.0, out=d2)
        out[lo:hi] = d2
    return out


def _plusplus_init(x, k, rng):
    n = x.shape[0]
    centers = np.empty((k, x.shape[1]))
    centers[0] = x[rng.integers(n)]
    d2 = ((x - centers[0]) ** 2).sum(axis=1)
    for i in range(1, k):
        total = d2.sum()
        if total > 0:
            idx = rng.choice(n, p=d2 / total)
        else:
            idx = rng.integers(n)
        centers[i] = x[idx]
        d2 = np.minimum(d2, ((x - centers[i]) ** 2).sum(axis=1))
    return centers


def kmeans(vectors, n_clusters, seed, max_iter=300, tol=1e-6):
    """Lloyd k-means with k-means++ seeding; fully deterministic per seed.

    Empty clusters are reseeded to the point farthest from its assigned
    centroid. Iteration stops when the largest centroid shift drops below
    tol; inertia is recomputed against the final centroids.
    """
    x = np.asarray(vectors, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 1:
        raise ValueError("vectors must be a non-empty 2-D array")
    n = x.shape[0]
    if not 1 <= n_clusters <= n:
        raise ValueError(f"n_clusters must be in [1, {n}]")
    rng = np.random.Generator(np.random.Philox(seed))
    centers = _plusplus_init(x, n_clusters, rng)
    prev_inertia = None
    for _ in range(max_iter):
        d2 = _pairwise_d2(x, centers)
        labels = d2.argmin(axis=1)
        point_d2 = ((x - centers[labels]) ** 2).sum(axis=1)
        inertia = float(point_d2.sum())
        if prev_inertia is not None:
            assert inertia <= prev_inertia * (1 + 1e-12) + 1e-12, \
                "inertia increased across a Lloyd iteration"
        prev_inertia = inertia
        new_centers = centers.copy()
        for c in range(n_clusters):
            mask = labels == c
            if mask.any():
                new_centers[c] = x[mask].mean(axis=0)
            else:
                far = int(point_d2.argmax())
                new_centers[c] = x[far]
                point_d2[far] = 0.0
        shift = np.sqrt(((new_centers - centers) ** 2).sum(axis=1)).max()
        centers = new_centers
        if shift < tol:
            break
    labels = _pairwise_d2(x, centers).argmin(axis=1)
    inertia = float(((x - centers[labels]) ** 2).sum())
    return Clustering(
        n_clusters=n_clusters,
        centroids=centers,
        assignments=labels,
        inertia=inertia,
        seed=seed,
    )


def _contingency(u, v):
    _, ui = np.unique(u, return_inverse=True)
    _, vi = np.unique(v, return_inverse=True)
    r, c = ui.max() + 1, vi.max() + 1
    table = np.zeros((r, c), dtype=np.int64)
    np.add.at(table, (ui, vi), 1)
    return table


def _entropy(counts, n):
    # log(n/a) rather than -log(a/n): the positive-ratio form makes the
    # degenerate identities below (MI of a diagonal table vs. entropy,
    # constant labelings) hold exactly in floating point, not just nearly.
    h = 0.0
    for a in counts:
        if a:
            h += (a / n) * math.log(n / a)
    return h


def _expected_mi(row_sums, col_sums, n, lg):
    """Exact hypergeometric E[MI] over all contingency cells.

    lg[k] must hold lgamma(k) for k up to n + 2; the nij sum runs over the
    support of the hypergeometric law for each (row, col) marginal pair.
    """
    emi = 0.0
    for a in row_sums:
        for b in col_sums:
            lo = max(1, a + b - n)
            hi = min(a, b)
            if hi < lo:
                continue
            nij = np.arange(lo, hi + 1)
            log_p = (
                lg[a + 1] + lg[b + 1] + lg[n - a + 1] + lg[n - b + 1]
                - lg[n + 1] - lg[nij + 1] - lg[a - nij + 1] - lg[b - nij + 1]
                - lg[n - a - b + nij + 1]
            )
            factor = (nij / n) * np.log(n * nij / (a * b))
            emi += float((factor * np.exp(log_p)).sum())
    return emi


def adjusted_mutual_information(u, v, normalizer="mean"):
    """AMI with exact expected MI, natural log.

    normalizer picks the entropy combination in the denominator: "mean"
    (arithmetic) or "max". A zero denominator returns 0.0, which also
    covers the constant-labeling cases.
    """
    u = np.asarray(u)
    v = np.asarray(v)
    if u.ndim != 1 or v.ndim != 1 or u.shape != v.shape:
        raise ValueError("labelings must be 1-D and the same length")
    n = u.shape[0]
    if n < 1:
        raise ValueError("empty labelings")
    if normalizer not in ("mean", "max"):
        raise ValueError(f"unknown normalizer: {normalizer!r}")
    table = _contingency(u, v)
    row_sums = [int(a) for a in table.sum(axis=1)]
    col_sums = [int(b) for b in table.sum(axis=0)]
    h_u = _entropy(row_sums, n)
    h_v = _entropy(col_sums, n)
    mi = 0.0
    for i, a in enumerate(row_sums):
        for j, b in enumerate(col_sums):
            nij = int(table[i, j])
            if nij:
                mi += (nij / n) * math.log(n * nij / (a * b))
    # lg[0] is never indexed (all arguments below are >= 1); keep a placeholder
    lg = np.array([0.0] + [math.lgamma(k) for k in range(1, n + 3)])
    emi = _expected_mi(row_sums, col_sums, n, lg)
    if normalizer == "mean":
        norm = (h_u + h_v) / 2.0
    else:
        norm = max(h_u, h_v)
    denom = norm - emi
    if denom == 0.0:
        return 0.0
    return (mi - emi) / denom


def sequence_ids(sequences):
    """Categorical ids for label sequences, by exact sequence equality."""
    ids = {}
    out = np.empty(len(sequences), dtype=np.int64)
    for i, seq in enumerate(sequences):
        key = tuple(seq) if isinstance(seq, (tuple, list)) else seq
        out[i] = ids.setdefault(key, len(ids))
    return out


def ami_sweep(vectors, labels_phone, labels_manner, k_grid, seed):
    """One kmeans per K (same seed), scored against both label sequences."""
    if not k_grid:
        raise ValueError("K grid must be non-empty")
    x = np.asarray(vectors, dtype=np.float64)
    if len(labels_phone) != x.shape[0] or len(labels_manner) != x.shape[0]:
        raise ValueError("label counts must match the number of vectors")
    phone_ids = sequence_ids(labels_phone)
    manner_ids = sequence_ids(labels_manner)
    rows = []
    for k in k_grid:
        clustering = kmeans(x, k, seed=seed)
        rows.append((
            int(k),
            adjusted_mutual_information(clustering.assignments, phone_ids),
            adjusted_mutual_information(clustering.assignments, manner_ids),
        ))
    return rows
