"""Synthetic activation corpora with known transition frames.

Each utterance is piecewise-constant over segments. Every segment carries
the sparse non-negative channel pattern of its planted class (one pattern
per class per corpus, unit L2 norm), a localized additive bump marks each
segment transition, and folded Gaussian noise sits on top. Ground truth is
a phone-style tier whose interior boundaries sit at the transition frames.
"""

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .convnet import ActivationMap
from .ingest import PhoneSegment, PhoneTier
from .tensorio import (
    DEFAULT_FRAME_OFFSET_MS,
    DEFAULT_FRAME_SHIFT_MS,
    CorpusManifest,
    ManifestEntry,
    write_manifest,
    write_tensor,
)

SAMPLE_RATE = 16000
MIN_SEGMENT_FRAMES = 3


@dataclass(frozen=True)
class SynthConfig:
    n_utterances: int = 50
    frame_range: tuple = (200, 400)
    n_channels: int = 64
    segment_range: tuple = (6, 10)
    sparsity: int = 8
    transition_bump: float = 1.0
    noise_sigma: float = 0.0
    n_planted_classes: int = 4
    seed: int = 0

    def __post_init__(self):
        lo, hi = self.frame_range
        slo, shi = self.segment_range
        if self.n_utterances < 1:
            raise ValueError("n_utterances must be >= 1")
        if not 1 <= lo <= hi:
            raise ValueError("frame range must be non-empty and >= 1")
        if not 1 <= slo <= shi:
            raise ValueError("segment range must be non-empty and >= 1")
        if lo < MIN_SEGMENT_FRAMES * shi:
            raise ValueError(
                f"frame range too small: need >= {MIN_SEGMENT_FRAMES} frames per segment"
            )
        if self.n_channels < 1:
            raise ValueError("n_channels must be >= 1")
        if not 1 <= self.sparsity <= self.n_channels:
            raise ValueError("sparsity must be in [1, n_channels]")
        if self.transition_bump < 0:
            raise ValueError("transition_bump must be >= 0")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if self.n_planted_classes < 1:
            raise ValueError("n_planted_classes must be >= 1")


@dataclass(frozen=True)
class SynthCorpus:
    maps: dict
    tiers: dict
    transitions: dict = field(default_factory=dict)  # id -> ((left, right), ...)

    def ids(self):
        return list(self.maps)


def _class_patterns(config, rng):
    """One unit-norm sparse non-negative pattern per planted class."""
    patterns = np.zeros((config.n_planted_classes, config.n_channels))
    for c in range(config.n_planted_classes):
        active = rng.choice(config.n_channels, size=config.sparsity, replace=False)
        values = rng.uniform(0.5, 1.5, size=config.sparsity)
        patterns[c, active] = values
        patterns[c] /= np.sqrt((patterns[c] ** 2).sum())
    return patterns


def _frame_time_s(frame, shift_ms, offset_ms):
    return (frame * shift_ms + offset_ms) / 1000.0


def _utterance(config, patterns, rng):
    n_frames = int(rng.integers(config.frame_range[0], config.frame_range[1] + 1))
    n_segments = int(rng.integers(config.segment_range[0], config.segment_range[1] + 1))
    spare = n_frames - MIN_SEGMENT_FRAMES * n_segments
    extras = rng.multinomial(spare, np.full(n_segments, 1.0 / n_segments))
    lengths = MIN_SEGMENT_FRAMES + extras
    classes = rng.integers(0, config.n_planted_classes, size=n_segments)

    values = np.zeros((n_frames, config.n_channels))
    start = 0
    starts = []
    for length, cls in zip(lengths, classes):
        values[start:start + length] = patterns[cls]
        starts.append(start)
        start += length
    transition_frames = starts[1:]
    for k, t in enumerate(transition_frames):
        left, right = classes[k], classes[k + 1]
        values[t] += config.transition_bump * 0.5 * (patterns[left] + patterns[right])
    if config.noise_sigma > 0:
        values += np.abs(rng.normal(0.0, config.noise_sigma, size=values.shape))

    shift, offset = DEFAULT_FRAME_SHIFT_MS, DEFAULT_FRAME_OFFSET_MS
    boundaries = [
        int(round(_frame_time_s(t, shift, offset) * SAMPLE_RATE))
        for t in transition_frames
    ]
    end_sample = int(round(_frame_time_s(n_frames, shift, offset) * SAMPLE_RATE))
    edges = [0] + boundaries + [end_sample]
    segments = tuple(
        PhoneSegment(edges[i], edges[i + 1], f"c{classes[i]}")
        for i in range(n_segments)
    )
    tier = PhoneTier(segments=segments, sample_rate=SAMPLE_RATE)
    amap = ActivationMap(
        values=values, frame_shift_ms=shift, frame_offset_ms=offset, tap_layer="synth"
    )
    pairs = tuple(
        (f"c{classes[k]}", f"c{classes[k + 1]}") for k in range(n_segments - 1)
    )
    return amap, tier, pairs


def generate(config):
    """Deterministic corpus: maps, tiers, and per-transition class pairs."""
    corpus_rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(config.seed)))
    patterns = _class_patterns(config, corpus_rng)
    maps, tiers, transitions = {}, {}, {}
    for u in range(config.n_utterances):
        rng = np.random.Generator(
            np.random.Philox(np.random.SeedSequence(config.seed, spawn_key=(u,)))
        )
        utt_id = f"utt{u:04d}"
        amap, tier, pairs = _utterance(config, patterns, rng)
        maps[utt_id] = amap
        tiers[utt_id] = tier
        transitions[utt_id] = pairs
    return SynthCorpus(maps=maps, tiers=tiers, transitions=transitions)


def materialize(corpus, out_dir):
    """Write a corpus directory: NPY + .PHN + manifest + transitions CSV."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for utt_id in corpus.ids():
        amap = corpus.maps[utt_id]
        tier = corpus.tiers[utt_id]
        write_tensor(out_dir / f"{utt_id}.npy", amap.values)
        lines = [
            f"{seg.start_sample} {seg.end_sample} {seg.label}"
            for seg in tier.segments
        ]
        (out_dir / f"{utt_id}.phn").write_text("\n".join(lines) + "\n")
        entries.append(ManifestEntry(
            utterance_id=utt_id,
            activations=f"{utt_id}.npy",
            phn=f"{utt_id}.phn",
        ))
    first = corpus.maps[corpus.ids()[0]]
    manifest = CorpusManifest(
        entries=tuple(entries),
        frame_shift_ms=first.frame_shift_ms,
        frame_offset_ms=first.frame_offset_ms,
        root=out_dir,
    )
    write_manifest(out_dir / "manifest.json", manifest)
    with open(out_dir / "transitions.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["utterance_id", "index", "left", "right"])
        for utt_id in corpus.ids():
            for k, (left, right) in enumerate(corpus.transitions[utt_id]):
                writer.writerow([utt_id, k, left, right])
    return manifest
