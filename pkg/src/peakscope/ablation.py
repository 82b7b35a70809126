"""Frame-ablation masks: keep only selected frames of an activation map.

The peak strategy keeps the detected peak frames; uniform, random, and
midpoint are count-matched control strategies for comparison.
"""

from dataclasses import dataclass

import numpy as np

STRATEGIES = ("peaks", "uniform", "random", "midpoint")


@dataclass(frozen=True)
class AblationMask:
    utterance_id: str
    kept_frames: tuple
    n_frames: int
    strategy: str
    n_peaks: int

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy: {self.strategy!r}")
        if self.n_frames < 1:
            raise ValueError("n_frames must be >= 1")
        frames = self.kept_frames
        if any(b <= a for a, b in zip(frames, frames[1:])):
            raise ValueError("kept_frames must be strictly increasing")
        if frames and (frames[0] < 0 or frames[-1] >= self.n_frames):
            raise ValueError("kept_frames out of range")

    @property
    def n_kept(self):
        return len(self.kept_frames)


def build_mask(peakset, n_frames, strategy="peaks", seed=None):
    """Build a frame-keep mask for one utterance.

    peaks     keep exactly the peak frames
    uniform   same count, evenly spaced: floor((2i+1)*N / (2*P))
    random    same count, sampled without replacement (seeded)
    midpoint  P-1 frames at integer midpoints of consecutive peaks
    """
    if n_frames < 1:
        raise ValueError("n_frames must be >= 1")
    frames = peakset.frames()
    if frames and frames[-1] >= n_frames:
        raise ValueError("peak frame out of range for n_frames")
    n_peaks = len(frames)
    if strategy == "peaks":
        kept = tuple(frames)
    elif strategy == "uniform":
        kept = tuple(
            (2 * i + 1) * n_frames // (2 * n_peaks) for i in range(n_peaks)
        ) if n_peaks else ()
    elif strategy == "random":
        if seed is None:
            raise ValueError("random strategy requires a seed")
        if n_peaks > n_frames:
            raise ValueError("more peaks than frames")
        rng = np.random.Generator(np.random.Philox(seed))
        kept = tuple(sorted(rng.choice(n_frames, size=n_peaks, replace=False).tolist()))
    elif strategy == "midpoint":
        kept = tuple((a + b) // 2 for a, b in zip(frames, frames[1:]))
    else:
        raise ValueError(f"unknown strategy: {strategy!r}")
    return AblationMask(
        utterance_id=peakset.utterance_id,
        kept_frames=kept,
        n_frames=n_frames,
        strategy=strategy,
        n_peaks=n_peaks,
    )


def apply_mask(amap, mask):
    """Zero every frame of the activation map not kept by the mask."""
    if amap.n_frames != mask.n_frames:
        raise ValueError("mask frame count does not match activation map")
    values = np.zeros_like(amap.values)
    kept = list(mask.kept_frames)
    if kept:
        values[kept] = amap.values[kept]
    return type(amap)(
        values=values,
        frame_shift_ms=amap.frame_shift_ms,
        frame_offset_ms=amap.frame_offset_ms,
        tap_layer=amap.tap_layer,
    )


def ablation_stats(masks):
    """Corpus-level kept fraction and frames-per-peak over a list of masks."""
    if not masks:
        raise ValueError("no masks given")
    total_kept = sum(m.n_kept for m in masks)
    total_frames = sum(m.n_frames for m in masks)
    total_peaks = sum(m.n_peaks for m in masks)
    return {
        "n_utterances": len(masks),
        "total_frames": total_frames,
        "total_kept": total_kept,
        "total_peaks": total_peaks,
        "kept_fraction": total_kept / total_frames,
        "frames_per_peak": total_frames / total_peaks if total_peaks else float("inf"),
    }
