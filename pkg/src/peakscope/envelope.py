"""Activation-envelope peak detection.

The envelope e[n] is the per-frame L2 norm across all channels of an
activation map. Convolving it with a derivative-of-Gaussian kernel gives a
smoothed slope d[n]; envelope peaks are the positive-to-negative zero
crossings of d[n], kept when the rising-edge maximum slope minus the
falling-edge minimum slope exceeds a sharpness threshold tau.
"""

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Envelope:
    values: np.ndarray
    frame_shift_ms: float = 10.0
    frame_offset_ms: float = 12.5

    def __post_init__(self):
        if self.values.ndim != 1:
            raise ValueError("envelope must be 1-D")


@dataclass(frozen=True)
class DoGKernel:
    sigma: float
    radius: int
    taps: np.ndarray  # indices -radius..radius
    normalization: str = "slope_unit"


@dataclass(frozen=True)
class Peak:
    frame: int
    time_s: float
    sharpness: float


@dataclass(frozen=True)
class PeakSet:
    utterance_id: str
    peaks: tuple
    sigma: float = 0.0
    tau: float = 0.0

    def __post_init__(self):
        frames = [p.frame for p in self.peaks]
        if any(b <= a for a, b in zip(frames, frames[1:])):
            raise ValueError("peak frames must be strictly increasing")

    def frames(self):
        return [p.frame for p in self.peaks]

    def times(self):
        return [p.time_s for p in self.peaks]


def compute_envelope(amap):
    """L2 norm across channels: e[n] = sqrt(sum_f A[n,f]^2)."""
    values = np.sqrt(np.sum(np.asarray(amap.values, dtype=np.float64) ** 2, axis=1))
    return Envelope(
        values=values,
        frame_shift_ms=amap.frame_shift_ms,
        frame_offset_ms=amap.frame_offset_ms,
    )


def make_dog_kernel(sigma, normalization="slope_unit"):
    """Derivative-of-Gaussian taps h[k] = -k exp(-k^2 / 2 sigma^2), k in [-R, R].

    R = max(1, ceil(4 sigma)). With slope_unit normalization the taps are
    divided by sum_k k^2 exp(-k^2 / 2 sigma^2), so filtering a unit-slope
    ramp yields 1.0 per frame (to float rounding) and tau is measured in
    envelope units per frame regardless of sigma.
    """
    if sigma <= 0:
        raise ValueError("sigma must be > 0")
    if normalization not in ("slope_unit", "raw"):
        raise ValueError(f"unknown normalization {normalization!r}")
    radius = max(1, math.ceil(4.0 * sigma))
    k = np.arange(-radius, radius + 1, dtype=np.float64)
    g = np.exp(-(k**2) / (2.0 * sigma**2))
    taps = -k * g
    if normalization == "slope_unit":
        taps = taps / np.sum(k**2 * g)
    return DoGKernel(sigma=sigma, radius=radius, taps=taps, normalization=normalization)


def _reflect_pad(x, pad):
    """Reflect padding without edge repetition ([1,2,3] -> ...3,2 | 1,2,3 | 2,1...)."""
    n = len(x)
    if n == 1:
        return np.full(n + 2 * pad, x[0])
    idx = np.abs(np.arange(-pad, n + pad))
    period = 2 * n - 2
    idx %= period
    idx = np.minimum(idx, period - idx)
    return x[idx]


def dog_filter(envelope, kernel):
    """Same-length smoothed slope d[n] = sum_k h[k] e[n-k] with reflect padding.

    The input is first centered on e[0]; since the kernel sums to zero this
    is a mathematical no-op, but it removes float residue so constant
    envelopes give an exactly zero d and e and e + c produce bit-identical
    output up to the rounding already present in e + c.
    """
    e = np.asarray(envelope.values if isinstance(envelope, Envelope) else envelope,
                   dtype=np.float64)
    if len(e) < 1:
        raise ValueError("empty envelope")
    padded = _reflect_pad(e - e[0], kernel.radius)
    return np.convolve(padded, kernel.taps, mode="valid")


def pick_peaks(d, tau, frame_shift_ms=10.0, frame_offset_ms=12.5,
               utterance_id="", sigma=0.0):
    """Pick positive-to-negative zero crossings of d, filtered by sharpness.

    A crossing is any n with d[n] > 0 and d[n+1] <= 0, assigned to the
    frame nearer the interpolated zero (n+1 when d[n] >= |d[n+1]|, else n).
    Sharpness is max(d) over the maximal d > 0 run ending at n minus min(d)
    over the maximal d < 0 run starting at n+1 (0 if that run is empty);
    peaks are retained iff sharpness > tau.
    """
    if tau < 0:
        raise ValueError("tau must be >= 0")
    d = np.asarray(d, dtype=np.float64)
    n_frames = len(d)
    peaks = []
    crossings = np.nonzero((d[:-1] > 0) & (d[1:] <= 0))[0]
    for n in crossings:
        frame = n + 1 if d[n] >= -d[n + 1] else n
        m = n
        rise = d[n]
        while m > 0 and d[m - 1] > 0:
            m -= 1
            rise = max(rise, d[m])
        j = n + 1
        fall = 0.0
        while j < n_frames and d[j] < 0:
            fall = min(fall, d[j])
            j += 1
        sharpness = rise - fall
        if sharpness > tau:
            time_s = (frame * frame_shift_ms + frame_offset_ms) / 1000.0
            peaks.append(Peak(frame=int(frame), time_s=time_s, sharpness=float(sharpness)))
    return PeakSet(utterance_id=utterance_id, peaks=tuple(peaks), sigma=sigma, tau=tau)


def detect(amap, sigma, tau, utterance_id=""):
    """Full detection: envelope -> DoG filter -> sharpness-thresholded peaks."""
    env = compute_envelope(amap)
    kernel = make_dog_kernel(sigma)
    d = dog_filter(env, kernel)
    return pick_peaks(
        d,
        tau,
        frame_shift_ms=env.frame_shift_ms,
        frame_offset_ms=env.frame_offset_ms,
        utterance_id=utterance_id,
        sigma=sigma,
    )
