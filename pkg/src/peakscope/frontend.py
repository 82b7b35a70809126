"""Log Mel-filterbank spectrograms, the CNN input representation.

Hyperparameters are defaults rather than constants: the analysis pipeline
only assumes frames arrive at a known shift, so everything here is
configurable and the defaults follow the common 25 ms / 10 ms convention.
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class MelConfig:
    sample_rate: int = 16000
    window_ms: float = 25.0
    shift_ms: float = 10.0
    n_fft: int = 512
    n_mels: int = 40
    fmin: float = 20.0
    fmax: float = 8000.0
    preemphasis: float = 0.97
    log_floor: float = 1e-10

    def __post_init__(self):
        if self.window_ms < self.shift_ms:
            raise ValueError("window_ms must be >= shift_ms")
        if self.n_fft < self.window_samples:
            raise ValueError(f"n_fft {self.n_fft} < window of {self.window_samples} samples")
        if not 0 <= self.fmin < self.fmax <= self.sample_rate / 2:
            raise ValueError(f"need 0 <= fmin < fmax <= {self.sample_rate / 2}")
        if not 0 <= self.preemphasis < 1:
            raise ValueError("preemphasis must be in [0, 1)")
        if self.log_floor <= 0:
            raise ValueError("log_floor must be > 0")

    @property
    def window_samples(self):
        return int(round(self.window_ms * self.sample_rate / 1000.0))

    @property
    def shift_samples(self):
        return int(round(self.shift_ms * self.sample_rate / 1000.0))


@dataclass(frozen=True)
class Spectrogram:
    frames: np.ndarray  # N x n_mels log energies
    config: MelConfig


def default_mel_config():
    return MelConfig()


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(config):
    """Triangular mel filters (HTK scale) over FFT bins, area-normalized.

    Returns (weights, centers_hz): weights is n_mels x (n_fft//2 + 1) and
    each row is scaled by 2 / (f_hi - f_lo) so the triangle has unit area
    in Hz.
    """
    edges_mel = np.linspace(
        hz_to_mel(config.fmin), hz_to_mel(config.fmax), config.n_mels + 2
    )
    edges_hz = mel_to_hz(edges_mel)
    bin_hz = np.arange(config.n_fft // 2 + 1) * config.sample_rate / config.n_fft
    weights = np.zeros((config.n_mels, len(bin_hz)))
    for m in range(config.n_mels):
        lo, mid, hi = edges_hz[m], edges_hz[m + 1], edges_hz[m + 2]
        up = (bin_hz - lo) / (mid - lo)
        down = (hi - bin_hz) / (hi - mid)
        tri = np.maximum(0.0, np.minimum(up, down))
        weights[m] = tri * (2.0 / (hi - lo))
    return weights, edges_hz[1:-1]


def melspec(waveform, config=None):
    """Compute a log mel spectrogram.

    Pipeline: preemphasis -> Hamming window -> |FFT|^2 -> mel filterbank ->
    floor -> natural log. Frame count is 1 + floor((len - window) / shift).
    """
    config = config or default_mel_config()
    if waveform.sample_rate != config.sample_rate:
        raise ValueError(
            f"waveform rate {waveform.sample_rate} != config rate {config.sample_rate}"
        )
    x = np.asarray(waveform.samples, dtype=np.float64)
    win, shift = config.window_samples, config.shift_samples
    if len(x) < win:
        raise ValueError(f"waveform of {len(x)} samples shorter than one {win}-sample window")
    if config.preemphasis > 0:
        x = np.concatenate([x[:1], x[1:] - config.preemphasis * x[:-1]])
    n_frames = 1 + (len(x) - win) // shift
    idx = np.arange(win)[None, :] + shift * np.arange(n_frames)[:, None]
    frames = x[idx] * np.hamming(win)
    power = np.abs(np.fft.rfft(frames, n=config.n_fft, axis=1)) ** 2
    weights, _ = mel_filterbank(config)
    mel = power @ weights.T
    return Spectrogram(frames=np.log(np.maximum(mel, config.log_floor)), config=config)
