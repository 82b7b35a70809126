"""TIMIT-style phone annotation and PCM audio ingestion."""

import wave
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PhoneSegment:
    start_sample: int
    end_sample: int
    label: str

    def __post_init__(self):
        if not 0 <= self.start_sample < self.end_sample:
            raise ValueError(
                f"bad segment [{self.start_sample}, {self.end_sample}) for {self.label!r}"
            )


@dataclass(frozen=True)
class PhoneTier:
    segments: tuple
    sample_rate: int

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be > 0, got {self.sample_rate}")
        if not self.segments:
            raise ValueError("empty tier")
        for a, b in zip(self.segments, self.segments[1:]):
            if a.end_sample != b.start_sample:
                raise ValueError(f"gap at sample {a.end_sample}")

    @property
    def start_s(self):
        return self.segments[0].start_sample / self.sample_rate

    @property
    def end_s(self):
        return self.segments[-1].end_sample / self.sample_rate


@dataclass(frozen=True)
class Waveform:
    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        if len(self.samples) == 0:
            raise ValueError("empty waveform")
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be > 0, got {self.sample_rate}")


def parse_phn(text, sample_rate):
    """Parse '<start> <end> <label>' lines into a contiguous PhoneTier.

    Segments use half-open sample intervals [start, end) and must tile the
    annotated span without gaps or overlap.
    """
    segments = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) != 3:
            raise ValueError(f"line {lineno}: expected '<start> <end> <label>', got {raw!r}")
        try:
            start, end = int(fields[0]), int(fields[1])
        except ValueError:
            raise ValueError(f"line {lineno}: non-integer sample index in {raw!r}") from None
        if end <= start:
            raise ValueError(f"line {lineno}: end {end} <= start {start}")
        if segments:
            prev_end = segments[-1].end_sample
            if start > prev_end:
                raise ValueError(f"line {lineno}: gap at sample {prev_end}")
            if start < prev_end:
                raise ValueError(f"line {lineno}: overlap at sample {start}")
        segments.append(PhoneSegment(start, end, fields[2]))
    if not segments:
        raise ValueError("empty tier")
    return PhoneTier(segments=tuple(segments), sample_rate=sample_rate)


def read_phn(path, sample_rate):
    with open(path, encoding="utf-8") as f:
        try:
            return parse_phn(f.read(), sample_rate)
        except ValueError as exc:
            raise ValueError(f"{path}: {exc}") from None


def tier_boundaries(tier):
    """Interior boundary times in seconds; utterance start and end excluded."""
    return [
        seg.end_sample / tier.sample_rate for seg in tier.segments[:-1]
    ]


def read_wav(path):
    """Read a mono PCM16 RIFF/WAVE file, scaling samples by 1/32768."""
    try:
        with wave.open(str(path), "rb") as w:
            if w.getnchannels() != 1:
                raise ValueError(f"{path}: mono required, got {w.getnchannels()} channels")
            if w.getsampwidth() != 2:
                raise ValueError(f"{path}: PCM16 required, got {8 * w.getsampwidth()}-bit")
            rate = w.getframerate()
            raw = w.readframes(w.getnframes())
    except wave.Error as exc:
        raise ValueError(f"{path}: {exc}") from None
    samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    return Waveform(samples=samples, sample_rate=rate)
