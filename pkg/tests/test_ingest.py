import wave

import numpy as np
import pytest

from peakscope.ingest import (
    PhoneSegment,
    PhoneTier,
    parse_phn,
    read_phn,
    read_wav,
    tier_boundaries,
)

PHN = """\
0 2040 h#
2040 4560 sh
4560 7200 iy
7200 9800 h#
"""


def test_parse_phn_happy_path():
    tier = parse_phn(PHN, 16000)
    assert len(tier.segments) == 4
    assert tier.segments[1] == PhoneSegment(2040, 4560, "sh")
    assert tier.sample_rate == 16000
    assert tier.start_s == 0.0
    assert tier.end_s == 9800 / 16000


def test_boundary_count_is_segments_minus_one():
    tier = parse_phn(PHN, 16000)
    b = tier_boundaries(tier)
    assert len(b) == len(tier.segments) - 1
    assert b == [2040 / 16000, 4560 / 16000, 7200 / 16000]


def test_single_segment_has_no_boundaries():
    tier = parse_phn("0 100 sil\n", 16000)
    assert tier_boundaries(tier) == []


def test_parse_phn_tolerates_blank_lines_and_whitespace():
    tier = parse_phn("\n0 100 aa\n\n100 300 b  \n", 16000)
    assert [s.label for s in tier.segments] == ["aa", "b"]


def test_parse_phn_field_count():
    with pytest.raises(ValueError, match=r"line 1: expected '<start> <end> <label>'"):
        parse_phn("0 100\n", 16000)
    with pytest.raises(ValueError, match="line 2"):
        parse_phn("0 100 aa\n100 200 b c\n", 16000)


def test_parse_phn_non_integer():
    with pytest.raises(ValueError, match="line 1: non-integer sample index"):
        parse_phn("0 1.5 aa\n", 16000)


def test_parse_phn_end_before_start():
    with pytest.raises(ValueError, match="line 1: end 0 <= start 0"):
        parse_phn("0 0 aa\n", 16000)


def test_parse_phn_gap_and_overlap():
    with pytest.raises(ValueError, match="line 2: gap at sample 100"):
        parse_phn("0 100 aa\n150 200 b\n", 16000)
    with pytest.raises(ValueError, match="line 2: overlap at sample 50"):
        parse_phn("0 100 aa\n50 200 b\n", 16000)


def test_parse_phn_empty():
    with pytest.raises(ValueError, match="empty tier"):
        parse_phn("", 16000)
    with pytest.raises(ValueError, match="empty tier"):
        parse_phn("\n\n", 16000)


def test_read_phn_prefixes_path(tmp_path):
    p = tmp_path / "u.phn"
    p.write_text("0 100\n")
    with pytest.raises(ValueError, match=r"u\.phn: line 1"):
        read_phn(p, 16000)
    p.write_text(PHN)
    assert len(read_phn(p, 16000).segments) == 4


def test_segment_validation():
    with pytest.raises(ValueError):
        PhoneSegment(-1, 10, "aa")
    with pytest.raises(ValueError):
        PhoneSegment(10, 10, "aa")


def test_tier_validation():
    seg = PhoneSegment(0, 10, "aa")
    with pytest.raises(ValueError, match="empty tier"):
        PhoneTier((), 16000)
    with pytest.raises(ValueError, match="gap at sample 10"):
        PhoneTier((seg, PhoneSegment(12, 20, "b")), 16000)
    with pytest.raises(ValueError, match="sample_rate must be > 0"):
        PhoneTier((seg,), 0)


def _write_wav(path, samples, channels=1, width=2, rate=16000):
    with wave.open(str(path), "wb") as w:
        w.setnchannels(channels)
        w.setsampwidth(width)
        w.setframerate(rate)
        w.writeframes(samples)


def test_read_wav_scaling(tmp_path):
    p = tmp_path / "t.wav"
    pcm = np.array([0, 16384, -16384, 32767, -32768], dtype=np.int16)
    _write_wav(p, pcm.tobytes())
    wf = read_wav(p)
    assert wf.sample_rate == 16000
    assert np.allclose(
        wf.samples, [0.0, 0.5, -0.5, 32767 / 32768.0, -1.0], atol=0, rtol=0
    )
    assert wf.samples.dtype == np.float64


def test_read_wav_rejects_stereo_and_8bit(tmp_path):
    p = tmp_path / "s.wav"
    _write_wav(p, np.zeros(8, dtype=np.int16).tobytes(), channels=2)
    with pytest.raises(ValueError, match="mono required, got 2 channels"):
        read_wav(p)
    _write_wav(p, b"\x00" * 8, width=1)
    with pytest.raises(ValueError, match="PCM16 required, got 8-bit"):
        read_wav(p)


def test_read_wav_rejects_garbage(tmp_path):
    p = tmp_path / "g.wav"
    p.write_bytes(b"not a riff file at all")
    with pytest.raises(ValueError):
        read_wav(p)
