"""Figure emission as deterministic, self-contained SVG.

Three figure kinds cover the pipeline: an envelope trace with peak markers,
a 2-D embedding scatter colored by class, and AMI-versus-K lines. A fixed
SVG hash salt plus stripped date metadata makes re-renders byte-identical.
"""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

PLOT_KINDS = ("envelope", "scatter", "ami")

_RC = {
    "svg.hashsalt": "peakscope",
    "svg.fonttype": "none",
    "figure.figsize": (7.0, 3.5),
    "figure.dpi": 100,
}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def plot_envelope(envelope, peakset, path):
    """Envelope trace over time with one marker per detected peak."""
    values = envelope.values
    if len(values) == 0:
        raise ValueError("empty envelope")
    times = [
        (n * envelope.frame_shift_ms + envelope.frame_offset_ms) / 1000.0
        for n in range(len(values))
    ]
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        line, = ax.plot(times, values, color="tab:blue", lw=1.2, label="envelope")
        line.set_gid("envelope-line")
        peak_times = peakset.times()
        peak_values = [values[p.frame] for p in peakset.peaks]
        markers, = ax.plot(
            peak_times, peak_values, linestyle="none", marker="v",
            color="tab:red", markersize=7, label="peaks",
        )
        markers.set_gid("peak-markers")
        ax.set_xlabel("time (s)")
        ax.set_ylabel("e[n]")
        if peakset.utterance_id:
            ax.set_title(peakset.utterance_id)
        ax.legend(loc="upper right")
        _save(fig, path)


def plot_scatter(coords, labels, path):
    """2-D embedding scatter, one color and legend entry per class."""
    if len(coords) == 0:
        raise ValueError("empty scatter data")
    if len(labels) != len(coords):
        raise ValueError("labels must match coordinates")
    classes = sorted(set(labels))
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(5.0, 5.0))
        for cls in classes:
            xs = [c[0] for c, l in zip(coords, labels) if l == cls]
            ys = [c[1] for c, l in zip(coords, labels) if l == cls]
            sc = ax.scatter(xs, ys, s=12, label=cls)
            sc.set_gid(f"class-{cls}")
        ax.set_xlabel("PC1")
        ax.set_ylabel("PC2")
        ax.legend(loc="best", fontsize=8)
        _save(fig, path)


def plot_ami(rows, path):
    """AMI against K for the phone and manner label families."""
    if len(rows) == 0:
        raise ValueError("empty AMI sweep")
    ks = [r[0] for r in rows]
    phone = [r[1] for r in rows]
    manner = [r[2] for r in rows]
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        lp, = ax.plot(ks, phone, marker="o", color="tab:blue", label="phone")
        lp.set_gid("ami-phone")
        lm, = ax.plot(ks, manner, marker="s", color="tab:orange", label="manner")
        lm.set_gid("ami-manner")
        ax.set_xlabel("K")
        ax.set_ylabel("AMI")
        ax.legend(loc="best")
        _save(fig, path)


def emit_plot(kind, data, path):
    """Dispatch one figure kind; data shape depends on the kind."""
    if kind == "envelope":
        envelope, peakset = data
        plot_envelope(envelope, peakset, path)
    elif kind == "scatter":
        coords, labels = data
        plot_scatter(coords, labels, path)
    elif kind == "ami":
        plot_ami(data, path)
    else:
        raise ValueError(f"unknown plot kind: {kind!r}")
