"""Forward-only evaluation of a convolutional stack over spectrograms.

The architecture is data (a JSON layer list plus one weight tensor per
layer name), not code. Activations are tapped at a named layer; batchnorm
is consumed in folded inference form (per-channel scale and shift), which
also serves as the carrier for conv biases, so conv layers themselves are
bias-free.

Weight shapes: conv2d (out_ch, in_ch, k_t, k_f); conv1d (out_ch, in_ch, k_t);
batchnorm (2, channels) with scale in row 0 and shift in row 1.
"""

import json
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .frontend import Spectrogram

KINDS = ("conv2d", "conv1d", "relu", "maxpool_time", "batchnorm")


@dataclass(frozen=True)
class LayerSpec:
    name: str
    kind: str
    in_channels: int = 0
    out_channels: int = 0
    kernel: tuple = ()        # conv: (k_t, k_f) or (k_t,)
    stride: tuple = ()        # conv: (s_t, s_f) or (s_t,)
    pad: tuple = ()           # conv: zero padding per axis
    width: int = 0            # maxpool_time
    pool_stride: int = 0      # maxpool_time
    channels: int = 0         # batchnorm

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"layer {self.name!r}: unknown kind {self.kind!r}")
        if self.kind in ("conv2d", "conv1d"):
            ndim = 2 if self.kind == "conv2d" else 1
            if len(self.kernel) != ndim or len(self.stride) != ndim or len(self.pad) != ndim:
                raise ValueError(f"layer {self.name!r}: kernel/stride/pad must have {ndim} dims")
            if any(k < 1 for k in self.kernel) or any(s < 1 for s in self.stride):
                raise ValueError(f"layer {self.name!r}: kernel and stride dims must be >= 1")
            if any(p < 0 for p in self.pad):
                raise ValueError(f"layer {self.name!r}: padding must be >= 0")
            if self.in_channels < 1 or self.out_channels < 1:
                raise ValueError(f"layer {self.name!r}: channel counts must be >= 1")
        elif self.kind == "maxpool_time":
            if self.width < 1 or self.pool_stride < 1:
                raise ValueError(f"layer {self.name!r}: width and stride must be >= 1")
        elif self.kind == "batchnorm":
            if self.channels < 1:
                raise ValueError(f"layer {self.name!r}: channels must be >= 1")


@dataclass(frozen=True)
class ActivationMap:
    values: np.ndarray  # N x F
    frame_shift_ms: float
    frame_offset_ms: float
    tap_layer: str = ""

    def __post_init__(self):
        if self.values.ndim != 2 or self.values.shape[0] < 1 or self.values.shape[1] < 1:
            raise ValueError(f"activation map must be N x F with N,F >= 1, got {self.values.shape}")

    @property
    def n_frames(self):
        return self.values.shape[0]

    @property
    def n_channels(self):
        return self.values.shape[1]


class ConvStack:
    """Ordered layers plus their weights, shape-checked at construction."""

    def __init__(self, layers, weights, input_channels=1):
        names = [l.name for l in layers]
        if len(set(names)) != len(names):
            raise ValueError("duplicate layer names")
        ch = input_channels
        for layer in layers:
            if layer.kind in ("conv2d", "conv1d"):
                if layer.in_channels != ch:
                    raise ValueError(
                        f"layer {layer.name!r}: expects {layer.in_channels} input channels, "
                        f"previous layer provides {ch}"
                    )
                want = (layer.out_channels, layer.in_channels, *layer.kernel)
                got = weights.get(layer.name)
                if got is None:
                    raise ValueError(f"layer {layer.name!r}: missing weights")
                if tuple(got.shape) != want:
                    raise ValueError(
                        f"layer {layer.name!r}: weight shape {tuple(got.shape)} != declared {want}"
                    )
                ch = layer.out_channels
            elif layer.kind == "batchnorm":
                if layer.channels != ch:
                    raise ValueError(
                        f"layer {layer.name!r}: batchnorm over {layer.channels} channels, "
                        f"previous layer provides {ch}"
                    )
                got = weights.get(layer.name)
                if got is None:
                    raise ValueError(f"layer {layer.name!r}: missing weights")
                if tuple(got.shape) != (2, ch):
                    raise ValueError(
                        f"layer {layer.name!r}: weight shape {tuple(got.shape)} != (2, {ch})"
                    )
        self.layers = list(layers)
        self.weights = dict(weights)
        self.input_channels = input_channels

    def layer_index(self, name):
        for i, layer in enumerate(self.layers):
            if layer.name == name:
                return i
        raise ValueError(f"tap_layer {name!r} not in stack")


def _conv_out_len(n, k, s, p):
    out = (n + 2 * p - k) // s + 1
    if out < 1:
        raise ValueError(f"conv output empty: input {n}, kernel {k}, stride {s}, pad {p}")
    return out


def _apply_layer(layer, x, w):
    """Apply one layer to x of shape (channels, time, freq)."""
    if layer.kind == "relu":
        return np.maximum(x, 0.0)
    if layer.kind == "batchnorm":
        return x * w[0][:, None, None] + w[1][:, None, None]
    if layer.kind == "maxpool_time":
        if x.shape[1] < layer.width:
            raise ValueError(f"layer {layer.name!r}: {x.shape[1]} frames < pool width {layer.width}")
        win = sliding_window_view(x, layer.width, axis=1)[:, :: layer.pool_stride]
        return win.max(axis=-1)
    if layer.kind == "conv2d":
        (kt, kf), (st, sf), (pt, pf) = layer.kernel, layer.stride, layer.pad
        _conv_out_len(x.shape[1], kt, st, pt)
        _conv_out_len(x.shape[2], kf, sf, pf)
        xp = np.pad(x, ((0, 0), (pt, pt), (pf, pf)))
        view = sliding_window_view(xp, (kt, kf), axis=(1, 2))[:, ::st, ::sf]
        return np.einsum("ctfkl,ockl->otf", view, w, optimize=True)
    if layer.kind == "conv1d":
        if x.shape[2] != 1:
            raise ValueError(
                f"layer {layer.name!r}: conv1d needs a collapsed frequency axis, got {x.shape[2]}"
            )
        (kt,), (st,), (pt,) = layer.kernel, layer.stride, layer.pad
        _conv_out_len(x.shape[1], kt, st, pt)
        xp = np.pad(x[:, :, 0], ((0, 0), (pt, pt)))
        view = sliding_window_view(xp, kt, axis=1)[:, ::st]
        return np.einsum("ctk,ock->ot", view, w, optimize=True)[:, :, None]
    raise ValueError(f"unknown layer kind {layer.kind!r}")


def _time_geometry(layer):
    """(kernel, stride, pad) acting on the time axis, or None if shape-preserving."""
    if layer.kind in ("conv2d", "conv1d"):
        return layer.kernel[0], layer.stride[0], layer.pad[0]
    if layer.kind == "maxpool_time":
        return layer.width, layer.pool_stride, 0
    return None


def forward(stack, spectrogram, tap_layer):
    """Run the stack and return activations immediately after ``tap_layer``.

    The returned map's frame metadata reflects cumulative time stride and
    kernel/padding offsets up to the tap; a 3-axis tapped output has its
    (channel, freq) axes flattened row-major into F.
    """
    tap = stack.layer_index(tap_layer)
    if isinstance(spectrogram, Spectrogram):
        frames = spectrogram.frames
        delta = spectrogram.config.shift_ms
        t0 = spectrogram.config.window_ms / 2.0
    else:
        frames, delta, t0 = spectrogram
    x = np.asarray(frames, dtype=np.float64)[None, :, :]
    if x.shape[0] != stack.input_channels:
        raise ValueError("stack expects a single-channel spectrogram input")
    for layer in stack.layers[: tap + 1]:
        x = _apply_layer(layer, x, stack.weights.get(layer.name))
        geo = _time_geometry(layer)
        if geo is not None:
            k, s, p = geo
            t0 += ((k - 1) / 2.0 - p) * delta
            delta *= s
    tapped = stack.layers[tap]
    c, t, f = x.shape
    values = np.transpose(x, (1, 0, 2)).reshape(t, c * f)
    if tapped.kind == "relu":
        assert values.min() >= 0.0, "post-relu tap produced negative values"
    return ActivationMap(
        values=values, frame_shift_ms=delta, frame_offset_ms=t0, tap_layer=tap_layer
    )


def receptive_field(stack, tap_layer):
    """(span, stride) in input frames of one output frame at ``tap_layer``."""
    tap = stack.layer_index(tap_layer)
    span, stride = 1, 1
    for layer in stack.layers[: tap + 1]:
        geo = _time_geometry(layer)
        if geo is not None:
            k, s, _ = geo
            span += (k - 1) * stride
            stride *= s
    return span, stride


def _layer_from_dict(rec):
    kind = rec.get("kind")
    common = dict(name=rec.get("name", ""), kind=kind)
    if kind in ("conv2d", "conv1d"):
        return LayerSpec(
            **common,
            in_channels=int(rec["in_channels"]),
            out_channels=int(rec["out_channels"]),
            kernel=tuple(rec["kernel"]),
            stride=tuple(rec.get("stride", [1] * len(rec["kernel"]))),
            pad=tuple(rec.get("pad", [0] * len(rec["kernel"]))),
        )
    if kind == "maxpool_time":
        return LayerSpec(**common, width=int(rec["width"]), pool_stride=int(rec["stride"]))
    if kind == "batchnorm":
        return LayerSpec(**common, channels=int(rec["channels"]))
    return LayerSpec(**common)


def load_stack_config(path):
    with open(path, encoding="utf-8") as f:
        doc = json.load(f)
    if not isinstance(doc, list):
        raise ValueError(f"{path}: stack config must be a JSON list of layers")
    try:
        return [_layer_from_dict(rec) for rec in doc]
    except KeyError as exc:
        raise ValueError(f"{path}: layer missing required field {exc}") from None


def load_stack(config_path, weights_dir):
    """Load a stack from its JSON config plus one weight NPY per layer.

    Weight files stay within the 3-axis tensor interchange: conv1d and
    batchnorm tensors are stored as-is, while a conv2d kernel's trailing
    (k_t, k_f) axes are flattened row-major into one axis on disk and
    restored here from the kernel declared in the config.
    """
    from pathlib import Path

    from .tensorio import read_tensor

    layers = load_stack_config(config_path)
    weights = {}
    for layer in layers:
        if layer.kind not in ("conv2d", "conv1d", "batchnorm"):
            continue
        w = read_tensor(Path(weights_dir) / f"{layer.name}.npy")
        if layer.kind == "conv2d":
            kt, kf = layer.kernel
            want = (layer.out_channels, layer.in_channels, kt * kf)
            if w.shape != want:
                raise ValueError(
                    f"layer {layer.name!r}: weight file shape {w.shape} != {want} "
                    f"(conv2d kernels are stored with (k_t, k_f) flattened)"
                )
            w = w.reshape(layer.out_channels, layer.in_channels, kt, kf)
        weights[layer.name] = w
    return ConvStack(layers, weights)


def save_weights(stack, weights_dir):
    """Write one NPY per weighted layer in the on-disk convention above."""
    from pathlib import Path

    from .tensorio import write_tensor

    out_dir = Path(weights_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for layer in stack.layers:
        if layer.kind not in ("conv2d", "conv1d", "batchnorm"):
            continue
        w = stack.weights[layer.name]
        if layer.kind == "conv2d":
            w = w.reshape(layer.out_channels, layer.in_channels, -1)
        write_tensor(out_dir / f"{layer.name}.npy", np.ascontiguousarray(w))
