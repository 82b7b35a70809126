"""Command-line pipeline entry point.

One subcommand per pipeline stage, composable through corpus manifests:

    synth -> peaks -> eval / grid
                   -> ablate
                   -> labels -> pca / cluster / ami -> plot

All file outputs are written atomically (temp file + rename) and are
byte-identical across runs for identical inputs and seeds. Exit codes:
0 success, 1 validation error, 2 I/O error.
"""

import argparse
import csv
import io
import json
import os
import shutil
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import phones, plots
from .ablation import STRATEGIES, ablation_stats, apply_mask, build_mask
from .boundary_eval import (
    DEFAULT_SIGMA_GRID,
    DEFAULT_TAU_GRID,
    EvalConfig,
    evaluate_corpus,
    grid_search,
)
from .convnet import ActivationMap, forward, load_stack, receptive_field
from .envelope import compute_envelope, detect
from .frontend import MelConfig, melspec
from .ingest import read_phn, read_wav
from .synth import SynthConfig, generate, materialize
from .tensorio import (
    CorpusManifest,
    ManifestEntry,
    read_manifest,
    read_tensor,
    write_manifest,
    write_tensor,
)
from .units import ami_sweep, arity_fractions, label_corpus, pca_fit, pca_project, kmeans

PHN_SAMPLE_RATE = 16000


# ---------------------------------------------------------------- helpers

def _atomic_text(path, text):
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _atomic_tensor(path, tensor):
    tmp = path.with_name(path.name + ".tmp")
    write_tensor(tmp, tensor)
    os.replace(tmp, path)


def _atomic_plot(kind, data, path):
    tmp = path.with_name(path.name + ".tmp")
    plots.emit_plot(kind, data, tmp)
    os.replace(tmp, path)


def _csv_text(header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _json_text(obj):
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _parse_floats(text, name):
    try:
        values = tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise ValueError(f"{name} must be a comma-separated list of numbers") from None
    if not values:
        raise ValueError(f"{name} must be non-empty")
    return values


def _parse_ints(text, name):
    try:
        values = tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise ValueError(f"{name} must be a comma-separated list of integers") from None
    if not values:
        raise ValueError(f"{name} must be non-empty")
    return values


def _parse_range(text, name):
    parts = text.split(":")
    if len(parts) != 2:
        raise ValueError(f"{name} must look like LO:HI")
    try:
        lo, hi = int(parts[0]), int(parts[1])
    except ValueError:
        raise ValueError(f"{name} must look like LO:HI with integers") from None
    return lo, hi


def _effective_jobs(args):
    jobs = getattr(args, "jobs", 1)
    env = os.environ.get("PEAKSCOPE_THREADS")
    if env is not None:
        try:
            jobs = int(env)
        except ValueError:
            raise ValueError("PEAKSCOPE_THREADS must be a positive integer") from None
    if jobs < 1:
        raise ValueError("jobs must be >= 1")
    return jobs


def _map_utterances(fn, items, jobs):
    if jobs == 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _load_manifest(path):
    return read_manifest(Path(path))


def _load_maps(manifest):
    maps = {}
    for entry in manifest.entries:
        values = read_tensor(manifest.path(entry.activations))
        if values.ndim != 2:
            raise ValueError(f"{entry.utterance_id}: activations must be 2-D")
        maps[entry.utterance_id] = ActivationMap(
            values=values,
            frame_shift_ms=manifest.frame_shift_ms,
            frame_offset_ms=manifest.frame_offset_ms,
        )
    return maps


def _load_tiers(manifest, sample_rate):
    tiers = {}
    for entry in manifest.entries:
        if entry.phn is None:
            raise ValueError(f"utterance {entry.utterance_id}: manifest has no phn tier")
        tiers[entry.utterance_id] = read_phn(manifest.path(entry.phn), sample_rate)
    return tiers


def _detect_all(maps, sigma, tau, jobs):
    ids = list(maps)
    peaksets = _map_utterances(
        lambda utt_id: detect(maps[utt_id], sigma, tau, utterance_id=utt_id), ids, jobs
    )
    return dict(zip(ids, peaksets))


def _phone_mapping(spec_text):
    if spec_text == "default":
        return phones.load_default()
    if spec_text == "identity":
        return phones.identity_mapping()
    return phones.from_file(spec_text)


def _labeled(args):
    manifest = _load_manifest(args.manifest)
    maps = _load_maps(manifest)
    tiers = _load_tiers(manifest, args.sample_rate)
    peaksets = _detect_all(maps, args.sigma, args.tau, _effective_jobs(args))
    mapping = _phone_mapping(args.phone_map)
    if args.window_ms <= 0:
        raise ValueError("window must be > 0")
    return label_corpus(peaksets, maps, tiers, mapping, window_s=args.window_ms / 1000.0)


# ---------------------------------------------------------------- commands

def cmd_synth(args):
    config = SynthConfig(
        n_utterances=args.n_utterances,
        frame_range=_parse_range(args.frames, "frames"),
        n_channels=args.channels,
        segment_range=_parse_range(args.segments, "segments"),
        sparsity=args.sparsity,
        transition_bump=args.bump,
        noise_sigma=args.noise,
        n_planted_classes=args.classes,
        seed=args.seed,
    )
    corpus = generate(config)
    materialize(corpus, Path(args.out))
    print(f"wrote {config.n_utterances} utterances to {args.out}")


def cmd_melspec(args):
    config = MelConfig(
        sample_rate=args.sample_rate,
        window_ms=args.window_ms,
        shift_ms=args.shift_ms,
        n_fft=args.n_fft,
        n_mels=args.n_mels,
        fmin=args.fmin,
        fmax=args.fmax,
        preemphasis=args.preemphasis,
    )
    wav = read_wav(Path(args.wav))
    spect = melspec(wav, config)
    _atomic_tensor(Path(args.out), spect.frames)
    print(f"{args.out}: {spect.frames.shape[0]} frames x {spect.frames.shape[1]} mels")


def cmd_forward(args):
    stack = load_stack(Path(args.stack), Path(args.weights_dir))
    frames = read_tensor(Path(args.features))
    if frames.ndim != 2:
        raise ValueError("features tensor must be 2-D (frames x bins)")
    amap = forward(stack, (frames, args.shift_ms, args.offset_ms), args.tap)
    span, stride = receptive_field(stack, args.tap)
    rf_ms = (span - 1) * args.shift_ms + args.window_ms
    _atomic_tensor(Path(args.out), amap.values)
    print(
        f"{args.tap}: {amap.n_frames} frames x {amap.n_channels} channels, "
        f"shift {amap.frame_shift_ms} ms, offset {amap.frame_offset_ms} ms, "
        f"receptive field {rf_ms} ms"
    )


def cmd_envelope(args):
    manifest = _load_manifest(args.manifest)
    maps = _load_maps(manifest)
    if args.utterance not in maps:
        raise ValueError(f"utterance {args.utterance!r} not in manifest")
    env = compute_envelope(maps[args.utterance])
    _atomic_tensor(Path(args.out), env.values)
    print(f"{args.out}: {len(env.values)} frames")


def cmd_peaks(args):
    manifest = _load_manifest(args.manifest)
    maps = _load_maps(manifest)
    peaksets = _detect_all(maps, args.sigma, args.tau, _effective_jobs(args))
    rows = []
    for utt_id in maps:
        for peak in peaksets[utt_id].peaks:
            rows.append([utt_id, peak.frame, float(peak.time_s), float(peak.sharpness)])
        if args.verbose:
            print(f"{utt_id}: {len(peaksets[utt_id].peaks)} peaks")
    _atomic_text(Path(args.out), _csv_text(
        ["utterance_id", "frame", "time_s", "sharpness"], rows))
    print(f"{len(rows)} peaks across {len(maps)} utterances")


def cmd_eval(args):
    manifest = _load_manifest(args.manifest)
    maps = _load_maps(manifest)
    tiers = _load_tiers(manifest, args.sample_rate)
    peaksets = _detect_all(maps, args.sigma, args.tau, _effective_jobs(args))
    config = EvalConfig(tolerance_s=args.tolerance_ms / 1000.0)
    result = evaluate_corpus(peaksets, tiers, config)
    payload = {
        "sigma": float(args.sigma),
        "tau": float(args.tau),
        "tolerance_ms": float(args.tolerance_ms),
        "true_positives": result.true_positives,
        "n_detected": result.n_detected,
        "n_reference": result.n_reference,
        "precision": result.precision,
        "recall": result.recall,
        "f1": result.f1,
    }
    _atomic_text(Path(args.out), _json_text(payload))
    print(f"precision={result.precision!r} recall={result.recall!r} f1={result.f1!r}")


def cmd_grid(args):
    manifest = _load_manifest(args.manifest)
    maps = _load_maps(manifest)
    tiers = _load_tiers(manifest, args.sample_rate)
    sigma_grid = _parse_floats(args.sigma_grid, "sigma grid")
    tau_grid = _parse_floats(args.tau_grid, "tau grid")
    config = EvalConfig(tolerance_s=args.tolerance_ms / 1000.0)
    result = grid_search(maps, tiers, sigma_grid, tau_grid, config)
    rows = [
        [float(sigma), float(tau), res.true_positives, res.n_detected,
         res.n_reference, res.precision, res.recall, res.f1]
        for sigma, tau, res in result.rows
    ]
    _atomic_text(Path(args.out), _csv_text(
        ["sigma", "tau", "true_positives", "n_detected", "n_reference",
         "precision", "recall", "f1"], rows))
    sigma, tau, best = result.best
    print(f"best: sigma={sigma!r} tau={tau!r} f1={best.f1!r}")


def cmd_ablate(args):
    manifest = _load_manifest(args.manifest)
    maps = _load_maps(manifest)
    peaksets = _detect_all(maps, args.sigma, args.tau, _effective_jobs(args))
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    masks = []
    entries = []
    for index, entry in enumerate(manifest.entries):
        utt_id = entry.utterance_id
        amap = maps[utt_id]
        seed = None
        if args.strategy == "random":
            seed = int(np.random.SeedSequence(args.seed, spawn_key=(index,)).generate_state(1)[0])
        mask = build_mask(peaksets[utt_id], amap.n_frames, args.strategy, seed=seed)
        masks.append(mask)
        masked = apply_mask(amap, mask)
        _atomic_tensor(out_dir / f"{utt_id}.npy", masked.values)
        phn_rel = None
        if entry.phn is not None:
            phn_rel = f"{utt_id}.phn"
            shutil.copyfile(manifest.path(entry.phn), out_dir / phn_rel)
        entries.append(ManifestEntry(
            utterance_id=utt_id, activations=f"{utt_id}.npy", phn=phn_rel))
    out_manifest = CorpusManifest(
        entries=tuple(entries),
        frame_shift_ms=manifest.frame_shift_ms,
        frame_offset_ms=manifest.frame_offset_ms,
        root=out_dir,
    )
    write_manifest(out_dir / "manifest.json", out_manifest)
    stats = ablation_stats(masks)
    _atomic_text(out_dir / "stats.json", _json_text(stats))
    print(
        f"{args.strategy}: kept_fraction={stats['kept_fraction']!r} "
        f"frames_per_peak={stats['frames_per_peak']!r}"
    )


def cmd_labels(args):
    labeled = _labeled(args)
    rows = [
        [item.utterance_id, item.frame, float(item.time_s),
         item.phone_label(), item.manner_label(), item.arity]
        for item in labeled
    ]
    _atomic_text(Path(args.out), _csv_text(
        ["utterance_id", "frame", "time_s", "phone_seq", "manner_seq", "arity"], rows))
    fractions = arity_fractions(labeled)
    print(
        f"{len(labeled)} peaks: mono={fractions['mono']!r} "
        f"di={fractions['di']!r} tri+={fractions['tri+']!r}"
    )


def cmd_pca(args):
    labeled = _labeled(args)
    vectors = np.array([item.vector for item in labeled])
    model = pca_fit(vectors, args.k)
    coords = pca_project(model, vectors)
    header = ["utterance_id", "frame"] + [f"pc{i + 1}" for i in range(args.k)]
    header += ["phone_seq", "manner_seq", "arity"]
    rows = []
    for item, row in zip(labeled, coords):
        rows.append(
            [item.utterance_id, item.frame]
            + [float(v) for v in row]
            + [item.phone_label(), item.manner_label(), item.arity]
        )
    _atomic_text(Path(args.out), _csv_text(header, rows))
    variances = [float(v) for v in model.explained_variance]
    print(f"explained variance: {variances!r}")


def cmd_cluster(args):
    manifest = _load_manifest(args.manifest)
    maps = _load_maps(manifest)
    peaksets = _detect_all(maps, args.sigma, args.tau, _effective_jobs(args))
    ids, frames, vectors = [], [], []
    for utt_id in maps:
        for peak in peaksets[utt_id].peaks:
            ids.append(utt_id)
            frames.append(peak.frame)
            vectors.append(maps[utt_id].values[peak.frame])
    if not vectors:
        raise ValueError("no peaks detected; nothing to cluster")
    clustering = kmeans(np.array(vectors), args.k, seed=args.seed)
    rows = [
        [utt_id, frame, int(label)]
        for utt_id, frame, label in zip(ids, frames, clustering.assignments)
    ]
    _atomic_text(Path(args.out), _csv_text(["utterance_id", "frame", "cluster"], rows))
    print(f"k={args.k} inertia={clustering.inertia!r}")


def cmd_ami(args):
    labeled = _labeled(args)
    vectors = np.array([item.vector for item in labeled])
    k_grid = _parse_ints(args.k_grid, "K grid")
    rows = ami_sweep(
        vectors,
        [item.phone_seq for item in labeled],
        [item.manner_seq for item in labeled],
        k_grid,
        seed=args.seed,
    )
    out_rows = [[k, float(p), float(m)] for k, p, m in rows]
    _atomic_text(Path(args.out), _csv_text(["k", "ami_phone", "ami_manner"], out_rows))
    best = max(rows, key=lambda r: r[2])
    print(f"best manner AMI {best[2]!r} at k={best[0]}")


def _read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def cmd_plot(args):
    out = Path(args.out)
    if args.kind == "envelope":
        if not args.manifest or not args.utterance:
            raise ValueError("envelope plots need --manifest and --utterance")
        manifest = _load_manifest(args.manifest)
        maps = _load_maps(manifest)
        if args.utterance not in maps:
            raise ValueError(f"utterance {args.utterance!r} not in manifest")
        amap = maps[args.utterance]
        env = compute_envelope(amap)
        peakset = detect(amap, args.sigma, args.tau, utterance_id=args.utterance)
        _atomic_plot("envelope", (env, peakset), out)
    elif args.kind == "scatter":
        if not args.coords:
            raise ValueError("scatter plots need --coords")
        records = _read_csv(Path(args.coords))
        if not records:
            raise ValueError("empty scatter data")
        for column in ("pc1", "pc2", args.label_column):
            if column not in records[0]:
                raise ValueError(f"column {column!r} not in {args.coords}")
        coords = [(float(r["pc1"]), float(r["pc2"])) for r in records]
        labels = [r[args.label_column] for r in records]
        _atomic_plot("scatter", (coords, labels), out)
    else:
        if not args.ami:
            raise ValueError("ami plots need --ami")
        records = _read_csv(Path(args.ami))
        rows = [
            (int(r["k"]), float(r["ami_phone"]), float(r["ami_manner"]))
            for r in records
        ]
        _atomic_plot("ami", rows, out)
    print(f"wrote {out}")


# ---------------------------------------------------------------- parser

def _add_manifest(parser):
    parser.add_argument("--manifest", required=True, help="corpus manifest JSON")


def _add_detection(parser):
    parser.add_argument("--sigma", type=float, default=0.5,
                        help="DoG kernel width in frames")
    parser.add_argument("--tau", type=float, default=0.15,
                        help="peak sharpness threshold")


def _add_jobs(parser):
    parser.add_argument("--jobs", type=int, default=1,
                        help="worker threads (PEAKSCOPE_THREADS overrides)")


def _add_tier_flags(parser):
    parser.add_argument("--sample-rate", type=int, default=PHN_SAMPLE_RATE,
                        help="sample rate the .phn tiers are expressed in")


def _add_labeling(parser):
    parser.add_argument("--phone-map", default="default",
                        help="'default', 'identity', or a mapping TSV path")
    parser.add_argument("--window-ms", type=float, default=40.0,
                        help="label window width around each peak")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="peakscope",
        description="Peak detection and analysis over activation-map corpora.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    def add(name, help_text):
        return sub.add_parser(
            name, help=help_text, description=help_text,
            formatter_class=argparse.ArgumentDefaultsHelpFormatter,
        )

    p = add("synth", "generate a synthetic corpus with known transitions")
    p.add_argument("--out", required=True, help="output corpus directory")
    p.add_argument("--n-utterances", type=int, default=50, help="utterance count")
    p.add_argument("--frames", default="200:400", help="frames per utterance, LO:HI")
    p.add_argument("--channels", type=int, default=64, help="activation channels")
    p.add_argument("--segments", default="6:10", help="segments per utterance, LO:HI")
    p.add_argument("--sparsity", type=int, default=8, help="active channels per class")
    p.add_argument("--bump", type=float, default=1.0, help="transition bump magnitude")
    p.add_argument("--noise", type=float, default=0.0, help="noise sigma")
    p.add_argument("--classes", type=int, default=4, help="planted class count")
    p.add_argument("--seed", type=int, default=0, help="corpus seed")

    p = add("melspec", "log-mel spectrogram from a WAV file")
    p.add_argument("--wav", required=True, help="input WAV (mono PCM16)")
    p.add_argument("--out", required=True, help="output NPY path")
    p.add_argument("--sample-rate", type=int, default=16000, help="expected rate")
    p.add_argument("--window-ms", type=float, default=25.0, help="analysis window")
    p.add_argument("--shift-ms", type=float, default=10.0, help="frame shift")
    p.add_argument("--n-fft", type=int, default=512, help="FFT size")
    p.add_argument("--n-mels", type=int, default=40, help="mel bands")
    p.add_argument("--fmin", type=float, default=20.0, help="lowest mel edge, Hz")
    p.add_argument("--fmax", type=float, default=8000.0, help="highest mel edge, Hz")
    p.add_argument("--preemphasis", type=float, default=0.97, help="preemphasis")

    p = add("forward", "run a conv stack over feature frames, tap one layer")
    p.add_argument("--features", required=True, help="input NPY, frames x bins")
    p.add_argument("--stack", required=True, help="stack config JSON")
    p.add_argument("--weights-dir", required=True, help="directory of weight NPYs")
    p.add_argument("--tap", required=True, help="layer name to tap")
    p.add_argument("--out", required=True, help="output NPY path")
    p.add_argument("--shift-ms", type=float, default=10.0, help="input frame shift")
    p.add_argument("--offset-ms", type=float, default=12.5, help="input frame offset")
    p.add_argument("--window-ms", type=float, default=25.0,
                   help="input analysis window (for the receptive-field printout)")

    p = add("envelope", "write the activation-energy envelope of one utterance")
    _add_manifest(p)
    p.add_argument("--utterance", required=True, help="utterance id")
    p.add_argument("--out", required=True, help="output NPY path")

    p = add("peaks", "detect peaks for every utterance in a manifest")
    _add_manifest(p)
    _add_detection(p)
    _add_jobs(p)
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--verbose", action="store_true", help="per-utterance counts")

    p = add("eval", "score detected peaks against reference boundaries")
    _add_manifest(p)
    _add_detection(p)
    _add_jobs(p)
    _add_tier_flags(p)
    p.add_argument("--tolerance-ms", type=float, default=20.0,
                   help="match tolerance around each boundary")
    p.add_argument("--out", required=True, help="output JSON path")

    p = add("grid", "sweep a (sigma, tau) grid and report every operating point")
    _add_manifest(p)
    _add_tier_flags(p)
    p.add_argument("--sigma-grid", default=",".join(str(s) for s in DEFAULT_SIGMA_GRID),
                   help="comma-separated sigmas")
    p.add_argument("--tau-grid", default=",".join(f"{t:.6g}" for t in DEFAULT_TAU_GRID),
                   help="comma-separated taus")
    p.add_argument("--tolerance-ms", type=float, default=20.0,
                   help="match tolerance around each boundary")
    p.add_argument("--out", required=True, help="output CSV path")

    p = add("ablate", "write a masked copy of the corpus, keeping selected frames")
    _add_manifest(p)
    _add_detection(p)
    _add_jobs(p)
    p.add_argument("--strategy", choices=STRATEGIES, default="peaks",
                   help="frame selection strategy")
    p.add_argument("--seed", type=int, default=0, help="seed for the random strategy")
    p.add_argument("--out-dir", required=True, help="output corpus directory")

    p = add("labels", "label every peak with the phones inside its window")
    _add_manifest(p)
    _add_detection(p)
    _add_jobs(p)
    _add_tier_flags(p)
    _add_labeling(p)
    p.add_argument("--out", required=True, help="output CSV path")

    p = add("pca", "project peak embeddings onto principal components")
    _add_manifest(p)
    _add_detection(p)
    _add_jobs(p)
    _add_tier_flags(p)
    _add_labeling(p)
    p.add_argument("--k", type=int, default=2, help="number of components")
    p.add_argument("--out", required=True, help="output CSV path")

    p = add("cluster", "k-means over peak embeddings")
    _add_manifest(p)
    _add_detection(p)
    _add_jobs(p)
    p.add_argument("--k", type=int, default=8, help="number of clusters")
    p.add_argument("--seed", type=int, default=0, help="clustering seed")
    p.add_argument("--out", required=True, help="output CSV path")

    p = add("ami", "adjusted mutual information across a K grid")
    _add_manifest(p)
    _add_detection(p)
    _add_jobs(p)
    _add_tier_flags(p)
    _add_labeling(p)
    p.add_argument("--k-grid", default="10,20,40,100,200,400,700",
                   help="comma-separated cluster counts")
    p.add_argument("--seed", type=int, default=0, help="clustering seed")
    p.add_argument("--out", required=True, help="output CSV path")

    p = add("plot", "render a figure as deterministic SVG")
    p.add_argument("--kind", choices=plots.PLOT_KINDS, required=True, help="figure kind")
    p.add_argument("--out", required=True, help="output SVG path")
    p.add_argument("--manifest", help="corpus manifest (envelope kind)")
    p.add_argument("--utterance", help="utterance id (envelope kind)")
    p.add_argument("--sigma", type=float, default=0.5, help="DoG width (envelope kind)")
    p.add_argument("--tau", type=float, default=0.15, help="threshold (envelope kind)")
    p.add_argument("--coords", help="pca output CSV (scatter kind)")
    p.add_argument("--label-column", default="manner_seq",
                   help="coloring column (scatter kind)")
    p.add_argument("--ami", help="ami output CSV (ami kind)")

    return parser


_COMMANDS = {
    "synth": cmd_synth,
    "melspec": cmd_melspec,
    "forward": cmd_forward,
    "envelope": cmd_envelope,
    "peaks": cmd_peaks,
    "eval": cmd_eval,
    "grid": cmd_grid,
    "ablate": cmd_ablate,
    "labels": cmd_labels,
    "pca": cmd_pca,
    "cluster": cmd_cluster,
    "ami": cmd_ami,
    "plot": cmd_plot,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        result = _COMMANDS[args.command](args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0 if result is None else result


if __name__ == "__main__":
    sys.exit(main())
