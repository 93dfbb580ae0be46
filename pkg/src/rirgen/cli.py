"""Command-line entry point.

One binary, seven subcommands: gen-corpus, train, infer, eval-t60, bench,
reverb, split, plus version. A config file of ``key = value`` lines can
pre-set any flag (values there rank below explicitly passed flags); keys
may be prefixed with the subcommand name (``train.epochs = 50``) to scope
them. Exit codes: 0 success, 1 usage error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import INTERFACE_VERSION, __version__
from .analysis import crop_at_t60, estimate_t60, t60_error
from .audioio import read_wav, write_wav
from .benchmark import (
    benchmark_runtime,
    make_image_generator,
    make_neural_generator,
    make_reference_generator,
)
from .corpus import Axis, CorpusGrid, CorpusManifest, build_corpus
from .env import AcousticEnv, NormalizationConfig, build_embedding
from .errors import RirgenError, ValidationError
from .nn.checkpoint import load_checkpoint, save_checkpoint
from .nn.model import GanModel, ModelConfig
from .nn.train import TrainConfig, train, write_metrics_csv
from .speech import load_recording, reverberate_corpus, split_on_silence
from .synthesis import Rir, SynthConfig

OUTPUT_DIR_ENV = "RIRGEN_OUT"


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _parse_vec3(text: str, name: str) -> np.ndarray:
    parts = text.split(",")
    if len(parts) != 3:
        raise ValidationError(f"{name} must be three comma-separated numbers, got '{text}'")
    return np.array([float(p) for p in parts])


def _parse_scalar(text: str):
    lowered = text.strip().lower()
    if lowered in ("true", "false"):
        return lowered == "true"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text.strip()


def load_config_overlay(path) -> dict:
    """Read a flat ``key = value`` config file into {key: parsed value}."""
    overlay = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"{path}:{lineno}: expected 'key = value', got '{raw}'")
        key, value = (part.strip() for part in line.split("=", 1))
        overlay[key] = _parse_scalar(value)
    return overlay


def _apply_overlay(parser: argparse.ArgumentParser, overlay: dict, subcommand: str) -> None:
    known = {action.dest for action in parser._actions}
    for key, value in overlay.items():
        if "." in key:
            scope, bare = key.split(".", 1)
            if scope != subcommand:
                continue
            if bare not in known:
                raise ValidationError(f"config key '{key}' is not a flag of '{subcommand}'")
            parser.set_defaults(**{bare: value})
        elif key in known:
            parser.set_defaults(**{key: value})


def _default_path(value, subpath: str):
    """Explicit flag value, else a path under $RIRGEN_OUT when that is set."""
    if value is not None:
        return value
    base = os.environ.get(OUTPUT_DIR_ENV)
    if base:
        return str(Path(base) / subpath)
    return None


def _add_axis_flags(parser, name, default_count, default_range):
    parser.add_argument(f"--{name}", type=int, default=default_count,
                        help=f"number of evenly spaced {name} (default {default_count})")
    parser.add_argument(f"--{name[:-1]}-range", type=str, default=default_range,
                        help=f"min,max {name[:-1]} in meters (default {default_range})")


def _axis_from(args, name) -> Axis:
    count = getattr(args, name)
    lo, hi = (float(v) for v in getattr(args, f"{name[:-1]}_range").split(","))
    return Axis(count, lo, hi)


def _build_parser() -> tuple[_Parser, dict]:
    parser = _Parser(prog="rirgen", description=__doc__)
    parser.add_argument("--config", type=str, default=None,
                        help="key = value file pre-setting flags (flags win)")
    sub = parser.add_subparsers(dest="command")
    children = {}

    def add_parser(name, **kwargs):
        kwargs.setdefault("formatter_class", argparse.ArgumentDefaultsHelpFormatter)
        children[name] = sub.add_parser(name, **kwargs)
        return children[name]

    p = add_parser("gen-corpus", help="generate a reference RIR corpus")
    p.add_argument("--out", type=str, default=None, help="output directory (required)")
    _add_axis_flags(p, "lengths", 15, "8,11")
    _add_axis_flags(p, "widths", 10, "6,8")
    _add_axis_flags(p, "heights", 5, "2.5,3.5")
    p.add_argument("--per-room", type=int, default=100, help="RIRs per room (default 100)")
    p.add_argument("--t60-range", type=str, default="0.2,0.7", help="min,max seconds")
    p.add_argument("--sample-rate", type=int, default=16000, help="output rate in Hz")
    p.add_argument("--n-samples", type=int, default=4096, help="samples per RIR")
    p.add_argument("--density", type=float, default=8000.0, help="diffuse arrivals per second")
    p.add_argument("--mixing-time-ms", type=float, default=None,
                   help="specular-to-diffuse handover; derived from the room when unset")
    p.add_argument("--seed", type=int, default=0, help="RNG seed")
    p.add_argument("--threads", type=int, default=1, help="parallel build workers")

    p = add_parser("train", help="train the neural generator on a corpus")
    p.add_argument("--manifest", type=str, default=None, help="corpus manifest.json (required)")
    p.add_argument("--out", type=str, default=None, help="checkpoint path (required)")
    p.add_argument("--metrics", type=str, default=None, help="per-epoch metrics CSV")
    p.add_argument("--epochs", type=int, default=100, help="training epochs")
    p.add_argument("--batch-size", type=int, default=128, help="items per step")
    p.add_argument("--lr", type=float, default=8e-5, help="RMSprop learning rate")
    p.add_argument("--lr-decay-factor", type=float, default=0.7,
                   help="learning-rate multiplier applied on the decay schedule")
    p.add_argument("--lr-decay-every", type=int, default=40, help="epochs between decays")
    p.add_argument("--lambda-mse", type=float, default=10.0, help="waveform MSE weight")
    p.add_argument("--lambda-t60", type=float, default=1.0,
                   help="reverberation-time loss weight")
    p.add_argument("--holdout", type=float, default=0.125,
                   help="fraction of items held out for per-epoch metrics")
    p.add_argument("--base-channels", type=int, default=256,
                   help="generator channels at the seed length")
    p.add_argument("--seed", type=int, default=0, help="RNG seed")

    p = add_parser("infer", help="generate one RIR from a trained checkpoint")
    p.add_argument("--room", type=str, default=None, help="L,W,H meters (required)")
    p.add_argument("--src", type=str, default=None, help="source x,y,z meters (required)")
    p.add_argument("--lst", type=str, default=None, help="listener x,y,z meters (required)")
    p.add_argument("--t60", type=float, default=None, help="target T60 seconds (required)")
    p.add_argument("--ckpt", type=str, default=None, help="model checkpoint (required)")
    p.add_argument("--out", type=str, default=None, help="output WAV path (required)")
    p.add_argument("--crop", action="store_true",
                   help="zero the tail past T60 when T60 < 0.25 s")

    p = add_parser("eval-t60", help="reverberation-time error report over a corpus")
    p.add_argument("--manifest", type=str, default=None, help="corpus manifest.json (required)")
    p.add_argument("--ckpt", type=str, default=None, help="model checkpoint (required)")
    p.add_argument("--out", type=str, default=None, help="report CSV (required)")
    p.add_argument("--crop-threshold", type=float, default=0.25,
                   help="only responses with smaller T60 are cropped")
    p.add_argument("--limit", type=int, default=None, help="evaluate only the first N items")

    p = add_parser("bench", help="runtime comparison of the generators")
    p.add_argument("--n", type=int, default=1000, help="RIRs per timed run")
    p.add_argument("--batch", type=str, default="1,64", help="neural batch sizes")
    p.add_argument("--generators", type=str, default="neural,diffuse-hybrid,image")
    p.add_argument("--ckpt", type=str, default=None,
                   help="checkpoint for the neural generator (default: untrained)")
    p.add_argument("--out", type=str, default=None, help="report CSV")
    p.add_argument("--repeats", type=int, default=3, help="timed runs (median reported)")
    p.add_argument("--seed", type=int, default=0, help="environment sampling seed")

    p = add_parser("reverb", help="convolve speech segments with corpus RIRs")
    p.add_argument("--clean", type=str, default=None,
                   help="comma-separated clean WAV paths (required)")
    p.add_argument("--manifest", type=str, default=None, help="corpus manifest.json (required)")
    p.add_argument("--out-dir", type=str, default=None, help="output directory (required)")
    p.add_argument("--split", action="store_true",
                   help="split recordings on silence before reverberating")
    p.add_argument("--min-silence", type=float, default=3.0,
                   help="shortest silence that starts a new segment, seconds")
    p.add_argument("--seed", type=int, default=0, help="RIR pairing seed")

    p = add_parser("split", help="split a recording at long silences")
    p.add_argument("--in", dest="input", type=str, default=None, help="input WAV (required)")
    p.add_argument("--out-dir", type=str, default=None, help="segment directory (required)")
    p.add_argument("--min-silence", type=float, default=3.0, help="seconds (default 3.0)")
    p.add_argument("--threshold-db", type=float, default=-40.0, help="silence RMS threshold")
    p.add_argument("--frame-ms", type=float, default=10.0, help="RMS frame length")

    add_parser("version", help="print version and interface information")
    return parser, children


def _require(args, names) -> None:
    aliases = {"in": "input"}
    for name in names:
        attr = aliases.get(name, name.replace("-", "_"))
        if getattr(args, attr) is None:
            raise _UsageError(f"--{name} is required")


def _cmd_gen_corpus(args) -> int:
    args.out = _default_path(args.out, "corpus")
    _require(args, ["out"])
    grid = CorpusGrid(
        lengths=_axis_from(args, "lengths"),
        widths=_axis_from(args, "widths"),
        heights=_axis_from(args, "heights"),
        rirs_per_room=args.per_room,
        t60_range=tuple(float(v) for v in args.t60_range.split(",")),
        seed=args.seed,
    )
    synth = SynthConfig(
        sample_rate=args.sample_rate,
        n_samples=args.n_samples,
        diffuse_density=args.density,
        mixing_time_ms=args.mixing_time_ms,
    )
    manifest = build_corpus(grid, synth, args.out, workers=args.threads)
    print(f"built {len(manifest.items)} RIRs into {args.out}")
    return 0


def _load_training_arrays(manifest: CorpusManifest, base_dir):
    embeddings, references, targets = [], [], []
    for item in manifest.items:
        rir = manifest.load_rir(base_dir, item)
        embeddings.append(item.embedding)
        references.append(rir.samples)
        targets.append(item.env.t60)
    return np.array(embeddings), np.array(references), np.array(targets)


def _cmd_train(args) -> int:
    args.out = _default_path(args.out, "model.bin")
    _require(args, ["manifest", "out"])
    manifest_path = Path(args.manifest)
    manifest = CorpusManifest.load(manifest_path)
    embeddings, references, targets = _load_training_arrays(manifest, manifest_path.parent)

    model = GanModel.build(
        ModelConfig(rir_length=manifest.synth.n_samples, base_channels=args.base_channels),
        seed=args.seed,
    )
    cfg = TrainConfig(
        batch_size=args.batch_size,
        learning_rate=args.lr,
        lr_decay_factor=args.lr_decay_factor,
        lr_decay_every=args.lr_decay_every,
        lambda_mse=args.lambda_mse,
        lambda_t60=args.lambda_t60,
        epochs=args.epochs,
        seed=args.seed,
        holdout_fraction=args.holdout,
    )
    if args.epochs > 0:
        result = train(
            model, embeddings, references, targets, cfg, manifest.synth.sample_rate,
            progress=lambda m: print(
                f"epoch {m.epoch}: lr={m.lr:.3g} loss_g={m.loss_g:.4f} "
                f"loss_d={m.loss_d:.4f} heldout_t60={m.heldout_t60_error:.4f}"
            ),
        )
        if args.metrics:
            write_metrics_csv(args.metrics, result.metrics)
    save_checkpoint(model, manifest.normalization, manifest.synth.sample_rate, args.out)
    print(f"saved checkpoint to {args.out}")
    return 0


def _cmd_infer(args) -> int:
    args.out = _default_path(args.out, "rir.wav")
    _require(args, ["room", "src", "lst", "t60", "ckpt", "out"])
    env = AcousticEnv(
        room_dims=_parse_vec3(args.room, "room"),
        source_pos=_parse_vec3(args.src, "src"),
        listener_pos=_parse_vec3(args.lst, "lst"),
        t60=args.t60,
    ).validate()
    loaded = load_checkpoint(args.ckpt)
    embedding = build_embedding(env, loaded.normalization)
    waveform = loaded.model.generator.forward(
        embedding[None, :].astype(loaded.model.dtype), training=False
    )[0]
    rir = Rir(samples=waveform, sample_rate=loaded.sample_rate)
    if args.crop:
        rir = crop_at_t60(rir, env.t60)
    write_wav(args.out, rir.sample_rate, rir.samples)
    print(f"wrote {rir.length} samples at {rir.sample_rate} Hz to {args.out}")
    return 0


def _cmd_eval_t60(args) -> int:
    args.out = _default_path(args.out, "eval_t60.csv")
    _require(args, ["manifest", "ckpt", "out"])
    manifest_path = Path(args.manifest)
    manifest = CorpusManifest.load(manifest_path)
    loaded = load_checkpoint(args.ckpt)
    items = manifest.items[: args.limit] if args.limit else manifest.items

    embeddings = np.array([item.embedding for item in items]).astype(loaded.model.dtype)
    generated = loaded.model.generator.forward(embeddings, training=False)
    rows = []
    for condition in (False, True):
        batch = []
        for item, waveform in zip(items, generated):
            rir = Rir(samples=np.asarray(waveform, dtype=np.float64),
                      sample_rate=loaded.sample_rate)
            if condition:
                rir = crop_at_t60(rir, item.env.t60, threshold=args.crop_threshold)
            batch.append(rir)
        result = t60_error(batch, [item.env.t60 for item in items])
        for item, est in zip(items, result.estimates):
            err = abs(est - item.env.t60) if est is not None else ""
            rows.append([item.id, f"{item.env.t60:.6f}",
                         f"{est:.6f}" if est is not None else "", err and f"{err:.6f}",
                         condition])
        rows.append(["MEAN", "", "", f"{result.mean_abs_error:.6f}", condition])
        print(f"cropped={condition}: mean |T60 error| = {result.mean_abs_error:.4f} s "
              f"({result.n_failed} failures excluded)")

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["env_id", "target_t60", "estimated_t60", "abs_error", "cropped"])
        writer.writerows(rows)
    return 0


def _cmd_bench(args) -> int:
    wanted = [name.strip() for name in args.generators.split(",") if name.strip()]
    batch_sizes = sorted({int(b) for b in args.batch.split(",")})
    synth = SynthConfig()
    if args.ckpt:
        loaded = load_checkpoint(args.ckpt)
        model, norm = loaded.model, loaded.normalization
    else:
        model, norm = GanModel.build(ModelConfig(), seed=args.seed), NormalizationConfig()

    available = {
        "neural": make_neural_generator(model, norm),
        "diffuse-hybrid": make_reference_generator(synth),
        "image": make_image_generator(synth),
    }
    unknown = [name for name in wanted if name not in available]
    if unknown:
        raise ValidationError(f"unknown generators {unknown}; choose from {sorted(available)}")
    generators = {name: available[name] for name in wanted}
    sizes = {name: (batch_sizes if name == "neural" else [1]) for name in wanted}

    report = benchmark_runtime(generators, args.n, sizes, seed=args.seed, repeats=args.repeats)
    print(report.table())
    if args.out:
        report.save_csv(args.out)
    return 0


def _cmd_reverb(args) -> int:
    args.out_dir = _default_path(args.out_dir, "reverb")
    _require(args, ["clean", "manifest", "out-dir"])
    manifest_path = Path(args.manifest)
    manifest = CorpusManifest.load(manifest_path)
    segments = []
    for path in args.clean.split(","):
        recording = load_recording(path.strip())
        if args.split:
            segments.extend(
                split_on_silence(recording.samples, recording.sample_rate,
                                 min_silence=args.min_silence, source_id=recording.source_id)
            )
        else:
            segments.append(recording)
    records = reverberate_corpus(segments, manifest, manifest_path.parent,
                                 args.out_dir, seed=args.seed)
    print(f"reverberated {len(records)} segments into {args.out_dir}")
    return 0


def _cmd_split(args) -> int:
    args.out_dir = _default_path(args.out_dir, "segments")
    _require(args, ["in", "out-dir"])
    recording = load_recording(args.input)
    segments = split_on_silence(
        recording.samples, recording.sample_rate, min_silence=args.min_silence,
        threshold_dbfs=args.threshold_db, frame_ms=args.frame_ms,
        source_id=recording.source_id,
    )
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with (out_dir / "segments.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["segment_id", "start_offset", "n_samples", "path"])
        for i, segment in enumerate(segments):
            name = f"segment_{i:05d}.wav"
            write_wav(out_dir / name, segment.sample_rate, segment.samples)
            writer.writerow([segment.source_id, segment.start_offset,
                             segment.samples.size, name])
    print(f"split into {len(segments)} segments in {out_dir}")
    return 0


def _cmd_version(_args) -> int:
    print(json.dumps({"package": __version__, "interface": INTERFACE_VERSION}))
    return 0


_COMMANDS = {
    "gen-corpus": _cmd_gen_corpus,
    "train": _cmd_train,
    "infer": _cmd_infer,
    "eval-t60": _cmd_eval_t60,
    "bench": _cmd_bench,
    "reverb": _cmd_reverb,
    "split": _cmd_split,
    "version": _cmd_version,
}


def run(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, children = _build_parser()
    try:
        # config overlay must be applied before final parsing so explicit
        # flags still take precedence over file values
        if "--config" in argv:
            config_path = argv[argv.index("--config") + 1]
            probe, _ = parser.parse_known_args(argv)
            if probe.command:
                _apply_overlay(children[probe.command], load_config_overlay(config_path),
                               probe.command)
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_help()
            return 1
        return _COMMANDS[args.command](args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except RirgenError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
