"""Command-line surface: dataset building, training, generation, evaluation, ablation.

Exit codes: 0 success, 1 usage or config error, 2 data error, 3 numeric failure.
The TAVG_SEED environment variable overrides the configured seed everywhere.
"""

import argparse
import os
import sys
from pathlib import Path

import torch

from . import ablation as ablation_mod
from .checkpoint import load_checkpoint
from .config import ConfigError, load_config
from .dataset import (SEGMENT_SAMPLES, SECOND_SAMPLES, build_dataset,
                      load_dataset, peak_normalize, read_wav, resample_audio,
                      uint8_from_pixels)
from .errors import DataError
from .faces import HaarCascadeDetector, SidecarDetector
from .generator import generate
from .metrics import CONDITION_ORDER, evaluate
from .plotting import plot_losses, plot_metric_bars
from .trainer import MODE_TO_DATASET, NumericError, train

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _env_seed(default: int) -> int:
    raw = os.environ.get("TAVG_SEED")
    if raw is None:
        return default
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"TAVG_SEED must be an integer, got {raw!r}")


def _build_parser() -> _Parser:
    parser = _Parser(prog="tavg", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-dataset", parents=[], help="build a paired "
                       "dataset from a local video")
    p.add_argument("--video", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--mode", choices=("triplet", "baseline"),
                   default="triplet")
    p.add_argument("--annotations", type=Path,
                   help="sidecar JSON with per-frame face boxes")
    p.add_argument("--cascade", type=Path,
                   help="OpenCV Haar cascade XML (alternative detector)")
    p.add_argument("--image-size", type=int, default=64)

    p = sub.add_parser("train", help="train generator/discriminator")
    p.add_argument("--data", required=True, type=Path)
    p.add_argument("--config", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--no-gru", action="store_true",
                   help="ablate the recurrent head (9-channel output)")

    p = sub.add_parser("generate", help="synthesize frames from a WAV file")
    p.add_argument("--ckpt", required=True, type=Path)
    p.add_argument("--audio", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("evaluate", help="metric report over checkpoints")
    p.add_argument("--ckpts", required=True,
                   help="comma list of condition=checkpoint pairs")
    p.add_argument("--data", required=True, type=Path)
    p.add_argument("--report", required=True, type=Path)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("ablation", help="train with_gru vs no_gru on the "
                       "synthetic audio-driven set and report metrics")
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--iterations", type=int, default=2000)
    p.add_argument("--samples", type=int, default=64)
    p.add_argument("--image-size", type=int, default=32)
    p.add_argument("--base-channels", type=int, default=16)
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    return parser


def cmd_build_dataset(args) -> int:
    if args.annotations is not None:
        detector = SidecarDetector(args.annotations)
    elif args.cascade is not None:
        detector = HaarCascadeDetector(args.cascade)
    else:
        raise UsageError("face detection needs --annotations (sidecar "
                         "boxes) or --cascade (Haar model file)")
    if not args.video.exists():
        raise DataError(f"video not found: {args.video}")
    _, written, excluded = build_dataset(args.video, args.out, detector,
                                         mode=args.mode,
                                         image_size=args.image_size)
    print(f"{written} samples written, {excluded} excluded")
    return EXIT_OK


def cmd_train(args) -> int:
    import dataclasses
    run = load_config(args.config)
    mode = "no_gru" if args.no_gru else run.mode
    config = dataclasses.replace(run.train_config(mode),
                                 seed=_env_seed(run.seed))
    dataset = load_dataset(args.data)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    losses_path = args.out.parent / "losses.tsv"
    _, records = train(config, dataset, args.out, losses_path)
    plot_losses(records, args.out.parent / "losses.png",
                title=f"{mode} training")
    print(f"checkpoint written to {args.out} "
          f"({config.iterations} iterations, mode {mode})")
    return EXIT_OK


def cmd_generate(args) -> int:
    torch.set_num_threads(1)
    ckpt = load_checkpoint(args.ckpt)
    seed = args.seed if args.seed is not None else _env_seed(ckpt.seed)
    encoder, gen_net, _ = ckpt.build_models()
    encoder.eval()

    track = resample_audio(read_wav(args.audio))
    hop = SEGMENT_SAMPLES if ckpt.mode != "baseline" else SECOND_SAMPLES
    n_segments = len(track.samples) // hop
    args.out.mkdir(parents=True, exist_ok=True)
    if n_segments == 0:
        print(f"warning: audio shorter than one {hop / 16000:.1f} s segment; "
              f"0 frames written")
        return EXIT_OK

    from PIL import Image
    count = 0
    for k in range(n_segments):
        segment = peak_normalize(track.samples[hop * k:hop * (k + 1)])
        with torch.no_grad():
            y = encoder(torch.from_numpy(segment).unsqueeze(0))
        rng = torch.Generator().manual_seed((seed * 1_000_003 + k)
                                            & 0x7FFFFFFFFFFF)
        z = torch.randn(1, gen_net.config.noise_dim, generator=rng)
        frames = generate(z, y, gen_net).squeeze(0)
        for frame in frames.permute(0, 2, 3, 1).numpy():
            Image.fromarray(uint8_from_pixels(frame)).save(
                args.out / f"frame_{count:05d}.png")
            count += 1
    print(f"{count} frames written to {args.out}")
    return EXIT_OK


def _parse_ckpts(spec: str) -> dict:
    conditions = {}
    for part in spec.split(","):
        part = part.strip()
        if not part:
            continue
        name, sep, path = part.partition("=")
        if not sep or not name or not path:
            raise UsageError(f"--ckpts entries must be condition=path, "
                             f"got {part!r}")
        if name not in CONDITION_ORDER:
            raise UsageError(f"unknown condition {name!r} (choose from "
                             f"{', '.join(CONDITION_ORDER)})")
        conditions[name] = Path(path)
    if not conditions:
        raise UsageError("--ckpts must name at least one condition")
    return conditions


def _datasets_for(data_dir: Path, conditions: dict) -> dict:
    """Datasets keyed by regime: one dataset dir, or triplet/baseline subdirs."""
    if (data_dir / "manifest.tsv").exists():
        shared = load_dataset(data_dir)
        return {shared.mode: shared}
    datasets = {}
    for name in conditions:
        ds_mode = MODE_TO_DATASET[name]
        if ds_mode in datasets:
            continue
        subdir = data_dir / ds_mode
        if not (subdir / "manifest.tsv").exists():
            raise DataError(
                f"{data_dir} has no manifest.tsv and no {ds_mode}/ "
                f"subdirectory for condition {name!r}")
        datasets[ds_mode] = load_dataset(subdir)
    return datasets


def cmd_evaluate(args) -> int:
    torch.set_num_threads(1)
    conditions = _parse_ckpts(args.ckpts)
    for name, path in conditions.items():
        if not path.exists():
            raise DataError(f"missing checkpoint file for {name}: {path}")
    datasets = _datasets_for(args.data, conditions)

    args.report.parent.mkdir(parents=True, exist_ok=True)
    grid_dir = args.report.parent / f"{args.report.stem}_grids"
    report = evaluate(conditions, datasets, seed=args.seed, grid_dir=grid_dir)
    report.write_tsv(args.report)
    plot_metric_bars(report, args.report.with_suffix(".png"))
    for row in report.rows:
        print(f"{row.condition}\tmse={row.mse:.6f}\tssim={row.ssim:.6f}"
              f"\tlpips={row.lpips:.6f}")
    return EXIT_OK


def cmd_ablation(args) -> int:
    result = ablation_mod.run_ablation(
        args.out, n_samples=args.samples, iterations=args.iterations,
        image_size=args.image_size, base_channels=args.base_channels,
        batch_size=args.batch_size, seed=_env_seed(args.seed))
    print(f"report written to {result.report_path} "
          f"({result.elapsed_seconds:.0f} s)")
    for row in result.report.rows:
        print(f"{row.condition}\tmse={row.mse:.6f}\tssim={row.ssim:.6f}"
              f"\tlpips={row.lpips:.6f}")
    return EXIT_OK


_COMMANDS = {"build-dataset": cmd_build_dataset, "train": cmd_train,
             "generate": cmd_generate, "evaluate": cmd_evaluate,
             "ablation": cmd_ablation}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
