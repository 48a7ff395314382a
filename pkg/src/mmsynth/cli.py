"""Command-line entry points.

Exit codes: 0 success, 1 configuration or input error, 2 data error,
3 numeric abort during training.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np
import torch

from .codec import encode_attributes
from .config import CONFIG_KEYS, load_config
from .data import generate_synth_dataset, load_manifest, sample_batch, SynthSpec
from .classifier import train_attribute_classifier
from .errors import (
    CheckpointError,
    ConfigError,
    DataError,
    GrowthError,
    MMSynthError,
    NumericError,
    SchemaError,
    ValidationError,
)
from .evaluation import (
    attribute_mse,
    embed_and_stats,
    embed_images,
    frechet_distance,
    manipulation_sweep,
    pairwise_diversity,
    write_eval_report,
)
from .images import save_png, tile_grid
from .inference import load_bundle, noise_for_seed, synthesize_from_request
from .trainer import run_progressive_training

_EXIT_CODES = (
    (NumericError, 3),
    (DataError, 2),
    ((ConfigError, SchemaError, ValidationError, CheckpointError, GrowthError), 1),
    (MMSynthError, 1),
)

_CONFIG_HELP = "config keys: " + ", ".join(CONFIG_KEYS)


def _parse_attribute_flags(pairs) -> dict[str, float]:
    out = {}
    for item in pairs or []:
        if "=" not in item:
            raise ValidationError(f"attribute flags are name=value, got {item!r}")
        name, _, value = item.partition("=")
        try:
            out[name.strip()] = float(value)
        except ValueError:
            raise ValidationError(f"bad attribute value in {item!r}") from None
    return out


def cmd_synth_data(args) -> int:
    spec = SynthSpec(
        c=args.modalities,
        resolution=args.resolution,
        samples_per_modality=args.samples,
        seed=args.seed,
    )
    manifest = generate_synth_dataset(spec, args.out)
    print(f"wrote {sum(manifest.counts().values())} images under {args.out}")
    return 0


def cmd_train(args) -> int:
    cfg = load_config(args.config)
    if not cfg.data_manifest:
        raise ConfigError("config key data_manifest is required for training")
    manifest = load_manifest(cfg.data_manifest)
    final, _ = run_progressive_training(cfg, manifest)
    print(f"final checkpoint: {final}")
    return 0


def cmd_synthesize(args) -> int:
    bundle = load_bundle(args.checkpoint)
    attrs = _parse_attribute_flags(args.attributes)
    eff, images = synthesize_from_request(bundle, attrs, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for i, name in enumerate(bundle.modalities):
        save_png(images[i], out / f"{name}.png")
    print(f"seed={args.seed} attributes={eff}")
    return 0


def cmd_evaluate(args) -> int:
    bundle = load_bundle(args.checkpoint)
    manifest = load_manifest(args.manifest)
    if tuple(manifest.modalities) != bundle.modalities:
        raise ConfigError("manifest modalities do not match the checkpoint")
    res = bundle.max_resolution
    rng = np.random.default_rng(args.seed)
    n = min(args.samples, min(manifest.counts().values()))

    clf, metrics = train_attribute_classifier(manifest, res, seed=args.seed)
    requested = rng.choice([-1.0, 1.0], size=(n, bundle.schema.d_a)).astype(np.float32)
    zs = rng.standard_normal((n, 512)).astype(np.float32)
    if bundle.cfg.noise == "uniform":
        zs = (rng.random((n, 512)) * 2 - 1).astype(np.float32)
    fakes = []
    with torch.no_grad():
        for start in range(0, n, 64):
            fakes.append(
                bundle.gen(
                    torch.from_numpy(zs[start : start + 64]),
                    torch.from_numpy(requested[start : start + 64]),
                ).numpy()
            )
    fakes = np.concatenate(fakes)  # (n, c, 3, R, R)

    results = {
        "classifier/attr_mse_floor": metrics.attr_mse,
        "classifier/attr_accuracy": metrics.attr_accuracy,
        "classifier/modality_accuracy": metrics.modality_accuracy,
        "samples": n,
    }
    for i, name in enumerate(bundle.modalities):
        real, _ = sample_batch(manifest, i, n, rng, res)
        stats_real = embed_and_stats(clf.embed, real)
        stats_fake = embed_and_stats(clf.embed, fakes[:, i])
        results[f"fid/{name}"] = frechet_distance(stats_real, stats_fake)
        feats = embed_images(clf.embed, fakes[:, i])
        results[f"diversity/{name}"] = pairwise_diversity(feats, 10_000, rng)
    mean, std = attribute_mse(clf, fakes[:, 0], requested, rng=rng)
    results["attribute_mse/mean"] = mean
    results["attribute_mse/std"] = std

    txt, kv = write_eval_report(args.out, results)
    print(f"wrote {txt} and {kv}")
    return 0


def cmd_sweep(args) -> int:
    bundle = load_bundle(args.checkpoint)
    attrs = _parse_attribute_flags(args.attributes)
    base = {n: attrs.get(n, -1.0) for n in bundle.schema.names}
    y = encode_attributes(base, bundle.schema)
    z = noise_for_seed(bundle, args.seed)
    if args.flip == "noise":
        flip = noise_for_seed(bundle, args.seed2 if args.seed2 is not None else args.seed + 1)
    else:
        flip = bundle.schema.index_of(args.flip)
    frames = manipulation_sweep(bundle.gen, z, y, flip, args.steps)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    # modalities as rows, sweep steps as columns
    grid = tile_grid(
        [[frames[k, m] for k in range(frames.shape[0])] for m in range(frames.shape[1])]
    )
    save_png(grid, out / "sweep.png")
    for k in range(frames.shape[0]):
        for m, name in enumerate(bundle.modalities):
            save_png(frames[k, m], out / f"frame_{k:02d}_{name}.png")
    print(f"wrote sweep grid and {frames.shape[0] * frames.shape[1]} frames under {out}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(args.checkpoint)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mmsynth",
        description="Attribute-conditioned multimodal image synthesis",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth-data", help="render the procedural multimodal dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--samples", type=int, default=2000)
    p.add_argument("--resolution", type=int, default=32)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--modalities", type=int, default=3)
    p.set_defaults(fn=cmd_synth_data)

    p = sub.add_parser(
        "train",
        help="run progressive training from a config file",
        epilog=_CONFIG_HELP,
    )
    p.add_argument("--config", required=True)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("synthesize", help="write one multimodal image set")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--attributes", nargs="*", metavar="NAME=VALUE")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_synthesize)

    p = sub.add_parser("evaluate", help="metrics report for a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_evaluate)

    p = sub.add_parser("sweep", help="attribute or noise interpolation grid")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--flip", required=True, metavar="ATTR|noise")
    p.add_argument("--steps", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--seed2", type=int, default=None, help="noise sweep target seed")
    p.add_argument("--attributes", nargs="*", metavar="NAME=VALUE")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("serve", help="HTTP synthesis service")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--port", type=int, default=8787)
    p.add_argument("--host", default="127.0.0.1")
    p.set_defaults(fn=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except MMSynthError as e:
        for kinds, code in _EXIT_CODES:
            if isinstance(e, kinds):
                print(f"error: {e}", file=sys.stderr)
                return code
        raise


if __name__ == "__main__":
    sys.exit(main())
