"""CLI: `cellstyle train ...` and `cellstyle stylize ...`."""
import argparse
import json
import logging
import os
import sys

from .manifest import ManifestError
from .stylize import run_manifest
from .train import TrainConfig, load_checkpoint, train_style_model


def _cmd_train(args) -> int:
    config = TrainConfig(
        batch_size=args.batch_size,
        crop_size=args.crop_size,
        learning_rate=args.lr,
        style_weight=args.style_weight,
        seed=args.seed,
        encoder_seed=args.encoder_seed,
    )
    path = train_style_model(
        args.content, args.style, args.iters, args.out,
        config=config, resume=args.resume,
    )
    print(json.dumps({"checkpoint": str(path), "iterations": args.iters}))
    return 0


def _cmd_stylize(args) -> int:
    model, _, iteration = load_checkpoint(args.ckpt)
    result = run_manifest(args.manifest, model, force=args.force, checkpoint=str(args.ckpt))
    print(
        json.dumps(
            {
                "checkpoint_iteration": iteration,
                "stylized": len(result.outputs),
                "skipped": len(result.skipped),
                "failed": len(result.failures),
                "failures": [{"entry": e, "reason": r} for e, r in result.failures],
            }
        )
    )
    return 0 if not result.failures else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cellstyle",
        description="Render generated cell masks into realistic images by style transfer.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train the decoder on content and style tiles")
    p.add_argument("--content", required=True, help="directory of content PNGs")
    p.add_argument("--style", required=True, help="directory of style tile PNGs")
    p.add_argument("--iters", type=int, required=True)
    p.add_argument("--out", required=True, help="checkpoint output path")
    p.add_argument("--resume", help="checkpoint to continue from")
    p.add_argument("--batch-size", type=int, default=4)
    p.add_argument("--crop-size", type=int, default=96)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--style-weight", type=float, default=3.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--encoder-seed", type=int, default=0)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("stylize", help="stylize every manifest entry")
    p.add_argument("--manifest", required=True)
    p.add_argument("--ckpt", required=True)
    p.add_argument("--force", action="store_true", help="overwrite existing outputs")
    p.set_defaults(func=_cmd_stylize)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(
        stream=sys.stderr,
        level=os.environ.get("CELLSTYLE_LOG", "INFO").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ManifestError, FileNotFoundError, ValueError, RuntimeError) as exc:
        json.dump({"error": type(exc).__name__, "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
