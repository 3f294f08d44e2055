"""Command line surface for the bridge.

Subcommands: generate, demo-checkpoint, preview, validate.  Exit codes
follow the producer's convention: 0 success, 1 usage error, 2 data or
parse error, 3 model/runtime error.  Errors print one JSON line to
stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .bridge import BridgeConfig, generate, preview_grid
from .errors import FormatError, InvalidArgumentError, ModelError
from .formats import validate_file
from .model import make_demo_checkpoint
from .sampler import STEPS_DEFAULT


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="edm-bridge", description=__doc__)
    parser.add_argument("--version", action="version",
                        version=f"edm-bridge {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="decode a CSLT latent file to CSIM images")
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--latents", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--steps", type=int, default=STEPS_DEFAULT)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--device", default="cpu")
    p.add_argument("--no-deterministic", action="store_true",
                   help="skip pinning the runtime to deterministic kernels")

    p = sub.add_parser("demo-checkpoint",
                       help="write a seeded random-weight checkpoint")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--height", type=int, default=32)
    p.add_argument("--width", type=int, default=32)
    p.add_argument("--channels", type=int, default=3)
    p.add_argument("--classes", type=int, default=10)

    p = sub.add_parser("preview", help="tile a CSIM file into a PNG grid")
    p.add_argument("--images", type=Path, required=True)
    p.add_argument("--rows", type=int, required=True)
    p.add_argument("--cols", type=int, required=True)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("validate", help="validate CSLT/CSIM files")
    p.add_argument("paths", nargs="+", type=Path)
    return parser


def _print_json(obj) -> None:
    print(json.dumps(obj, sort_keys=True))


def _diagnostic(kind: str, exc: Exception) -> None:
    entry = {"error": kind, "detail": str(exc)}
    if isinstance(exc, FormatError):
        entry["rule"] = exc.rule
        entry["offset"] = exc.offset
    print(json.dumps(entry, sort_keys=True), file=sys.stderr)


def _cmd_generate(args) -> int:
    cfg = BridgeConfig(
        checkpoint=args.checkpoint,
        latents_in=args.latents,
        images_out=args.out,
        steps=args.steps,
        batch_size=args.batch_size,
        device=args.device,
        deterministic=not args.no_deterministic,
    )
    report = generate(cfg)
    _print_json(report)
    return 0


def _cmd_demo_checkpoint(args) -> int:
    meta = make_demo_checkpoint(args.out, seed=args.seed, height=args.height,
                                width=args.width, channels=args.channels,
                                n_classes=args.classes)
    _print_json({"out": str(args.out), **meta})
    return 0


def _cmd_preview(args) -> int:
    preview_grid(args.images, args.rows, args.cols, args.out)
    _print_json({"out": str(args.out), "rows": args.rows, "cols": args.cols})
    return 0


def _cmd_validate(args) -> int:
    for path in args.paths:
        _print_json({"path": str(path), **validate_file(path)})
    return 0


_COMMANDS = {
    "generate": _cmd_generate,
    "demo-checkpoint": _cmd_demo_checkpoint,
    "preview": _cmd_preview,
    "validate": _cmd_validate,
}


def cli_dispatch(argv) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    except (_UsageError, InvalidArgumentError) as exc:
        _diagnostic("usage", exc)
        return 1
    except (FormatError, OSError) as exc:
        _diagnostic("data", exc)
        return 2
    except ModelError as exc:
        _diagnostic("model", exc)
        return 3


def main() -> None:
    sys.exit(cli_dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
