"""Command line surface tying the library together.

Subcommands: gen-latents, intensity, nn-dist, slope, toy-gen, toy-run,
validate.  Each accepts a JSON config file plus flags (flags win), emits
its outputs together with a run manifest, and follows the exit-code
convention: 0 success, 1 usage error, 2 data/parse error, 3 numeric or
degenerate-geometry error.  Errors print one machine-parseable JSON line
to stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import (
    DegenerateFitError,
    DegenerateGeometryError,
    FormatError,
    InfeasibleGeometryError,
    InvalidArgumentError,
    UsageError,
)
from .formats import (
    CSIM_MAGIC,
    CSLT_MAGIC,
    read_images,
    read_latents,
    validate_file,
    write_images,
    write_latents,
)
from .intensity import intensity_mc
from .manifest import RunManifest
from .nn_distance import DEFAULT_MEMORY_BUDGET, Dataset, one_nn_distance
from .robustness import EvalPoint, fit_robustness_slope
from .shifts import ShiftSpec, derive_targets, sample_shifted_batch
from .toy import ExperimentConfig, ToyDecoderConfig, TrainConfig, decode_batch, run_experiment

DEFAULT_TARGET_SEED = 1
EVAL_CSV_HEADER = ["shift_param", "nn_distance", "accuracy", "n_test"]
PER_POINT_CSV_HEADER = ["shift_index", "distance", "argmin_train_index"]


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); our convention is 1
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="shiftlab", description=__doc__)
    parser.add_argument("--version", action="version", version=f"shiftlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-latents", help="sample a shifted latent batch to a CSLT file")
    p.add_argument("--config", type=Path)
    p.add_argument("--family", choices=["prior", "extend", "overlap", "truncation"])
    p.add_argument("--theta", type=float)
    p.add_argument("--radius", type=float)
    p.add_argument("--d", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--stream", type=int)
    p.add_argument("--target-seed", type=int)
    p.add_argument("--classes", type=int)
    p.add_argument("--out", type=Path)

    p = sub.add_parser("intensity", help="analytic + Monte Carlo shift intensity")
    p.add_argument("--config", type=Path)
    p.add_argument("--family", choices=["extend", "overlap", "truncation"])
    p.add_argument("--d", type=int)
    p.add_argument("--theta", type=float, help="shift theta (extend/overlap)")
    p.add_argument("--theta-train", type=float)
    p.add_argument("--r-shift", type=float)
    p.add_argument("--r-train", type=float)
    p.add_argument("--target-seed", type=int)
    p.add_argument("--mc-samples", type=int)
    p.add_argument("--seed", type=int)

    p = sub.add_parser("nn-dist", help="exact 1-NN dataset distance between two files")
    p.add_argument("--config", type=Path)
    p.add_argument("--train", type=Path)
    p.add_argument("--shift", type=Path)
    p.add_argument("--metric", choices=["euclidean", "cosine"])
    p.add_argument("--per-point", type=Path, help="optional per-point CSV output")
    p.add_argument("--budget-mb", type=int)
    p.add_argument("--jobs", type=int)

    p = sub.add_parser("slope", help="robustness slope from an eval-point CSV")
    p.add_argument("--config", type=Path)
    p.add_argument("--points", type=Path)
    p.add_argument("--x-axis", choices=["shift_param", "nn_distance"])
    p.add_argument("--weighted", action="store_true")

    p = sub.add_parser("toy-gen", help="decode a 6-d CSLT file to toy images (CSIM)")
    p.add_argument("--config", type=Path)
    p.add_argument("--latents", type=Path)
    p.add_argument("--out", type=Path)

    p = sub.add_parser("toy-run", help="full toy experiment from a config file")
    p.add_argument("--config", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--dump-images", action="store_true")

    p = sub.add_parser("validate", help="validate CSLT/CSIM files")
    p.add_argument("paths", nargs="+", type=Path)
    return parser


def _load_config(path: Path | None) -> dict:
    if path is None:
        return {}
    try:
        cfg = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError("bad-config-json", 0, str(exc)) from exc
    if not isinstance(cfg, dict):
        raise FormatError("bad-config-json", 0, "config must be a JSON object")
    return cfg


def _resolve(args, config: dict, key: str, default=None, required=False):
    """Flag value if given, else config key, else default."""
    value = getattr(args, key.replace("-", "_"), None)
    if value is None:
        value = config.get(key, default)
    if value is None and required:
        raise UsageError(f"missing required option --{key}")
    return value


def _print_json(obj) -> None:
    print(json.dumps(obj, sort_keys=True))


# -- subcommand bodies ----------------------------------------------------


def _cmd_gen_latents(args) -> int:
    cfg = _load_config(args.config)
    family = _resolve(args, cfg, "family", required=True)
    d = int(_resolve(args, cfg, "d", required=True))
    n = int(_resolve(args, cfg, "n", required=True))
    seed = int(_resolve(args, cfg, "seed", 0))
    stream = int(_resolve(args, cfg, "stream", 0))
    target_seed = int(_resolve(args, cfg, "target-seed", DEFAULT_TARGET_SEED))
    n_classes = int(_resolve(args, cfg, "classes", 1))
    out = Path(_resolve(args, cfg, "out", required=True))

    if family in ("extend", "overlap"):
        theta = _resolve(args, cfg, "theta", required=True)
        spec = ShiftSpec.for_family(family, float(theta), d, derive_targets(target_seed, d))
    elif family == "truncation":
        radius = _resolve(args, cfg, "radius", required=True)
        spec = ShiftSpec.truncation(float(radius), d)
    else:
        spec = ShiftSpec.prior(d)

    shifted = sample_shifted_batch(spec, n, seed, stream_id=stream, n_classes=n_classes)
    write_latents(shifted, out)

    manifest = RunManifest(
        command="gen-latents",
        config={"family": family, "param": spec.param, "d": d, "n": n, "seed": seed,
                "stream": stream, "target_seed": target_seed, "classes": n_classes},
    )
    manifest.add_file(out)
    manifest.write(out.with_suffix(out.suffix + ".manifest.json"))
    _print_json({"out": str(out), "n": n, "d": d, "family": family, "param": spec.param})
    return 0


def _cmd_intensity(args) -> int:
    cfg = _load_config(args.config)
    family = _resolve(args, cfg, "family", required=True)
    d = int(_resolve(args, cfg, "d", required=True))
    mc_samples = int(_resolve(args, cfg, "mc-samples", 1_000_000))
    seed = int(_resolve(args, cfg, "seed", 0))

    if family == "truncation":
        r_train = float(_resolve(args, cfg, "r-train", 0.8))
        r_shift = _resolve(args, cfg, "r-shift", required=True)
        spec_train = ShiftSpec.truncation(r_train, d)
        spec_shift = ShiftSpec.truncation(float(r_shift), d)
    else:
        target_seed = int(_resolve(args, cfg, "target-seed", DEFAULT_TARGET_SEED))
        targets = derive_targets(target_seed, d)
        theta_train = float(_resolve(args, cfg, "theta-train", 0.0))
        theta_shift = _resolve(args, cfg, "theta", required=True)
        spec_train = ShiftSpec.for_family(family, theta_train, d, targets)
        spec_shift = ShiftSpec.for_family(family, float(theta_shift), d, targets)

    report = intensity_mc(spec_train, spec_shift, mc_samples, seed)
    _print_json(report.to_json_dict())
    return 0


def _load_dataset(path: Path) -> Dataset:
    with open(path, "rb") as fh:
        magic = fh.read(4)
    if magic == CSIM_MAGIC:
        images, labels = read_images(path)
        return Dataset.from_images(images, labels)
    if magic == CSLT_MAGIC:
        shifted = read_latents(path)
        return Dataset(data=shifted.batch.values.astype(np.float32),
                       labels=shifted.batch.labels)
    raise FormatError("bad-magic", 0, f"{path} is neither CSIM nor CSLT")


def _cmd_nn_dist(args) -> int:
    cfg = _load_config(args.config)
    train_path = Path(_resolve(args, cfg, "train", required=True))
    shift_path = Path(_resolve(args, cfg, "shift", required=True))
    metric = _resolve(args, cfg, "metric", "euclidean")
    budget_mb = _resolve(args, cfg, "budget-mb", None)
    jobs = int(_resolve(args, cfg, "jobs", 1))
    budget = DEFAULT_MEMORY_BUDGET if budget_mb is None else int(budget_mb) << 20

    train = _load_dataset(train_path)
    shift = _load_dataset(shift_path)
    result = one_nn_distance(train, shift, metric=metric, memory_budget=budget, n_jobs=jobs)

    per_point = getattr(args, "per_point", None) or cfg.get("per-point")
    if per_point:
        with open(per_point, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(PER_POINT_CSV_HEADER)
            for j, (dist, idx) in enumerate(zip(result.per_point, result.argmin_indices)):
                writer.writerow([j, repr(float(dist)), int(idx)])

    _print_json({"mean_distance": result.mean_distance, "metric": result.metric,
                 "n_train": train.count, "n_shift": shift.count})
    return 0


def _read_points_csv(path: Path) -> list[EvalPoint]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != EVAL_CSV_HEADER:
            raise FormatError("bad-csv-header", 0,
                              f"expected columns {EVAL_CSV_HEADER}, found {reader.fieldnames}")
        points = []
        for row in reader:
            points.append(EvalPoint(
                shift_param=float(row["shift_param"]),
                nn_distance=float(row["nn_distance"]),
                accuracy=float(row["accuracy"]),
                n_test=int(row["n_test"]),
            ))
    if not points:
        raise FormatError("bad-csv-header", 0, "no data rows")
    return points


def _cmd_slope(args) -> int:
    cfg = _load_config(args.config)
    points_path = Path(_resolve(args, cfg, "points", required=True))
    x_axis = _resolve(args, cfg, "x-axis", "shift_param")
    weighted = bool(args.weighted or cfg.get("weighted", False))
    points = _read_points_csv(points_path)
    fit = fit_robustness_slope(points, x_axis=x_axis, weight_by_n_test=weighted)
    _print_json(fit.to_json_dict())
    return 0


def _cmd_toy_gen(args) -> int:
    cfg = _load_config(args.config)
    latents_path = Path(_resolve(args, cfg, "latents", required=True))
    out = Path(_resolve(args, cfg, "out", required=True))

    shifted = read_latents(latents_path)
    decoder = ToyDecoderConfig()
    if shifted.batch.dim != decoder.latent_dim:
        raise InvalidArgumentError(
            f"toy decoder needs {decoder.latent_dim}-d latents, file has {shifted.batch.dim}")
    images = decode_batch(shifted.batch.values, shifted.batch.labels, decoder)
    n_clamped = write_images(images.astype(np.float32), shifted.batch.labels, out)

    manifest = RunManifest(command="toy-gen",
                           config={"latents": str(latents_path), "out": str(out)})
    manifest.add_file(out)
    if n_clamped:
        manifest.add_warning("clamped_values", n_clamped)
    manifest.write(out.with_suffix(out.suffix + ".manifest.json"))
    _print_json({"out": str(out), "n": shifted.count, "clamped_values": n_clamped})
    return 0


def _experiment_config_from_dict(cfg: dict) -> ExperimentConfig:
    known = {"family", "grid", "train_family", "train_param", "n_train", "n_test",
             "n_classes", "latent_dim", "target_seed", "train_seed", "test_seed",
             "metric", "learning_rate", "epochs"}
    unknown = set(cfg) - known
    if unknown:
        raise UsageError(f"unknown experiment config keys: {sorted(unknown)}")
    train_cfg = TrainConfig(
        learning_rate=float(cfg.get("learning_rate", TrainConfig.learning_rate)),
        epochs=int(cfg.get("epochs", TrainConfig.epochs)),
    )
    kwargs = {k: cfg[k] for k in known - {"learning_rate", "epochs", "grid"} if k in cfg}
    if "grid" in cfg:
        kwargs["grid"] = tuple(float(g) for g in cfg["grid"])
    return ExperimentConfig(train_cfg=train_cfg, **kwargs)


def _cmd_toy_run(args) -> int:
    cfg = _load_config(args.config)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    exp = _experiment_config_from_dict(cfg)
    report = run_experiment(exp)

    manifest = RunManifest(command="toy-run", config=exp.to_json_dict())

    points_path = out_dir / "eval_points.csv"
    with open(points_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(EVAL_CSV_HEADER)
        for p in report.points:
            writer.writerow([repr(p.shift_param), repr(p.nn_distance),
                             repr(p.accuracy), p.n_test])
    manifest.add_file(points_path)

    slopes_path = out_dir / "slopes.json"
    slopes_path.write_text(json.dumps({
        "slope_vs_param": report.slope_vs_param.to_json_dict(),
        "slope_vs_distance": report.slope_vs_distance.to_json_dict(),
        "pearson_delta_vs_distance": report.pearson_delta_vs_distance,
        "baseline_accuracy": report.baseline_accuracy,
    }, indent=2, sort_keys=True) + "\n")
    manifest.add_file(slopes_path)

    report_path = out_dir / "report.json"
    report_path.write_text(json.dumps(report.to_json_dict(), indent=2, sort_keys=True) + "\n")
    manifest.add_file(report_path)

    if args.dump_images:
        from .shifts import apply_shift
        from .geometry import sample_prior
        test_prior = sample_prior(exp.latent_dim, exp.n_test, exp.test_seed,
                                  stream_id=0, n_classes=exp.n_classes)
        targets = None
        if exp.family in ("extend", "overlap"):
            targets = derive_targets(exp.target_seed, exp.latent_dim)
        for g in exp.grid:
            spec = ShiftSpec.for_family(exp.family, float(g), exp.latent_dim, targets)
            values = apply_shift(test_prior.values, spec)
            images = decode_batch(values, test_prior.labels, exp.decoder)
            path = out_dir / f"shift_{g:.4f}.csim"
            clamped = write_images(images.astype(np.float32), test_prior.labels, path)
            manifest.add_file(path)
            if clamped:
                manifest.add_warning(f"clamped_values:{path.name}", clamped)

    manifest.write(out_dir / "manifest.json")
    _print_json({"out": str(out_dir),
                 "baseline_accuracy": report.baseline_accuracy,
                 "slope_vs_distance": report.slope_vs_distance.slope,
                 "pearson": report.pearson_delta_vs_distance})
    return 0


def _cmd_validate(args) -> int:
    for path in args.paths:
        info = validate_file(path)
        _print_json({"path": str(path), **info})
    return 0


_COMMANDS = {
    "gen-latents": _cmd_gen_latents,
    "intensity": _cmd_intensity,
    "nn-dist": _cmd_nn_dist,
    "slope": _cmd_slope,
    "toy-gen": _cmd_toy_gen,
    "toy-run": _cmd_toy_run,
    "validate": _cmd_validate,
}


def _diagnostic(kind: str, exc: Exception) -> None:
    entry = {"error": kind, "detail": str(exc)}
    if isinstance(exc, FormatError):
        entry["rule"] = exc.rule
        entry["offset"] = exc.offset
    print(json.dumps(entry, sort_keys=True), file=sys.stderr)


def cli_dispatch(argv) -> int:
    """Run one CLI invocation; returns the process exit code."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    except (UsageError, InvalidArgumentError) as exc:
        _diagnostic("usage", exc)
        return 1
    except (FormatError, OSError) as exc:
        _diagnostic("data", exc)
        return 2
    except (DegenerateGeometryError, InfeasibleGeometryError, DegenerateFitError,
            FloatingPointError) as exc:
        _diagnostic("numeric", exc)
        return 3


def main() -> None:
    sys.exit(cli_dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
