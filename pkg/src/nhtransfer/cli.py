"""Command-line pipeline: generate -> train -> predict -> diff -> heatmap.

Every subcommand accepts ``--config FILE``, a plain ``key=value`` file (``#``
comments allowed) whose keys are the long flag names with dashes or
underscores. Flags given on the command line override the file.

Each output file gets a ``<output>.manifest`` sidecar in ``key=value`` form
carrying the tool version, the subcommand, input digests, seed and summary
statistics. Manifests contain no timestamps, so reruns are byte-identical.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .boundaries import NO_ANALYTIC_BOUNDARY, analytic_boundaries, boundary_polylines, write_polylines_csv
from .dataset import (
    DatasetFormatError,
    SweepSpec,
    feature_matrix,
    fmt,
    generate,
    read_csv,
    write_csv,
)
from .hamiltonian import ModelParams
from .neuralnet import (
    CLASSES,
    TASK_HIDDEN,
    TASK_LABEL,
    TrainConfig,
    TrainingError,
    arch_for_task,
    load,
    predict,
    save,
    train,
)
from .pixmap import GridShapeError, as_image_grid, render, write_ppm

log = logging.getLogger("nhtransfer")

GRID_COLUMNS = ["eta", "u_over_t", "true", "pred", "diff", "valid"]
SPEC_KEYS = ["u_range", "eta_range", "delta_over_t", "count", "grid", "sampling", "seed",
             "L", "n_keep", "delta_pair_over_t", "inv_lambda"]


class CliError(Exception):
    pass


# ---------------------------------------------------------------- helpers

def read_config(path) -> dict:
    out = {}
    with open(path) as fh:
        for n, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise CliError(f"{path}: line {n}: expected key=value")
            key, value = line.split("=", 1)
            out[key.strip().replace("-", "_")] = value.strip()
    return out


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def manifest_path(path) -> Path:
    return Path(f"{path}.manifest")


def _mval(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return fmt(v)
    return str(v)


def write_manifest(path, command: str, items: dict) -> None:
    lines = ["tool=nhtransfer", f"version={__version__}", f"command={command}"]
    lines += [f"{k}={_mval(v)}" for k, v in items.items()]
    manifest_path(path).write_text("\n".join(lines) + "\n")


def read_manifest(path) -> dict:
    p = manifest_path(path)
    if not p.exists():
        return {}
    return dict(line.split("=", 1) for line in p.read_text().splitlines() if "=" in line)


def read_table(path):
    """Header plus float columns of a delimited file (blank and 'nan' -> NaN)."""
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None:
                raise CliError(f"{path}: empty file")
            rows = []
            for row in reader:
                if len(row) != len(header):
                    raise CliError(f"{path}: line {reader.line_num}: expected {len(header)} fields")
                try:
                    rows.append([float(x) if x != "" else math.nan for x in row])
                except ValueError as exc:
                    raise CliError(f"{path}: line {reader.line_num}: {exc}") from exc
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror}") from exc
    data = np.array(rows, dtype=float).reshape(len(rows), len(header))
    return header, {h: data[:, i] for i, h in enumerate(header)}


def _grid_cell(x: float, classification: bool) -> str:
    if not math.isfinite(x):
        return "nan"
    return str(int(x)) if classification else fmt(x)


def write_grid(path, eta, u, true, pred, valid, classification: bool) -> dict:
    """PhaseGrid CSV. Invalid cells keep the explicit ``nan`` sentinel in pred/diff."""
    true, pred = np.asarray(true, float), np.asarray(pred, float)
    valid = np.asarray(valid, bool) & np.isfinite(pred) & np.isfinite(true)
    if classification:
        diff = np.where(valid, (true != pred).astype(float), np.nan)
    else:
        diff = np.where(valid, true - pred, np.nan)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(GRID_COLUMNS)
        for row in zip(eta, u, true, pred, diff, valid):
            w.writerow([fmt(row[0]), fmt(row[1])] + [_grid_cell(v, classification) for v in row[2:5]]
                       + ["1" if row[5] else "0"])
    stats = {"cells": len(eta), "valid_cells": int(valid.sum()), "invalid_cells": int((~valid).sum())}
    if valid.any():
        if classification:
            stats["accuracy"] = float((diff[valid] == 0).mean())
        else:
            stats["mae"] = float(np.abs(diff[valid]).mean())
    return stats


def _add_common(p):
    p.add_argument("--config", help="key=value file supplying defaults for the flags below")
    p.add_argument("--png", help="also write a matplotlib report figure to this PNG path")


def _pair(text: str) -> tuple[float, float]:
    parts = [float(x) for x in text.split(",")]
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected 'min,max', got {text!r}")
    return parts[0], parts[1]


# ---------------------------------------------------------------- subcommands

def cmd_generate(args, parser) -> int:
    items = {k: getattr(args, k) for k in SPEC_KEYS if getattr(args, k) is not None}
    try:
        spec = SweepSpec.from_mapping(items)
    except (ValueError, TypeError) as exc:
        parser.error(f"invalid sweep spec: {exc}")
    records = generate(spec, workers=args.workers)
    write_csv(records, args.output)
    valid = [r for r in records if r.valid]
    counts = {c: sum(r.chi_class == c for r in valid) for c in CLASSES}
    write_manifest(args.output, "generate", {
        "spec_sha256": spec.digest(),
        **{f"spec.{line.split('=', 1)[0]}": line.split("=", 1)[1] for line in spec.to_text().splitlines()},
        "rows": len(records),
        "valid_rows": len(valid),
        **{f"class_{c}": n for c, n in counts.items()},
        "excursion_rows": sum(r.excursion for r in valid),
        "delta_over_t": spec.delta_over_t,
        "delta_pair_over_t": spec.delta_pair_over_t,
        "sha256": sha256_file(args.output),
    })
    log.info("wrote %d records to %s", len(records), args.output)
    return 0


def _training_set(path, task: str, which: str):
    label = TASK_LABEL[task]
    try:
        with open(path, newline="") as fh:
            header = next(csv.reader(fh), [])
    except OSError as exc:
        raise CliError(f"cannot read dataset {path}: {exc.strerror}") from exc
    if label not in header:
        raise CliError(f"dataset {path} has no label column '{label}' required by task {task}")
    try:
        records = [r for r in read_csv(path) if r.valid]
    except DatasetFormatError as exc:
        raise CliError(str(exc)) from exc
    if not records:
        raise CliError(f"dataset {path} has no valid records")
    return records, feature_matrix(records, which), np.array([getattr(r, label) for r in records], float)


def cmd_train(args, parser) -> int:
    if args.task not in TASK_HIDDEN:
        parser.error(f"--task must be one of {sorted(TASK_HIDDEN)}")
    if args.features not in ("two_point", "all"):
        parser.error("--features must be two_point or all")
    _, x, y = _training_set(args.data, args.task, args.features)
    hidden = None if not args.hidden else [int(h) for h in args.hidden.split(",")]
    arch = arch_for_task(args.task, x.shape[1], hidden)
    config = TrainConfig(learning_rate=args.learning_rate, batch_size=args.batch_size,
                         max_epochs=args.max_epochs, val_fraction=args.val_fraction,
                         target_val_loss=args.target_val_loss, seed=args.seed,
                         normalize_features=not args.raw_features)
    try:
        model = train(x, y, arch, config)
    except TrainingError as exc:
        raise CliError(f"training aborted: {exc}") from exc
    model.meta.update(task=args.task, features=args.features, label=TASK_LABEL[args.task],
                      dataset_sha256=sha256_file(args.data))
    save(model, args.output)
    curve = args.curve or f"{args.output}.curve.csv"
    with open(curve, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "train_loss", "val_loss"])
        for epoch, tl, vl in model.curve:
            w.writerow([epoch, fmt(tl), fmt(vl)])
    items = {k: model.meta[k] for k in sorted(model.meta)}
    items.update(curve=Path(curve).name, curve_sha256=sha256_file(curve), sha256=sha256_file(args.output))
    write_manifest(args.output, "train", items)
    if args.png:
        from .plotting import curve_png
        curve_png(args.png, model.curve, arch.loss)
    summary = model.meta.get("val_accuracy", model.meta.get("val_mae"))
    log.info("trained %s on %d records; validation %s", args.task, len(x), summary)
    return 0


def cmd_predict(args, parser) -> int:
    if bool(args.data) == bool(args.spec):
        parser.error("give exactly one of --data or --spec")
    try:
        model = load(args.model)
    except (OSError, ValueError) as exc:
        raise CliError(f"cannot load model {args.model}: {exc}") from exc
    meta = model.meta
    task, which = meta.get("task", "chi_class"), meta.get("features", "all")
    width = 32 if which == "two_point" else 64
    if model.arch.input_dim != width:
        raise CliError(f"model input width {model.arch.input_dim} does not match features '{which}'")
    source_manifest = {}
    if args.spec:
        cfg = read_config(args.spec)
        try:
            spec = SweepSpec.from_mapping(cfg)
        except ValueError as exc:
            parser.error(f"invalid sweep spec: {exc}")
        records = generate(spec, workers=args.workers)
        source = {"spec_sha256": spec.digest(), "delta_over_t": spec.delta_over_t,
                  "delta_pair_over_t": spec.delta_pair_over_t}
    else:
        try:
            records = read_csv(args.data)
        except OSError as exc:
            raise CliError(f"cannot read dataset {args.data}: {exc.strerror}") from exc
        except DatasetFormatError as exc:
            raise CliError(str(exc)) from exc
        source_manifest = read_manifest(args.data)
        source = {"data_sha256": sha256_file(args.data)}
        if "delta_pair_over_t" in source_manifest:
            source["delta_pair_over_t"] = source_manifest["delta_pair_over_t"]
        deltas = sorted({r.delta_over_t for r in records})
        if len(deltas) == 1:
            source["delta_over_t"] = deltas[0]
    if args.features_width is not None and args.features_width != model.arch.input_dim:
        raise CliError(f"feature width {args.features_width} differs from model width {model.arch.input_dim}")

    label = TASK_LABEL[task]
    classification = model.arch.is_classifier
    ok = np.array([r.valid and r.features is not None for r in records], bool)
    pred = np.full(len(records), np.nan)
    if ok.any():
        x = feature_matrix([r for r, f in zip(records, ok) if f], which)
        out = predict(model, x)
        pred[ok] = out[0] if classification else out
    true = np.array([getattr(r, label) for r in records], float)
    if classification:
        true = np.where(np.isin(true, CLASSES), true, np.nan)
    stats = write_grid(args.output, [r.eta for r in records], [r.u_over_t for r in records],
                       true, pred, ok, classification)
    write_manifest(args.output, "predict", {
        "model_sha256": sha256_file(args.model), "task": task, "features": which, "label": label,
        **source, **stats, "sha256": sha256_file(args.output)})
    if args.png and len(records):
        _grid_png(args.png, args.output, "pred", source.get("delta_over_t"), source.get("delta_pair_over_t", 1.0))
    log.info("predicted %d cells; %s", len(records),
             ", ".join(f"{k}={v}" for k, v in stats.items()))
    return 0


def _classification_like(*cols) -> bool:
    vals = np.concatenate([c[np.isfinite(c)] for c in cols])
    return bool(len(vals)) and bool(np.isin(vals, CLASSES).all())


def cmd_diff(args, parser) -> int:
    ha, a = read_table(args.true)
    hb, b = read_table(args.pred)
    for h, cols, path, col in ((ha, a, args.true, args.true_column), (hb, b, args.pred, args.pred_column)):
        for need in ("eta", "u_over_t", col):
            if need not in h:
                raise CliError(f"{path} has no column '{need}'")
    key_a = [(fmt(e), fmt(u)) for e, u in zip(a["eta"], a["u_over_t"])]
    key_b = {(fmt(e), fmt(u)): i for i, (e, u) in enumerate(zip(b["eta"], b["u_over_t"]))}
    if len(key_a) != len(key_b) or set(key_a) != set(key_b):
        raise CliError(f"grids {args.true} and {args.pred} have different (eta, u_over_t) axes")
    order = np.array([key_b[k] for k in key_a], dtype=int)
    true = a[args.true_column]
    pred = b[args.pred_column][order] if len(order) else np.zeros(0)
    valid = np.ones(len(true), bool)
    for cols, idx in ((a, slice(None)), (b, order)):
        if "valid" in cols and len(true):
            valid &= cols["valid"][idx] == 1
    kind = args.kind
    if kind == "auto":
        kind = "classification" if _classification_like(true, pred) else "regression"
    stats = write_grid(args.output, a["eta"], a["u_over_t"], true, pred, valid, kind == "classification")
    write_manifest(args.output, "diff", {"true_sha256": sha256_file(args.true),
                                         "pred_sha256": sha256_file(args.pred), "kind": kind, **stats})
    if args.png and len(true):
        _grid_png(args.png, args.output, "diff", None, 1.0)
    return 0


def cmd_boundaries(args, parser) -> int:
    if args.delta_pair_over_t != 1.0:
        analytic = analytic_boundaries(ModelParams(delta_pair=args.delta_pair_over_t, delta_nh=args.delta_over_t))
        if analytic is NO_ANALYTIC_BOUNDARY:
            raise CliError("analytic boundaries exist only at delta_pair_over_t = 1")
    try:
        lines = boundary_polylines(args.eta_range, args.delta_over_t, args.resolution)
    except ValueError as exc:
        parser.error(str(exc))
    write_polylines_csv(lines, args.output)
    write_manifest(args.output, "boundaries", {
        "eta_range": f"{fmt(args.eta_range[0])},{fmt(args.eta_range[1])}",
        "delta_over_t": args.delta_over_t, "resolution": args.resolution,
        "branches": len(lines), "families": ",".join(sorted({l.family for l in lines}))})
    if args.png:
        from .plotting import boundaries_png
        boundaries_png(args.png, lines, title=f"delta/t = {fmt(args.delta_over_t)}")
    return 0


def _overlay_lines(eta_axis, delta, delta_pair, height):
    if delta is None or not len(eta_axis):
        return []
    delta_pair = float(delta_pair)
    if analytic_boundaries(ModelParams(delta_pair=delta_pair, delta_nh=float(delta))) is NO_ANALYTIC_BOUNDARY:
        return []
    return boundary_polylines((eta_axis[0], eta_axis[-1]), float(delta), max(200, 4 * height))


def _load_image_grid(path, column):
    header, cols = read_table(path)
    for need in ("eta", "u_over_t", column):
        if need not in header:
            raise CliError(f"{path} has no column '{need}'")
    valid = cols["valid"] == 1 if "valid" in cols else None
    try:
        return as_image_grid(cols["eta"], cols["u_over_t"], cols[column], valid)
    except GridShapeError as exc:
        raise CliError(f"{path}: {exc}") from exc


def _grid_png(png, grid_path, column, delta, delta_pair, vmin=None, vmax=None):
    from .plotting import heatmap_png
    eta_axis, u_axis, grid, valid = _load_image_grid(grid_path, column)
    vmin, vmax = _value_range(grid, valid, vmin, vmax)
    lines = _overlay_lines(eta_axis, delta, delta_pair, len(eta_axis))
    heatmap_png(png, eta_axis, u_axis, grid, valid, vmin, vmax, lines, title=column, label=column)


def _value_range(grid, valid, vmin, vmax):
    good = grid[valid & np.isfinite(grid)]
    lo = float(good.min()) if good.size else 0.0
    hi = float(good.max()) if good.size else 1.0
    return (lo if vmin is None else vmin), (hi if vmax is None else vmax)


def cmd_heatmap(args, parser) -> int:
    eta_axis, u_axis, grid, valid = _load_image_grid(args.grid, args.column)
    vmin, vmax = _value_range(grid, valid, args.vmin, args.vmax)
    lines = []
    if args.overlay:
        manifest = read_manifest(args.grid)
        delta = args.delta_over_t if args.delta_over_t is not None else manifest.get("delta_over_t")
        if delta is None:
            raise CliError("--overlay needs --delta-over-t (no delta_over_t in the grid manifest)")
        lines = _overlay_lines(eta_axis, delta, manifest.get("delta_pair_over_t", 1.0), len(eta_axis) * args.scale)
    img = render(grid, valid, vmin, vmax, args.scale, lines, eta_axis, u_axis)
    write_ppm(img, args.output)
    write_manifest(args.output, "heatmap", {
        "grid_sha256": sha256_file(args.grid), "column": args.column, "vmin": vmin, "vmax": vmax,
        "scale": args.scale, "overlay_branches": len(lines),
        "overlay_families": ",".join(sorted({l.family for l in lines})),
        "sha256": sha256_file(args.output)})
    if args.png:
        from .plotting import heatmap_png
        heatmap_png(args.png, eta_axis, u_axis, grid, valid, vmin, vmax, lines, title=args.column, label=args.column)
    return 0


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nhtransfer", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="sweep the (U/t, eta) plane and write a dataset CSV")
    _add_common(g)
    g.add_argument("--output", required=True)
    g.add_argument("--workers", type=int, default=1)
    for key in SPEC_KEYS:
        g.add_argument("--" + key.replace("_", "-"), dest=key, default=None,
                       help="sweep setting (see README)")
    g.set_defaults(func=cmd_generate)

    t = sub.add_parser("train", help="train a network on a dataset CSV")
    _add_common(t)
    t.add_argument("--data", required=True)
    t.add_argument("--task", default="chi_class", help="entropy | chi_reg | chi_class")
    t.add_argument("--features", default="all", help="two_point (32 columns) | all (64 columns)")
    t.add_argument("--output", required=True, help="model file path")
    t.add_argument("--curve", help="training curve CSV (default <output>.curve.csv)")
    t.add_argument("--hidden", help="comma-separated hidden widths overriding the task default")
    t.add_argument("--learning-rate", type=float, default=1e-6)
    t.add_argument("--batch-size", type=int, default=64)
    t.add_argument("--max-epochs", type=int, default=200)
    t.add_argument("--val-fraction", type=float, default=0.1)
    t.add_argument("--target-val-loss", type=float, default=0.005)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--raw-features", action="store_true", help="skip z-score standardization")
    t.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="apply a model to a dataset or sweep and write a PhaseGrid CSV")
    _add_common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--data", help="dataset CSV")
    p.add_argument("--spec", help="sweep spec file to generate on the fly")
    p.add_argument("--output", required=True)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--features-width", type=int, help="assert the model's input width")
    p.set_defaults(func=cmd_predict)

    d = sub.add_parser("diff", help="cellwise difference of two PhaseGrid CSVs")
    _add_common(d)
    d.add_argument("--true", required=True, help="grid supplying the reference column")
    d.add_argument("--pred", required=True, help="grid supplying the compared column")
    d.add_argument("--true-column", default="true")
    d.add_argument("--pred-column", default="pred")
    d.add_argument("--kind", default="auto", choices=["auto", "classification", "regression"])
    d.add_argument("--output", required=True)
    d.set_defaults(func=cmd_diff)

    b = sub.add_parser("boundaries", help="write analytic boundary polylines")
    _add_common(b)
    b.add_argument("--eta-range", type=_pair, default=(-0.95, 0.95))
    b.add_argument("--delta-over-t", type=float, default=0.0)
    b.add_argument("--delta-pair-over-t", type=float, default=1.0)
    b.add_argument("--resolution", type=int, default=200)
    b.add_argument("--output", required=True)
    b.set_defaults(func=cmd_boundaries)

    h = sub.add_parser("heatmap", help="render a grid column as a P6 image")
    _add_common(h)
    h.add_argument("--grid", required=True)
    h.add_argument("--column", default="pred")
    h.add_argument("--vmin", type=float)
    h.add_argument("--vmax", type=float)
    h.add_argument("--scale", type=int, default=8, help="pixels per grid cell")
    h.add_argument("--overlay", action="store_true", help="draw analytic boundaries")
    h.add_argument("--delta-over-t", type=float, help="delta for the overlay (default: grid manifest)")
    h.add_argument("--output", required=True)
    h.set_defaults(func=cmd_heatmap)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    # required flags may come from --config; parse leniently first
    pre = build_parser()
    for sp in pre._subparsers._group_actions[0].choices.values():
        for a in sp._actions:
            a.required = False
    first = pre.parse_args(argv)
    if getattr(first, "config", None):
        args = _apply_config_to(parser, first.command, first.config, argv)
    else:
        args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    try:
        return args.func(args, parser)
    except CliError as exc:
        print(f"nhtransfer: error: {exc}", file=sys.stderr)
        return 1


def _apply_config_to(parser, command, path, argv):
    try:
        cfg = read_config(path)
    except OSError as exc:
        parser.error(f"cannot read config {path}: {exc.strerror}")
    except CliError as exc:
        parser.error(str(exc))
    subparser = parser._subparsers._group_actions[0].choices[command]
    known = {a.dest for a in subparser._actions} - {"help", "config", "func"}
    unknown = sorted(set(cfg) - known)
    if unknown:
        parser.error(f"unknown config key(s) for {command}: {', '.join(unknown)}")
    for action in subparser._actions:
        if action.dest in cfg:
            action.required = False
            if isinstance(action, argparse._StoreTrueAction):
                cfg[action.dest] = cfg[action.dest].lower() in ("1", "true", "yes", "on")
    subparser.set_defaults(**cfg)
    return parser.parse_args(argv)


if __name__ == "__main__":
    sys.exit(main())
