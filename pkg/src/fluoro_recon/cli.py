"""Command-line entry point: ``fluoro-recon {generate,reconstruct,train,eval}``.

Exit codes: 0 success, 1 usage error, 2 runtime or pipeline error. Logs go
to stderr. Option precedence is command-line flag, then ``--config`` JSON
file, then built-in default.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import geometry, metrics
from .curve import write_curve
from .errors import FluoroReconError
from .fgrn.io import load_model_with_metadata, save_model
from .fgrn.training import TrainConfig, history_to_csv
from .pipeline import DEFAULT_VIEW_SAMPLES, StageError, reconstruct
from .skeleton import read_pgm
from .synth import CurveConfig, generate_dataset, load_dataset
from .workflows import VIEWS, evaluate_dataset, train_on_dataset

log = logging.getLogger("fluoro_recon")

EXIT_USAGE = 1
EXIT_RUNTIME = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _pair(text):
    try:
        u, v = (float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'u,v', got {text!r}") from None
    return [u, v]


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    p = _Parser(prog="fluoro-recon", description=__doc__.splitlines()[0], formatter_class=fmt)
    p.add_argument("--config", help="JSON file of option defaults (flat, or keyed by subcommand)")
    p.add_argument("-q", "--quiet", action="store_true", help="only log warnings and errors")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS, help="JSON file of option defaults")
    common.add_argument("-q", "--quiet", action="store_true", default=argparse.SUPPRESS,
                        help="only log warnings and errors")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="write a synthetic dataset", formatter_class=fmt, parents=[common])
    g.add_argument("--out", required=True, help="output dataset directory")
    g.add_argument("--count", type=int, required=True, help="number of samples")
    g.add_argument("--seed", type=int, default=0, help="dataset seed")
    g.add_argument("--bodies", type=int, default=20, help="ground-truth bodies per sample")
    g.add_argument("--spacing", type=float, default=0.002, help="body spacing in meters")
    g.add_argument("--workspace", type=float, default=0.12, help="workspace cube edge in meters")
    g.add_argument("--length-min", type=float, default=0.04, help="shortest wire in meters")
    g.add_argument("--length-max", type=float, default=0.10, help="longest wire in meters")
    g.add_argument("--max-curvature", type=float, default=60.0, help="curvature bound in 1/m")
    g.add_argument("--radius-px", type=float, default=1.5, help="rendered stroke radius in pixels")
    g.add_argument("--cameras", help="camera rig JSON (default: built-in orthogonal rig)")

    r = sub.add_parser("reconstruct", help="triangulate a curve from top and side masks", formatter_class=fmt, parents=[common])
    r.add_argument("--top", required=True, help="top-view mask (binary PGM)")
    r.add_argument("--side", required=True, help="side-view mask (binary PGM)")
    r.add_argument("--cameras", required=True, help="camera rig JSON")
    r.add_argument("--out", required=True, help="output curve CSV")
    r.add_argument("--bodies", type=int, default=20, help="output point count")
    r.add_argument("--spacing", type=float, default=0.002,
                   help="body spacing in meters; keeps the distal (bodies-1)*spacing of the wire, 0 keeps it all")
    r.add_argument("--view-samples", type=int, default=DEFAULT_VIEW_SAMPLES, help="backbone samples per view")
    r.add_argument("--tip-top", type=_pair, help="distal tip hint 'u,v' in the top view")
    r.add_argument("--tip-side", type=_pair, help="distal tip hint 'u,v' in the side view")
    r.add_argument("--smoothing", type=float, default=0.0, help="spline smoothing factor in m^2")

    t = sub.add_parser("train", help="train the single-view shape regressor", formatter_class=fmt, parents=[common])
    t.add_argument("--dataset", required=True, help="dataset directory")
    t.add_argument("--out", required=True, help="output model file")
    t.add_argument("--history", help="loss history CSV (default: <out>.history.csv)")
    t.add_argument("--view", choices=VIEWS, default="top", help="input view")
    t.add_argument("--targets", choices=("reconstruction", "ground_truth"), default="reconstruction",
                   help="training targets")
    d = TrainConfig()
    t.add_argument("--epochs", type=int, default=d.epochs, help="training epochs")
    t.add_argument("--alpha", type=float, default=d.alpha, help="Huber term weight")
    t.add_argument("--beta", type=float, default=d.beta, help="spacing term weight")
    t.add_argument("--lr", type=float, default=d.lr, help="NAdam learning rate")
    t.add_argument("--batch-size", type=int, default=d.batch_size, help="mini-batch size")
    t.add_argument("--dropout", type=float, default=d.dropout, help="dropout rate")
    t.add_argument("--val-fraction", type=float, default=d.val_fraction, help="held-out fraction")
    t.add_argument("--seed", type=int, default=d.seed, help="training seed")

    e = sub.add_parser("eval", help="score reconstruction and model against ground truth", formatter_class=fmt, parents=[common])
    e.add_argument("--model", help="model file (omit to score reconstruction only)")
    e.add_argument("--dataset", required=True, help="dataset directory")
    e.add_argument("--out-report", required=True, help="JSON report (per-sample rows and aggregate)")
    e.add_argument("--out-profile", required=True, help="per-segment error CSV")
    e.add_argument("--out-csv", help="optional per-sample metrics CSV")
    e.add_argument("--split", choices=("all", "val"), default="all",
                   help="evaluate every sample or only the model's held-out split")
    return p


def _apply_config(parser, argv):
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    try:
        cfg = json.loads(Path(known.config).read_text())
    except (OSError, ValueError) as exc:
        parser.error(f"cannot read config file: {exc}")
    if not isinstance(cfg, dict):
        parser.error("config file must hold a JSON object")
    subparsers = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction)).choices
    flat = {k: v for k, v in cfg.items() if not isinstance(v, dict)}
    for name, sp in subparsers.items():
        values = {**flat, **cfg.get(name, {})}
        dests = {a.dest for a in sp._actions}
        unknown = set(cfg.get(name, {})) - dests
        if unknown:
            parser.error(f"unknown option(s) for {name} in config: {', '.join(sorted(unknown))}")
        values = {k.replace("-", "_"): v for k, v in values.items() if k.replace("-", "_") in dests}
        for a in sp._actions:
            if a.dest in values:
                a.required = False
        sp.set_defaults(**values)


def _write_points_csv(path, uv, header=("u_px", "v_px")):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in uv:
        w.writerow([repr(float(x)) for x in row])
    Path(path).write_text(buf.getvalue())


def cmd_generate(args):
    config = CurveConfig(
        workspace_size=args.workspace, length_range=(args.length_min, args.length_max),
        max_curvature=args.max_curvature, n_bodies=args.bodies, spacing=args.spacing, radius_px=args.radius_px,
    )
    rig = geometry.load_rig(args.cameras) if args.cameras else None
    manifest = generate_dataset(args.seed, args.count, config, args.out, rig)
    print(Path(args.out) / "manifest.json")
    return manifest


def cmd_reconstruct(args):
    try:
        rig = geometry.load_rig(args.cameras)
        top, side = read_pgm(args.top), read_pgm(args.side)
    except (OSError, ValueError, KeyError) as exc:
        raise StageError("input", exc) from exc
    spacing = args.spacing if args.spacing > 0 else None
    rec = reconstruct(top, side, rig, args.bodies, args.tip_top, args.tip_side, args.smoothing,
                      args.view_samples, spacing)
    out = Path(args.out)
    write_curve(out, rec.curve)
    for view, uv in zip(("top", "side"), rec.reprojections(rig)):
        _write_points_csv(out.with_name(f"{out.stem}_reproj_{view}.csv"), uv)
    print(out)
    return rec.curve


def cmd_train(args):
    dataset = load_dataset(args.dataset)
    config = TrainConfig(
        alpha=args.alpha, beta=args.beta, spacing=dataset.manifest.spacing, lr=args.lr, epochs=args.epochs,
        batch_size=args.batch_size, seed=args.seed, dropout=args.dropout, val_fraction=args.val_fraction,
    )
    result = train_on_dataset(dataset, args.view, config, args.targets)
    meta = {
        "view": args.view,
        "targets": args.targets,
        "train_config": config.to_dict(),
        "dataset_seed": dataset.manifest.seed,
        "val_indices": [int(i) for i in result.val_indices],
    }
    save_model(args.out, result.model, meta)
    history = args.history or f"{args.out}.history.csv"
    Path(history).write_text(history_to_csv(result.history))
    print(args.out)
    return result


def cmd_eval(args):
    dataset = load_dataset(args.dataset)
    model, meta = (None, {})
    if args.model:
        try:
            model, meta = load_model_with_metadata(args.model)
        except (OSError, ValueError) as exc:
            raise StageError("model", exc) from exc
    indices = None
    if args.split == "val":
        if "val_indices" not in meta:
            raise StageError("eval", "the model records no held-out split")
        indices = meta["val_indices"]
    reports = evaluate_dataset(dataset, model, meta.get("view", "top"), indices)
    Path(args.out_report).write_text(metrics.report_to_json(reports))
    if args.out_csv:
        Path(args.out_csv).write_text(metrics.reports_to_csv(reports))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["segment", "mean_error_mm", "method"])
    for r in reports:
        for i, v in enumerate(r.profile()):
            w.writerow([i, repr(float(v)), r.method])
    Path(args.out_profile).write_text(buf.getvalue())
    sys.stdout.write(metrics.format_table(reports))
    return reports


COMMANDS = {"generate": cmd_generate, "reconstruct": cmd_reconstruct, "train": cmd_train, "eval": cmd_eval}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _apply_config(parser, argv)
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(stream=sys.stderr, level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", force=True)
    resolved = {k: v for k, v in sorted(vars(args).items())}
    log.info("resolved config: %s", json.dumps(resolved, sort_keys=True, default=str))
    try:
        COMMANDS[args.command](args)
    except StageError as exc:
        print(f"fluoro-recon {args.command}: error in stage {exc.stage}: {exc.cause}", file=sys.stderr)
        return EXIT_RUNTIME
    except (FluoroReconError, OSError, ValueError) as exc:
        print(f"fluoro-recon {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return 0


if __name__ == "__main__":
    sys.exit(main())
