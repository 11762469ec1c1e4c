"""Command line front end: ``gen``, ``train``, ``eval`` and ``importance``.

Every failure prints a single ``ERRCODE:<name>: <message>`` line on stderr and
exits with 2 (data or configuration), 3 (training diverged) or 4 (I/O).
"""

from __future__ import annotations

import argparse
import functools
import os
import sys
import tempfile

from . import __version__
from .dataset import FABRIC_TAGS, FactorialDesign, default_design, generate_synthetic, lab_design, parse_csv, write_csv
from .errors import CakeNetError
from .importance import importance
from .metrics import SPACES, evaluate, report_json
from .mlp import load_model, save_model
from .pipeline import FIT_NORM_CHOICES, PipelineConfig, run_training
from .svg import importance_bar_svg, scatter_svg

EXIT_IO = 4
# the lab preset is a template: its single pressure and filtration-time levels are placeholders
PRESETS = {
    "default": default_design,
    "lab": functools.partial(lab_design, pressure=(6.0,), filtration_time=(30.0,)),
}


def write_atomic(path, text):
    """Write ``text`` to ``path`` through a temporary file in the same directory."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_text(path):
    with open(path, encoding="utf-8", newline="") as fh:
        return fh.read()


def cmd_gen(args):
    if args.design:
        design = FactorialDesign.from_json(read_text(args.design))
    else:
        design = PRESETS[args.preset]()
    ds = generate_synthetic(design)
    write_atomic(args.out, write_csv(ds))
    print(f"wrote {len(ds)} rows to {args.out}")


def cmd_design(args):
    design = PRESETS[args.preset]()
    write_atomic(args.out, design.to_json())
    print(f"wrote {args.preset} design ({design.size} runs) to {args.out}")


def cmd_train(args):
    ds = parse_csv(read_text(args.data), args.fabric)
    overrides = dict(train_fraction=args.train_fraction, seed=args.seed, fit_norm_on=args.fit_norm_on)
    if args.config:
        config = PipelineConfig.from_json(read_text(args.config), **overrides)
    else:
        config = PipelineConfig.from_dict({}, **overrides)
    result = run_training(ds, config)
    write_atomic(args.model_out, save_model(result.model))
    if args.history_out:
        write_atomic(args.history_out, result.history.to_csv())
    if args.test_out:
        write_atomic(args.test_out, write_csv(result.test_set))
    if args.train_out:
        write_atomic(args.train_out, write_csv(result.train_set))
    sizes = "-".join(str(s) for s in result.model.layer_sizes)
    print(
        f"trained {sizes} {result.model.hidden_activation} network on {len(result.train_set)} rows "
        f"({len(result.test_set)} held out), {result.history.epochs} epochs, "
        f"final loss {result.history.train_loss[-1]:.6g}"
    )


def cmd_eval(args):
    model = load_model(read_text(args.model))
    ds = parse_csv(read_text(args.data), args.fabric)
    reports = {space: evaluate(model, ds, space) for space in SPACES}
    shown = reports[args.space]
    write_atomic(args.report_out, report_json([reports["physical"], reports["normalized"]]))
    if args.pairs_out:
        write_atomic(args.pairs_out, shown.pairs_csv())
    if args.svg_out:
        label = "cake moisture" if args.space == "physical" else "cake moisture (standardized)"
        write_atomic(args.svg_out, scatter_svg(shown.pairs, title=f"Predicted vs actual ({ds.fabric_tag})", label=label))
    r2 = "undefined" if shown.r2 is None else f"{shown.r2:.4f}"
    print(f"{shown.n} rows, {args.space}: R2 {r2}  MSE {shown.mse:.4g}  MAE {shown.mae:.4g}")


def cmd_importance(args):
    model = load_model(read_text(args.model))
    report = importance(model)
    write_atomic(args.out, report.to_csv())
    if args.svg_out:
        write_atomic(args.svg_out, importance_bar_svg(report.ranked()))
    if args.json_out:
        write_atomic(args.json_out, report.to_json())
    for name, score, pct in report.ranked():
        print(f"{name:20s} {pct:6.2f}%  {'+' if score >= 0 else '-'}")


def build_parser():
    parser = argparse.ArgumentParser(prog="cakenet", description="Filter-cake moisture MLP pipeline.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="write a synthetic full-factorial dataset")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--design", help="design JSON (per-feature levels, replicates, noise_std, seed)")
    src.add_argument("--preset", choices=sorted(PRESETS), default="default")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("design", help="write a preset design file to edit")
    p.add_argument("--preset", choices=sorted(PRESETS), default="default")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("train", help="split, standardize and train")
    p.add_argument("--data", required=True)
    p.add_argument("--config", help="training config JSON")
    p.add_argument("--model-out", required=True)
    p.add_argument("--history-out")
    p.add_argument("--test-out", help="write the held-out rows as CSV")
    p.add_argument("--train-out", help="write the training rows as CSV")
    p.add_argument("--train-fraction", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--fit-norm-on", choices=FIT_NORM_CHOICES)
    p.add_argument("--fabric", choices=FABRIC_TAGS, default="S1")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score a model on a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--report-out", required=True)
    p.add_argument("--pairs-out")
    p.add_argument("--svg-out")
    p.add_argument("--space", choices=SPACES, default="physical", help="space for the pairs CSV and scatter")
    p.add_argument("--fabric", choices=FABRIC_TAGS, default="S1")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("importance", help="connection-weight input importance")
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--svg-out")
    p.add_argument("--json-out")
    p.set_defaults(func=cmd_importance)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except CakeNetError as exc:
        print(f"ERRCODE:{exc.code}: {_one_line(exc)}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"ERRCODE:IOError: {_one_line(exc)}", file=sys.stderr)
        return EXIT_IO
    return 0


def _one_line(exc):
    return " ".join(str(exc).split())


if __name__ == "__main__":
    sys.exit(main())
