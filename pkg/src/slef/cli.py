"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 data error (bad files, invalid
specs), 3 numerical degeneracy (collapsed ellipse, singular fit).

A pair directory holds ``frame1.pfm``, ``frame2.pfm`` and optionally
``truth_phase.pfm`` plus a ``pair.json`` sidecar with the generating spec
and the true phase step.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import replace

import numpy as np

from . import __version__, demod, gfb, io, pipeline, synth
from .errors import DataError, NumericalError, SlefError
from .field import ScalarField

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 0, 1, 2, 3
PHASE_RANGE = (-math.pi, math.pi)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# -- helpers -------------------------------------------------------------------

def _read_json(path):
    try:
        with open(path, "rb") as fh:
            text = fh.read().decode("utf-8")
    except UnicodeDecodeError as exc:
        raise DataError(f"{path}: not UTF-8 text ({exc})") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None


def _write_json(obj, path=None):
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def write_pair(pair: synth.InterferogramPair, out_dir, spec: synth.PairSpec | None = None):
    os.makedirs(out_dir, exist_ok=True)
    io.save_field(pair.frame1, os.path.join(out_dir, "frame1.pfm"))
    io.save_field(pair.frame2, os.path.join(out_dir, "frame2.pfm"))
    if pair.truth_phase is not None:
        io.save_field(pair.truth_phase, os.path.join(out_dir, "truth_phase.pfm"))
    meta = {"truth_step": pair.truth_step, "spec": spec.to_dict() if spec is not None else None}
    _write_json(meta, os.path.join(out_dir, "pair.json"))


def load_pair(path=None, frames=None, truth=None) -> synth.InterferogramPair:
    """Pair from a directory or from explicit frame files."""
    step = None
    if frames:
        f1, f2 = (io.load_field(p) for p in frames)
        t = io.load_field(truth) if truth else None
    elif path:
        if not os.path.isdir(path):
            raise DataError(f"{path} is not a pair directory")
        f1 = io.load_field(os.path.join(path, "frame1.pfm"))
        f2 = io.load_field(os.path.join(path, "frame2.pfm"))
        tp = truth or os.path.join(path, "truth_phase.pfm")
        t = io.load_field(tp) if os.path.exists(tp) else None
        meta_path = os.path.join(path, "pair.json")
        if os.path.exists(meta_path):
            step = _read_json(meta_path).get("truth_step")
    else:
        raise UsageError("give a pair directory or --frames FRAME1 FRAME2")
    return synth.InterferogramPair(f1, f2, t, step)


def build_config(args) -> pipeline.PipelineConfig:
    cfg = pipeline.PipelineConfig()
    if getattr(args, "config", None):
        cfg = pipeline.PipelineConfig.from_dict(_read_json(args.config))
    gcfg = {k: getattr(args, k) for k in ("periods", "orientations", "sigma_ratio", "window_ratio")
            if getattr(args, k, None) is not None}
    if gcfg:
        cfg = replace(cfg, gfb=replace(cfg.gfb, **gcfg))
    robust = cfg.robust
    if args.kappa is not None:
        robust = replace(robust, kappa=args.kappa)
    if args.iterations is not None:
        robust = replace(robust, max_iterations=args.iterations)
    changes = {"robust": robust}
    if args.stride is not None:
        changes["stride"] = args.stride
    if args.border_crop is not None:
        changes["border_crop"] = args.border_crop
    if args.skip_normalize:
        changes["skip_normalize"] = True
    if args.piston_removal:
        changes["piston_removal"] = True
    if args.blend or args.blend_sigma is not None:
        changes["blend"] = True
    if args.blend_sigma is not None:
        changes["blend_sigma"] = args.blend_sigma
    if getattr(args, "methods", None):
        changes["methods"] = tuple(args.methods)
    return replace(cfg, **changes)


def _save_phase(pm: demod.PhaseMapResult, out_dir, stem="phase"):
    io.save_field(pm.phase, os.path.join(out_dir, f"{stem}.pfm"))
    io.save_field(pm.phase, os.path.join(out_dir, f"{stem}.png"), value_range=PHASE_RANGE)


# -- subcommands ---------------------------------------------------------------

def cmd_generate(args) -> int:
    doc = _read_json(args.spec)
    if isinstance(doc, dict) and ("suite" in doc or "pairs" in doc):
        if args.seed is not None:
            doc = dict(doc)
            if "suite" in doc:
                doc["suite"] = {**(doc["suite"] or {}), "base_seed": args.seed}
        specs = pipeline.parse_suite(doc)
        for i, spec in enumerate(specs):
            write_pair(synth.generate_pair(spec), os.path.join(args.out_dir, f"pair_{i:04d}"), spec)
        print(f"wrote {len(specs)} pairs to {args.out_dir}")
        return EXIT_OK
    if not isinstance(doc, dict):
        raise DataError(f"{args.spec}: expected a JSON object")
    spec = synth.PairSpec.from_dict(doc)
    if args.seed is not None:
        spec = synth.with_seed(spec, args.seed)
    write_pair(synth.generate_pair(spec), args.out_dir, spec)
    print(f"wrote pair to {args.out_dir}")
    return EXIT_OK


def cmd_normalize(args) -> int:
    cfg = build_config(args)
    image = io.load_field(args.input)
    resp = gfb.normalize(image, cfg.gfb, keep_filter_magnitudes=args.dump_intermediates)
    out = resp.normalized
    if cfg.lowpass_sigma is not None:
        out = gfb.low_freq_blend(resp, image, cfg.lowpass_sigma)
    io.save_field(out, args.output, value_range=(-1.0, 1.0))
    if args.dump_intermediates:
        base = os.path.splitext(args.output)[0]
        io.save_field(resp.magnitude, base + "_magnitude.pfm")
        io.save_field(resp.phase, base + "_phase.pfm")
        io.save_field(ScalarField(resp.winner.astype(np.float64)), base + "_winner.pfm")
        for i, mag in enumerate(resp.filter_magnitudes):
            io.save_field(mag, f"{base}_filter{i:03d}.pfm")
    return EXIT_OK


def cmd_estimate_step(args) -> int:
    cfg = build_config(args)
    pair = load_pair(args.pair, args.frames, None)
    n1, n2 = pipeline.normalize_frames(pair.frame1, pair.frame2, cfg)
    out = {}
    for m, est in pipeline.estimate_steps(n1, n2, cfg).items():
        d = est.to_dict()
        if pair.truth_step is not None:
            d["abs_error"] = abs(float(demod.wrap_to_pi(est.delta - pair.truth_step)))
        out[m.value] = d
    _write_json(out)
    return EXIT_OK


def cmd_demodulate(args) -> int:
    cfg = build_config(args)
    pair = load_pair(args.pair, args.frames, args.truth)
    res = pipeline.demodulate(pair.frame1, pair.frame2, cfg, args.method, pair.truth_phase)
    report = res.to_dict()
    if pair.truth_step is not None:
        report["true_delta"] = pair.truth_step
        report["delta_abs_error"] = abs(float(demod.wrap_to_pi(res.estimate.delta - pair.truth_step)))
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        _save_phase(res.phase, args.out)
        _write_json(report, os.path.join(args.out, "report.json"))
        if res.report is not None:
            io.save_field(res.report.error_map, os.path.join(args.out, "error_map.pfm"))
        if args.dump_intermediates:
            io.save_field(res.n1, os.path.join(args.out, "normalized1.pfm"))
            io.save_field(res.n2, os.path.join(args.out, "normalized2.pfm"))
            add, sub = pipeline.centered_add_sub(res.n1, res.n2, cfg.stride, cfg.border)
            io.save_field(ScalarField(add), os.path.join(args.out, "add.pfm"))
            io.save_field(ScalarField(sub), os.path.join(args.out, "sub.pfm"))
            _write_json(cfg.to_dict(), os.path.join(args.out, "config.json"))
    _write_json(report)
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = build_config(args)
    doc = _read_json(args.suite)
    if args.seed is not None and isinstance(doc, dict) and "suite" in doc:
        doc = {**doc, "suite": {**(doc["suite"] or {}), "base_seed": args.seed}}
    specs = pipeline.parse_suite(doc)
    result = pipeline.sweep(specs, cfg, workers=args.workers)
    text = result.to_csv(timing=not args.no_timing)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if args.summary:
        with open(args.summary, "w", newline="") as fh:
            fh.write(result.summary_csv())
    if result.failures:
        print(f"{len(result.failures)} of {len(result.rows)} rows failed", file=sys.stderr)
    return EXIT_OK


def cmd_compare(args) -> int:
    cfg = build_config(args)
    pair = load_pair(args.pair, args.frames, args.truth)
    if pair.truth_phase is None:
        raise DataError("compare needs a ground-truth phase (truth_phase.pfm or --truth)")
    rows = pipeline.compare_phase(pair.frame1, pair.frame2, pair.truth_phase, cfg)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        for r in rows:
            io.save_field(r.error_map, os.path.join(args.out, f"error_{r.variant}.pfm"))
        _write_json([r.to_dict() for r in rows], os.path.join(args.out, "compare.json"))
    width = max(len(r.variant) for r in rows)
    print(f"{'variant':<{width}}  {'delta':>10}  {'mae':>10}  {'mae_nopiston':>12}")
    for r in rows:
        print(f"{r.variant:<{width}}  {r.delta:10.6f}  {r.mae:10.6f}  {r.mae_piston_removed:12.6f}")
    return EXIT_OK


# -- parser --------------------------------------------------------------------

def _add_pipeline_flags(p, methods=True):
    p.add_argument("--config", help="pipeline config JSON")
    p.add_argument("--stride", type=int, help="use every N-th pixel for the cloud")
    p.add_argument("--border-crop", type=int, help="pixels dropped on each side (default: largest filter half-width)")
    p.add_argument("--kappa", type=float, help="Leclerc outlier sensitivity")
    p.add_argument("--iterations", type=int, help="maximum IRLS iterations (the first is plain LS)")
    p.add_argument("--skip-normalize", action="store_true", help="treat frames as already normalized")
    p.add_argument("--piston-removal", action="store_true", help="remove the mean phase offset before scoring")
    p.add_argument("--blend", action="store_true", help="blend low frequencies of the original back in")
    p.add_argument("--blend-sigma", type=float, help="low-pass sigma for --blend (default: largest period)")
    p.add_argument("--periods", type=float, nargs="+", help="filter-bank periods in pixels")
    p.add_argument("--orientations", type=int, help="filter-bank orientation count")
    p.add_argument("--sigma-ratio", type=float, help="Gaussian sigma as a fraction of the period")
    p.add_argument("--window-ratio", type=float, help="kernel half-extent as a multiple of the period")
    p.add_argument("--dump-intermediates", action="store_true", help="write intermediate fields")
    if methods:
        p.add_argument("--methods", nargs="+", choices=[m.value for m in demod.Method])


def _add_pair_args(p, truth=True):
    p.add_argument("pair", nargs="?", help="pair directory")
    p.add_argument("--frames", nargs=2, metavar=("FRAME1", "FRAME2"))
    if truth:
        p.add_argument("--truth", help="ground-truth phase field")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="slef", description="Two-frame phase-shifting demodulation "
                     "with filter-bank normalization and robust ellipse fitting.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("generate", help="render synthetic pairs from a JSON spec")
    p.add_argument("spec")
    p.add_argument("out_dir")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("normalize", help="filter-bank normalize one fringe pattern")
    p.add_argument("input")
    p.add_argument("output")
    _add_pipeline_flags(p, methods=False)
    p.set_defaults(func=cmd_normalize)

    p = sub.add_parser("estimate-step", help="estimate the phase step of a pair")
    _add_pair_args(p, truth=False)
    _add_pipeline_flags(p)
    p.set_defaults(func=cmd_estimate_step)

    p = sub.add_parser("demodulate", help="recover the phase map of a pair")
    _add_pair_args(p)
    _add_pipeline_flags(p, methods=False)
    p.add_argument("--method", default=demod.Method.SLEF_RE.value, choices=[m.value for m in demod.Method])
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_demodulate)

    p = sub.add_parser("sweep", help="run a suite and write the results CSV")
    p.add_argument("suite")
    _add_pipeline_flags(p)
    p.add_argument("--seed", type=int, help="override the suite base seed")
    p.add_argument("--out", help="CSV path (default: stdout)")
    p.add_argument("--summary", help="write per-(method, noise) and per-(method, step) aggregates here")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--no-timing", action="store_true", help="leave wall_time empty for byte-stable output")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("compare", help="phase MAE of every estimator/formula combination")
    _add_pair_args(p)
    _add_pipeline_flags(p, methods=False)
    p.add_argument("--out", help="directory for error maps and compare.json")
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"slef: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"slef: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (SlefError, OSError) as exc:
        print(f"slef: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
