"""Batch command line front end.

Exit codes: 0 success, 1 usage / insufficient data, 2 I/O or schema,
3 numeric failure or tolerance exceeded. Diagnostics go to stderr. Every
command that writes a file also writes ``<out>.manifest.json``.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .errors import (
    ConfigurationError,
    DanceRecalError,
    DegenerateRotationError,
    InsufficientDataError,
    InvalidMatrixError,
    NumericError,
)
from .formats import (
    FORMAT_VERSION,
    REPORT_SCHEMA,
    atomic_write_text,
    canonical_json,
    dumps_params,
    file_sha256,
    read_beats,
    read_motion,
    read_params,
    read_skeleton,
    read_templates,
    text_sha256,
    write_motion,
    write_report,
)
from .metrics import (
    FsrThresholds,
    boundary_discontinuity,
    default_templates,
    default_templates_text,
    evaluate,
)
from .motion import default_skeleton, validate
from .noise import NoiseConfig
from .pooling import (
    init_params,
    jacobian_relative_error,
    pooling_jacobian_analytic,
    pooling_jacobian_fd,
)
from .recalibration import RecalConfig, parse_preset, recalibrate_sequence
from .synth import KINDS, describe, synthesize

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_NUMERIC = 0, 1, 2, 3


def _preset(text):
    try:
        parse_preset(text)
    except ConfigurationError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None
    return text


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _positive_float(text):
    v = float(text)
    if not (np.isfinite(v) and v > 0):
        raise argparse.ArgumentTypeError(f"must be > 0, got {text}")
    return v


def _nonnegative_float(text):
    v = float(text)
    if not (np.isfinite(v) and v >= 0):
        raise argparse.ArgumentTypeError(f"must be >= 0, got {text}")
    return v


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _manifest(command, inputs, config, seed, runtime_ms, extra=None) -> dict:
    m = {
        "format_version": FORMAT_VERSION,
        "command": command,
        "toolkit_version": __version__,
        "inputs": {k: {"path": str(p), "sha256": file_sha256(p)} for k, p in inputs.items()
                   if p is not None},
        "config": config,
        "seed": seed,
        "runtime_ms": runtime_ms,
    }
    if extra:
        m.update(extra)
    return m


def _write_manifest(out, manifest) -> None:
    atomic_write_text(Path(str(out) + ".manifest.json"), canonical_json(manifest))


def _elapsed_ms(t0) -> float:
    return max((time.perf_counter() - t0) * 1e3, 0.0)


def _recal_config(args) -> tuple:
    noise = NoiseConfig(args.noise_threshold, args.seed, enabled=args.noise_threshold > 0)
    if args.params is not None:
        params = read_params(args.params)
        return RecalConfig(params, noise), {"params_sha256": file_sha256(args.params)}
    cfg = parse_preset(args.preset)
    cfg = RecalConfig(cfg.params, noise, cfg.preset, cfg.alpha)
    return cfg, {"preset": args.preset, "params_sha256": text_sha256(dumps_params(cfg.params))}


def cmd_recalibrate(args) -> int:
    seq = read_motion(args.inp)
    cfg, config = _recal_config(args)
    config.update(noise_threshold=cfg.noise.threshold)
    t0 = time.perf_counter()
    out = recalibrate_sequence(seq, cfg)
    runtime = _elapsed_ms(t0)
    write_motion(out, args.out)
    _write_manifest(args.out, _manifest("recalibrate", {"in": args.inp}, config, args.seed, runtime))
    return EXIT_OK


def cmd_metrics(args) -> int:
    gen = read_motion(args.gen)
    ref = read_motion(args.ref)
    if args.skeleton:
        skeleton, skel_hash = read_skeleton(args.skeleton), file_sha256(args.skeleton)
    else:
        skeleton = default_skeleton()
        skel_hash = text_sha256(canonical_json({"format_version": FORMAT_VERSION,
                                                **skeleton.as_dict()}))
    music = read_beats(args.beats)
    if args.templates:
        templates, tpl_hash = read_templates(args.templates), file_sha256(args.templates)
    else:
        templates, tpl_hash = default_templates(), text_sha256(default_templates_text())
    th = FsrThresholds(args.height_max, args.speed_min)
    t0 = time.perf_counter()
    result = evaluate(gen, ref, skeleton, music, templates, th, args.sigma, args.window)
    runtime = _elapsed_ms(t0)
    config = {
        "fsr_thresholds": th.as_dict(),
        "bas_sigma": float(args.sigma),
        "kinematic_beat_window": args.window,
        "templates_sha256": tpl_hash,
        "skeleton_sha256": skel_hash,
        "template_count": len(templates),
    }
    report = {"format_version": FORMAT_VERSION, **result, "runtime_ms": runtime, "config": config}
    write_report(report, args.out, REPORT_SCHEMA)
    inputs = {"gen": args.gen, "ref": args.ref, "skeleton": args.skeleton, "beats": args.beats,
              "templates": args.templates}
    _write_manifest(args.out, _manifest("metrics", inputs, config, None, runtime))
    return EXIT_OK


def gradcheck(params, seed: int, eps: float) -> float:
    gen = np.random.Generator(np.random.Philox(key=np.array([seed & (2**64 - 1), 0x6C],
                                                            dtype=np.uint64)))
    pair = gen.standard_normal((2, 126))
    return jacobian_relative_error(pooling_jacobian_analytic(pair, params),
                                   pooling_jacobian_fd(pair, params, eps))


def cmd_gradcheck(args) -> int:
    if args.params is not None:
        params, config = read_params(args.params), {"params_sha256": file_sha256(args.params)}
    elif args.preset is not None:
        params = parse_preset(args.preset).params
        config = {"preset": args.preset}
    else:
        params, config = init_params(args.seed), {"init": "default", "init_seed": args.seed}
    t0 = time.perf_counter()
    dev = gradcheck(params, args.seed, args.eps)
    runtime = _elapsed_ms(t0)
    ok = dev <= args.tol
    print(f"max relative deviation: {dev:.3e} (tolerance {args.tol:.1e}) {'PASS' if ok else 'FAIL'}")
    if args.out:
        config.update(eps=args.eps, tolerance=args.tol)
        write_report({"format_version": FORMAT_VERSION, "max_relative_deviation": dev,
                      "passed": ok, "runtime_ms": runtime, "config": config}, args.out)
        _write_manifest(args.out, _manifest("gradcheck", {"params": args.params}, config,
                                            args.seed, runtime))
    return EXIT_OK if ok else EXIT_NUMERIC


def cmd_synth(args) -> int:
    t0 = time.perf_counter()
    seq = synthesize(args.kind, args.n, args.batch, args.seed, args.fps)
    runtime = _elapsed_ms(t0)
    problems = validate(seq)
    if problems:
        raise NumericError(f"synthesized sequence is invalid: {problems[0]}")
    write_motion(seq, args.out)
    config = {"kind": args.kind, "n": args.n, "batch": args.batch, "fps": args.fps,
              "parameters": describe(args.kind)}
    _write_manifest(args.out, _manifest("synth", {}, config, args.seed, runtime))
    return EXIT_OK


def cmd_compare(args) -> int:
    seq = read_motion(args.inp)
    if seq.length < 2:
        raise InsufficientDataError("compare needs at least 2 primitives per row")
    cfg, config = _recal_config(args)
    config.update(noise_threshold=cfg.noise.threshold)
    t0 = time.perf_counter()
    before = boundary_discontinuity(seq)
    after = boundary_discontinuity(recalibrate_sequence(seq, cfg))
    runtime = _elapsed_ms(t0)
    degenerate = before.mean == 0.0
    ratio = 1.0 if degenerate else after.mean / before.mean
    report = {
        "format_version": FORMAT_VERSION,
        "before": {"mean": before.mean, "per_junction": before.per_junction.tolist()},
        "after": {"mean": after.mean, "per_junction": after.per_junction.tolist()},
        "ratio": ratio,
        "ratio_degenerate": degenerate,
        "runtime_ms": runtime,
        "config": config,
    }
    write_report(report, args.out)
    _write_manifest(args.out, _manifest("compare", {"in": args.inp}, config, args.seed, runtime))
    return EXIT_OK


def _add_recal_source(p, default_preset=None):
    g = p.add_mutually_exclusive_group(required=default_preset is None)
    g.add_argument("--params", help="pooling params JSON file")
    g.add_argument("--preset", type=_preset, default=default_preset, help="passthrough | ema:ALPHA")
    p.add_argument("--noise-threshold", type=_nonnegative_float, default=0.0,
                   help="std of the noise added to the previous output (default 0)")
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dancerecal", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("recalibrate", help="run recurrent recalibration over a motion file")
    p.add_argument("--in", dest="inp", required=True, help="input motion JSON")
    p.add_argument("--out", required=True, help="output motion JSON")
    _add_recal_source(p)
    p.set_defaults(func=cmd_recalibrate)

    p = sub.add_parser("metrics", help="evaluate generated motion against a reference")
    p.add_argument("--gen", required=True)
    p.add_argument("--ref", required=True)
    p.add_argument("--skeleton", help="skeleton JSON (default: bundled 22-joint humanoid)")
    p.add_argument("--beats", required=True, help="music beats JSON")
    p.add_argument("--templates", help="geometric templates JSON (default: bundled 32)")
    p.add_argument("--out", required=True)
    p.add_argument("--sigma", type=_positive_float, default=3.0, help="BAS kernel width in frames")
    p.add_argument("--window", type=_positive_int, default=2, help="kinematic beat half-window")
    p.add_argument("--height-max", type=_positive_float, default=0.05)
    p.add_argument("--speed-min", type=_positive_float, default=0.01)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("gradcheck", help="compare analytic and finite-difference Jacobians")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--params")
    g.add_argument("--preset", type=_preset)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--eps", type=_positive_float, default=1e-4)
    p.add_argument("--tol", type=_positive_float, default=1e-5)
    p.add_argument("--out", help="optional JSON report")
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("synth", help="write a deterministic synthetic motion file")
    p.add_argument("--kind", required=True, choices=KINDS)
    p.add_argument("--n", type=_positive_int, default=13)
    p.add_argument("--batch", type=_positive_int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--fps", type=_positive_float, default=30.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("compare", help="boundary discontinuity before vs after recalibration")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    _add_recal_source(p, default_preset="ema:0.5")
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # --help, --version and usage errors
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return args.func(args)
    except InsufficientDataError as exc:
        print(f"error: insufficient data: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericError, DegenerateRotationError, InvalidMatrixError) as exc:
        print(f"error: numeric: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DanceRecalError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
