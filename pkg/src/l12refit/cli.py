"""Command-line entry point: ``l12refit {denoise,deblur,refit,prox-check,info}``.

Exit codes: 0 success, 1 prox-check tolerance failure, 2 bad arguments,
3 I/O failure, 4 invalid solver parameters.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import __version__, kernels
from .errors import StepSizeViolation, UnsupportedFormat
from .experiments import RNG_ALGORITHM, ExperimentConfig, run_experiment, write_outputs
from .penalties import Penalty
from .proxcheck import TOLERANCE, prox_check

EXIT_OK, EXIT_CHECK, EXIT_USAGE, EXIT_IO, EXIT_PARAMS = 0, 1, 2, 3, 4
PENALTIES = [p.value for p in Penalty]


def _size(text):
    parts = text.lower().split("x")
    if len(parts) != 2 or not all(p.isdigit() for p in parts):
        raise argparse.ArgumentTypeError(f"expected HxW, got {text!r}")
    h, w = int(parts[0]), int(parts[1])
    if h < 16 or w < 16:
        raise argparse.ArgumentTypeError("synthetic images need H, W >= 16")
    return text.lower()


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _add_run_flags(p, default_noise):
    src = p.add_mutually_exclusive_group()
    src.add_argument("--input", help="8-bit PNG source image")
    src.add_argument("--synthetic", type=_size, metavar="HxW",
                     help="use the synthetic color-squares image")
    p.add_argument("--config", type=Path,
                   help="re-run from a config.txt written by a previous run")
    p.add_argument("--noise-std", type=float, default=default_noise)
    p.add_argument("--lambda-factor", type=float, default=4.3,
                   help="lambda = lambda_factor * noise_std (default 4.3)")
    p.add_argument("--penalty", choices=PENALTIES, default="sd")
    p.add_argument("--iters", type=_positive_int, default=1000)
    p.add_argument("--tau", type=float, default=0.25)
    p.add_argument("--sigma", type=float, default=1.0 / 6.0, help="dual step size")
    p.add_argument("--theta", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mode", choices=["joint", "posterior"], default="joint")
    p.add_argument("--support-rule", choices=["strict", "extended"], default="strict")
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.add_argument("--force", action="store_true", help="overwrite existing outputs")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="l12refit",
                                     description="l12 analysis regularization with block-penalty refitting")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("denoise", help="denoise a noisy color image")
    _add_run_flags(p, default_noise=None)

    p = sub.add_parser("deblur", help="deblur a directionally blurred image")
    _add_run_flags(p, default_noise=2.0)
    p.add_argument("--blur-len", type=_positive_int, default=9)
    p.add_argument("--blur-angle", type=float, default=45.0, metavar="DEG")

    p = sub.add_parser("refit", help="restore an already degraded image (no synthetic noise)")
    _add_run_flags(p, default_noise=None)

    p = sub.add_parser("prox-check", help="compare closed-form proxes with the numerical oracle")
    p.add_argument("--penalty", choices=PENALTIES, required=True)
    p.add_argument("--trials", type=_positive_int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--b", type=int, default=2, help="block size in [1, 6]")

    sub.add_parser("info", help="print backend and default parameters")
    return parser


def _config_from_args(parser, args) -> ExperimentConfig:
    if args.config is not None:
        try:
            return ExperimentConfig.from_text(args.config.read_text())
        except OSError as exc:
            raise _IOFailure(str(exc)) from exc
        except (ValueError, SyntaxError) as exc:
            parser.error(f"bad config file: {exc}")
    if args.input is None and args.synthetic is None:
        parser.error("one of --input or --synthetic is required")
    if args.noise_std is None:
        parser.error("--noise-std is required")
    kw = dict(task=args.command, noise_std=args.noise_std, lambda_factor=args.lambda_factor,
              penalty=args.penalty, tau=args.tau, sigma=args.sigma, theta=args.theta,
              iterations=args.iters, seed=args.seed, mode=args.mode,
              support_rule=args.support_rule, input=args.input, synthetic=args.synthetic)
    if args.command == "deblur":
        kw.update(blur_length=args.blur_len, blur_angle=args.blur_angle)
    try:
        return ExperimentConfig(**kw)
    except ValueError as exc:
        parser.error(str(exc))


class _IOFailure(Exception):
    pass


def _run(parser, args) -> int:
    config = _config_from_args(parser, args)
    if config.input is not None and not Path(config.input).is_file():
        print(f"error: input file {config.input} not found", file=sys.stderr)
        return EXIT_IO
    out = args.out
    if out.exists() and not out.is_dir():
        print(f"error: {out} is not a directory", file=sys.stderr)
        return EXIT_IO
    try:
        result = run_experiment(config)
    except (StepSizeViolation, ValueError) as exc:
        if isinstance(exc, UnsupportedFormat):
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_IO
        print(f"error: invalid solver parameters: {exc}", file=sys.stderr)
        return EXIT_PARAMS
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        write_outputs(result, out, force=args.force)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    print(f"PSNR input={result.psnr_input:.2f} biased={result.psnr_biased:.2f} "
          f"refit={result.psnr_refit:.2f} dB")
    return EXIT_OK


def _prox_check(parser, args) -> int:
    if not 1 <= args.b <= 6:
        parser.error("--b must lie in [1, 6]")
    report = prox_check(args.penalty, args.trials, args.b, args.seed)
    line = f"{report.penalty.value} b={report.b} trials={report.trials} oracle_max_err={report.max_oracle_error:.3e}"
    if report.max_moreau_residual is not None:
        line += f" moreau_max_res={report.max_moreau_residual:.3e}"
    print(line)
    print(f"max error {report.max_error:.3e} ({'ok' if report.passed else 'FAIL'}, tol {TOLERANCE:g})")
    return EXIT_OK if report.passed else EXIT_CHECK


def _info() -> int:
    print(f"l12refit {__version__}")
    print(f"kernel backend: {kernels.BACKEND}")
    print(f"rng: {RNG_ALGORITHM}")
    print("defaults: tau=0.25 sigma=1/6 theta=1.0 iterations=1000 lambda=4.3*noise_std")
    print(f"penalties: {', '.join(PENALTIES)}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command in ("denoise", "deblur", "refit"):
            return _run(parser, args)
        if args.command == "prox-check":
            return _prox_check(parser, args)
        return _info()
    except _IOFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
