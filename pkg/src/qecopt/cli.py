"""Command-line entry point: ``qecopt optimize | certify | sweep | recover-opt``.

Exit codes: 0 success (for ``certify``: correctable), 1 not correctable,
2 bad configuration or input file, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .channels import NoiseSpec, build_noise, kraus_from_json, save_kraus
from .codes import KNOWN_CODES, known_code, sparsity_report
from .linalg import NotPSDError
from .optimizer import OptConfig, multistart, optimize_recovery
from .qec import DegenerateCodeError, cost_J, knill_laflamme_check, load_code, save_code
from .stiefel import RankDeficientError
from .sweep import SweepConfig, run_sweep, write_csv

log = logging.getLogger("qecopt")

EXIT_OK, EXIT_NOT_CORRECTABLE, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3
NUMERIC_ERRORS = (DegenerateCodeError, NotPSDError, RankDeficientError, np.linalg.LinAlgError, FloatingPointError)


class ConfigError(Exception):
    pass


def _add_noise_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("noise")
    g.add_argument("--noise", help="noise spec JSON ({\"family\": ...}) or Kraus JSON file")
    g.add_argument("--family", help="built-in noise family")
    g.add_argument("--qubits", type=int, default=None)
    g.add_argument("--p", type=float, default=None)
    g.add_argument("--q", type=float, default=None)


def _add_opt_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("optimizer")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--max-iters", type=int, default=500)
    g.add_argument("--grad-tol", type=float, default=1e-7)
    g.add_argument("--retraction", choices=("qr", "exp"), default="qr")
    g.add_argument("--no-bb", action="store_true", help="disable Barzilai-Borwein initial steps")


def _opt_config(args, **extra) -> OptConfig:
    return OptConfig(
        max_iters=args.max_iters,
        grad_tol=args.grad_tol,
        retraction=args.retraction,
        use_bb=not args.no_bb,
        seed=args.seed,
        **extra,
    )


def _read_json(path, what: str):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"{what}: file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{what}: invalid JSON in {path} ({exc})") from None


def _noise(args):
    if args.noise:
        doc = _read_json(args.noise, "--noise")
        if isinstance(doc, dict) and "family" in doc:
            spec = NoiseSpec.from_dict(doc)
            for key in ("qubits", "p", "q"):
                if getattr(args, key) is not None:
                    spec = spec.replace(**{key: getattr(args, key)})
            return build_noise(spec), spec
        return kraus_from_json(doc), None
    if not args.family:
        raise ConfigError("noise: give --family (with --qubits/--p/--q) or --noise FILE")
    spec = NoiseSpec(
        family=args.family,
        qubits=1 if args.qubits is None else args.qubits,
        p=0.0 if args.p is None else args.p,
        q=0.0 if args.q is None else args.q,
    )
    return build_noise(spec), spec


def _code(args):
    if getattr(args, "fixture", None):
        return known_code(args.fixture).frame
    if not args.code:
        raise ConfigError("code: give --code FILE or --fixture NAME")
    if not Path(args.code).exists():
        raise ConfigError(f"--code: file not found: {args.code}")
    return load_code(args.code)


def _emit(report: dict, path=None) -> None:
    text = json.dumps(report, indent=2, allow_nan=False)
    print(text)
    if path:
        Path(path).write_text(text + "\n", encoding="utf-8")


def cmd_optimize(args) -> int:
    noise, spec = _noise(args)
    cfg = _opt_config(args, lam=args.lam, n_starts=args.starts)
    res = multistart(noise, args.d, cfg)
    best = res.best
    save_code(best.frame, args.out)
    d2 = args.d**2
    report = {
        "noise": spec.to_dict() if spec else noise.label,
        "d": args.d,
        "lambda": args.lam,
        "n_starts": args.starts,
        "best_seed": best.seed,
        "J": best.final_J,
        "fidelity": best.final_J / d2,
        "objective": best.objective,
        "iterations": best.iterations,
        "converged": best.converged,
        "stop_reason": best.stop_reason,
        "grad_norm": best.grad_norm,
        "all_J": [r.final_J for r in res.all],
        "sparsity": [[[k, a] for k, a in col] for col in sparsity_report(best.frame, args.sparsity_threshold)],
        "code_file": str(args.out),
    }
    _emit(report, args.report or Path(args.out).with_suffix(".report.json"))
    return EXIT_OK


def cmd_certify(args) -> int:
    noise, _ = _noise(args)
    code = _code(args)
    kl = knill_laflamme_check(noise, code, args.tol)
    J = cost_J(noise, code)
    d2 = code.d**2
    _emit(
        {
            "correctable": kl.correctable,
            "kl_deviation": kl.deviation,
            "J": J,
            "d2": d2,
            "fidelity_with_petz": J / d2,
        }
    )
    return EXIT_OK if kl.correctable else EXIT_NOT_CORRECTABLE


def cmd_recover_opt(args) -> int:
    noise, _ = _noise(args)
    code = _code(args)
    before = cost_J(noise, code)
    res = optimize_recovery(noise, code, _opt_config(args))
    after = max(res.final_J, before)
    save_kraus(res.frame.to_kraus("optimized recovery"), args.out)
    d2 = code.d**2
    _emit(
        {
            "fidelity_petz": before / d2,
            "fidelity_optimized": res.final_J / d2,
            "improvement": (after - before) / d2,
            "kraus_rank": res.frame.r,
            "iterations": res.iterations,
            "stop_reason": res.stop_reason,
            "isometry_deviation": res.frame.isometry_deviation(),
            "recovery_file": str(args.out),
        }
    )
    return EXIT_OK


def cmd_sweep(args) -> int:
    if not Path(args.config).exists():
        raise ConfigError(f"config: file not found: {args.config}")
    cfg = SweepConfig.load(args.config)
    if args.seed is not None:
        cfg = replace(cfg, optimizer=replace(cfg.optimizer, seed=args.seed))
    out = args.out or cfg.out
    if not out:
        raise ConfigError("out: no output path (set 'out' in the config or pass --out)")
    rows = run_sweep(cfg, timing=not args.no_timing)
    write_csv(rows, out)
    print(f"wrote {len(rows)} rows to {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qecopt", description="Optimize and certify quantum error correcting subspace codes.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("optimize", help="multistart code optimization")
    _add_noise_args(p)
    _add_opt_args(p)
    p.add_argument("--d", type=int, required=True, help="code dimension")
    p.add_argument("--starts", type=int, default=20)
    p.add_argument("--lambda", dest="lam", type=float, default=0.0, help="l1 regularization weight")
    p.add_argument("--sparsity-threshold", type=float, default=1e-3)
    p.add_argument("--out", required=True, help="code JSON output")
    p.add_argument("--report", help="run report JSON (default: <out>.report.json)")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("certify", help="Knill-Laflamme check and Petz fidelity of a code")
    _add_noise_args(p)
    p.add_argument("--code", help="code JSON file")
    p.add_argument("--fixture", choices=KNOWN_CODES)
    p.add_argument("--tol", type=float, default=1e-8, help="Knill-Laflamme tolerance (optimized codes sit ~1e-9 off)")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("sweep", help="evaluate codes across a parameter grid, write CSV")
    p.add_argument("config", help="sweep config JSON")
    p.add_argument("--out", help="CSV output (overrides the config)")
    p.add_argument("--seed", type=int, default=None, help="override optimizer seed")
    p.add_argument("--no-timing", action="store_true", help="write 0.0 in wall_time_s for byte-reproducible output")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("recover-opt", help="optimize the recovery for a fixed code")
    _add_noise_args(p)
    _add_opt_args(p)
    p.add_argument("--code", help="code JSON file")
    p.add_argument("--fixture", choices=KNOWN_CODES)
    p.add_argument("--out", required=True, help="recovery Kraus JSON output")
    p.set_defaults(func=cmd_recover_opt)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except NUMERIC_ERRORS as exc:
        print(f"qecopt: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, ValueError, KeyError, OSError) as exc:
        print(f"qecopt: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
