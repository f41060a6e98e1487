"""Parameter sweeps: optimize codes at an anchor point, evaluate them across a grid.

A sweep config is a JSON object::

    {"experiment": "bitflip",
     "noise": {"family": "bitflip_full", "qubits": 3, "p": 0.25},
     "sweep": {"var": "p", "grid": [0.0, 0.05, 0.1], "reoptimize": false},
     "codes": [{"optimize": {"p": 0.25}, "d": 2, "label": "opt"},
               {"fixture": "repetition3"},
               {"file": "code.json"},
               {"baseline": "uncorrected"}],
     "recovery": "petz",
     "optimizer": {"n_starts": 20, "seed": 0},
     "out": "curve.csv"}

``optimize`` entries are optimized once with the noise overridden by their
anchor values (``p``, ``q``, ``lambda``) and then evaluated at every grid
point; with ``reoptimize`` they are optimized afresh at each grid value.
Sweeping ``lambda`` always reoptimizes, since it changes the objective only.
The Petz recovery is recomputed at every grid value.
"""

from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .channels import KrausMap, NoiseSpec, build_noise, single_qubit_noise
from .codes import KNOWN_CODES, known_code
from .optimizer import OptConfig, multistart, optimize_recovery
from .qec import CodeFrame, cost_J, cro_fidelity, load_code

__all__ = ["CSV_COLUMNS", "SweepConfig", "CodeEntry", "evaluate", "run_sweep", "rows_to_csv", "write_csv"]

CSV_COLUMNS = ("experiment", "p", "q", "lambda", "seed", "code_label", "recovery", "J", "fidelity", "wall_time_s")
SWEEP_VARS = ("p", "q", "lambda")
RECOVERIES = ("petz", "optimized")


@dataclass(frozen=True)
class CodeEntry:
    kind: str  # optimize | fixture | file | baseline
    label: str
    value: object = None
    d: int = 2
    anchor: dict = field(default_factory=dict)


@dataclass(frozen=True)
class SweepConfig:
    experiment: str
    noise: NoiseSpec
    var: str
    grid: tuple[float, ...]
    codes: tuple[CodeEntry, ...]
    recovery: tuple[str, ...] = ("petz",)
    optimizer: OptConfig = OptConfig()
    reoptimize: bool = False
    out: str | None = None

    @classmethod
    def from_dict(cls, doc: dict) -> SweepConfig:
        if not isinstance(doc, dict):
            raise ValueError("config: expected a JSON object")
        known = {"experiment", "noise", "sweep", "codes", "recovery", "optimizer", "out"}
        unknown = sorted(set(doc) - known)
        if unknown:
            raise ValueError(f"config: unknown field(s) {', '.join(unknown)}")
        if "noise" not in doc:
            raise ValueError("noise: missing")
        noise = NoiseSpec.from_dict(doc["noise"])
        sweep = doc.get("sweep")
        if not isinstance(sweep, dict):
            raise ValueError("sweep: expected an object with 'var' and 'grid'")
        var = sweep.get("var")
        if var not in SWEEP_VARS:
            raise ValueError(f"sweep.var: expected one of {', '.join(SWEEP_VARS)}, got {var!r}")
        grid = sweep.get("grid")
        if not isinstance(grid, list) or not grid:
            raise ValueError("sweep.grid: expected a non-empty list of numbers")
        try:
            grid = tuple(float(g) for g in grid)
        except (TypeError, ValueError):
            raise ValueError("sweep.grid: expected numbers") from None
        for g in grid:
            if var == "lambda" and g < 0:
                raise ValueError(f"sweep.grid: lambda must be non-negative, got {g}")
            if var in ("p", "q") and not 0.0 <= g <= 1.0:
                raise ValueError(f"sweep.grid: {var} must lie in [0, 1], got {g}")
        codes = doc.get("codes")
        if not isinstance(codes, list) or not codes:
            raise ValueError("codes: expected a non-empty list")
        entries = tuple(_parse_code_entry(c, i) for i, c in enumerate(codes))
        rec = doc.get("recovery", "petz")
        rec = (rec,) if isinstance(rec, str) else tuple(rec)
        for r in rec:
            if r not in RECOVERIES:
                raise ValueError(f"recovery: expected 'petz' or 'optimized', got {r!r}")
        try:
            opt = OptConfig.from_dict(doc.get("optimizer", {}))
        except TypeError as exc:
            raise ValueError(f"optimizer: {exc}") from None
        return cls(
            experiment=str(doc.get("experiment", "sweep")),
            noise=noise,
            var=var,
            grid=grid,
            codes=entries,
            recovery=rec,
            optimizer=opt,
            reoptimize=bool(sweep.get("reoptimize", False)),
            out=doc.get("out"),
        )

    @classmethod
    def load(cls, path) -> SweepConfig:
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ValueError(f"config: invalid JSON ({exc})") from None
        return cls.from_dict(doc)


def _parse_code_entry(c, i: int) -> CodeEntry:
    where = f"codes[{i}]"
    if not isinstance(c, dict):
        raise ValueError(f"{where}: expected an object")
    d = c.get("d", 2)
    if not isinstance(d, int) or d < 1:
        raise ValueError(f"{where}.d: expected a positive integer")
    if "optimize" in c:
        anchor = c["optimize"] or {}
        if not isinstance(anchor, dict) or set(anchor) - set(SWEEP_VARS):
            raise ValueError(f"{where}.optimize: expected an object with keys among p, q, lambda")
        label = c.get("label") or "optimized@" + ",".join(f"{k}={v}" for k, v in sorted(anchor.items()))
        return CodeEntry("optimize", label, None, d, dict(anchor))
    if "fixture" in c:
        if c["fixture"] not in KNOWN_CODES:
            raise ValueError(f"{where}.fixture: unknown code {c['fixture']!r}")
        return CodeEntry("fixture", c.get("label", c["fixture"]), c["fixture"])
    if "file" in c:
        return CodeEntry("file", c.get("label", Path(c["file"]).stem), c["file"])
    if "baseline" in c:
        if c["baseline"] != "uncorrected":
            raise ValueError(f"{where}.baseline: only 'uncorrected' is supported")
        return CodeEntry("baseline", c.get("label", "uncorrected"), "uncorrected")
    raise ValueError(f"{where}: expected one of optimize, fixture, file, baseline")


def _spec_at(cfg: SweepConfig, value: float) -> tuple[NoiseSpec, float]:
    """Noise spec and lambda at one grid value."""
    if cfg.var == "lambda":
        return cfg.noise, value
    return cfg.noise.replace(**{cfg.var: value}), cfg.optimizer.lam


def evaluate(noise: KrausMap, code, recovery: str, cfg: OptConfig = OptConfig()) -> tuple[float, float]:
    """``(J, fidelity)`` of a code with Petz or optimized recovery."""
    frame = code if isinstance(code, CodeFrame) else CodeFrame(code)
    d2 = frame.d**2
    if recovery == "petz":
        J = cost_J(noise, frame)
    elif recovery == "optimized":
        J = optimize_recovery(noise, frame, cfg).final_J
    else:
        raise ValueError(f"recovery: unknown mode {recovery!r}")
    return J, J / d2


def _optimize(spec: NoiseSpec, d: int, cfg: OptConfig) -> CodeFrame:
    return multistart(build_noise(spec), d, cfg).best.frame


def run_sweep(cfg: SweepConfig, *, timing: bool = True) -> list[dict]:
    """Rows in grid order, then code order, then recovery order."""
    fixed: dict[int, CodeFrame] = {}
    for i, entry in enumerate(cfg.codes):
        if entry.kind == "fixture":
            fixed[i] = known_code(entry.value).frame
        elif entry.kind == "file":
            fixed[i] = load_code(entry.value)
        elif entry.kind == "optimize" and not cfg.reoptimize and cfg.var != "lambda":
            spec = cfg.noise.replace(**{k: v for k, v in entry.anchor.items() if k != "lambda"})
            lam = float(entry.anchor.get("lambda", cfg.optimizer.lam))
            fixed[i] = _optimize(spec, entry.d, replace(cfg.optimizer, lam=lam))

    rows = []
    for value in cfg.grid:
        spec, lam = _spec_at(cfg, value)
        noise = build_noise(spec)
        for i, entry in enumerate(cfg.codes):
            start = time.perf_counter()
            if entry.kind == "baseline":
                F = cro_fidelity(single_qubit_noise(spec), np.eye(2))
                results = [("none", 4.0 * F, F)]
            else:
                if i in fixed:
                    frame = fixed[i]
                else:
                    frame = _optimize(spec, entry.d, replace(cfg.optimizer, lam=lam))
                if frame.n != noise.dim:
                    raise ValueError(f"codes[{i}]: code dimension {frame.n} does not match noise dimension {noise.dim}")
                results = [(r, *evaluate(noise, frame, r, cfg.optimizer)) for r in cfg.recovery]
            elapsed = time.perf_counter() - start if timing else 0.0
            for rec, J, F in results:
                rows.append(
                    {
                        "experiment": cfg.experiment,
                        "p": spec.p,
                        "q": spec.q,
                        "lambda": lam,
                        "seed": cfg.optimizer.seed,
                        "code_label": entry.label,
                        "recovery": rec,
                        "J": J,
                        "fidelity": F,
                        "wall_time_s": elapsed,
                    }
                )
    return rows


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def rows_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for row in rows:
        w.writerow([_fmt(row[c]) for c in CSV_COLUMNS])
    return buf.getvalue()


def write_csv(rows: list[dict], path) -> None:
    Path(path).write_text(rows_to_csv(rows), encoding="utf-8")
