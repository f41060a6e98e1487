"""Riemannian gradient ascent on the Stiefel manifold.

The same loop drives the code optimization (frame ``U``, objective
``J - lam ||U||_1``) and the recovery optimization (Stinespring stack,
objective ``sum |tr(R_j N_k Pi)|^2``). Steps follow the canonical-metric
Riemannian gradient, are chosen by Armijo backtracking started from a
Barzilai-Borwein guess, and are mapped back by a retraction.
"""

from __future__ import annotations

import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from typing import Callable

import numpy as np

from .channels import KrausMap
from .codes import haar_isometry
from .gradients import egrad_cost_J, egrad_l1, egrad_recovery
from .qec import (
    CodeFrame,
    DegenerateCodeError,
    RecoveryStack,
    as_frame,
    cost_J,
    l1_norm,
    petz_stack,
    recovery_cost,
)
from .stiefel import (
    RankDeficientError,
    canonical_inner,
    isometry_deviation,
    renormalize,
    retract,
    riemannian_grad,
)

__all__ = [
    "OptConfig",
    "OptResult",
    "StepRecord",
    "MultistartResult",
    "backtrack",
    "bb_step",
    "optimize_code",
    "multistart",
    "optimize_recovery",
]

log = logging.getLogger(__name__)

MAX_SHRINKS = 60
BB_MIN, BB_MAX = 1e-10, 1e4
STALL_TOL = 1e-12
STALL_COUNT = 5
DRIFT_TOL = 1e-8
MAX_REDRAWS = 10


@dataclass(frozen=True)
class OptConfig:
    max_iters: int = 500
    grad_tol: float = 1e-7
    c1: float = 1e-4
    tau: float = 0.5
    t0: float = 1.0
    use_bb: bool = True
    retraction: str = "qr"
    lam: float = 0.0
    l1_sign: float = -1.0
    seed: int = 0
    n_starts: int = 1

    def __post_init__(self):
        if not 0 < self.c1 < 1:
            raise ValueError(f"c1 must lie in (0, 1), got {self.c1}")
        if not 0 < self.tau < 1:
            raise ValueError(f"tau must lie in (0, 1), got {self.tau}")
        if not self.t0 > 0:
            raise ValueError(f"t0 must be positive, got {self.t0}")
        if self.max_iters < 0:
            raise ValueError("max_iters must be non-negative")
        if self.grad_tol < 0:
            raise ValueError("grad_tol must be non-negative")
        if self.lam < 0:
            raise ValueError(f"lambda must be non-negative, got {self.lam}")
        if self.retraction not in ("qr", "exp"):
            raise ValueError(f"retraction must be 'qr' or 'exp', got {self.retraction!r}")
        if self.n_starts < 1:
            raise ValueError("n_starts must be at least 1")

    @classmethod
    def from_dict(cls, doc: dict) -> OptConfig:
        doc = dict(doc)
        if "lambda" in doc:
            doc["lam"] = doc.pop("lambda")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(doc) - known)
        if unknown:
            raise ValueError(f"optimizer: unknown field(s) {', '.join(unknown)}")
        return cls(**doc)

    def to_dict(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in fields(self)}
        out["lambda"] = out.pop("lam")
        return out


@dataclass(frozen=True)
class StepRecord:
    objective: float
    J: float
    grad_norm: float
    step: float


@dataclass(eq=False)
class OptResult:
    frame: CodeFrame | RecoveryStack
    final_J: float
    objective: float
    iterations: int
    trace: list[StepRecord] = field(default_factory=list)
    converged: bool = False
    stop_reason: str = ""
    wall_time: float = 0.0
    seed: int | None = None

    @property
    def grad_norm(self) -> float:
        return self.trace[-1].grad_norm if self.trace else float("nan")


@dataclass(eq=False)
class MultistartResult:
    best: OptResult
    all: list[OptResult]


def backtrack(
    phi: Callable[[float], float], phi0: float, slope0: float, cfg: OptConfig, t0: float | None = None
) -> tuple[float, float] | None:
    """Largest ``t`` in ``{t0 tau^i}`` with ``phi(t) >= phi0 + c1 t slope0``.

    Returns ``(t, phi(t))``, or ``None`` when no step is admissible after
    ``MAX_SHRINKS`` shrinks.
    """
    t = cfg.t0 if t0 is None else t0
    for _ in range(MAX_SHRINKS + 1):
        val = phi(t)
        if np.isfinite(val) and val >= phi0 + cfg.c1 * t * slope0:
            return t, val
        t *= cfg.tau
    return None


def bb_step(dU, dG, fallback: float = 1.0) -> float:
    """Two-point step ``Re<dU, dG> / Re<dG, dG>`` clamped to ``[1e-10, 1e4]``.

    A zero ``dG`` or a non-positive estimate (no curvature information)
    returns ``fallback``: backtracking only shrinks, so seeding it with the
    lower clamp would freeze the iteration.
    """
    dU = np.asarray(dU)
    dG = np.asarray(dG)
    den = float(np.real(np.vdot(dG, dG)))
    if den == 0.0:
        return fallback
    t = float(np.real(np.vdot(dU, dG))) / den
    if not t > 0:
        return fallback
    return float(np.clip(t, BB_MIN, BB_MAX))


# --- generic ascent -------------------------------------------------------

@dataclass
class _Problem:
    objective: Callable[[np.ndarray], float]
    egrad: Callable[[np.ndarray], np.ndarray]
    raw_cost: Callable[[np.ndarray], float]


def _ascend(prob: _Problem, X0: np.ndarray, cfg: OptConfig):
    X = np.array(X0, dtype=complex)
    f = prob.objective(X)
    G = riemannian_grad(X, prob.egrad(X))
    slope = canonical_inner(X, G, G)
    trace = [StepRecord(f, prob.raw_cost(X), float(np.sqrt(max(slope, 0.0))), 0.0)]
    stalls = 0
    it = 0
    t_next = cfg.t0
    reason = "max_iters"
    converged = False
    while True:
        if trace[-1].grad_norm < cfg.grad_tol:
            reason, converged = "grad_tol", True
            break
        if it >= cfg.max_iters:
            break

        def phi(t, X=X, G=G):
            try:
                return prob.objective(retract(X, t * G, cfg.retraction))
            except (RankDeficientError, DegenerateCodeError, np.linalg.LinAlgError):
                return -np.inf

        found = backtrack(phi, f, slope, cfg, t_next)
        if found is None:
            reason, converged = "step_underflow", True
            break
        t, f_new = found
        X_new = retract(X, t * G, cfg.retraction)
        if isometry_deviation(X_new) > DRIFT_TOL:
            X_new = renormalize(X_new, "polar")
            f_new = prob.objective(X_new)
        G_new = riemannian_grad(X_new, prob.egrad(X_new))
        slope = canonical_inner(X_new, G_new, G_new)
        it += 1
        trace.append(StepRecord(f_new, prob.raw_cost(X_new), float(np.sqrt(max(slope, 0.0))), t))
        stalls = stalls + 1 if abs(f_new - f) < STALL_TOL else 0
        # ascent: the BB formula is applied to the negated gradient difference
        t_next = bb_step(X_new - X, -(G_new - G), cfg.t0) if cfg.use_bb else cfg.t0
        X, G, f = X_new, G_new, f_new
        if stalls >= STALL_COUNT:
            reason, converged = "stalled", True
            break
    return X, f, it, trace, converged, reason


# --- code optimization ----------------------------------------------------

def _code_problem(noise: KrausMap, cfg: OptConfig) -> _Problem:
    lam, sign = cfg.lam, cfg.l1_sign

    def objective(U):
        val = cost_J(noise, U)
        return val + sign * lam * l1_norm(U) if lam else val

    def egrad(U):
        G = egrad_cost_J(noise, U).egrad
        return G + sign * egrad_l1(U, lam) if lam else G

    return _Problem(objective, egrad, lambda U: cost_J(noise, U))


def _start_frame(noise: KrausMap, d: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    for attempt in range(MAX_REDRAWS):
        U = haar_isometry(noise.dim, d, rng)
        try:
            cost_J(noise, U)
            return U
        except DegenerateCodeError:
            log.warning("seed %d: degenerate start (attempt %d), redrawing", seed, attempt + 1)
    raise DegenerateCodeError(f"seed {seed}: no usable start after {MAX_REDRAWS} draws")


def optimize_code(noise: KrausMap, d: int, cfg: OptConfig = OptConfig(), U0=None) -> OptResult:
    """Maximize ``J(U) + l1_sign * lam * ||U||_1`` over ``n x d`` isometries."""
    if not 1 <= d <= noise.dim:
        raise ValueError(f"need 1 <= d <= n = {noise.dim}, got d = {d}")
    start = time.perf_counter()
    if U0 is None:
        U0 = _start_frame(noise, d, cfg.seed)
    else:
        U0 = as_frame(U0).U
        if U0.shape != (noise.dim, d):
            raise ValueError(f"start frame has shape {U0.shape}, expected {(noise.dim, d)}")
    # BB guesses built from l1 subgradients chatter near zero entries and
    # freeze the line search, so they are only used on the smooth objective
    run_cfg = replace(cfg, use_bb=False) if cfg.lam > 0 else cfg
    X, f, it, trace, converged, reason = _ascend(_code_problem(noise, cfg), U0, run_cfg)
    X = renormalize(X, "polar") if isometry_deviation(X) > 1e-10 else X
    return OptResult(
        frame=CodeFrame(X),
        final_J=cost_J(noise, X),
        objective=f,
        iterations=it,
        trace=trace,
        converged=converged,
        stop_reason=reason,
        wall_time=time.perf_counter() - start,
        seed=cfg.seed,
    )


def _run_seed(args) -> OptResult:
    noise, d, cfg = args
    return optimize_code(noise, d, cfg)


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("QECOPT_THREADS", "1")))
    except ValueError:
        return 1


def _better(a: OptResult, b: OptResult, tol: float = 1e-12) -> bool:
    """``a`` beats ``b``: higher objective, then lower l1 norm, then lower seed."""
    if abs(a.objective - b.objective) > tol:
        return a.objective > b.objective
    la, lb = l1_norm(a.frame.U), l1_norm(b.frame.U)
    if abs(la - lb) > tol:
        return la < lb
    return (a.seed or 0) < (b.seed or 0)


def multistart(noise: KrausMap, d: int, cfg: OptConfig = OptConfig(), workers: int | None = None) -> MultistartResult:
    """``cfg.n_starts`` runs with seeds ``seed, seed + 1, ...``; results in seed order."""
    cfgs = [replace(cfg, seed=cfg.seed + i, n_starts=1) for i in range(cfg.n_starts)]
    workers = _threads() if workers is None else max(1, workers)
    jobs = [(noise, d, c) for c in cfgs]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            runs = list(pool.map(_run_seed, jobs))
    else:
        runs = [_run_seed(j) for j in jobs]
    best = runs[0]
    for r in runs[1:]:
        if _better(r, best):
            best = r
    return MultistartResult(best=best, all=runs)


# --- recovery optimization ------------------------------------------------

def optimize_recovery(noise: KrausMap, code, cfg: OptConfig = OptConfig(), R0=None) -> OptResult:
    """Maximize ``sum |tr(R_j N_k Pi)|^2`` over stacked recoveries ``R^dagger R = 1``.

    Starts from the Petz recovery (completed to a trace-preserving stack of
    ``m`` blocks) unless ``R0`` is given.
    """
    frame = as_frame(code)
    start = time.perf_counter()
    if R0 is None:
        R0 = petz_stack(noise, frame)
    R0 = R0.R_hat if isinstance(R0, RecoveryStack) else np.asarray(R0, dtype=complex)
    if R0.shape[1] != noise.dim or R0.shape[0] % noise.dim:
        raise ValueError(f"recovery stack has shape {R0.shape}, incompatible with n = {noise.dim}")
    if isometry_deviation(R0) > 1e-9:
        R0 = renormalize(R0, "polar")

    def cost(R):
        return recovery_cost(noise, frame, R)

    prob = _Problem(cost, lambda R: egrad_recovery(noise, frame, R), cost)
    X, f, it, trace, converged, reason = _ascend(prob, R0, replace(cfg, lam=0.0))
    if isometry_deviation(X) > 1e-10:
        X = renormalize(X, "polar")
    return OptResult(
        frame=RecoveryStack(X),
        final_J=cost(X),
        objective=f,
        iterations=it,
        trace=trace,
        converged=converged,
        stop_reason=reason,
        wall_time=time.perf_counter() - start,
        seed=cfg.seed,
    )
