"""The closed active-learning loop: classify, select, evaluate, refit."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from aloe import gp
from aloe.acquisition import AcquisitionStrategy, neighbor_classify_and_score, neighbor_probs, select_next
from aloe.classify import (
    S_HAT,
    ClassificationState,
    ScaleSchedule,
    Thresholds,
    classify_finite,
    classify_infinite,
    eig_ci,
    eta_t,
    grad_ci,
    lift_to_X,
    snapshot,
)
from aloe.errors import NumericalError, UsageError
from aloe.kernel import KernelParams

log = logging.getLogger(__name__)

Truth = Callable[[np.ndarray], float]


@dataclass(frozen=True)
class LoopConfig:
    budget: int
    seed: int = 0
    noise_variance: float = 0.0
    stop_on_empty_U: bool = True
    initial_points: int = 1
    mode: str = "finite"  # or "infinite": candidates are a discretization X*
    snapshots: bool = False

    def __post_init__(self):
        if self.budget < 1:
            raise UsageError("budget must be at least 1")
        if self.initial_points < 0:
            raise UsageError("initial_points must be nonnegative")
        if self.noise_variance < 0:
            raise UsageError("noise_variance must be nonnegative")
        if self.mode not in ("finite", "infinite"):
            raise UsageError(f"unknown mode {self.mode!r}")


@dataclass
class StepRecord:
    t: int
    x: list[float] | None
    y: float | None
    n_s_hat: int
    n_s_bar: int
    n_unknown: int
    eta: float
    branch: str  # rule that chose x, or "stop" when the unknown set emptied
    beta_sqrt: float
    gamma_sqrt: float
    s_hat: list[int]
    snapshot: list[dict] | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        out = asdict(self)
        if out["snapshot"] is None:
            del out["snapshot"]
        return out


@dataclass
class RunResult:
    classification: ClassificationState
    trace: list[StepRecord]
    initial_inputs: np.ndarray
    initial_outputs: np.ndarray
    mode: str = "finite"

    @property
    def inputs(self) -> np.ndarray:
        """Every evaluated point, initial design first."""
        chosen = [r.x for r in self.trace if r.x is not None]
        return np.vstack([self.initial_inputs] + ([np.asarray(chosen)] if chosen else []))

    @property
    def outputs(self) -> np.ndarray:
        chosen = [r.y for r in self.trace if r.y is not None]
        return np.concatenate([self.initial_outputs, np.asarray(chosen, dtype=float)])

    def lift(self, points) -> np.ndarray:
        """Labels for arbitrary points via their nearest candidate."""
        return lift_to_X(self.classification, points)


def observe(truth: Truth, x, sigma2: float, rng: np.random.Generator) -> float:
    """Noisy evaluation f(x) + N(0, sigma2)."""
    return float(truth(np.asarray(x, dtype=float))) + float(rng.normal(0.0, np.sqrt(sigma2)))


def run(
    truth: Truth,
    candidates,
    pool,
    strategy: AcquisitionStrategy,
    thresholds: Thresholds,
    schedule: ScaleSchedule,
    kernel: KernelParams,
    config: LoopConfig,
) -> RunResult:
    cand = np.atleast_2d(np.asarray(candidates, dtype=float))
    pool = np.atleast_2d(np.asarray(pool, dtype=float))
    if cand.shape[1] != pool.shape[1]:
        raise UsageError("candidates and pool differ in dimension")
    if pool.shape[0] == 0 or cand.shape[0] == 0:
        raise UsageError("candidates and pool must be non-empty")
    d = cand.shape[1]
    if len(thresholds.grad_eps) != d:
        raise UsageError(f"need {d} gradient thresholds, got {len(thresholds.grad_eps)}")

    init_rng, noise_rng, select_rng = (np.random.default_rng(s) for s in np.random.SeedSequence(config.seed).spawn(3))
    init_idx = init_rng.integers(pool.shape[0], size=config.initial_points)
    X = [pool[i] for i in init_idx]
    y = [observe(truth, x, config.noise_variance, noise_rng) for x in X]
    init_X = np.array(X).reshape(-1, d)
    init_y = np.array(y, dtype=float)

    classify = classify_infinite if config.mode == "infinite" else classify_finite
    cls = ClassificationState(cand)
    bounds = (pool.min(axis=0), pool.max(axis=0))
    trace: list[StepRecord] = []

    for t in range(1, config.budget + 1):
        try:
            state = gp.fit(kernel, np.array(X).reshape(-1, d), y, config.noise_variance)
            bs, gs = schedule.scales(t, d, cand.shape[0])
            gpost, hpost = gp.post_derivatives(state, cand)
            gci = grad_ci(gpost, bs)
            eci = eig_ci(hpost, gs)
            if strategy.kind == "Neighbor":
                unknown = cls.unknown
                labels = cls.labels.copy()
                if unknown.size:
                    probs = neighbor_probs(state, cand[unknown], strategy.alpha, strategy.mc_samples, select_rng, bounds)
                    hit, _ = neighbor_classify_and_score(probs, np.zeros_like(probs), strategy.prob_threshold)
                    labels[unknown[hit]] = S_HAT
                cls = ClassificationState(cand, labels)
            else:
                cls = classify(cls, gci, eci, thresholds)
            eta = eta_t(gpost.std, eci.spread, bs**2, gs**2)
            n_s, n_bar, n_u = cls.counts()
            snap = snapshot(t, cls, gci, eci) if config.snapshots else None
            common = dict(n_s_hat=n_s, n_s_bar=n_bar, n_unknown=n_u, eta=eta, beta_sqrt=bs,
                          gamma_sqrt=gs, s_hat=[int(i) for i in cls.s_hat], snapshot=snap)
            if config.stop_on_empty_U and n_u == 0:
                trace.append(StepRecord(t=t, x=None, y=None, branch="stop", **common))
                break
            sel = select_next(strategy, pool, state, cls, gci, thresholds, bs, t, select_rng)
        except NumericalError as exc:
            raise NumericalError(f"step {t} ({strategy.name}, seed {config.seed}): {exc}") from exc
        x_t = pool[sel.index]
        y_t = observe(truth, x_t, config.noise_variance, noise_rng)
        X.append(x_t)
        y.append(y_t)
        trace.append(StepRecord(t=t, x=[float(v) for v in x_t], y=y_t, branch=sel.branch, **common))
        log.debug("step %d: %s -> %s (|S|=%d |U|=%d eta=%.3g)", t, sel.branch, x_t, n_s, n_u, eta)

    return RunResult(cls, trace, init_X, init_y, config.mode)
