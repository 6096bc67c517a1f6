"""Confidence intervals on derivatives and the three-way point classification.

Every candidate point is in exactly one of three sets:

* ``S_HAT``   - the gradient CI sits inside (-eps, eps) in every dimension and
  the minimum-eigenvalue CI sits above -eps2: estimated local minimum;
* ``S_BAR``   - some gradient CI excludes zero, or the eigenvalue CI sits
  below eps2: estimated non-minimum;
* ``UNKNOWN`` - neither.

Labels only ever move out of ``UNKNOWN``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from aloe.errors import UsageError
from aloe.gp import GradPosterior, HessPosterior

UNKNOWN, S_HAT, S_BAR = 0, 1, 2
LABEL_NAMES = {UNKNOWN: "unknown", S_HAT: "minimum", S_BAR: "not_minimum"}


@dataclass(frozen=True)
class Thresholds:
    grad_eps: tuple[float, ...]
    eig_eps: float

    def __post_init__(self):
        object.__setattr__(self, "grad_eps", tuple(float(e) for e in self.grad_eps))
        if not self.grad_eps or min(self.grad_eps) <= 0 or self.eig_eps <= 0:
            raise UsageError("all accuracy thresholds must be positive")

    @classmethod
    def uniform(cls, d: int, grad_eps: float, eig_eps: float) -> Thresholds:
        return cls((grad_eps,) * d, eig_eps)

    @property
    def eps(self) -> float:
        return min(min(self.grad_eps), self.eig_eps)


@dataclass(frozen=True)
class GradCI:
    lower: np.ndarray
    upper: np.ndarray


@dataclass(frozen=True)
class EigCI:
    lower: np.ndarray
    upper: np.ndarray
    center: np.ndarray
    spread: np.ndarray


@dataclass(frozen=True)
class ClassificationState:
    candidates: np.ndarray  # (n, d)
    labels: np.ndarray = field(default=None)  # (n,) of UNKNOWN / S_HAT / S_BAR

    def __post_init__(self):
        cand = np.atleast_2d(np.asarray(self.candidates, dtype=float))
        object.__setattr__(self, "candidates", cand)
        if self.labels is None:
            object.__setattr__(self, "labels", np.zeros(cand.shape[0], dtype=np.int8))
        elif len(self.labels) != cand.shape[0]:
            raise UsageError("one label per candidate required")

    @property
    def s_hat(self) -> np.ndarray:
        return np.flatnonzero(self.labels == S_HAT)

    @property
    def s_bar_hat(self) -> np.ndarray:
        return np.flatnonzero(self.labels == S_BAR)

    @property
    def unknown(self) -> np.ndarray:
        return np.flatnonzero(self.labels == UNKNOWN)

    def counts(self) -> tuple[int, int, int]:
        return len(self.s_hat), len(self.s_bar_hat), len(self.unknown)


# -- intervals ---------------------------------------------------------------


def grad_ci(post: GradPosterior, beta_sqrt: float) -> GradCI:
    half = beta_sqrt * np.asarray(post.std)
    mean = np.asarray(post.mean)
    return GradCI(mean - half, mean + half)


def min_eig(mean_hessian) -> np.ndarray | float:
    """Smallest eigenvalue of a symmetric matrix (or a stack of them)."""
    M = np.asarray(mean_hessian, dtype=float)
    if M.ndim < 2 or M.shape[-1] != M.shape[-2]:
        raise UsageError("expected square matrices")
    asym = np.abs(M - np.swapaxes(M, -1, -2)).max() if M.size else 0.0
    if asym > 1e-8:
        raise UsageError(f"matrix is not symmetric (max asymmetry {asym:.3g})")
    lam = np.linalg.eigvalsh(M)[..., 0]
    return float(lam) if M.ndim == 2 else lam


def eig_ci(hess: HessPosterior, gamma_sqrt: float) -> EigCI:
    center = np.asarray(min_eig(hess.mean))
    spread = np.asarray(hess.std).max(axis=(-1, -2))
    half = gamma_sqrt * spread
    return EigCI(center - half, center + half, center, spread)


# -- classification rules ----------------------------------------------------


def _apply(state, gci, eci, th, g_bound, gbar_bound, labels_only_unknown=True):
    eps1 = np.asarray(th.grad_eps)
    lo = np.atleast_2d(gci.lower)
    hi = np.atleast_2d(gci.upper)
    if lo.shape != state.candidates.shape:
        raise UsageError("gradient CIs must align with candidates")
    in_g = np.all((-g_bound * eps1 < lo) & (hi < g_bound * eps1), axis=1)
    in_gbar = np.any((gbar_bound * eps1 <= lo) | (hi <= -gbar_bound * eps1), axis=1)
    in_h = np.asarray(eci.lower) > -th.eig_eps
    in_hbar = np.asarray(eci.upper) < th.eig_eps

    new = state.labels.copy()
    todo = new == UNKNOWN if labels_only_unknown else np.ones_like(new, dtype=bool)
    to_s = todo & in_g & in_h
    to_bar = todo & ~to_s & (in_hbar | in_gbar)
    new[to_s] = S_HAT
    new[to_bar] = S_BAR
    return ClassificationState(state.candidates, new)


def classify_finite(state: ClassificationState, gci: GradCI, eci: EigCI, th: Thresholds) -> ClassificationState:
    """One pass of the finite-candidate rules; classified points are left alone."""
    return _apply(state, gci, eci, th, g_bound=1.0, gbar_bound=0.0)


def classify_infinite(state: ClassificationState, gci: GradCI, eci: EigCI, th: Thresholds) -> ClassificationState:
    """Rules for a finite discretization of a continuous candidate set.

    The zero-gradient band widens to (1 + 1/d) eps and the nonzero-gradient
    test requires the CI to clear eps/d instead of 0, leaving a margin for
    the discretization error.
    """
    d = state.candidates.shape[1]
    return _apply(state, gci, eci, th, g_bound=1.0 + 1.0 / d, gbar_bound=1.0 / d)


def gradient_sets(gci: GradCI, th: Thresholds) -> tuple[np.ndarray, np.ndarray]:
    """Boolean masks for (all dims zero-gradient, some dim nonzero-gradient)."""
    eps1 = np.asarray(th.grad_eps)
    lo = np.atleast_2d(gci.lower)
    hi = np.atleast_2d(gci.upper)
    in_g = np.all((-eps1 < lo) & (hi < eps1), axis=1)
    in_gbar = np.any((0.0 <= lo) | (hi <= 0.0), axis=1)
    return in_g, in_gbar


# -- discretized candidate sets ----------------------------------------------


def nearest_index(xstar, query) -> np.ndarray | int:
    """Index of the closest point of ``xstar`` for each query (lowest index on ties)."""
    P = np.atleast_2d(np.asarray(xstar, dtype=float))
    if P.shape[0] == 0:
        raise UsageError("the discretization set is empty")
    Q = np.asarray(query, dtype=float)
    single = Q.ndim == 1
    Q = np.atleast_2d(Q)
    out = np.empty(Q.shape[0], dtype=int)
    for start in range(0, Q.shape[0], 512):
        q = Q[start : start + 512]
        d2 = np.sum((q[:, None, :] - P[None, :, :]) ** 2, axis=-1)
        best = d2.min(axis=1, keepdims=True)
        # first index within round-off of the minimum
        tol = 1e-12 * np.maximum(best, 1.0)
        out[start : start + 512] = np.argmax(d2 <= best + tol, axis=1)
    return int(out[0]) if single else out


def lift_to_X(state: ClassificationState, query) -> np.ndarray | int:
    """Labels for arbitrary points: each inherits the label of its nearest candidate."""
    idx = nearest_index(state.candidates, query)
    if np.ndim(idx) == 0:
        return int(state.labels[idx])
    return state.labels[idx]


# -- theoretical scale schedules ---------------------------------------------


def beta_gamma_finite(t: int, d: int, card: int, delta: float) -> tuple[float, float]:
    """Union-bound scales for a finite candidate set of size ``card``."""
    if t < 1 or not 0 < delta < 1:
        raise UsageError("need t >= 1 and 0 < delta < 1")
    base = (d + 1) * card * math.pi**2 * t**2 / (6 * delta)
    beta = 2.0 * math.log(base)
    gamma = 2.0 * d**2 * math.log(d**2 * base)
    return beta, gamma


def discretization_size(d: int, delta: float, a: float, b: float, r: float, eps: float) -> int:
    """Points per axis for the discretization of [0, r]^d."""
    lip = b * math.sqrt(math.log(a * (d**2 + d**3) / delta))
    return math.ceil(d**2 * r * lip / eps)


def beta_gamma_continuous(t, d, delta, a, b, r, eps) -> tuple[float, float, int]:
    """Scales for the discretized continuous case, plus points per axis."""
    if t < 1 or not 0 < delta < 1 or min(a, b, r, eps) <= 0:
        raise UsageError("need t >= 1, 0 < delta < 1 and positive a, b, r, eps")
    tau = discretization_size(d, delta, a, b, r, eps)
    log_tau = math.log(tau)
    beta = 2.0 * math.log((d + 1) * math.pi**2 * t**2 / (6 * delta)) + 2.0 * d * log_tau
    gamma = 2.0 * d**2 * math.log(d**2 * (d + 1) * math.pi**2 * t**2 / (6 * delta)) + 2.0 * d**2 * log_tau
    return beta, gamma, tau


@dataclass(frozen=True)
class ScaleSchedule:
    """How the CI scales beta_t^(1/2), gamma_t^(1/2) are chosen at step t.

    ``mode`` is ``"fixed"``, ``"finite"`` or ``"continuous"``.
    """

    mode: str = "fixed"
    beta_sqrt: float = 3.0
    gamma_sqrt: float = 3.0
    delta: float = 0.05
    cardinality: int | None = None
    a: float | None = None
    b: float | None = None
    r: float | None = None
    eps: float | None = None

    def __post_init__(self):
        if self.mode not in ("fixed", "finite", "continuous"):
            raise UsageError(f"unknown schedule mode {self.mode!r}")
        if self.mode == "fixed" and (self.beta_sqrt < 0 or self.gamma_sqrt < 0):
            raise UsageError("fixed scales must be nonnegative")
        if self.mode != "fixed" and not 0 < self.delta < 1:
            raise UsageError("delta must lie in (0, 1)")
        if self.mode == "continuous" and None in (self.a, self.b, self.r, self.eps):
            raise UsageError("continuous schedule needs a, b, r and eps")

    def scales(self, t: int, d: int, card: int) -> tuple[float, float]:
        if self.mode == "fixed":
            return self.beta_sqrt, self.gamma_sqrt
        if self.mode == "finite":
            beta, gamma = beta_gamma_finite(t, d, self.cardinality or card, self.delta)
        else:
            beta, gamma, _ = beta_gamma_continuous(t, d, self.delta, self.a, self.b, self.r, self.eps)
        return math.sqrt(beta), math.sqrt(gamma)


def eta_t(grad_stds, eig_spreads, beta_t: float, gamma_t: float) -> float:
    """Largest full gradient-CI width or eigenvalue half-width over the candidates."""
    g = np.asarray(grad_stds, dtype=float)
    s = np.asarray(eig_spreads, dtype=float)
    if g.size == 0 or s.size == 0:
        raise UsageError("need at least one candidate")
    return float(max(2.0 * math.sqrt(beta_t) * g.max(), math.sqrt(gamma_t) * s.max()))


def snapshot(step: int, state: ClassificationState, gci: GradCI, eci: EigCI) -> list[dict]:
    """Per-candidate records for serialization."""
    rows = []
    for i, x in enumerate(state.candidates):
        rows.append(
            {
                "step": step,
                "index": i,
                "x": [float(v) for v in x],
                "label": LABEL_NAMES[int(state.labels[i])],
                "grad_lower": [float(v) for v in gci.lower[i]],
                "grad_upper": [float(v) for v in gci.upper[i]],
                "eig_lower": float(eci.lower[i]),
                "eig_upper": float(eci.upper[i]),
            }
        )
    return rows
