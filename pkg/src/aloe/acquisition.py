"""Choosing the next query point.

The violation-based rule picks the unknown candidate whose gradient CIs are
furthest from any classifying configuration, then queries wherever a new
evaluation would shrink those CIs the most.  Baselines (random, uncertainty
sampling, lower confidence bound, the gradient-only variant and the
neighbourhood-probability competitor) share the same entry point,
:func:`select_next`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from aloe import gp
from aloe.classify import ClassificationState, GradCI, Thresholds, gradient_sets
from aloe.errors import UsageError

KINDS = ("Random", "US", "LCB", "NoLambda", "ALOE", "Neighbor")


@dataclass(frozen=True)
class AcquisitionStrategy:
    kind: str
    r_period: int = 0  # r_t = 1 iff t is a positive multiple of r_period; 0 means never
    alpha: float = 0.3
    prob_threshold: float = 0.6
    mc_samples: int = 10_000
    name: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise UsageError(f"unknown strategy kind {self.kind!r}; expected one of {KINDS}")
        if self.r_period < 0:
            raise UsageError("r_period must be >= 0")
        if self.alpha <= 0 or not 0 < self.prob_threshold < 1 or self.mc_samples < 1:
            raise UsageError("neighbor settings need alpha > 0, 0 < threshold < 1, mc_samples >= 1")
        if not self.name:
            object.__setattr__(self, "name", self.kind)

    def r(self, t: int) -> int:
        return int(self.r_period > 0 and t % self.r_period == 0)


def strategy_from_name(name: str, **neighbor) -> AcquisitionStrategy:
    """Build one of the named strategies used in the experiments."""
    presets = {
        "Random": dict(kind="Random"),
        "US": dict(kind="US"),
        "LCB": dict(kind="LCB"),
        "NoLambda": dict(kind="NoLambda"),
        "ALOE1": dict(kind="ALOE"),
        "ALOE2": dict(kind="ALOE", r_period=5),
        "ALOE3": dict(kind="ALOE", r_period=10),
        "Neighbor": dict(kind="Neighbor", **neighbor),
    }
    if name not in presets:
        raise UsageError(f"unknown strategy {name!r}; expected one of {sorted(presets)}")
    return AcquisitionStrategy(name=name, **presets[name])


STRATEGY_NAMES = ("ALOE1", "ALOE2", "ALOE3", "NoLambda", "US", "LCB", "Random", "Neighbor")


# -- violations --------------------------------------------------------------


def xi(a):
    """Hinge at zero."""
    out = np.maximum(np.asarray(a, dtype=float), 0.0)
    return float(out) if out.ndim == 0 else out


def violation(lower, upper, eps):
    """Cheapest hinge cost of moving a gradient CI into a classifying position.

    The three branches are: CI entirely at or below 0, CI entirely at or
    above 0, CI inside (-eps, eps).
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    inside = xi(upper - eps) + xi(-eps - lower)
    out = np.minimum(np.minimum(xi(upper), xi(-lower)), inside)
    return float(out) if np.ndim(out) == 0 else out


class ViolationReport(NamedTuple):
    per_dim: np.ndarray  # (n, d)
    total: np.ndarray  # (n,)


def violation_report(gci: GradCI, th: Thresholds) -> ViolationReport:
    per_dim = violation(np.atleast_2d(gci.lower), np.atleast_2d(gci.upper), np.asarray(th.grad_eps))
    return ViolationReport(per_dim, per_dim.sum(axis=1))


def argmax_violation(unknown, totals) -> int | None:
    """Unknown index with the largest total violation; None if nothing is unknown."""
    unknown = np.asarray(unknown, dtype=int)
    if unknown.size == 0:
        return None
    unknown = np.sort(unknown)
    return int(unknown[np.argmax(np.asarray(totals)[unknown])])


def predicted_violation(state: gp.PosteriorState, xplus, xstar, beta_sqrt: float, th: Thresholds) -> np.ndarray:
    """Per-dimension violation at ``xplus`` after hypothetically observing f at ``xstar``.

    Only the standard deviation is updated; the gradient mean stays put since
    the value that would be observed is not known yet.
    """
    mean = gp.post_grad(state, xplus).mean
    std = gp.lookahead_grad_std(state, xplus, xstar)
    return violation(mean - beta_sqrt * std, mean + beta_sqrt * std, np.asarray(th.grad_eps))


def b_t(state: gp.PosteriorState, xplus, xstar, beta_sqrt: float, th: Thresholds):
    """Total violation at ``xplus`` removed by evaluating f at each ``xstar``."""
    post = gp.post_grad(state, xplus)
    current = violation(
        post.mean - beta_sqrt * post.std, post.mean + beta_sqrt * post.std, np.asarray(th.grad_eps)
    )
    pred = predicted_violation(state, xplus, xstar, beta_sqrt, th)
    return np.sum(current) - pred.sum(axis=-1)


# -- neighbourhood probability -----------------------------------------------


def _neighbor_groups(points, alpha, bounds):
    P = np.atleast_2d(np.asarray(points, dtype=float))
    d = P.shape[1]
    offs = np.concatenate([-alpha * np.eye(d), alpha * np.eye(d)])
    nbrs = P[:, None, :] + offs[None, :, :]
    if bounds is None:
        inside = np.ones(nbrs.shape[:2], dtype=bool)
    else:
        lo, hi = (np.asarray(b, dtype=float) for b in bounds)
        tol = 1e-9 * np.maximum(1.0, np.abs(hi - lo))
        inside = np.all((nbrs >= lo - tol) & (nbrs <= hi + tol), axis=-1)
    return np.concatenate([P[:, None, :], nbrs], axis=1), inside


def neighbor_probs(state: gp.PosteriorState, points, alpha: float, n: int, rng: np.random.Generator,
                   bounds=None, chunk_elems: int = 20_000_000) -> np.ndarray:
    """Monte Carlo probability that f(x) is no larger than f at each axis neighbour x +- alpha e_l.

    Neighbours outside ``bounds`` (a ``(lower, upper)`` box) are left out of
    the event.  One block of standard normals is shared by all points, so a
    call consumes the same amount of randomness regardless of how many points
    it scores.
    """
    groups, inside = _neighbor_groups(points, alpha, bounds)
    npts, g, _ = groups.shape
    z = rng.standard_normal((n, g)).T.copy()  # (g, n): batched matmul below is much faster than einsum
    out = np.empty(npts)
    step = max(1, chunk_elems // (n * g))
    scale = state.kernel.signal_variance
    for start in range(0, npts, step):
        sl = slice(start, start + step)
        mean, cov = gp.batched_cov(state, groups[sl])
        chol = gp.cholesky_with_jitter(cov, scale, "neighbourhood covariance")
        draws = mean[:, :, None] + chol @ z  # (m, g, n)
        nb = np.where(inside[sl][:, :, None], draws[:, 1:, :], np.inf)
        out[sl] = np.mean(draws[:, 0, :] <= nb.min(axis=1), axis=1)
    return out


def neighbor_prob(state: gp.PosteriorState, x, alpha: float, n: int, rng: np.random.Generator, bounds=None) -> float:
    return float(neighbor_probs(state, np.asarray(x, dtype=float)[None, :], alpha, n, rng, bounds)[0])


def neighbor_classify_and_score(probs, variances, threshold: float):
    """Points that qualify as minima (strict ``>`` threshold) and the Nei_t scores."""
    probs = np.asarray(probs, dtype=float)
    return probs > threshold, np.asarray(variances, dtype=float) * probs


def _neighbor_argmax(state, pool, strategy, rng, bounds):
    # Nei = var * P <= var, so points whose variance cannot beat the best score
    # found so far are never simulated.
    _, var = gp.post_f(state, pool)
    order = np.argsort(-var, kind="stable")
    best_score, best_idx = -np.inf, int(order[0])
    batch = 64
    for start in range(0, len(order), batch):
        idx = order[start : start + batch]
        if var[idx[0]] < best_score:
            break
        probs = neighbor_probs(state, pool[idx], strategy.alpha, strategy.mc_samples, rng, bounds)
        scores = var[idx] * probs
        for i, s in zip(idx, scores):
            if s > best_score or (s == best_score and i < best_idx):
                best_score, best_idx = s, int(i)
    return best_idx


# -- selection ---------------------------------------------------------------


class Selection(NamedTuple):
    index: int
    branch: str  # random | us | lcb | violation | fallback | neighbor


def _argmax_variance(state, pool):
    _, var = gp.post_f(state, pool)
    return int(np.argmax(var))


def select_next(
    strategy: AcquisitionStrategy,
    pool,
    state: gp.PosteriorState,
    classification: ClassificationState,
    gci: GradCI,
    th: Thresholds,
    beta_sqrt: float,
    t: int,
    rng: np.random.Generator,
) -> Selection:
    """Index into ``pool`` of the next query, and which rule produced it.

    ``gci`` holds the current gradient CIs of every classification candidate.
    Argmax/argmin ties resolve to the lowest pool index.
    """
    pool = np.atleast_2d(np.asarray(pool, dtype=float))
    if pool.shape[0] == 0:
        raise UsageError("the pool of selectable points is empty")
    kind = strategy.kind
    if kind == "Random":
        return Selection(int(rng.integers(pool.shape[0])), "random")
    if kind == "US":
        return Selection(_argmax_variance(state, pool), "us")
    if kind == "LCB":
        mean, var = gp.post_f(state, pool)
        return Selection(int(np.argmin(mean - 3.0 * np.sqrt(var))), "lcb")
    if kind == "Neighbor":
        bounds = (pool.min(axis=0), pool.max(axis=0))
        return Selection(_neighbor_argmax(state, pool, strategy, rng, bounds), "neighbor")

    r_t = 0 if kind == "NoLambda" else strategy.r(t)
    if r_t == 1:
        return Selection(_argmax_variance(state, pool), "us")
    if kind == "NoLambda":
        in_g, in_gbar = gradient_sets(gci, th)
        unknown = np.flatnonzero(~(in_g | in_gbar))
    else:
        unknown = classification.unknown
    report = violation_report(gci, th)
    plus = argmax_violation(unknown, report.total)
    if plus is not None:
        scores = b_t(state, classification.candidates[plus], pool, beta_sqrt, th)
        if scores.max() > 0:
            return Selection(int(np.argmax(scores)), "violation")
    return Selection(_argmax_variance(state, pool), "fallback")
