"""Benchmark truths: closed-form test functions and GP fits to tabulated data."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from aloe import gp
from aloe import kernel as K
from aloe.errors import UsageError

Fn = Callable[[np.ndarray], float]
VecFn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class SyntheticCase:
    name: str
    f: Fn
    grad: VecFn
    hess: VecFn
    A: float
    B: float
    sub_box: tuple[float, float]
    kernel: K.KernelParams
    sigma2: float
    dim: int = 2
    divisions: int = 40
    grad_eps: float = 0.35
    eig_eps: float = 0.1
    beta_sqrt: float = 3.0
    gamma_sqrt: float = 3.0
    # known minima; when None they are derived from grad/hess on the grid
    minima: tuple[tuple[float, ...], ...] | None = field(default=None, compare=False)

    def grid(self):
        return build_grid(self.A, self.B, self.divisions, self.sub_box, self.dim)

    def with_overrides(self, **kw) -> SyntheticCase:
        return replace(self, **kw)


def build_grid(A: float, B: float, divisions: int, sub_box, dim: int = 2):
    """Tensor grid D over [A, B]^dim and its members X inside the closed sub-box.

    ``divisions`` equal parts per axis, endpoints included, so each axis has
    ``divisions + 1`` points.  Points are ordered with the last coordinate
    varying fastest.
    """
    a, b = (float(v) for v in sub_box)
    if not A < B:
        raise UsageError(f"degenerate interval [{A}, {B}]")
    if divisions < 1 or dim < 1:
        raise UsageError("divisions and dim must be positive")
    tol = 1e-9 * (B - A)
    if not (A - tol <= a <= b <= B + tol):
        raise UsageError(f"sub-box [{a}, {b}] is not inside [{A}, {B}]")
    axis = np.linspace(A, B, divisions + 1)
    D = np.array(list(itertools.product(axis, repeat=dim)))
    inside = np.all((D >= a - tol) & (D <= b + tol), axis=1)
    return D, D[inside]


def point_key(x, ndigits: int = 9) -> tuple[float, ...]:
    """Hashable identity for a grid point, robust to round-off."""
    return tuple(round(float(v), ndigits) + 0.0 for v in x)


def true_S(case: SyntheticCase, X, grad_tol: float = 1e-9) -> np.ndarray:
    """Indices into ``X`` of the true local minima.

    Zero gradient means sup-norm below ``grad_tol`` (every closed-form
    minimum lands exactly on a grid point); the Hessian must be strictly
    positive definite.  Cases with an explicit ``minima`` list use it instead.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if case.minima is not None:
        keys = {point_key(m) for m in case.minima}
        return np.array([i for i, x in enumerate(X) if point_key(x) in keys], dtype=int)
    out = []
    for i, x in enumerate(X):
        g = np.asarray(case.grad(x), dtype=float)
        if np.max(np.abs(g)) >= grad_tol:
            continue
        if np.linalg.eigvalsh(np.asarray(case.hess(x), dtype=float))[0] > 0:
            out.append(i)
    return np.array(out, dtype=int)


# -- closed-form cases -------------------------------------------------------


def _case1():
    def f(x):
        return math.sin(x[0]) * math.cos(x[1])

    def grad(x):
        return np.array([math.cos(x[0]) * math.cos(x[1]), -math.sin(x[0]) * math.sin(x[1])])

    def hess(x):
        s0, c0, s1, c1 = math.sin(x[0]), math.cos(x[0]), math.sin(x[1]), math.cos(x[1])
        off = -c0 * s1
        return np.array([[-s0 * c1, off], [off, -s0 * c1]])

    return SyntheticCase(
        "case1", f, grad, hess, A=-math.pi / 2, B=7 * math.pi / 2, sub_box=(0.0, 3 * math.pi),
        kernel=K.KernelParams(1.0, 4.5), sigma2=0.005,
    )


def _quartic(x):
    return x**4 / 4 - 13 * x**3 / 3 + 25 * x**2 - 56 * x


def _case2():
    # per-coordinate derivative (x-2)(x-4)(x-7)/3: minima at 2 and 7, maximum at 4
    def f(x):
        return 18 + sum(_quartic(v) for v in x) / 3

    def grad(x):
        x = np.asarray(x, dtype=float)
        return (x**3 - 13 * x**2 + 50 * x - 56) / 3

    def hess(x):
        x = np.asarray(x, dtype=float)
        return np.diag((3 * x**2 - 26 * x + 50) / 3)

    return SyntheticCase(
        "case2", f, grad, hess, A=-1.0, B=9.0, sub_box=(0.0, 8.0),
        kernel=K.KernelParams(2.0, 3.0), sigma2=0.005,
    )


def _case3():
    def f(x):
        return float(np.sum((np.asarray(x) - 4.0) ** 2))

    def grad(x):
        return 2.0 * (np.asarray(x, dtype=float) - 4.0)

    def hess(x):
        return 2.0 * np.eye(len(x))

    return SyntheticCase(
        "case3", f, grad, hess, A=-1.0, B=9.0, sub_box=(0.0, 8.0),
        kernel=K.KernelParams(2.0, 3.0), sigma2=0.005,
    )


PRESETS: dict[str, Callable[[], SyntheticCase]] = {"case1": _case1, "case2": _case2, "case3": _case3}


def get_case(name: str) -> SyntheticCase:
    try:
        return PRESETS[name]()
    except KeyError:
        raise UsageError(f"unknown case preset {name!r}; expected one of {sorted(PRESETS)}") from None


# -- data-driven truth -------------------------------------------------------


@dataclass(frozen=True)
class FittedTruth:
    """The posterior mean of a GP fitted to tabulated data, used as ground truth.

    The mean is a finite kernel expansion, so gradient and Hessian follow
    exactly from the derivative kernels.
    """

    state: gp.PosteriorState
    dropped: int = 0

    def f(self, x) -> float:
        return gp.post_f(self.state, np.asarray(x, dtype=float))[0]

    def grad(self, x) -> np.ndarray:
        return gp.post_grad(self.state, np.asarray(x, dtype=float)).mean

    def hess(self, x) -> np.ndarray:
        return gp.post_hess(self.state, np.asarray(x, dtype=float)).mean


def load_table(path) -> np.ndarray:
    """Numeric table with one row per record: coordinates then value.

    Comma, semicolon, tab or whitespace delimited; a non-numeric first line
    is treated as a header.
    """
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines:
        raise UsageError(f"{path}: no data rows")
    rows = []
    for n, ln in enumerate(lines):
        parts = ln.replace(",", " ").replace(";", " ").split()
        try:
            rows.append([float(p) for p in parts])
        except ValueError:
            if n == 0:
                continue
            raise UsageError(f"{path}: non-numeric row {n + 1}: {ln!r}") from None
    widths = {len(r) for r in rows}
    if len(widths) != 1 or widths.pop() < 2:
        raise UsageError(f"{path}: rows must all have the same width (>= 2)")
    return np.array(rows)


def gp_truth_from_data(records, kernel: K.KernelParams, sigma2: float, outlier_cutoff: float | None = None) -> FittedTruth:
    """Fit a GP to (coords..., value) rows, dropping rows with |value| > cutoff."""
    R = np.atleast_2d(np.asarray(records, dtype=float))
    if R.shape[1] < 2:
        raise UsageError("records need at least one coordinate and a value")
    keep = np.ones(R.shape[0], dtype=bool)
    if outlier_cutoff is not None:
        keep = np.abs(R[:, -1]) <= outlier_cutoff
    if not keep.any():
        raise UsageError("every record was dropped as an outlier")
    state = gp.fit(kernel, R[keep, :-1], R[keep, -1], sigma2)
    return FittedTruth(state, int((~keep).sum()))


def discrete_minima(truth_f: Fn, truth_hess: VecFn, D, X) -> tuple[tuple[float, ...], ...]:
    """Points of X below all their axis neighbours in D and with a PD Hessian.

    Used as ground truth for fitted surfaces when no list of minima is given:
    a fitted mean never has an exactly zero gradient on the grid.
    """
    D = np.atleast_2d(D)
    values = {point_key(p): truth_f(p) for p in D}
    axes = [np.unique(np.round(D[:, j], 9)) for j in range(D.shape[1])]
    steps = [float(np.min(np.diff(a))) if len(a) > 1 else 0.0 for a in axes]
    found = []
    for x in np.atleast_2d(X):
        fx = values.get(point_key(x), truth_f(x))
        ok = True
        for j, h in enumerate(steps):
            for s in (-1, 1):
                nb = np.array(x, dtype=float)
                nb[j] += s * h
                v = values.get(point_key(nb))
                if v is not None and v <= fx:
                    ok = False
        if ok and np.linalg.eigvalsh(truth_hess(x))[0] > 0:
            found.append(point_key(x))
    return tuple(found)


def data_case(name: str, truth: FittedTruth, A, B, divisions, sub_box, sigma2, minima=None,
              kernel: K.KernelParams | None = None, **kw) -> SyntheticCase:
    """Wrap a fitted truth as a benchmark case over a tensor grid.

    ``kernel`` is the model used by the learner; it defaults to the one the
    truth was fitted with.
    """
    dim = truth.state.dim
    case = SyntheticCase(name, truth.f, truth.grad, truth.hess, A=A, B=B, sub_box=tuple(sub_box),
                         kernel=kernel or truth.state.kernel, sigma2=sigma2, dim=dim, divisions=divisions,
                         minima=None if minima is None else tuple(tuple(m) for m in minima), **kw)
    if case.minima is None:
        D, X = case.grid()
        case = replace(case, minima=discrete_minima(truth.f, truth.hess, D, X))
    return case
