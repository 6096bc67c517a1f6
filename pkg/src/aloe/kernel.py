"""Gaussian kernel and its analytic partial derivatives up to fourth order.

    k(x, x') = s * exp(-|x - x'|^2 / L)

with ``s`` the signal variance and ``L`` the lengthscale (which divides the
*squared* distance, so it carries squared input units).

Every function accepts single points (shape ``(d,)``) or stacks of points
(shape ``(n, d)``).  Two single points give a float, one stack gives a
vector and two stacks give the ``(n, m)`` matrix.  Derivative indices are
zero-based.  Derivatives written ``d/dx`` act on the second argument, the
convention used for the cross-covariance vectors of the posterior.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from aloe.errors import UsageError


@dataclass(frozen=True)
class KernelParams:
    signal_variance: float
    lengthscale: float

    def __post_init__(self):
        if not (self.signal_variance > 0 and np.isfinite(self.signal_variance)):
            raise UsageError(f"signal_variance must be positive, got {self.signal_variance}")
        if not (self.lengthscale > 0 and np.isfinite(self.lengthscale)):
            raise UsageError(f"lengthscale must be positive, got {self.lengthscale}")

    # prior variances of the derivative processes at a single point
    def grad_prior_var(self) -> float:
        return 2.0 * self.signal_variance / self.lengthscale

    def hess_prior_var(self, diagonal: bool) -> float:
        c = 12.0 if diagonal else 4.0
        return c * self.signal_variance / self.lengthscale**2


def _prepare(x1, x2):
    a = np.asarray(x1, dtype=float)
    b = np.asarray(x2, dtype=float)
    if a.ndim not in (1, 2) or b.ndim not in (1, 2):
        raise UsageError("points must be 1-d (a single point) or 2-d (a stack)")
    if a.shape[-1] != b.shape[-1]:
        raise UsageError(f"dimension mismatch: {a.shape[-1]} vs {b.shape[-1]}")
    squeeze = (a.ndim == 1, b.ndim == 1)
    return Cross(np.atleast_2d(a), np.atleast_2d(b)), squeeze


def _finish(out, squeeze):
    sq1, sq2 = squeeze
    if sq1 and sq2:
        return float(out[0, 0])
    if sq1:
        return out[0]
    if sq2:
        return out[:, 0]
    return out


def _check_index(d, *idx):
    for i in idx:
        if int(i) != i or not 0 <= int(i) < d:
            raise UsageError(f"dimension index {i} out of range for d={d}")


class Cross:
    """Coordinate offsets x2 - x1 and kernel values between two point stacks.

    Building this once and asking it for several derivatives avoids
    recomputing the exponential.  ``a`` is ``(n, d)`` and ``b`` is ``(m, d)``;
    every result is ``(n, m)``.
    """

    def __init__(self, a: np.ndarray, b: np.ndarray):
        self.d = a.shape[1]
        self.diff = [b[None, :, i] - a[:, None, i] for i in range(self.d)]
        self._base = None
        self._p = None

    def base(self, p: KernelParams) -> np.ndarray:
        if self._base is None or self._p != p:
            sq = sum(u * u for u in self.diff)
            self._base = p.signal_variance * np.exp(-sq / p.lengthscale)
            self._p = p
        return self._base

    def k(self, p):
        return self.base(p)

    def d1(self, p, i):
        _check_index(self.d, i)
        return -2.0 / p.lengthscale * self.diff[i] * self.base(p)

    def d2(self, p, j, k):
        _check_index(self.d, j, k)
        L = p.lengthscale
        poly = 4.0 / L**2 * self.diff[j] * self.diff[k]
        if j == k:
            poly = poly - 2.0 / L
        return poly * self.base(p)

    def v1(self, p, i):
        _check_index(self.d, i)
        L = p.lengthscale
        return (2.0 / L - 4.0 / L**2 * self.diff[i] ** 2) * self.base(p)

    def v2(self, p, j, k):
        # the kernel factorizes over coordinates, so the mixed fourth
        # derivative is a product of 1-d derivatives of exp(-u^2/L)
        _check_index(self.d, j, k)
        L = p.lengthscale
        if j == k:
            poly = _h4(self.diff[j], L)
        else:
            poly = _h2(self.diff[j], L) * _h2(self.diff[k], L)
        return poly * self.base(p)


def _h2(u, L):
    # second derivative of exp(-u^2/L), divided by exp(-u^2/L)
    return 4.0 * u**2 / L**2 - 2.0 / L


def _h4(u, L):
    a = 1.0 / L
    u2 = u * u
    return 12.0 * a**2 - 48.0 * a**3 * u2 + 16.0 * a**4 * u2 * u2


def k_eval(p: KernelParams, x1, x2):
    """Kernel value k(x1, x2)."""
    c, sq = _prepare(x1, x2)
    return _finish(c.k(p), sq)


def k_d1(p: KernelParams, x1, x2, i: int):
    """dk(x1, x2)/dx2_i."""
    c, sq = _prepare(x1, x2)
    return _finish(c.d1(p, i), sq)


def k_d2(p: KernelParams, x1, x2, j: int, k: int):
    """d^2 k(x1, x2) / dx2_j dx2_k."""
    c, sq = _prepare(x1, x2)
    return _finish(c.d2(p, j, k), sq)


def v1(p: KernelParams, x1, x2, i: int):
    """d^2 k(x1, x2) / dx1_i dx2_i: prior covariance of the i-th gradient entry."""
    c, sq = _prepare(x1, x2)
    return _finish(c.v1(p, i), sq)


def v2(p: KernelParams, x1, x2, j: int, k: int):
    """d^4 k / dx1_j dx1_k dx2_j dx2_k: prior covariance of Hessian entry (j, k)."""
    c, sq = _prepare(x1, x2)
    return _finish(c.v2(p, j, k), sq)


def hess_pairs(d: int) -> list[tuple[int, int]]:
    """Unordered index pairs (j <= k) of a symmetric d x d matrix."""
    return [(j, k) for j in range(d) for k in range(j, d)]
