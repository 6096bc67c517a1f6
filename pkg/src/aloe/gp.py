"""Exact GP posterior over f and over its gradient and Hessian entries.

The state is rebuilt from scratch whenever a point is added; with at most a
few hundred observations a dense Cholesky factorization is cheap.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from aloe import kernel as K
from aloe.errors import NumericalError, UsageError

JITTER_START = 1e-10
JITTER_STOP = 1e-6
NEG_VAR_TOL = 1e-8


@dataclass(frozen=True)
class PosteriorState:
    kernel: K.KernelParams
    inputs: np.ndarray  # (t, d)
    outputs: np.ndarray  # (t,)
    noise_variance: float
    chol: np.ndarray  # lower factor of K + noise * I
    weights: np.ndarray  # C^{-1} y

    @property
    def dim(self) -> int:
        return self.inputs.shape[1]

    @property
    def size(self) -> int:
        return self.inputs.shape[0]

    def whiten(self, cross: np.ndarray) -> np.ndarray:
        """Return chol^{-1} @ cross for a (t, m) block of cross-covariances."""
        if self.size == 0:
            return np.zeros((0,) + cross.shape[1:])
        return solve_triangular(self.chol, cross, lower=True, check_finite=False)


@dataclass(frozen=True)
class GradPosterior:
    mean: np.ndarray  # (..., d)
    std: np.ndarray  # (..., d)


@dataclass(frozen=True)
class HessPosterior:
    mean: np.ndarray  # (..., d, d)
    std: np.ndarray  # (..., d, d)


def cholesky_with_jitter(mat: np.ndarray, scale: float, what: str = "covariance") -> np.ndarray:
    """Cholesky factor, adding diagonal jitter (relative to ``scale``) on failure."""
    try:
        return np.linalg.cholesky(mat)
    except np.linalg.LinAlgError:
        pass
    eye = np.eye(mat.shape[-1])
    jitter = JITTER_START
    while jitter <= JITTER_STOP * (1 + 1e-9):
        try:
            return np.linalg.cholesky(mat + jitter * scale * eye)
        except np.linalg.LinAlgError:
            jitter *= 10.0
    diag = np.diagonal(mat, axis1=-2, axis2=-1)
    raise NumericalError(
        f"{what} matrix of size {mat.shape[-1]} is not positive definite even with "
        f"jitter {JITTER_STOP:g}*{scale:g}; diagonal range [{diag.min():.3g}, {diag.max():.3g}]"
    )


def clamp_variance(var: np.ndarray, scale: float) -> np.ndarray:
    """Clip round-off negatives to zero; genuinely negative values are a bug."""
    var = np.asarray(var, dtype=float)
    if var.size and var.min() < -NEG_VAR_TOL * max(1.0, scale):
        raise NumericalError(f"negative posterior variance {var.min():.3e} (prior scale {scale:.3g})")
    return np.maximum(var, 0.0)


def _as_inputs(x, d=None) -> np.ndarray:
    arr = np.atleast_2d(np.asarray(x, dtype=float))
    if arr.ndim != 2:
        raise UsageError("points must be given as a (n, d) array")
    if d is not None and arr.shape[1] != d:
        raise UsageError(f"dimension mismatch: expected {d}, got {arr.shape[1]}")
    return arr


def prior(kernel: K.KernelParams, dim: int, noise_variance: float = 0.0) -> PosteriorState:
    """State with no observations: every query returns the prior."""
    if dim < 1:
        raise UsageError("dimension must be at least 1")
    return PosteriorState(
        kernel=kernel,
        inputs=np.zeros((0, dim)),
        outputs=np.zeros(0),
        noise_variance=float(noise_variance),
        chol=np.zeros((0, 0)),
        weights=np.zeros(0),
    )


def fit(kernel: K.KernelParams, inputs, outputs, noise_variance: float) -> PosteriorState:
    X = _as_inputs(inputs)
    y = np.asarray(outputs, dtype=float).reshape(-1)
    if X.shape[0] != y.shape[0]:
        raise UsageError(f"{X.shape[0]} inputs but {y.shape[0]} outputs")
    if noise_variance < 0:
        raise UsageError("noise_variance must be nonnegative")
    if X.shape[0] == 0:
        return prior(kernel, X.shape[1], noise_variance)
    C = K.k_eval(kernel, X, X) + noise_variance * np.eye(X.shape[0])
    chol = cholesky_with_jitter(C, kernel.signal_variance, "training covariance")
    tmp = solve_triangular(chol, y, lower=True, check_finite=False)
    alpha = solve_triangular(chol.T, tmp, lower=False, check_finite=False)
    return PosteriorState(kernel, X, y, float(noise_variance), chol, alpha)


def _squeeze_if_point(x, arr):
    return arr[0] if np.ndim(x) == 1 else arr


def post_f(state: PosteriorState, x):
    """Posterior mean and variance of f at one point or a stack of points."""
    X = _as_inputs(x, state.dim)
    kx = K.k_eval(state.kernel, state.inputs, X)  # (t, n)
    mean = kx.T @ state.weights
    w = state.whiten(kx)
    s = state.kernel.signal_variance
    var = clamp_variance(s - np.sum(w**2, axis=0), s)
    if np.ndim(x) == 1:
        return float(mean[0]), float(var[0])
    return mean, var


def post_cov(state: PosteriorState, x1, x2):
    """Posterior covariance k_t(x1, x2); same shape rules as the kernel."""
    A = _as_inputs(x1, state.dim)
    B = _as_inputs(x2, state.dim)
    wa = state.whiten(K.k_eval(state.kernel, state.inputs, A))
    wb = state.whiten(K.k_eval(state.kernel, state.inputs, B))
    out = K.k_eval(state.kernel, A, B) - wa.T @ wb
    if np.ndim(x1) == 1 and np.ndim(x2) == 1:
        return float(out[0, 0])
    if np.ndim(x1) == 1:
        return out[0]
    if np.ndim(x2) == 1:
        return out[:, 0]
    return out


def _derivative_posterior(state: PosteriorState, X: np.ndarray, grad: bool, hess: bool):
    p = state.kernel
    d = state.dim
    n = X.shape[0]
    cross = K.Cross(state.inputs, X)
    blocks, priors, slots = [], [], []
    if grad:
        for i in range(d):
            blocks.append(cross.d1(p, i))
            priors.append(p.grad_prior_var())
            slots.append(("g", i, i))
    if hess:
        for j, k in K.hess_pairs(d):
            blocks.append(cross.d2(p, j, k))
            priors.append(p.hess_prior_var(j == k))
            slots.append(("h", j, k))
    stacked = np.concatenate(blocks, axis=1)  # (t, n * len(blocks))
    means = (stacked.T @ state.weights).reshape(len(blocks), n)
    w = state.whiten(stacked)
    red = np.sum(w**2, axis=0).reshape(len(blocks), n)
    g_mean = np.empty((n, d))
    g_std = np.empty((n, d))
    h_mean = np.empty((n, d, d))
    h_std = np.empty((n, d, d))
    for b, (kind, j, k) in enumerate(slots):
        std = np.sqrt(clamp_variance(priors[b] - red[b], priors[b]))
        if kind == "g":
            g_mean[:, j], g_std[:, j] = means[b], std
        else:
            h_mean[:, j, k] = h_mean[:, k, j] = means[b]
            h_std[:, j, k] = h_std[:, k, j] = std
    return GradPosterior(g_mean, g_std), HessPosterior(h_mean, h_std)


def post_grad(state: PosteriorState, x) -> GradPosterior:
    """Posterior mean and std of each gradient entry."""
    g, _ = _derivative_posterior(state, _as_inputs(x, state.dim), True, False)
    return GradPosterior(_squeeze_if_point(x, g.mean), _squeeze_if_point(x, g.std))


def post_hess(state: PosteriorState, x) -> HessPosterior:
    """Entrywise posterior mean and std of the Hessian (symmetric by construction)."""
    _, h = _derivative_posterior(state, _as_inputs(x, state.dim), False, True)
    return HessPosterior(_squeeze_if_point(x, h.mean), _squeeze_if_point(x, h.std))


def post_derivatives(state: PosteriorState, X) -> tuple[GradPosterior, HessPosterior]:
    """Gradient and Hessian posteriors over a stack of points in one pass."""
    return _derivative_posterior(state, _as_inputs(X, state.dim), True, True)


def lookahead_grad_std(state: PosteriorState, x, xstar) -> np.ndarray:
    """Gradient std at ``x`` after a hypothetical evaluation of f at ``xstar``.

    ``x`` is a single point.  ``xstar`` may be one point (result ``(d,)``) or a
    stack of m candidates (result ``(m, d)``).  The update is a rank-one
    reduction and does not depend on the value that would be observed.
    """
    xp = np.asarray(x, dtype=float)
    if xp.ndim != 1:
        raise UsageError("lookahead is defined for a single point x")
    S = _as_inputs(xstar, state.dim)
    p = state.kernel
    d = state.dim
    cur = post_grad(state, xp).std
    kS = K.k_eval(p, state.inputs, S)  # (t, m)
    wS = state.whiten(kS)
    s = p.signal_variance
    denom = clamp_variance(s - np.sum(wS**2, axis=0), s) + state.noise_variance
    out = np.empty((S.shape[0], d))
    for i in range(d):
        # cov_t(f_i(x), f(x*)); dk(x, x*)/dx_i equals k_d1 with the arguments swapped
        prior_c = K.k_d1(p, S, xp, i)  # (m,)
        w1 = state.whiten(K.k_d1(p, state.inputs, xp[None, :], i))  # (t, 1)
        c = prior_c - (w1.T @ wS)[0]
        with np.errstate(divide="ignore", invalid="ignore"):
            red = np.where(denom > 0, c**2 / denom, 0.0)
        out[:, i] = cur[i] ** 2 - red
    pv = p.grad_prior_var()
    out = np.sqrt(clamp_variance(out, pv))
    # never report an increase from round-off
    out = np.minimum(out, cur[None, :])
    return out[0] if np.ndim(xstar) == 1 else out


def joint_cov(state: PosteriorState, points) -> tuple[np.ndarray, np.ndarray]:
    """Posterior mean vector and covariance matrix of f over ``points``."""
    P = _as_inputs(points, state.dim)
    kP = K.k_eval(state.kernel, state.inputs, P)
    w = state.whiten(kP)
    mean = kP.T @ state.weights
    cov = K.k_eval(state.kernel, P, P) - w.T @ w
    return mean, 0.5 * (cov + cov.T)


def joint_sample(state: PosteriorState, points, n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` joint posterior draws of f over ``points``; shape ``(n, len(points))``."""
    if n < 1:
        raise UsageError("need at least one sample")
    P = _as_inputs(points, state.dim)
    if P.shape[0] < 1:
        raise UsageError("need at least one point")
    mean, cov = joint_cov(state, P)
    chol = cholesky_with_jitter(cov, state.kernel.signal_variance, "posterior covariance")
    z = rng.standard_normal((n, P.shape[0]))
    return mean[None, :] + z @ chol.T


def batched_cov(state: PosteriorState, groups: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Posterior means ``(n, g)`` and covariances ``(n, g, g)`` of n small point groups.

    ``groups`` has shape ``(n, g, d)``; each group is handled as an independent
    joint distribution.
    """
    G = np.asarray(groups, dtype=float)
    n, g, d = G.shape
    flat = G.reshape(n * g, d)
    kf = K.k_eval(state.kernel, state.inputs, flat)  # (t, n*g)
    mean = (kf.T @ state.weights).reshape(n, g)
    w = state.whiten(kf).reshape(-1, n, g)
    diff = G[:, :, None, :] - G[:, None, :, :]
    prior_cov = state.kernel.signal_variance * np.exp(-np.sum(diff**2, axis=-1) / state.kernel.lengthscale)
    cov = prior_cov - np.einsum("tna,tnb->nab", w, w)
    return mean, 0.5 * (cov + np.swapaxes(cov, 1, 2))
