"""Belief-space recursion operator for models with hidden states.

The value function depends on the belief statistic: the vector of regime
probabilities for a hidden Markov chain (its first N-1 coordinates form
the grid state), or the steady-state posterior mean for a linear-Gaussian
state space. The operator nests an inner expectation over observables
given the true hidden state inside an outer expectation over the hidden
state under current beliefs, with the inner one raised to vartheta/theta:

    T f(b) = beta log E_b[ E[ e^{(theta/vartheta)(f(b') + alpha u(obs'))}
                              | hidden ]^{vartheta/theta} ]

vartheta = inf moves the inner expectation inside the exponent:

    T f(b) = beta log E_b[ e^{ E[ f(b') + alpha u(obs') | hidden ] } ]

The (theta/vartheta) scaling multiplies the whole inner exponent; that is
the form the value recursion actually reduces to, the only one whose
vartheta -> inf limit is the second display, and the one under which
vartheta = theta collapses to a single expectation. Both layers run
through stabilized log-sum-exp and set the divergence flag on overflow.
"""

from __future__ import annotations

import numpy as np
from scipy import stats
from scipy.special import logsumexp

from .filters import SteadyFilter
from .grids import GridFunction, StateGrid
from .models import (
    DEFAULT_QUAD,
    GaussianStateSpaceModel,
    HiddenRegimeModel,
    LOG_OVERFLOW,
    QuadratureSpec,
    gauss_hermite,
)
from .operators import LearningSpec


def _beliefs_from_coords(coords: np.ndarray, n_regimes: int) -> np.ndarray:
    b = np.empty(n_regimes)
    b[: n_regimes - 1] = coords
    b[n_regimes - 1] = 1.0 - coords.sum()
    if np.any(b < -1e-9) or b[-1] > 1.0 + 1e-9:
        raise ValueError("belief grid point off the probability simplex")
    return np.clip(b, 0.0, 1.0)


def _stack_layers(spec: LearningSpec, log_outer, logw, z):
    """Combine the two expectation layers, vectorized over grid points.

    log_outer: (npts, n_out); logw: (n_in,); z: (npts, n_out, n_in) holding
    f(next belief) + alpha u per inner node. Returns (values, diverged).
    """
    if np.isinf(spec.vartheta):
        inner = (np.exp(logw)[None, None, :] * z).sum(axis=2)
    else:
        ratio = spec.vartheta / spec.theta
        inner = ratio * logsumexp(logw[None, None, :] + z / ratio, axis=2)
    vals = logsumexp(log_outer + inner, axis=1)
    diverged = bool(np.any(vals > LOG_OVERFLOW) or not np.all(np.isfinite(vals)))
    return spec.beta * vals, diverged


class _RegimeOperator:
    """Precomputed belief-space operator for a hidden-regime model."""

    def __init__(self, spec, model: HiddenRegimeModel, grid: StateGrid, quad, u):
        self.spec = spec
        self.grid = grid
        n = model.n_regimes
        z, w = gauss_hermite(quad.n)
        self.logw = np.log(w)
        sds = np.sqrt(model.obs_var)
        obs = model.obs_mean[:, None] + sds[:, None] * z[None, :]  # (n, m)
        growth = obs if u is None else np.asarray(u(obs), dtype=float)
        self.au = spec.alpha * growth
        pts = grid.points()
        beliefs = np.stack([_beliefs_from_coords(c, n) for c in pts])  # (npts, n)
        with np.errstate(divide="ignore"):
            self.log_b = np.where(beliefs > 0.0, np.log(np.clip(beliefs, 1e-300, None)), -np.inf)
        # posterior update in log space: far-tail observations underflow the
        # unlikely regime's likelihood to exactly zero in linear space
        loglik = stats.norm.logpdf(
            obs[:, :, None], model.obs_mean[None, None, :], sds[None, None, :]
        )  # (n, m, n)
        log_post = loglik[None, :, :, :] + self.log_b[:, None, None, :]
        log_post = log_post - logsumexp(log_post, axis=3, keepdims=True)
        new_beliefs = np.einsum("pxmj,ij->pxmi", np.exp(log_post), model.Lambda)
        self.coords = new_beliefs[..., : n - 1]  # (npts, n, m, n-1)

    def __call__(self, f: GridFunction) -> GridFunction:
        npts, n, m, _ = self.coords.shape
        fvals = f.eval(self.coords.reshape(-1, self.coords.shape[-1])).reshape(npts, n, m)
        vals, diverged = _stack_layers(self.spec, self.log_b, self.logw, fvals + self.au[None])
        return GridFunction(self.grid, vals.reshape(self.grid.shape), diverged=diverged)


class _StateSpaceOperator:
    """Precomputed belief-space operator for a scalar Gaussian state space.

    Outer layer: hidden xi ~ N(xi_hat, Sigma_bar) (steady-state posterior);
    inner layer: obs' ~ N(A xi, Sigma_u); the posterior mean updates through
    the steady-state gain.
    """

    def __init__(self, spec, model: GaussianStateSpaceModel, filt: SteadyFilter, grid, quad, u):
        if model.hidden_dim != 1 or model.obs_dim != 1:
            raise ValueError("grid-based learning supports scalar state spaces")
        self.spec = spec
        self.grid = grid
        z, w = gauss_hermite(quad.n)
        self.logw = np.log(w)
        a = float(model.A[0, 0])
        b = float(model.B[0, 0])
        s_post = float(np.sqrt(filt.Sigma_bar[0, 0]))
        s_obs = float(np.sqrt(model.Sigma_u[0, 0]))
        gain = float(filt.gain[0, 0])
        pts = grid.points()[:, 0]
        xis = pts[:, None] + s_post * z[None, :]  # (npts, n_out)
        obs = a * xis[:, :, None] + s_obs * z[None, None, :]  # (npts, n_out, n_in)
        growth = obs if u is None else np.asarray(u(obs), dtype=float)
        self.au = spec.alpha * growth
        self.coords = (b * pts[:, None, None] + gain * (obs - a * pts[:, None, None]))[..., None]
        self.log_outer = np.tile(self.logw, (pts.size, 1))

    def __call__(self, f: GridFunction) -> GridFunction:
        npts = self.coords.shape[0]
        fvals = f.eval(self.coords.reshape(-1, 1)).reshape(self.coords.shape[:3])
        vals, diverged = _stack_layers(self.spec, self.log_outer, self.logw, fvals + self.au)
        return GridFunction(self.grid, vals.reshape(self.grid.shape), diverged=diverged)


def learning_operator(
    spec: LearningSpec,
    model,
    grid: StateGrid,
    quad: QuadratureSpec = DEFAULT_QUAD,
    u=None,
    filt: SteadyFilter | None = None,
):
    """Operator closure with nodes and belief updates precomputed once;
    use this for iterative solves."""
    if isinstance(model, HiddenRegimeModel):
        return _RegimeOperator(spec, model, grid, quad, u)
    if isinstance(model, GaussianStateSpaceModel):
        if filt is None:
            raise ValueError("state-space learning needs the steady-state filter")
        return _StateSpaceOperator(spec, model, filt, grid, quad, u)
    raise TypeError(f"unsupported model type {type(model).__name__}")


def apply_learning(
    spec: LearningSpec,
    model,
    f,
    quad: QuadratureSpec = DEFAULT_QUAD,
    u=None,
    filt: SteadyFilter | None = None,
):
    """Apply the belief-space operator to f.

    For a HiddenRegimeModel, f is a GridFunction over the first N-1
    belief coordinates. N = 1 beliefs are degenerate: pass a scalar f and
    receive a float (the operator then reduces to the observable
    exponential recursion, rescaled by vartheta/theta). For a
    GaussianStateSpaceModel, f is a GridFunction over the scalar
    posterior mean and `filt` must come from kalman_steady_state.
    `u` maps observations to utility growth (default: the observation
    itself).
    """
    if isinstance(model, HiddenRegimeModel) and model.n_regimes == 1:
        z, w = gauss_hermite(quad.n)
        obs = model.obs_mean[0] + np.sqrt(model.obs_var[0]) * z
        growth = obs if u is None else np.asarray(u(obs), dtype=float)
        zvals = (float(f) + spec.alpha * growth)[None, None, :]
        vals, _ = _stack_layers(spec, np.zeros((1, 1)), np.log(w), zvals)
        return float(vals[0])
    if not isinstance(f, GridFunction):
        raise TypeError("f must be a GridFunction (or a scalar for one regime)")
    return learning_operator(spec, model, f.grid, quad, u, filt)(f)
