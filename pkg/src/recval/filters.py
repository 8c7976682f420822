"""Belief filters: steady-state Kalman recursion and the discrete regime filter."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .models import GaussianStateSpaceModel, HiddenRegimeModel


class RiccatiConvergenceError(RuntimeError):
    def __init__(self, message, trace):
        super().__init__(message)
        self.trace = trace


@dataclass
class SteadyFilter:
    """Steady-state filter for a linear-Gaussian state space.

    Sigma_bar solves the prediction-form Riccati fixed point; the belief
    (posterior-mean) update is xi' = B xi + K (obs - A xi) with
    K = B Sigma_bar A' (A Sigma_bar A' + Sigma_u)^{-1}.
    """

    model: GaussianStateSpaceModel
    Sigma_bar: np.ndarray
    gain: np.ndarray
    iterations: int
    residual: float

    def update(self, xi_hat, obs) -> np.ndarray:
        xi_hat = np.atleast_1d(np.asarray(xi_hat, dtype=float))
        obs = np.atleast_1d(np.asarray(obs, dtype=float))
        return self.model.B @ xi_hat + self.gain @ (obs - self.model.A @ xi_hat)


def _riccati_step(model: GaussianStateSpaceModel, S: np.ndarray) -> np.ndarray:
    A, B = model.A, model.B
    innov = A @ S @ A.T + model.Sigma_u
    gain_core = S @ A.T @ np.linalg.solve(innov, A @ S)
    return B @ (S - gain_core) @ B.T + model.Sigma_w


def kalman_steady_state(
    model: GaussianStateSpaceModel, tol: float = 1e-12, max_iter: int = 100_000
) -> SteadyFilter:
    """Iterate the prediction-form Riccati map to its fixed point.

    Convergence is declared when one Riccati step moves Sigma_bar by
    less than `tol` in sup norm; non-convergence raises with the
    residual trace attached.
    """
    if tol <= 0.0:
        raise ValueError("tol must be > 0")
    S = model.Sigma_w.copy()
    trace = []
    for it in range(1, max_iter + 1):
        S_next = _riccati_step(model, S)
        res = float(np.max(np.abs(S_next - S)))
        trace.append(res)
        S = S_next
        if res < tol:
            innov = model.A @ S @ model.A.T + model.Sigma_u
            gain = model.B @ S @ model.A.T @ np.linalg.inv(innov)
            return SteadyFilter(model, S, gain, it, res)
    raise RiccatiConvergenceError(
        f"Riccati iteration did not reach tol={tol} in {max_iter} steps", trace
    )


def regime_filter_update(model: HiddenRegimeModel, beliefs, obs) -> np.ndarray:
    """One Bayes update of regime beliefs given an observation.

    Returns Lambda (q(obs) * beliefs) / sum(q(obs) * beliefs); the output
    is renormalized onto the simplex to machine precision.
    """
    beliefs = np.atleast_1d(np.asarray(beliefs, dtype=float))
    if beliefs.size != model.n_regimes:
        raise ValueError("belief vector length must match the number of regimes")
    if np.any(beliefs < -1e-12) or abs(float(beliefs.sum()) - 1.0) > 1e-9:
        raise ValueError("beliefs must lie on the probability simplex")
    lik = model.obs_lik(obs)
    post = lik * np.clip(beliefs, 0.0, None)
    total = float(post.sum())
    if total <= 0.0 or not np.isfinite(total):
        raise ValueError("all regime likelihoods vanish at this observation")
    out = model.Lambda @ (post / total)
    return out / float(out.sum())
