"""Markov state processes and their probabilistic primitives.

Each model exposes the same surface: conditional-expectation quadrature
(`transition_nodes`), the terms needed by the exponential recursion
operators (`robust_terms`: an analytic log-moment shift plus quadrature
nodes over the effective state), truncated/renormalized kernels,
seeded samplers, and the stationary law of the effective state.

Conventions
-----------
* The "grid state" is the coordinate a value function depends on
  (the full state for VAR(1), the volatility/intensity coordinate for
  the stochastic-volatility and disaster models, (x, regime) for
  regime-switching VARs).
* `transition_nodes` integrates over the *full* next state (the grid
  state plus any auxiliary growth component), so generic conditional
  expectations E[f(X')|X = x] can be taken of any next-state function.
* Transition matrices are column-stochastic: Lambda[i, j] is the
  probability of moving to state i from state j, so tomorrow's
  distribution is Lambda @ (today's distribution).
* All samplers are pure functions of (model, seed); zero variances are
  routed to point masses instead of degenerate factorizations.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import linalg, stats
from scipy.special import gammaln, logsumexp, roots_genlaguerre, roots_legendre

LOG_OVERFLOW = 700.0  # exp() overflow boundary for doubles, natural-log scale
STATIONARY_BURN_IN = 100_000  # burn-in for simulation-backed stationary laws


class DivergenceError(RuntimeError):
    """A conditional expectation overflowed after stabilization."""


# ---------------------------------------------------------------------------
# quadrature primitives


@dataclass
class QuadratureSpec:
    """How conditional expectations are evaluated.

    scheme: "gauss-hermite" (default), "gauss-legendre-truncated",
    "monte-carlo", or "closed-form"; n is the node count per shock
    dimension (or the Monte Carlo sample size); bounds apply to the
    truncated scheme; seed to Monte Carlo.
    """

    scheme: str = "gauss-hermite"
    n: int = 41
    bounds: tuple | None = None
    seed: int | None = None

    def __post_init__(self):
        if self.scheme not in (
            "gauss-hermite",
            "gauss-legendre-truncated",
            "monte-carlo",
            "closed-form",
        ):
            raise ValueError(f"unknown quadrature scheme {self.scheme!r}")
        if self.n < 1:
            raise ValueError("quadrature node count must be >= 1")
        if self.scheme == "gauss-legendre-truncated":
            if self.bounds is None or not np.all(np.isfinite(np.asarray(self.bounds))):
                raise ValueError("truncated scheme needs finite bounds")


DEFAULT_QUAD = QuadratureSpec()


@lru_cache(maxsize=64)
def gauss_hermite(n: int):
    """Probabilists' Gauss-Hermite rule: nodes z, weights w with
    sum(w f(z)) = E[f(Z)], Z standard normal."""
    x, w = np.polynomial.hermite_e.hermegauss(n)
    return x, w / np.sqrt(2.0 * np.pi)


@lru_cache(maxsize=64)
def _legendre_rule(n: int):
    return roots_legendre(n)


@lru_cache(maxsize=256)
def _gamma_rule(shape: float, n: int):
    """Generalized Gauss-Laguerre rule for a Gamma(shape, scale=1) law."""
    x, w = roots_genlaguerre(n, shape - 1.0)
    logw = np.log(w) - gammaln(shape)
    return x, logw


def _poisson_logpmf_support(lam: float, tail: float = 1e-14):
    """Support 0..J of Poisson(lam) covering all but `tail` mass."""
    if lam <= 0.0:
        return np.array([0]), np.array([0.0])
    jmax = int(np.ceil(lam + 12.0 * np.sqrt(lam) + 15.0))
    js = np.arange(jmax + 1)
    logp = stats.poisson.logpmf(js, lam)
    keep = logp > np.log(tail) - 5.0
    keep[0] = True
    return js[keep], logp[keep]


def gaussian_nodes(mean, cov, n: int):
    """Tensor Gauss-Hermite nodes for N(mean, cov).

    Returns (nodes, logw) with nodes shaped (m, d). Zero-variance
    directions collapse to point masses.
    """
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    d = mean.size
    vals, vecs = np.linalg.eigh(cov)
    vals = np.clip(vals, 0.0, None)
    active = np.where(vals > 1e-300)[0]
    if active.size == 0:
        return mean.reshape(1, d), np.zeros(1)
    z, w = gauss_hermite(n)
    grids = np.meshgrid(*([z] * active.size), indexing="ij")
    zs = np.stack([g.ravel() for g in grids], axis=-1)  # (m, k)
    scale = vecs[:, active] * np.sqrt(vals[active])  # (d, k)
    nodes = mean[None, :] + zs @ scale.T
    logw = np.zeros(zs.shape[0])
    for k in range(active.size):
        logw = logw + np.log(w)[_tensor_index(zs.shape[0], active.size, k, z.size)]
    return nodes, logw


def _tensor_index(m, kdims, k, nsize):
    # index pattern of dimension k in a C-order tensor product
    reps_inner = nsize ** (kdims - k - 1)
    reps_outer = m // (nsize * reps_inner)
    return np.tile(np.repeat(np.arange(nsize), reps_inner), reps_outer)


def _psd_factor(cov):
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    vals, vecs = np.linalg.eigh(cov)
    vals = np.clip(vals, 0.0, None)
    return vecs * np.sqrt(vals)


def _check_psd_symmetric(M, name):
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if not np.allclose(M, M.T, atol=1e-10):
        raise ValueError(f"{name} must be symmetric")
    if np.min(np.linalg.eigvalsh(M)) < -1e-10:
        raise ValueError(f"{name} must be positive semidefinite")
    return M


def _spectral_radius(A) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(np.atleast_2d(A)))))


# ---------------------------------------------------------------------------
# stationary laws


@dataclass
class StationaryLaw:
    """Stationary law of a model's effective state.

    Closed-form kinds carry exact moments (and a pdf for scalar laws);
    the "empirical" kind wraps a seeded long-run simulation with a
    declared burn-in.
    """

    kind: str  # gaussian | gamma | gaussian-mixture | categorical | empirical
    mean: np.ndarray
    cov: np.ndarray
    description: str
    _sampler: callable = None
    params: dict = None
    burn_in: int = 0

    def sample(self, n: int, seed: int) -> np.ndarray:
        return self._sampler(int(n), int(seed))

    @property
    def dim(self) -> int:
        return int(np.atleast_1d(self.mean).size)

    def logpdf(self, x):
        """Scalar closed-form densities only."""
        x = np.asarray(x, dtype=float)
        p = self.params or {}
        if self.kind == "gaussian" and self.dim == 1:
            m = float(np.atleast_1d(self.mean)[0])
            s = float(np.sqrt(np.atleast_2d(self.cov)[0, 0]))
            return stats.norm.logpdf(x, m, s)
        if self.kind == "gamma":
            return stats.gamma.logpdf(x, p["shape"], scale=p["scale"])
        if self.kind == "gaussian-mixture":
            comp = np.stack(
                [
                    np.log(wi) + stats.norm.logpdf(x, mi, np.sqrt(vi))
                    for wi, mi, vi in zip(p["weights"], p["means"], p["variances"])
                ]
            )
            return logsumexp(comp, axis=0)
        raise ValueError(f"no closed-form density for kind {self.kind!r}")

    def summary(self) -> dict:
        return {
            "kind": self.kind,
            "mean": np.atleast_1d(self.mean).tolist(),
            "cov": np.atleast_2d(self.cov).tolist(),
            "description": self.description,
            "burn_in": self.burn_in,
        }


def _gaussian_law(mean, cov, description):
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    fac = _psd_factor(cov)

    def sampler(n, seed):
        rng = np.random.default_rng(seed)
        z = rng.standard_normal((n, mean.size))
        out = mean[None, :] + z @ fac.T
        return out[:, 0] if mean.size == 1 else out

    return StationaryLaw("gaussian", mean, cov, description, sampler)


# ---------------------------------------------------------------------------
# models


class GaussianVar1Model:
    """Stationary Gaussian VAR(1): X' = nu + A X + u, u ~ N(0, Sigma).

    Utility growth is u(x, x') = lambda0'x + lambda1'x'.
    """

    def __init__(self, nu, A, Sigma, lambda0=None, lambda1=None):
        self.nu = np.atleast_1d(np.asarray(nu, dtype=float))
        self.A = np.atleast_2d(np.asarray(A, dtype=float))
        d = self.nu.size
        if self.A.shape != (d, d):
            raise ValueError("A must be d x d")
        if _spectral_radius(self.A) >= 1.0:
            raise ValueError("spectral radius of A must be < 1 (non-stationary)")
        self.Sigma = _check_psd_symmetric(Sigma, "Sigma")
        if self.Sigma.shape != (d, d):
            raise ValueError("Sigma must be d x d")
        self.lambda0 = np.zeros(d) if lambda0 is None else np.atleast_1d(np.asarray(lambda0, float))
        self.lambda1 = np.zeros(d) if lambda1 is None else np.atleast_1d(np.asarray(lambda1, float))
        self._factor = _psd_factor(self.Sigma)
        self._sds = np.sqrt(np.clip(np.diag(self.Sigma), 0.0, None))

    @property
    def state_dim(self) -> int:
        return self.nu.size

    def cond_mean(self, x):
        return self.nu + self.A @ np.atleast_1d(np.asarray(x, dtype=float))

    def utility_growth(self, x, xnext):
        xnext = np.atleast_2d(np.asarray(xnext, dtype=float))
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return float(self.lambda0 @ x) + xnext @ self.lambda1

    def expected_utility_growth(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return float(self.lambda0 @ x + self.lambda1 @ self.cond_mean(x))

    def transition_nodes(self, x, quad=DEFAULT_QUAD):
        return gaussian_nodes(self.cond_mean(x), self.Sigma, quad.n)

    def robust_terms(self, x, alpha, quad=DEFAULT_QUAD):
        nodes, logw = self.transition_nodes(x, quad)
        au = alpha * self.utility_growth(x, nodes)
        return 0.0, nodes, logw, au

    def truncated_robust_terms(self, x, alpha, bounds, n: int = 80):
        nodes, logw, logq = self._truncated_kernel(x, bounds, n)
        au = alpha * self.utility_growth(x, nodes)
        return 0.0, nodes, logw, au, logq

    def _truncated_kernel(self, x, bounds, n):
        m = self.cond_mean(x)
        bnds = np.atleast_2d(np.asarray(bounds, dtype=float))
        gx, gw = _legendre_rule(n)
        axes, logjac = [], 0.0
        for k in range(self.state_dim):
            sd = max(self._sds[k], 1e-12)
            lo = max(bnds[k, 0], m[k] - 9.0 * sd)
            hi = min(bnds[k, 1], m[k] + 9.0 * sd)
            if hi <= lo:
                raise ValueError("truncation mass numerically zero at a grid node")
            axes.append(0.5 * (hi + lo) + 0.5 * (hi - lo) * gx)
            logjac += np.log(0.5 * (hi - lo))
        mesh = np.meshgrid(*axes, indexing="ij")
        nodes = np.stack([g.ravel() for g in mesh], axis=-1)
        logw = np.zeros(nodes.shape[0]) + logjac
        for k in range(self.state_dim):
            logw = logw + np.log(gw)[_tensor_index(nodes.shape[0], self.state_dim, k, n)]
        logpdf = stats.multivariate_normal.logpdf(nodes, mean=m, cov=self.Sigma, allow_singular=True)
        logw = logw + np.atleast_1d(logpdf)
        logq = logsumexp(logw)
        if logq < -600.0:
            raise ValueError("truncation mass numerically zero at a grid node")
        return nodes, logw - logq, logq

    def truncation_mass(self, x, bounds):
        """Exact Q(C|x) when Sigma is diagonal, else quadrature mass."""
        m = self.cond_mean(x)
        bnds = np.atleast_2d(np.asarray(bounds, dtype=float))
        offdiag = self.Sigma - np.diag(np.diag(self.Sigma))
        if np.allclose(offdiag, 0.0):
            mass = 1.0
            for k in range(self.state_dim):
                sd = self._sds[k]
                if sd == 0.0:
                    mass *= float(bnds[k, 0] <= m[k] <= bnds[k, 1])
                else:
                    mass *= stats.norm.cdf(bnds[k, 1], m[k], sd) - stats.norm.cdf(bnds[k, 0], m[k], sd)
            return mass
        return float(np.exp(self._truncated_kernel(x, bounds, 80)[2]))

    def sample_transition(self, x, rng):
        z = rng.standard_normal(self.state_dim)
        return self.cond_mean(x) + self._factor @ z

    def sample_transition_many(self, x, n, rng):
        z = rng.standard_normal((n, self.state_dim))
        return self.cond_mean(x)[None, :] + z @ self._factor.T

    def sample_stationary(self, n, seed):
        return np.atleast_2d(self.stationary_law().sample(n, seed)).reshape(n, self.state_dim)

    def stationary_law(self) -> StationaryLaw:
        mean = np.linalg.solve(np.eye(self.state_dim) - self.A, self.nu)
        cov = linalg.solve_discrete_lyapunov(self.A, self.Sigma)
        return _gaussian_law(mean, cov, "Gaussian VAR(1) stationary law")

    def utility_growth_law(self) -> StationaryLaw:
        """Stationary law of u(X, X'): Gaussian (affine in a Gaussian pair)."""
        law = self.stationary_law()
        b = self.lambda0 + self.A.T @ self.lambda1
        mean = float(b @ np.atleast_1d(law.mean) + self.lambda1 @ self.nu + self.lambda1 @ self.A @ np.atleast_1d(law.mean) - (self.A.T @ self.lambda1) @ np.atleast_1d(law.mean))
        # simpler: u = (lambda0 + A'lambda1)'X + lambda1'nu + lambda1'u_shock
        mean = float((self.lambda0 + self.A.T @ self.lambda1) @ np.atleast_1d(law.mean) + self.lambda1 @ self.nu)
        var = float(b @ np.atleast_2d(law.cov) @ b + self.lambda1 @ self.Sigma @ self.lambda1)
        return _gaussian_law([mean], [[var]], "stationary law of utility growth")


class SsyVolModel:
    """Consumption growth with lognormal stochastic volatility.

    g' = nu_g + e^{h} eta_g,  h' = nu_h + rho h + sigma eta_h, with h the
    effective state. The growth dimension reduces analytically in every
    exponential-affine expectation.
    """

    full_next_labels = ("g", "h")

    def __init__(self, nu_g, nu_h, rho, sigma):
        if not abs(rho) < 1.0:
            raise ValueError("|rho| must be < 1")
        if sigma <= 0.0:
            raise ValueError("sigma must be > 0")
        self.nu_g = float(nu_g)
        self.nu_h = float(nu_h)
        self.rho = float(rho)
        self.sigma = float(sigma)

    @property
    def state_dim(self) -> int:
        return 1

    def _h(self, x) -> float:
        return float(np.atleast_1d(np.asarray(x, dtype=float))[0])

    def cond_mean_h(self, x) -> float:
        return self.nu_h + self.rho * self._h(x)

    def utility_growth(self, x, xnext):
        xnext = np.atleast_2d(np.asarray(xnext, dtype=float))
        return xnext[:, 0]  # g component of the full next state

    def expected_utility_growth(self, x):
        return self.nu_g

    def growth_log_mgf(self, alpha, x) -> float:
        """log E[exp(alpha g') | h]; g'|h ~ N(nu_g, e^{2h})."""
        h = self._h(x)
        return alpha * self.nu_g + 0.5 * alpha**2 * np.exp(2.0 * h)

    def transition_nodes(self, x, quad=DEFAULT_QUAD):
        h = self._h(x)
        z, w = gauss_hermite(quad.n)
        gs = self.nu_g + np.exp(h) * z
        hs = self.cond_mean_h(x) + self.sigma * z
        gg, hh = np.meshgrid(gs, hs, indexing="ij")
        nodes = np.stack([gg.ravel(), hh.ravel()], axis=-1)
        lw = np.log(w)
        logw = (lw[:, None] + lw[None, :]).ravel()
        return nodes, logw

    def robust_terms(self, x, alpha, quad=DEFAULT_QUAD):
        z, w = gauss_hermite(quad.n)
        nodes = (self.cond_mean_h(x) + self.sigma * z).reshape(-1, 1)
        return self.growth_log_mgf(alpha, x), nodes, np.log(w), np.zeros(z.size)

    def truncated_robust_terms(self, x, alpha, bounds, n: int = 80):
        lo, hi = np.asarray(bounds, dtype=float).reshape(2)
        m = self.cond_mean_h(x)
        wlo = max(lo, m - 9.0 * self.sigma)
        whi = min(hi, m + 9.0 * self.sigma)
        if whi <= wlo:
            raise ValueError("truncation mass numerically zero at a grid node")
        gx, gw = _legendre_rule(n)
        nodes = 0.5 * (whi + wlo) + 0.5 * (whi - wlo) * gx
        logw = np.log(gw) + np.log(0.5 * (whi - wlo)) + stats.norm.logpdf(nodes, m, self.sigma)
        logq = logsumexp(logw)
        return (
            self.growth_log_mgf(alpha, x),
            nodes.reshape(-1, 1),
            logw - logq,
            np.zeros(nodes.size),
            logq,
        )

    def truncation_mass(self, x, bounds):
        lo, hi = np.asarray(bounds, dtype=float).reshape(2)
        m = self.cond_mean_h(x)
        return stats.norm.cdf(hi, m, self.sigma) - stats.norm.cdf(lo, m, self.sigma)

    def sample_transition(self, x, rng):
        return np.array([self.cond_mean_h(x) + self.sigma * rng.standard_normal()])

    def sample_full_transition(self, x, rng):
        h = self._h(x)
        g = self.nu_g + np.exp(h) * rng.standard_normal()
        hn = self.cond_mean_h(x) + self.sigma * rng.standard_normal()
        return np.array([g, hn])

    def sample_transition_many(self, x, n, rng):
        h = self._h(x)
        g = self.nu_g + np.exp(h) * rng.standard_normal(n)
        hn = self.cond_mean_h(x) + self.sigma * rng.standard_normal(n)
        return np.stack([g, hn], axis=-1)

    def sample_stationary(self, n, seed):
        return self.stationary_law().sample(n, seed).reshape(n, 1)

    def stationary_law(self) -> StationaryLaw:
        mean = self.nu_h / (1.0 - self.rho)
        var = self.sigma**2 / (1.0 - self.rho**2)
        return _gaussian_law([mean], [[var]], "stationary law of the log-volatility state")


class DisasterArgModel:
    """Consumption growth with Poisson disasters at an autoregressive-gamma
    intensity.

    g' = nu_g + w_z + sigma w_g with j'|h ~ Poisson(h) jumps; the intensity
    h evolves as an ARG(phi, c, delta) process (Poisson-Gamma mixture
    transitions with an exponential-affine Laplace transform). With
    varsigma = 1 the jump component is w_z|j ~ N(nu_j j, sigma_j^2 j)
    (both moments scale with the jump count); varsigma in [1/2, 1) selects
    the thinner-tailed variant w_z|j ~ N(nu_j j^varsigma, sigma_j^2).
    """

    full_next_labels = ("g", "h")

    def __init__(self, nu_g, sigma, nu_j, sigma_j, phi, c, delta, varsigma=1.0):
        if not (0.0 < phi < 1.0):
            raise ValueError("phi must be in (0, 1)")
        if c <= 0.0 or delta <= 0.0:
            raise ValueError("c and delta must be > 0")
        if nu_j >= 0.0:
            raise ValueError("nu_j must be < 0 (disasters)")
        if sigma <= 0.0 or sigma_j <= 0.0:
            raise ValueError("shock scales must be > 0")
        if not (0.5 <= varsigma <= 1.0):
            raise ValueError("varsigma must be in [1/2, 1]")
        self.nu_g = float(nu_g)
        self.sigma = float(sigma)
        self.nu_j = float(nu_j)
        self.sigma_j = float(sigma_j)
        self.phi = float(phi)
        self.c = float(c)
        self.delta = float(delta)
        self.varsigma = float(varsigma)

    @property
    def state_dim(self) -> int:
        return 1

    def _h(self, x) -> float:
        h = float(np.atleast_1d(np.asarray(x, dtype=float))[0])
        if h < 0.0:
            raise ValueError("intensity state must be >= 0")
        return h

    def utility_growth(self, x, xnext):
        xnext = np.atleast_2d(np.asarray(xnext, dtype=float))
        return xnext[:, 0]

    def expected_utility_growth(self, x):
        h = self._h(x)
        if self.varsigma == 1.0:
            return self.nu_g + self.nu_j * h
        js, logp = _poisson_logpmf_support(h)
        return self.nu_g + self.nu_j * float(np.exp(logp) @ js.astype(float) ** self.varsigma)

    def growth_log_mgf(self, alpha, x) -> float:
        """log E[exp(alpha g') | h] via the truncated Poisson mixture."""
        h = self._h(x)
        base = alpha * self.nu_g + 0.5 * alpha**2 * self.sigma**2
        if self.varsigma == 1.0:
            return base + h * (np.exp(alpha * self.nu_j + 0.5 * alpha**2 * self.sigma_j**2) - 1.0)
        js, logp = _poisson_logpmf_support(h)
        terms = logp + alpha * self.nu_j * js.astype(float) ** self.varsigma
        return base + 0.5 * alpha**2 * self.sigma_j**2 + float(logsumexp(terms))

    def intensity_nodes(self, x, n: int = 40):
        """Quadrature for h'|h: Poisson(phi h / c)-mixed Gamma(delta + j, c)."""
        h = self._h(x)
        js, logp = _poisson_logpmf_support(self.phi * h / self.c)
        all_nodes, all_logw = [], []
        for j, lp in zip(js, logp):
            xg, logwg = _gamma_rule(self.delta + float(j), n)
            all_nodes.append(self.c * xg)
            all_logw.append(lp + logwg)
        return np.concatenate(all_nodes), np.concatenate(all_logw)

    def transition_nodes(self, x, quad=DEFAULT_QUAD):
        """Joint (g', h') nodes: jump-count mixture x Gaussian for g',
        independent ARG quadrature for h'."""
        h = self._h(x)
        n_g = max(9, quad.n // 3)
        hs, logw_h = self.intensity_nodes(x, n=max(16, quad.n // 2))
        js, logp = _poisson_logpmf_support(h)
        z, w = gauss_hermite(n_g)
        g_nodes, g_logw = [], []
        for j, lp in zip(js, logp):
            jf = float(j)
            if self.varsigma == 1.0:
                mg = self.nu_g + self.nu_j * jf
                sg = np.sqrt(self.sigma**2 + self.sigma_j**2 * jf)
            else:
                mg = self.nu_g + self.nu_j * jf**self.varsigma
                sg = np.sqrt(self.sigma**2 + self.sigma_j**2)
            g_nodes.append(mg + sg * z)
            g_logw.append(lp + np.log(w))
        gs = np.concatenate(g_nodes)
        logw_g = np.concatenate(g_logw)
        gg, hh = np.meshgrid(gs, hs, indexing="ij")
        nodes = np.stack([gg.ravel(), hh.ravel()], axis=-1)
        logw = (logw_g[:, None] + logw_h[None, :]).ravel()
        return nodes, logw

    def robust_terms(self, x, alpha, quad=DEFAULT_QUAD):
        nodes, logw = self.intensity_nodes(x, n=max(24, quad.n))
        return self.growth_log_mgf(alpha, x), nodes.reshape(-1, 1), logw, np.zeros(nodes.size)

    def intensity_logpdf(self, x, hnext):
        h = self._h(x)
        hnext = np.asarray(hnext, dtype=float)
        js, logp = _poisson_logpmf_support(self.phi * h / self.c)
        comp = np.stack(
            [
                lp + stats.gamma.logpdf(hnext, self.delta + float(j), scale=self.c)
                for j, lp in zip(js, logp)
            ]
        )
        return logsumexp(comp, axis=0)

    def truncated_robust_terms(self, x, alpha, bounds, n: int = 120):
        lo, hi = np.asarray(bounds, dtype=float).reshape(2)
        lo = max(lo, 0.0)
        gx, gw = _legendre_rule(n)
        nodes = 0.5 * (hi + lo) + 0.5 * (hi - lo) * gx
        logw = np.log(gw) + np.log(0.5 * (hi - lo)) + self.intensity_logpdf(x, nodes)
        logq = logsumexp(logw)
        if logq < -600.0:
            raise ValueError("truncation mass numerically zero at a grid node")
        return (
            self.growth_log_mgf(alpha, x),
            nodes.reshape(-1, 1),
            logw - logq,
            np.zeros(nodes.size),
            logq,
        )

    def truncation_mass(self, x, bounds):
        lo, hi = np.asarray(bounds, dtype=float).reshape(2)
        h = self._h(x)
        js, logp = _poisson_logpmf_support(self.phi * h / self.c)
        p = np.exp(logp)
        cdfs = np.array(
            [
                stats.gamma.cdf(hi, self.delta + float(j), scale=self.c)
                - stats.gamma.cdf(max(lo, 0.0), self.delta + float(j), scale=self.c)
                for j in js
            ]
        )
        return float(p @ cdfs)

    def sample_transition(self, x, rng):
        h = self._h(x)
        j = rng.poisson(self.phi * h / self.c)
        return np.array([rng.gamma(self.delta + j, self.c)])

    def sample_full_transition(self, x, rng):
        h = self._h(x)
        j = float(rng.poisson(h))
        if self.varsigma == 1.0:
            wz = self.nu_j * j + self.sigma_j * np.sqrt(j) * rng.standard_normal()
        else:
            wz = self.nu_j * j**self.varsigma + self.sigma_j * rng.standard_normal()
        g = self.nu_g + wz + self.sigma * rng.standard_normal()
        return np.array([g, float(self.sample_transition(x, rng)[0])])

    def sample_transition_many(self, x, n, rng):
        return np.stack([self.sample_full_transition(x, rng) for _ in range(n)])

    def sample_stationary(self, n, seed):
        return self.stationary_law().sample(n, seed).reshape(n, 1)

    def stationary_law(self) -> StationaryLaw:
        shape = self.delta
        scale = self.c / (1.0 - self.phi)
        mean = shape * scale
        var = shape * scale**2

        def sampler(n, seed):
            rng = np.random.default_rng(seed)
            return rng.gamma(shape, scale, size=n)

        return StationaryLaw(
            "gamma",
            np.array([mean]),
            np.array([[var]]),
            "Gamma stationary law of the disaster intensity",
            sampler,
            params={"shape": shape, "scale": scale},
        )


def arg_laplace(model: DisasterArgModel, u: float, h: float) -> float:
    """Conditional Laplace transform E[exp(u h') | h] of the ARG intensity.

    Defined only for u c < 1: exp(phi u h / (1 - u c)) * (1 - u c)^(-delta).
    The boundary u c >= 1 is exactly the blow-up mechanism of the
    non-uniqueness example, so it raises rather than extrapolating.
    """
    uc = u * model.c
    if uc >= 1.0:
        raise ValueError(f"Laplace transform undefined: u*c = {uc} >= 1")
    return float(np.exp(model.phi * u * h / (1.0 - uc)) * (1.0 - uc) ** (-model.delta))


class RegimeSwitchVarModel:
    """VAR(1) whose (nu, A, Sigma) depend on an exogenous Markov regime.

    The grid state is (x, s) with s in {0..N-1} carried as a discrete
    final coordinate. X' is drawn with the current regime's parameters
    while the regime itself moves by the column-stochastic Lambda.
    """

    def __init__(self, nu_s, A_s, Sigma_s, Lambda, lambda0=None, lambda1=None):
        self.nu_s = [np.atleast_1d(np.asarray(v, dtype=float)) for v in nu_s]
        self.A_s = [np.atleast_2d(np.asarray(a, dtype=float)) for a in A_s]
        self.Sigma_s = [_check_psd_symmetric(s, "Sigma_s") for s in Sigma_s]
        self.Lambda = np.atleast_2d(np.asarray(Lambda, dtype=float))
        self.n_regimes = len(self.nu_s)
        if not (len(self.A_s) == len(self.Sigma_s) == self.n_regimes):
            raise ValueError("per-regime parameter lists must have equal length")
        if self.Lambda.shape != (self.n_regimes, self.n_regimes):
            raise ValueError("Lambda must be N x N")
        if np.any(self.Lambda < 0) or not np.allclose(self.Lambda.sum(axis=0), 1.0):
            raise ValueError("Lambda must be column-stochastic")
        for a in self.A_s:
            if _spectral_radius(a) >= 1.0:
                raise ValueError("each regime's A must have spectral radius < 1")
        d = self.nu_s[0].size
        self.lambda0 = np.zeros(d) if lambda0 is None else np.atleast_1d(np.asarray(lambda0, float))
        self.lambda1 = np.zeros(d) if lambda1 is None else np.atleast_1d(np.asarray(lambda1, float))
        self._factors = [_psd_factor(s) for s in self.Sigma_s]

    @property
    def x_dim(self) -> int:
        return self.nu_s[0].size

    @property
    def state_dim(self) -> int:
        return self.x_dim + 1

    def _split(self, state):
        state = np.atleast_1d(np.asarray(state, dtype=float))
        return state[: self.x_dim], int(round(state[-1]))

    def utility_growth(self, state, state_next):
        xc, _ = self._split(state)
        nxt = np.atleast_2d(np.asarray(state_next, dtype=float))
        return float(self.lambda0 @ xc) + nxt[:, : self.x_dim] @ self.lambda1

    def expected_utility_growth(self, state):
        xc, s = self._split(state)
        return float(self.lambda0 @ xc + self.lambda1 @ (self.nu_s[s] + self.A_s[s] @ xc))

    def transition_nodes(self, state, quad=DEFAULT_QUAD):
        xc, s = self._split(state)
        xnodes, xlogw = gaussian_nodes(self.nu_s[s] + self.A_s[s] @ xc, self.Sigma_s[s], quad.n)
        m = xnodes.shape[0]
        log_lam = np.log(np.clip(self.Lambda[:, s], 1e-300, None))
        nodes = np.concatenate(
            [
                np.repeat(xnodes, self.n_regimes, axis=0),
                np.tile(np.arange(self.n_regimes, dtype=float), m).reshape(-1, 1),
            ],
            axis=1,
        )
        logw = (xlogw[:, None] + log_lam[None, :]).ravel()
        return nodes, logw

    def robust_terms(self, state, alpha, quad=DEFAULT_QUAD):
        nodes, logw = self.transition_nodes(state, quad)
        au = alpha * self.utility_growth(state, nodes)
        return 0.0, nodes, logw, au

    def regime_stationary(self) -> np.ndarray:
        vals, vecs = np.linalg.eig(self.Lambda)
        k = int(np.argmin(np.abs(vals - 1.0)))
        pi = np.real(vecs[:, k])
        pi = np.abs(pi) / np.abs(pi).sum()
        return pi

    def sample_transition(self, state, rng):
        xc, s = self._split(state)
        z = rng.standard_normal(self.x_dim)
        xn = self.nu_s[s] + self.A_s[s] @ xc + self._factors[s] @ z
        sn = int(rng.choice(self.n_regimes, p=self.Lambda[:, s]))
        return np.concatenate([xn, [float(sn)]])

    def sample_transition_many(self, state, n, rng):
        return np.stack([self.sample_transition(state, rng) for _ in range(n)])

    def sample_stationary(self, n, seed, burn_in: int = STATIONARY_BURN_IN):
        rng = np.random.default_rng(seed)
        state = np.concatenate([self.nu_s[0], [0.0]])
        for _ in range(burn_in):
            state = self.sample_transition(state, rng)
        out = np.empty((n, self.state_dim))
        for i in range(n):
            state = self.sample_transition(state, rng)
            out[i] = state
        return out

    def stationary_law(self) -> StationaryLaw:
        burn = STATIONARY_BURN_IN
        n_moment = 200_000
        draws = self.sample_stationary(n_moment, seed=20_240_617, burn_in=burn)
        mean = draws.mean(axis=0)
        cov = np.cov(draws.T)

        def sampler(n, seed):
            return self.sample_stationary(n, seed, burn_in=burn)

        return StationaryLaw(
            "empirical",
            mean,
            cov,
            f"ergodic-simulation law (burn-in {burn}, moments from {n_moment} draws, seed 20240617)",
            sampler,
            burn_in=burn,
        )

    def utility_growth_gaussian_bound(self):
        """Max conditional std of u; stationary u is a sub-Gaussian mixture."""
        vs = [float(self.lambda1 @ S @ self.lambda1) for S in self.Sigma_s]
        return float(np.sqrt(max(vs)))


class HiddenRegimeModel:
    """Hidden N-state Markov chain observed through Gaussian signals.

    q(.|xi) is Gaussian with per-regime mean/variance; beliefs about the
    hidden state live on the probability simplex and are updated by the
    filter in `filters.regime_filter_update`.
    """

    def __init__(self, Lambda, obs_mean, obs_var):
        self.Lambda = np.atleast_2d(np.asarray(Lambda, dtype=float))
        self.obs_mean = np.atleast_1d(np.asarray(obs_mean, dtype=float))
        self.obs_var = np.atleast_1d(np.asarray(obs_var, dtype=float))
        n = self.obs_mean.size
        if self.Lambda.shape != (n, n):
            raise ValueError("Lambda shape must match the number of regimes")
        if np.any(self.Lambda < 0) or not np.allclose(self.Lambda.sum(axis=0), 1.0):
            raise ValueError("Lambda must be column-stochastic")
        if np.any(self.obs_var <= 0.0):
            raise ValueError("observation variances must be > 0")

    @property
    def n_regimes(self) -> int:
        return self.obs_mean.size

    def obs_loglik(self, obs):
        return stats.norm.logpdf(float(obs), self.obs_mean, np.sqrt(self.obs_var))

    def obs_lik(self, obs):
        return np.exp(self.obs_loglik(obs))

    def regime_stationary(self) -> np.ndarray:
        vals, vecs = np.linalg.eig(self.Lambda)
        k = int(np.argmin(np.abs(vals - 1.0)))
        pi = np.real(vecs[:, k])
        return np.abs(pi) / np.abs(pi).sum()

    def transition_nodes(self, xi, quad=DEFAULT_QUAD):
        """(obs', xi') nodes given the current hidden regime index xi."""
        s = int(xi if np.isscalar(xi) else np.atleast_1d(xi)[0])
        z, w = gauss_hermite(quad.n)
        obs = self.obs_mean[s] + np.sqrt(self.obs_var[s]) * z
        log_lam = np.log(np.clip(self.Lambda[:, s], 1e-300, None))
        nodes = np.stack(
            [
                np.repeat(obs, self.n_regimes),
                np.tile(np.arange(self.n_regimes, dtype=float), obs.size),
            ],
            axis=-1,
        )
        logw = (np.log(w)[:, None] + log_lam[None, :]).ravel()
        return nodes, logw

    def sample_transition(self, xi, rng):
        s = int(xi if np.isscalar(xi) else np.atleast_1d(xi)[0])
        obs = self.obs_mean[s] + np.sqrt(self.obs_var[s]) * rng.standard_normal()
        sn = int(rng.choice(self.n_regimes, p=self.Lambda[:, s]))
        return np.array([obs, float(sn)])

    def sample_transition_many(self, xi, n, rng):
        return np.stack([self.sample_transition(xi, rng) for _ in range(n)])

    def stationary_law(self) -> StationaryLaw:
        """Stationary law of the hidden regime (categorical)."""
        pi = self.regime_stationary()

        def sampler(n, seed):
            rng = np.random.default_rng(seed)
            return rng.choice(self.n_regimes, size=n, p=pi).astype(float)

        mean = np.array([float(pi @ np.arange(self.n_regimes))])
        var = np.array([[float(pi @ (np.arange(self.n_regimes) ** 2)) - mean[0] ** 2]])
        law = StationaryLaw("categorical", mean, var, "stationary regime distribution", sampler)
        law.params = {"probs": pi.tolist()}
        return law

    def observable_law(self) -> StationaryLaw:
        """Stationary law of the observed signal: a finite Gaussian mixture."""
        pi = self.regime_stationary()
        mean = float(pi @ self.obs_mean)
        var = float(pi @ (self.obs_var + self.obs_mean**2) - mean**2)

        def sampler(n, seed):
            rng = np.random.default_rng(seed)
            ks = rng.choice(self.n_regimes, size=n, p=pi)
            return self.obs_mean[ks] + np.sqrt(self.obs_var[ks]) * rng.standard_normal(n)

        return StationaryLaw(
            "gaussian-mixture",
            np.array([mean]),
            np.array([[var]]),
            "stationary Gaussian mixture of the observable",
            sampler,
            params={
                "weights": pi.tolist(),
                "means": self.obs_mean.tolist(),
                "variances": self.obs_var.tolist(),
            },
        )


class GaussianStateSpaceModel:
    """Linear-Gaussian state space: obs' = A xi + u, xi' = B xi + w."""

    def __init__(self, A, B, Sigma_u, Sigma_w):
        self.A = np.atleast_2d(np.asarray(A, dtype=float))
        self.B = np.atleast_2d(np.asarray(B, dtype=float))
        self.Sigma_u = _check_psd_symmetric(Sigma_u, "Sigma_u")
        self.Sigma_w = _check_psd_symmetric(Sigma_w, "Sigma_w")
        if _spectral_radius(self.B) >= 1.0:
            raise ValueError("eigenvalues of B must be inside the unit circle")
        if np.min(np.linalg.eigvalsh(self.Sigma_u)) <= 0.0:
            raise ValueError("Sigma_u must be invertible")
        self.obs_dim = self.A.shape[0]
        self.hidden_dim = self.B.shape[0]
        if self.A.shape[1] != self.hidden_dim:
            raise ValueError("A columns must match the hidden dimension")

    def transition_nodes(self, xi, quad=DEFAULT_QUAD):
        """(obs', xi') nodes given the current hidden state."""
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        on, olw = gaussian_nodes(self.A @ xi, self.Sigma_u, quad.n)
        hn, hlw = gaussian_nodes(self.B @ xi, self.Sigma_w, quad.n)
        nodes = np.concatenate(
            [np.repeat(on, hn.shape[0], axis=0), np.tile(hn, (on.shape[0], 1))], axis=1
        )
        logw = (olw[:, None] + hlw[None, :]).ravel()
        return nodes, logw

    def sample_transition(self, xi, rng):
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        obs = self.A @ xi + _psd_factor(self.Sigma_u) @ rng.standard_normal(self.obs_dim)
        xin = self.B @ xi + _psd_factor(self.Sigma_w) @ rng.standard_normal(self.hidden_dim)
        return np.concatenate([obs, xin])

    def sample_transition_many(self, xi, n, rng):
        return np.stack([self.sample_transition(xi, rng) for _ in range(n)])

    def stationary_law(self) -> StationaryLaw:
        """Stationary law of the observable A xi + u."""
        P = linalg.solve_discrete_lyapunov(self.B, self.Sigma_w)
        cov = self.A @ P @ self.A.T + self.Sigma_u
        return _gaussian_law(np.zeros(self.obs_dim), cov, "stationary law of the observable")


# ---------------------------------------------------------------------------
# module-level operations


def stationary_law(model) -> StationaryLaw:
    """Closed-form stationary law where available, else a seeded
    ergodic-simulation law with a declared burn-in."""
    return model.stationary_law()


def cond_expect(model, f, x, spec: QuadratureSpec = DEFAULT_QUAD) -> float:
    """E[f(X') | X = x] for a function of the full next state.

    `f` receives an (m, k) array of next states (columns per the model's
    `full_next_labels`, or the state itself) and must return m values.
    Overflowing integrands raise DivergenceError rather than returning
    a number.
    """
    if spec.scheme == "monte-carlo":
        rng = np.random.default_rng(spec.seed if spec.seed is not None else 0)
        draws = model.sample_transition_many(x, spec.n, rng)
        vals = np.asarray(f(np.atleast_2d(draws)), dtype=float)
        if not np.all(np.isfinite(vals)):
            raise DivergenceError("integrand overflowed under Monte Carlo sampling")
        return float(np.mean(vals))
    nodes, logw = model.transition_nodes(x, spec)
    vals = np.asarray(f(nodes), dtype=float)
    if not np.all(np.isfinite(vals)):
        raise DivergenceError("integrand is not finite at quadrature nodes")
    out = float(np.exp(logw) @ vals)
    if not np.isfinite(out):
        raise DivergenceError("conditional expectation overflowed")
    return out


def sample_transition(model, x, seed: int):
    """One draw of the next grid state; deterministic given the seed."""
    rng = np.random.default_rng(seed)
    return model.sample_transition(x, rng)


def sample_stationary(model, n: int, seed: int):
    """n stationary draws of the grid state (iid for closed-form laws,
    a post-burn-in path otherwise)."""
    return model.sample_stationary(n, seed)


def stationary_pairs(model, n: int, seed: int):
    """Stationary (X_t, X_{t+1}) pairs; the second element is the full
    next state where the model distinguishes it from the grid state."""
    xs = model.sample_stationary(n, seed)
    rng = np.random.default_rng(seed + 1)
    step = getattr(model, "sample_full_transition", model.sample_transition)
    nxt = np.stack([step(x, rng) for x in np.atleast_2d(xs)])
    return np.atleast_2d(xs), nxt


# ---------------------------------------------------------------------------
# JSON config loading

MODEL_TAGS = {
    "gaussian_var1": (
        GaussianVar1Model,
        ("nu", "A", "Sigma", "lambda0", "lambda1"),
    ),
    "ssy_vol": (SsyVolModel, ("nu_g", "nu_h", "rho", "sigma")),
    "disaster_arg": (
        DisasterArgModel,
        ("nu_g", "sigma", "nu_j", "sigma_j", "phi", "c", "delta", "varsigma"),
    ),
    "regime_switch_var": (
        RegimeSwitchVarModel,
        ("nu_s", "A_s", "Sigma_s", "Lambda", "lambda0", "lambda1"),
    ),
    "hidden_regime": (HiddenRegimeModel, ("Lambda", "obs_mean", "obs_var")),
    "gaussian_state_space": (GaussianStateSpaceModel, ("A", "B", "Sigma_u", "Sigma_w")),
}


def model_from_config(doc) -> object:
    """Build a model from {"model": <tag>, "params": {...}} (dict, JSON
    string, or path-like)."""
    if isinstance(doc, (str, bytes)):
        try:
            doc = json.loads(doc)
        except json.JSONDecodeError:
            with open(doc) as fh:
                doc = json.load(fh)
    tag = doc.get("model")
    if tag not in MODEL_TAGS:
        raise ValueError(f"unknown model tag {tag!r}; known: {sorted(MODEL_TAGS)}")
    cls, fields = MODEL_TAGS[tag]
    params = dict(doc.get("params", {}))
    unknown = set(params) - set(fields)
    if unknown:
        raise ValueError(f"unknown parameter(s) for {tag}: {sorted(unknown)}")
    return cls(**params)
