"""Epstein-Zin recursion with IES != 1: eigenpair, distorted operator,
envelopes, and the stochastic discount factor.

The positive eigenpair (iota, lam) of K g(x) = E[g(X') e^{(1-gamma) g_c}|x]
(consumption growth g_c(x, x') = delta'x') defines a distorted kernel
iota(x') e^{(1-gamma) g_c} / (lam iota(x)). Fixed points of

    T f(x) = log( (1-beta) iota(x)^{-1/kappa}
                  + beta lam^{1/kappa} Etilde[e^{kappa f}|x]^{1/kappa} )

recover solutions of the original value recursion after adding
kappa^{-1} log iota. iota is normalized to one at a reference state
(defined only up to scale otherwise).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .grids import GridFunction, StateGrid
from .models import DEFAULT_QUAD, GaussianVar1Model, LOG_OVERFLOW, QuadratureSpec
from .operators import EzSpec, KernelRows


@dataclass
class EzEigenpair:
    """Positive eigenfunction (as log iota) and eigenvalue.

    `log_iota_coef` holds affine closed-form coefficients (log iota =
    coef'(x - ref)); grid pairs carry log iota as a GridFunction
    normalized to zero at the node nearest `ref`.
    """

    lam: float
    gamma: float
    delta: np.ndarray
    log_iota_coef: np.ndarray | None = None
    log_iota_grid: GridFunction | None = None
    ref: np.ndarray | None = None
    normalization: str = "iota(ref) = 1"
    residual_sup: float | None = None

    def __post_init__(self):
        if self.lam <= 0.0:
            raise ValueError("eigenvalue must be > 0")
        if (self.log_iota_coef is None) == (self.log_iota_grid is None):
            raise ValueError("provide exactly one of affine coefficients or grid values")
        self.delta = np.atleast_1d(np.asarray(self.delta, dtype=float))
        if self.ref is None:
            self.ref = np.zeros(self.delta.size)

    def log_iota(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if self.log_iota_coef is not None:
            return (pts - self.ref[None, :]) @ self.log_iota_coef
        return self.log_iota_grid.eval(pts)

    def growth(self, points) -> np.ndarray:
        """Consumption growth delta'x_next at next states."""
        return np.atleast_2d(np.asarray(points, dtype=float)) @ self.delta


@dataclass
class EigenvalueCondition:
    value: float  # beta * lam^{1/kappa}
    passed: bool
    margin: float  # 1 - value


def eigenvalue_condition(beta: float, lam: float, kappa: float) -> EigenvalueCondition:
    """Convergence condition beta * lam^(1/kappa) < 1 for the envelope series."""
    if lam <= 0.0:
        raise ValueError("lam must be > 0")
    if kappa == 0.0:
        raise ValueError("kappa must be nonzero")
    value = float(beta * lam ** (1.0 / kappa))
    return EigenvalueCondition(value, value < 1.0, 1.0 - value)


def _growth_z(rows: KernelRows, gamma: float, delta: np.ndarray) -> np.ndarray:
    """(1-gamma) * delta'x' at every kernel node."""
    return (1.0 - gamma) * (rows.nodes @ delta)


def ez_eigenpair(
    model,
    gamma: float,
    delta,
    method: str = "closed-form",
    grid: StateGrid | None = None,
    quad: QuadratureSpec = DEFAULT_QUAD,
    tol: float = 1e-13,
    max_iter: int = 5_000,
    ref=None,
) -> EzEigenpair:
    """Solve lam iota(x) = E[iota(X') e^{(1-gamma) delta'X'} | x].

    method="closed-form" needs a GaussianVar1Model: iota is exponential-
    affine with coefficient (1-gamma)(I-A')^{-1}A'delta and lam the
    corresponding Gaussian moment. method="power-iteration" iterates the
    kernel on `grid` in log space, renormalizing at the node nearest
    `ref` each sweep, until the sweep change settles; non-convergence
    within the cap raises.
    """
    delta = np.atleast_1d(np.asarray(delta, dtype=float))
    if method == "closed-form":
        if not isinstance(model, GaussianVar1Model):
            raise TypeError("closed form requires a Gaussian VAR(1) model")
        A, Sigma, nu = model.A, model.Sigma, model.nu
        d = delta.size
        I = np.eye(d)
        coef = (1.0 - gamma) * np.linalg.solve(I - A.T, A.T @ delta)
        r = np.linalg.solve(I - A, np.eye(d))
        log_lam = (1.0 - gamma) ** 2 / 2.0 * delta @ r @ Sigma @ r.T @ delta + (
            1.0 - gamma
        ) * delta @ r @ nu
        ref_v = np.zeros(d) if ref is None else np.atleast_1d(np.asarray(ref, float))
        pair = EzEigenpair(float(np.exp(log_lam)), gamma, delta, log_iota_coef=coef, ref=ref_v)
        if grid is not None:
            pair.residual_sup = eigen_residual(pair, model, grid, quad)
        return pair
    if method != "power-iteration":
        raise ValueError(f"unknown method {method!r}")
    if grid is None:
        raise ValueError("power iteration needs a grid")
    pts = grid.points()
    ref_v = np.zeros(pts.shape[1]) if ref is None else np.atleast_1d(np.asarray(ref, float))
    i_ref = int(np.argmin(np.linalg.norm(pts - ref_v[None, :], axis=1)))
    rows = KernelRows.build(model, grid, 0.0, quad)
    gz = _growth_z(rows, gamma, delta)
    log_iota = GridFunction(grid, np.zeros(grid.shape))
    log_lam = 0.0
    for _ in range(max_iter):
        k = logsumexp(rows.logw + rows.eval_function(log_iota) + gz, axis=1)
        log_lam = float(k[i_ref])
        new = k - log_lam
        change = float(np.max(np.abs(new - log_iota.flat())))
        log_iota = GridFunction(grid, new.reshape(grid.shape))
        if change < tol:
            break
    else:
        raise RuntimeError(f"power iteration did not converge in {max_iter} sweeps")
    pair = EzEigenpair(float(np.exp(log_lam)), gamma, delta, log_iota_grid=log_iota, ref=ref_v)
    pair.residual_sup = eigen_residual(pair, model, grid, quad)
    return pair


def eigen_residual(pair: EzEigenpair, model, grid: StateGrid, quad=DEFAULT_QUAD) -> float:
    """sup over grid nodes of |lam iota - E[iota e^{(1-gamma) g}]|."""
    rows = KernelRows.build(model, grid, 0.0, quad)
    z = pair.log_iota(rows.flat_nodes).reshape(rows.logw.shape) + _growth_z(rows, pair.gamma, pair.delta)
    k = np.exp(logsumexp(rows.logw + z, axis=1))
    iota_here = np.exp(pair.log_iota(grid.points()))
    return float(np.max(np.abs(pair.lam * iota_here - k)))


@dataclass
class _EzKernel:
    """Eigenpair-distorted kernel rows, renormalized to probabilities."""

    rows: KernelRows
    logm: np.ndarray  # (N, m)
    log_iota_here: np.ndarray  # (N,)


def _ez_kernel(pair: EzEigenpair, model, grid: StateGrid, quad) -> _EzKernel:
    rows = KernelRows.build(model, grid, 0.0, quad)
    log_iota_next = pair.log_iota(rows.flat_nodes).reshape(rows.logw.shape)
    log_iota_here = pair.log_iota(grid.points())
    logm = (
        rows.logw
        + log_iota_next
        + _growth_z(rows, pair.gamma, pair.delta)
        - np.log(pair.lam)
        - log_iota_here[:, None]
    )
    logm = logm - logsumexp(logm, axis=1, keepdims=True)
    return _EzKernel(rows, logm, log_iota_here)


def apply_ez(
    spec: EzSpec,
    pair: EzEigenpair,
    model,
    f: GridFunction,
    quad: QuadratureSpec = DEFAULT_QUAD,
    _kernel: _EzKernel | None = None,
) -> GridFunction:
    """One application of the eigenpair-transformed recursion operator."""
    kap = spec.kappa
    ker = _kernel if _kernel is not None else _ez_kernel(pair, model, f.grid, quad)
    fvals = ker.rows.eval_function(f)
    lse = logsumexp(ker.logm + kap * fvals, axis=1)
    t_cont = np.log(spec.beta) + np.log(pair.lam) / kap + lse / kap
    t_now = np.log(1.0 - spec.beta) - ker.log_iota_here / kap
    out = np.logaddexp(t_now, t_cont)
    diverged = bool(np.any(np.abs(lse) > LOG_OVERFLOW) or not np.all(np.isfinite(out)))
    return GridFunction(f.grid, out.reshape(f.grid.shape), diverged=diverged)


def ez_operator(spec, pair, model, grid, quad=DEFAULT_QUAD):
    """Closure over a precomputed kernel, suitable for the solvers."""
    ker = _ez_kernel(pair, model, grid, quad)

    def T(f: GridFunction) -> GridFunction:
        return apply_ez(spec, pair, model, f, quad, _kernel=ker)

    return T


@dataclass
class EzEnvelopes:
    upper: GridFunction
    lower: GridFunction
    n_terms: int
    tail_bound: float
    condition: EigenvalueCondition


def ez_envelope(
    pair: EzEigenpair,
    spec: EzSpec,
    model,
    grid: StateGrid,
    quad: QuadratureSpec = DEFAULT_QUAD,
    n_terms: int | None = None,
    tail_tol: float = 1e-8,
) -> EzEnvelopes:
    """Envelope pair bracketing the fixed point.

    upper: log((1-beta) sum_n (beta lam^{1/kappa})^n Etilde^n(iota^{-1/kappa}))
    truncated once the geometric tail drops below `tail_tol` of the
    leading term; lower: log(1-beta) - kappa^{-1} log iota. The upper
    series only converges under the eigenvalue condition, so a failing
    condition is rejected.
    """
    cond = eigenvalue_condition(spec.beta, pair.lam, spec.kappa)
    if not cond.passed:
        raise ValueError(f"eigenvalue condition fails: beta*lam^(1/kappa) = {cond.value}")
    kap = spec.kappa
    ker = _ez_kernel(pair, model, grid, quad)
    log_rate = float(np.log(cond.value))
    base = -pair.log_iota(grid.points()) / kap
    log_g = base.copy()
    terms = [log_g.copy()]
    lead = float(np.max(base))
    cap = 10_000 if n_terms is None else n_terms
    for n in range(1, cap):
        gf = GridFunction(grid, log_g.reshape(grid.shape))
        log_g = logsumexp(ker.logm + ker.rows.eval_function(gf), axis=1)
        terms.append(n * log_rate + log_g)
        if n_terms is None and n * log_rate + float(np.max(log_g)) < np.log(tail_tol) + lead:
            break
    stack = np.stack(terms)
    upper_vals = np.log(1.0 - spec.beta) + logsumexp(stack, axis=0)
    tail = float(np.exp(terms[-1].max()) / max(1e-300, 1.0 - cond.value))
    lower_vals = np.log(1.0 - spec.beta) - pair.log_iota(grid.points()) / kap
    return EzEnvelopes(
        GridFunction(grid, upper_vals.reshape(grid.shape)),
        GridFunction(grid, lower_vals.reshape(grid.shape)),
        len(terms),
        tail,
        cond,
    )


def ez_recover(pair: EzEigenpair, fixed_point: GridFunction, kappa: float) -> GridFunction:
    """Map a fixed point of the transformed operator back to the original
    recursion's solution: add kappa^{-1} log iota."""
    pts = fixed_point.grid.points()
    vals = fixed_point.flat() + pair.log_iota(pts) / kappa
    return GridFunction(fixed_point.grid, vals.reshape(fixed_point.grid.shape))


def ez_recursion_residual(
    spec: EzSpec,
    v: GridFunction,
    model,
    delta,
    quad: QuadratureSpec = DEFAULT_QUAD,
    window=None,
) -> float:
    """sup-norm residual of v in the un-transformed value recursion
    v(x) = log((1-beta) + beta E[e^{kappa v + (1-gamma) g}|x]^{1/kappa}),
    optionally restricted to a box `window` of grid nodes."""
    delta = np.atleast_1d(np.asarray(delta, dtype=float))
    kap = spec.kappa
    rows = KernelRows.build(model, v.grid, 0.0, quad)
    z = kap * rows.eval_function(v) + (1.0 - spec.gamma) * (rows.nodes @ delta)
    lse = logsumexp(rows.logw + z, axis=1)
    rhs = np.logaddexp(np.log(1.0 - spec.beta), np.log(spec.beta) + lse / kap)
    resid = np.abs(v.flat() - rhs)
    if window is not None:
        pts = v.grid.points()
        win = np.atleast_2d(np.asarray(window, dtype=float))
        keep = np.all((pts >= win[:, 0][None, :]) & (pts <= win[:, 1][None, :]), axis=1)
        resid = resid[keep]
    return float(np.max(resid))


def sdf_evaluate(
    spec,
    v: GridFunction,
    model,
    delta,
    x,
    xnext,
    quad: QuadratureSpec = DEFAULT_QUAD,
) -> float:
    """Stochastic discount factor realization between states x and xnext.

    beta e^{-rho g} [ e^{kappa v(x') + (1-gamma) g} /
                      E[e^{kappa v + (1-gamma) g} | x] ]^{(rho-gamma)/(1-gamma)}
    with g = delta'x'. `spec` is an EzSpec or a plain (beta, gamma,
    rho_ies) triple; the triple admits rho = gamma (the time-separable
    reduction has kappa = 1, which the solver spec rejects by design).
    Overflow of the conditional normalizer raises.
    """
    if isinstance(spec, EzSpec):
        beta, gamma, rho = spec.beta, spec.gamma, spec.rho_ies
    else:
        beta, gamma, rho = spec
    kap = (1.0 - gamma) / (1.0 - rho)
    delta = np.atleast_1d(np.asarray(delta, dtype=float))
    x = np.atleast_1d(np.asarray(x, dtype=float))
    xnext = np.atleast_1d(np.asarray(xnext, dtype=float))
    _, nodes, logw, _ = model.robust_terms(x, 0.0, quad)
    nodes = np.atleast_2d(nodes)
    z = kap * v.eval(nodes) + (1.0 - gamma) * (nodes @ delta)
    log_norm = float(logsumexp(logw + z))
    if log_norm > LOG_OVERFLOW or not np.isfinite(log_norm):
        raise OverflowError("SDF conditional normalizer overflowed")
    g = float(delta @ xnext)
    expo = (rho - gamma) / (1.0 - gamma)
    log_bracket = kap * float(v(xnext)) + (1.0 - gamma) * g - log_norm
    return float(np.exp(np.log(beta) - rho * g + expo * log_bracket))
