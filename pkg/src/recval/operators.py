"""Recursion operators on grid functions.

Everything exponential goes through one stabilized log-expectation
kernel (max-subtracted log-sum-exp). Divergence is a first-class result:
an application whose stabilized log-expectation exceeds the double
overflow boundary returns a divergence-flagged grid function instead of
raising, because the blow-up pathologies are expected outputs here.
The truncated operator is exempt from that flag; with a renormalized
kernel and bounded inputs it is finite by construction.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .grids import GridFunction, StateGrid, interp_weights
from .models import DEFAULT_QUAD, LOG_OVERFLOW, QuadratureSpec


@dataclass
class RobustSpec:
    """Discounted exponential-certainty-equivalent recursion parameters.

    Either pass theta > 0 (alpha is derived as -1/(theta (1-beta))) or an
    explicit alpha; explicit alpha > 0 is allowed for stress experiments.
    """

    beta: float
    theta: float | None = None
    alpha: float | None = None

    def __post_init__(self):
        if not (0.0 < self.beta < 1.0):
            raise ValueError("beta must be in (0, 1)")
        if self.alpha is None:
            if self.theta is None or self.theta <= 0.0:
                raise ValueError("need theta > 0 or an explicit alpha")
            self.alpha = -1.0 / (self.theta * (1.0 - self.beta))
        elif self.theta is not None and self.theta <= 0.0:
            raise ValueError("theta must be > 0 when given")


@dataclass
class LearningSpec:
    """Parameters of the belief-space recursion.

    vartheta = inf selects the limiting form with the inner expectation
    inside the exponent.
    """

    beta: float
    theta: float
    vartheta: float = np.inf

    def __post_init__(self):
        if not (0.0 < self.beta < 1.0):
            raise ValueError("beta must be in (0, 1)")
        if self.theta <= 0.0 or self.vartheta <= 0.0:
            raise ValueError("theta and vartheta must be > 0")

    @property
    def alpha(self) -> float:
        return -1.0 / (self.theta * (1.0 - self.beta))


@dataclass
class EzSpec:
    """Epstein-Zin parameters with kappa = (1-gamma)/(1-rho_ies) < 0.

    The solver path covers only the empirically common branch
    (gamma > 1, rho < 1 or gamma < 1, rho > 1); kappa >= 0 is rejected.
    """

    beta: float
    gamma: float
    rho_ies: float

    def __post_init__(self):
        if not (0.0 < self.beta < 1.0):
            raise ValueError("beta must be in (0, 1)")
        if self.gamma <= 0.0 or self.gamma == 1.0:
            raise ValueError("gamma must be > 0 and != 1")
        if self.rho_ies <= 0.0 or self.rho_ies == 1.0:
            raise ValueError("rho_ies must be > 0 and != 1")
        if self.kappa >= 0.0:
            raise ValueError("kappa = (1-gamma)/(1-rho_ies) must be < 0")

    @property
    def kappa(self) -> float:
        return (1.0 - self.gamma) / (1.0 - self.rho_ies)


def stabilized_log_expect(logw, z, cap: float = LOG_OVERFLOW):
    """log sum_i w_i e^{z_i} with the max exponent subtracted first.

    Returns (value, diverged): diverged marks +inf terms or a stabilized
    value beyond the exp() overflow boundary, i.e. the quadrature says
    the underlying integral is numerically infinite.
    """
    z = np.asarray(z, dtype=float)
    if np.any(np.isposinf(z)):
        return np.inf, True
    val = float(logsumexp(logw + z))
    return val, bool(val > cap or not np.isfinite(val))


@dataclass
class KernelRows:
    """Stacked quadrature rows over a grid: per node a log-moment shift,
    next-state nodes, log weights and alpha*u values.

    Rows with fewer nodes than the widest one are padded with -inf
    weights so everything vectorizes; padded nodes repeat the row's last
    node and contribute nothing.
    """

    grid: StateGrid
    shift: np.ndarray  # (N,)
    nodes: np.ndarray  # (N, m, d)
    logw: np.ndarray  # (N, m)
    au: np.ndarray  # (N, m)
    logq: np.ndarray | None = None  # truncation masses where applicable

    @property
    def flat_nodes(self) -> np.ndarray:
        return self.nodes.reshape(-1, self.nodes.shape[-1])

    def eval_function(self, f: GridFunction) -> np.ndarray:
        return f.eval(self.flat_nodes).reshape(self.logw.shape)

    @staticmethod
    def build(model, grid: StateGrid, alpha: float, quad: QuadratureSpec) -> "KernelRows":
        pts = grid.points()
        raw = [model.robust_terms(x, alpha, quad) for x in pts]
        return _stack_rows(grid, raw)

    @staticmethod
    def build_truncated(model, grid: StateGrid, alpha: float, bounds, n: int) -> "KernelRows":
        pts = grid.points()
        raw = [model.truncated_robust_terms(x, alpha, bounds, n) for x in pts]
        rows = _stack_rows(grid, [r[:4] for r in raw])
        rows.logq = np.array([r[4] for r in raw])
        return rows


def _stack_rows(grid, raw) -> KernelRows:
    N = len(raw)
    sizes = [np.atleast_2d(r[1]).shape[0] for r in raw]
    m = max(sizes)
    d = np.atleast_2d(raw[0][1]).shape[-1]
    shift = np.array([float(r[0]) for r in raw])
    nodes = np.empty((N, m, d))
    logw = np.full((N, m), -np.inf)
    au = np.zeros((N, m))
    for i, r in enumerate(raw):
        nd = np.atleast_2d(r[1]).reshape(-1, d)
        k = nd.shape[0]
        nodes[i, :k] = nd
        nodes[i, k:] = nd[-1]
        logw[i, :k] = r[2]
        au[i, :k] = r[3]
    return KernelRows(grid, shift, nodes, logw, au)


def _rows_log_expect(rows: KernelRows, z: np.ndarray):
    """Row-wise stabilized log expectation of e^z; (values, diverged)."""
    if np.any(np.isposinf(z)):
        return np.full(rows.logw.shape[0], np.inf), True
    with np.errstate(invalid="ignore"):
        vals = logsumexp(rows.logw + z, axis=1)
    diverged = bool(np.any(vals > LOG_OVERFLOW) or not np.all(np.isfinite(vals)))
    return vals, diverged


def apply_robust(
    spec: RobustSpec,
    model,
    f: GridFunction,
    quad: QuadratureSpec = DEFAULT_QUAD,
    _rows: KernelRows | None = None,
) -> GridFunction:
    """One application of the robust recursion operator.

    T f(x) = beta log E[e^{f(X') + alpha u(x, X')} | x], evaluated per grid
    node as beta * (shift(x) + logsumexp(logw + f(nodes) + alpha*u)) using
    the model's analytic reduction `shift` for growth components that
    integrate out in closed form. Overflow sets the divergence flag.
    """
    rows = _rows if _rows is not None else KernelRows.build(model, f.grid, spec.alpha, quad)
    z = rows.eval_function(f) + rows.au
    vals, diverged = _rows_log_expect(rows, z)
    out = spec.beta * (rows.shift + vals)
    return GridFunction(f.grid, out.reshape(f.grid.shape), diverged=diverged)


def apply_truncated(
    spec: RobustSpec,
    model,
    bounds,
    f: GridFunction,
    quad: QuadratureSpec | None = None,
    _rows: KernelRows | None = None,
) -> GridFunction:
    """The truncated, renormalized operator T_C.

    The state support is restricted to the box `bounds` and the kernel is
    renormalized by the truncation mass, so the result is finite for any
    bounded f on C (no divergence flag; legitimate truncated fixed points
    can carry very large values). Grid nodes where the mass is
    numerically zero raise.
    """
    n = quad.n if quad is not None else 120
    rows = (
        _rows
        if _rows is not None
        else KernelRows.build_truncated(model, f.grid, spec.alpha, bounds, n)
    )
    z = rows.eval_function(f) + rows.au
    with np.errstate(invalid="ignore"):
        vals = logsumexp(rows.logw + z, axis=1)
    out = spec.beta * (rows.shift + vals)
    return GridFunction(f.grid, out.reshape(f.grid.shape))


# ---------------------------------------------------------------------------
# worst-case kernels and the subgradient


@dataclass
class DistortedKernel:
    """Discretized distorted conditional-expectation operator.

    Row i holds quadrature nodes x', base weights w(x_i, .) and the
    change-of-measure factor m(x_i, .) with sum_k w_ik m_ik = 1 enforced
    by explicit renormalization. Applying the kernel and discounting by
    beta gives the operator's subgradient direction at the function the
    kernel was built from.
    """

    grid: StateGrid
    nodes: np.ndarray  # (N, m, d)
    weights: np.ndarray  # (N, m)
    m_v: np.ndarray  # (N, m)
    beta: float
    mu_weights: np.ndarray  # stationary weights over grid nodes (L1 diagnostics)

    def __post_init__(self):
        rows = (self.weights * self.m_v).sum(axis=1)
        if np.max(np.abs(rows - 1.0)) > 1e-8:
            raise ValueError("kernel rows must be normalized")

    @property
    def n_rows(self) -> int:
        return self.weights.shape[0]

    def row_sums(self) -> np.ndarray:
        return (self.weights * self.m_v).sum(axis=1)

    def expect(self, f: GridFunction) -> np.ndarray:
        """Distorted conditional expectation of f at every grid node."""
        flat_nodes = self.nodes.reshape(-1, self.nodes.shape[-1])
        vals = f.eval(flat_nodes).reshape(self.weights.shape)
        return (self.weights * self.m_v * vals).sum(axis=1)

    def apply_values(self, values: np.ndarray) -> np.ndarray:
        """beta x distorted expectation of grid values (interpolated)."""
        f = GridFunction(self.grid, values)
        return self.beta * self.expect(f)

    def matrix(self) -> np.ndarray:
        """Dense operator matrix on grid values with a clamped (hence
        non-negative, partition-of-unity) interpolation basis. Rows sum
        to beta, so the Perron root of the matrix is beta for every
        normalized kernel; reported as such by design."""
        N = self.grid.size
        M = np.zeros((N, N))
        flat_nodes = self.nodes.reshape(-1, self.nodes.shape[-1])
        idx, wts = interp_weights(self.grid, flat_nodes, clamp=True)
        m = self.weights.shape[1]
        coef = (self.weights * self.m_v).reshape(-1)
        for c in range(idx.shape[1]):
            np.add.at(M, (np.repeat(np.arange(N), m), idx[:, c]), coef * wts[:, c])
        return self.beta * M

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            fh.write("# distorted kernel: row state, next state, weight, m_v\n")
            writer = csv.writer(fh)
            d = self.nodes.shape[-1]
            writer.writerow(
                [f"x{k}" for k in range(self.grid.ndim)]
                + [f"xnext{k}" for k in range(d)]
                + ["weight", "m_v"]
            )
            pts = self.grid.points()
            for i in range(self.n_rows):
                for k in range(self.weights.shape[1]):
                    writer.writerow(
                        [repr(float(v)) for v in pts[i]]
                        + [repr(float(v)) for v in np.atleast_1d(self.nodes[i, k])]
                        + [repr(float(self.weights[i, k])), repr(float(self.m_v[i, k]))]
                    )


def _stationary_grid_weights(model, grid: StateGrid) -> np.ndarray:
    """Normalized stationary density over grid nodes when closed-form,
    else uniform (the L1 growth diagnostic is a surrogate either way)."""
    try:
        law = model.stationary_law()
        if law.kind in ("gaussian", "gamma") and grid.ndim == 1:
            w = np.exp(law.logpdf(grid.nodes[0]))
            s = w.sum()
            if s > 0:
                return w / s
    except Exception:
        pass
    return np.full(grid.size, 1.0 / grid.size)


def worst_case_density(
    spec: RobustSpec, model, v: GridFunction, quad: QuadratureSpec = DEFAULT_QUAD
) -> DistortedKernel:
    """Exponential-tilt change of measure at v.

    m_v(x, x') = e^{v(x') + alpha u(x, x')} / E[e^{v + alpha u} | x]; rows
    are renormalized explicitly so the conditional integral of m_v is one
    at every node to ~1e-16. Overflowing un-normalized weights raise with
    the offending node.
    """
    rows = KernelRows.build(model, v.grid, spec.alpha, quad)
    z = rows.eval_function(v) + rows.au
    lse, bad = _rows_log_expect(rows, z)
    if bad:
        i = int(np.argmax(lse))
        raise OverflowError(
            f"un-normalized kernel weights overflow at node {i} (x={v.grid.points()[i]})"
        )
    weights = np.exp(rows.logw)
    m_v = np.exp(z - lse[:, None])
    m_v = np.where(weights > 0.0, m_v, 0.0)
    m_v = m_v / (weights * m_v).sum(axis=1, keepdims=True)  # explicit renormalization
    return DistortedKernel(
        v.grid, rows.nodes, weights, m_v, spec.beta, _stationary_grid_weights(model, v.grid)
    )


def undistorted_kernel(
    beta: float, model, grid: StateGrid, quad: QuadratureSpec = DEFAULT_QUAD
) -> DistortedKernel:
    """Discounted conditional-expectation kernel with m == 1 (beta = 0 is
    allowed: the zero operator)."""
    rows = KernelRows.build(model, grid, 0.0, quad)
    weights = np.exp(rows.logw)
    weights = weights / weights.sum(axis=1, keepdims=True)
    m_v = np.ones_like(weights)
    return DistortedKernel(grid, rows.nodes, weights, m_v, beta, _stationary_grid_weights(model, grid))


def apply_subgradient(D: DistortedKernel, f: GridFunction) -> GridFunction:
    """beta x distorted conditional expectation of f (a linear operator)."""
    return GridFunction(D.grid, (D.beta * D.expect(f)).reshape(D.grid.shape))


# ---------------------------------------------------------------------------
# spectral-radius surrogate


@dataclass
class RadiusDiagnostic:
    """Growth-rate diagnostics for a discounted distorted kernel.

    These are finite-dimensional surrogates: the uniqueness theory's
    radius lives on an exponential-Orlicz class with no discretized
    counterpart, so we report sup-norm and L1 growth rates of kernel
    powers on test functions plus the Perron root of the discretized
    matrix (which equals beta identically for any normalized kernel).
    """

    discount: float
    function_rates: list
    matrix_radius: float
    matrix_iterations: int
    matrix_converged: bool
    note: str = (
        "finite-dimensional surrogate; the matrix Perron root equals the "
        "discount for every row-normalized kernel by construction"
    )

    def to_json(self) -> str:
        return json.dumps(
            {
                "discount": self.discount,
                "function_rates": self.function_rates,
                "matrix_radius": self.matrix_radius,
                "matrix_iterations": self.matrix_iterations,
                "matrix_converged": self.matrix_converged,
                "note": self.note,
            }
        )


def spectral_radius_est(D: DistortedKernel, test_functions, n_powers: int = 25) -> RadiusDiagnostic:
    """Estimate growth rates ||D^n f||^{1/n} and the discretized Perron root.

    `test_functions` maps names to GridFunctions (dict) or is an iterable
    of (name, GridFunction). Power iteration on the clamped-basis matrix
    reports non-convergence instead of raising.
    """
    if isinstance(test_functions, dict):
        items = list(test_functions.items())
    else:
        items = [(f"f{i}", f) for i, f in enumerate(test_functions)]
    mu = D.mu_weights
    rates = []
    for name, f0 in items:
        vals = np.asarray(f0.values, dtype=float).ravel()
        sup0 = float(np.max(np.abs(vals)))
        l10 = float(mu @ np.abs(vals))
        sups, l1s = [], []
        v = vals.copy()
        for _ in range(n_powers):
            v = D.apply_values(v.reshape(D.grid.shape))
            sups.append(float(np.max(np.abs(v))))
            l1s.append(float(mu @ np.abs(v)))
        n = len(sups)
        sup_rate = (sups[-1] / sup0) ** (1.0 / n) if sup0 > 0 else 0.0
        l1_rate = (l1s[-1] / l10) ** (1.0 / n) if l10 > 0 else 0.0
        rates.append(
            {"name": name, "sup_rate": sup_rate, "l1_rate": l1_rate, "sup_norms": sups, "l1_norms": l1s}
        )

    if D.beta == 0.0:
        return RadiusDiagnostic(D.beta, rates, 0.0, 0, True)
    M = D.matrix()
    x = np.ones(M.shape[0])
    rho_prev = None
    converged = False
    it = 0
    for it in range(1, 200):
        y = M @ x
        rho = float(np.max(np.abs(y)))
        if rho == 0.0:
            rho_prev = 0.0
            converged = True
            break
        x = y / rho
        if rho_prev is not None and abs(rho - rho_prev) <= 1e-13 * max(1.0, rho):
            rho_prev = rho
            converged = True
            break
        rho_prev = rho
    return RadiusDiagnostic(D.beta, rates, float(rho_prev), it, converged)
