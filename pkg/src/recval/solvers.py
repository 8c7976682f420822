"""Fixed-point solution strategies.

Monotone iteration from constructed envelopes (which converges to the
smallest/stable fixed point whenever it converges at all), contraction
solves on truncated state spaces, closed-form affine solutions for the
linear-Gaussian and jump-intensity models, the affine coefficient map
with basin classification, and the truncation gap bound.

Blow-up is diagnosed, not raised: iterates whose magnitude passes the
blow-up threshold, or whose stabilized log-expectations overflow, come
back with a divergence flag so the non-existence experiments terminate
with a verdict.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .grids import GridFunction, StateGrid
from .models import DEFAULT_QUAD, DisasterArgModel, GaussianVar1Model, QuadratureSpec
from .operators import (
    KernelRows,
    RobustSpec,
    _rows_log_expect,
    apply_robust,
    apply_truncated,
    stabilized_log_expect,
)

BLOWUP_DEFAULT = 1e6
MONOTONE_SLACK = 1e-11  # quadrature roundoff allowance in trace checks


class ContractionError(RuntimeError):
    """Observed contraction modulus exceeded the declared discount."""


@dataclass
class IterationTrace:
    sup_changes: list = field(default_factory=list)
    node_values: list = field(default_factory=list)  # selected nodes per iteration
    basin: str | None = None  # converge-to-smallest | at-unstable | diverge

    def to_json(self) -> str:
        return json.dumps(
            {"sup_changes": self.sup_changes, "node_values": self.node_values, "basin": self.basin}
        )


@dataclass
class FixedPointResult:
    solution: GridFunction | None
    iterations: int
    residual: float
    monotone_trace: bool
    diverged: bool
    wall_time: float
    status: str  # converged | diverged | inconclusive

    def summary(self) -> dict:
        return {
            "iterations": self.iterations,
            "residual": self.residual,
            "monotone_trace": self.monotone_trace,
            "diverged": self.diverged,
            "wall_time": self.wall_time,
            "status": self.status,
        }


def _trace_nodes(values: np.ndarray):
    flat = values.ravel()
    picks = [0, flat.size // 2, flat.size - 1]
    return [float(flat[i]) for i in picks]


def monotone_solve(
    T,
    start: GridFunction,
    direction: str = "from-above",
    tol: float = 1e-10,
    max_iter: int = 10_000,
    blowup_threshold: float = BLOWUP_DEFAULT,
):
    """Iterate T from an envelope start, tracking monotonicity of the trace.

    direction declares the expected ordering ("from-above": pointwise
    nonincreasing iterates). Stops on sup-change < tol, on blow-up (any
    node magnitude past the threshold or a divergence-flagged operator
    output), or at max_iter with an explicit inconclusive status.
    Returns (FixedPointResult, IterationTrace).
    """
    if direction not in ("from-above", "from-below"):
        raise ValueError("direction must be 'from-above' or 'from-below'")
    sign = -1.0 if direction == "from-above" else 1.0
    t0 = time.perf_counter()
    trace = IterationTrace()
    v = start
    monotone = True
    status = "inconclusive"
    it = 0
    for it in range(1, max_iter + 1):
        tv = T(v)
        if tv.diverged:
            status = "diverged"
            v = tv
            break
        diff = tv.values - v.values
        if np.any(sign * diff < -MONOTONE_SLACK):
            monotone = False
        change = float(np.max(np.abs(diff)))
        trace.sup_changes.append(change)
        trace.node_values.append(_trace_nodes(tv.values))
        v = tv
        if float(np.max(np.abs(v.values))) > blowup_threshold:
            status = "diverged"
            break
        if change < tol:
            status = "converged"
            break
    diverged = status == "diverged"
    if diverged:
        residual = float("inf")
    else:
        residual = float(np.max(np.abs(T(v).values - v.values)))
    res = FixedPointResult(
        None if diverged else v,
        it,
        residual,
        monotone,
        diverged,
        time.perf_counter() - t0,
        status,
    )
    return res, trace


def contraction_solve(T, start: GridFunction, beta: float, tol: float = 1e-10, max_iter: int = 20_000):
    """Solve a truncated (contraction) operator by plain iteration.

    The renormalized truncated operator contracts at modulus <= beta in
    sup norm; the observed per-iteration change ratio is monitored and a
    material violation raises ContractionError. Returns
    (FixedPointResult, IterationTrace).
    """
    t0 = time.perf_counter()
    trace = IterationTrace()
    v = start
    prev_change = None
    status = "inconclusive"
    it = 0
    for it in range(1, max_iter + 1):
        tv = T(v)
        change = float(np.max(np.abs(tv.values - v.values)))
        trace.sup_changes.append(change)
        scale = max(1.0, float(np.max(np.abs(tv.values))))
        if prev_change is not None and prev_change > 1e-9 * scale:
            ratio = change / prev_change
            if ratio > beta * (1.0 + 1e-6) + 1e-9:
                raise ContractionError(
                    f"sup-change ratio {ratio:.12f} exceeds the declared modulus {beta}"
                )
        prev_change = change
        v = tv
        if change < tol:
            status = "converged"
            break
    residual = float(np.max(np.abs(T(v).values - v.values)))
    return (
        FixedPointResult(v, it, residual, True, False, time.perf_counter() - t0, status),
        trace,
    )


def robust_operator(spec: RobustSpec, model, grid: StateGrid | None = None, quad: QuadratureSpec = DEFAULT_QUAD):
    """Operator closure; passing the grid precomputes the quadrature rows."""
    if grid is None:
        return lambda f: apply_robust(spec, model, f, quad)
    rows = KernelRows.build(model, grid, spec.alpha, quad)
    return lambda f: apply_robust(spec, model, f, quad, _rows=rows)


def truncated_operator(
    spec: RobustSpec,
    model,
    bounds,
    grid: StateGrid | None = None,
    quad: QuadratureSpec | None = None,
):
    """Truncated-operator closure; passing the grid precomputes the
    renormalized rows."""
    if grid is None:
        return lambda f: apply_truncated(spec, model, bounds, f, quad)
    n = quad.n if quad is not None else 120
    rows = KernelRows.build_truncated(model, grid, spec.alpha, bounds, n)
    return lambda f: apply_truncated(spec, model, bounds, f, quad, _rows=rows)


# ---------------------------------------------------------------------------
# robust envelopes


@dataclass
class EnvelopeResult:
    func: GridFunction
    n_terms: int
    tail_bound: float


def upper_envelope_robust(
    spec: RobustSpec,
    model,
    grid: StateGrid,
    n_terms: int | None = None,
    quad: QuadratureSpec = DEFAULT_QUAD,
    tail_tol: float = 1e-8,
) -> EnvelopeResult:
    """Discounted series of iterated log conditional expectations of
    h = E[e^{alpha u / (1-beta)} | x]; a supersolution of the robust
    operator whenever the series is finite.

    The series is truncated once the geometric tail falls below
    `tail_tol` relative to the accumulated scale. Models whose h (or any
    iterate) overflows come back divergence-flagged.
    """
    beta = spec.beta
    h_rows = KernelRows.build(model, grid, spec.alpha / (1.0 - beta), quad)
    log_h, bad = _rows_log_expect(h_rows, h_rows.au)
    log_h = log_h + h_rows.shift
    if bad or np.max(log_h) > 700.0:
        return EnvelopeResult(
            GridFunction(grid, np.full(grid.shape, np.inf), diverged=True), 0, np.inf
        )
    rows = KernelRows.build(model, grid, 0.0, quad)
    total = beta * log_h.copy()  # n = 0 term: (1-beta) beta^{1} log h
    scale = float(np.max(np.abs(log_h)))
    cap = 100_000 if n_terms is None else n_terms
    n_used = cap
    coef = beta
    cur = log_h
    for n in range(1, cap):
        gf = GridFunction(grid, cur.reshape(grid.shape))
        cur, bad = _rows_log_expect(rows, rows.eval_function(gf))
        if bad or np.max(cur) > 700.0:
            return EnvelopeResult(
                GridFunction(grid, np.full(grid.shape, np.inf), diverged=True), n, np.inf
            )
        coef *= beta
        total += coef * cur
        scale = max(scale, float(np.max(np.abs(cur))))
        tail = coef * beta / (1.0 - beta) * float(np.max(np.abs(cur)))
        if n_terms is None and tail < tail_tol * max(1.0, scale):
            n_used = n + 1
            break
    vals = (1.0 - beta) * total
    tail_bound = coef * beta / (1.0 - beta) * float(np.max(np.abs(cur))) * (1.0 - beta)
    return EnvelopeResult(GridFunction(grid, vals.reshape(grid.shape)), n_used, tail_bound)


def lower_envelope_robust(
    spec: RobustSpec,
    model,
    grid: StateGrid,
    quad: QuadratureSpec = DEFAULT_QUAD,
    tail_tol: float = 1e-10,
    max_terms: int = 100_000,
) -> EnvelopeResult:
    """Geometric-series subsolution: sum_n (beta E)^n h1 with
    h1 = beta E[alpha u | x] evaluated node by node."""
    beta = spec.beta
    pts = grid.points()
    h1 = np.array([beta * spec.alpha * model.expected_utility_growth(x) for x in pts])
    rows = KernelRows.build(model, grid, 0.0, quad)
    w = np.exp(rows.logw)
    acc = h1.copy()
    cur = h1.copy()
    n_used = max_terms
    for n in range(1, max_terms):
        gf = GridFunction(grid, cur.reshape(grid.shape))
        cur = beta * (w * rows.eval_function(gf)).sum(axis=1)
        acc += cur
        if float(np.max(np.abs(cur))) / (1.0 - beta) < tail_tol:
            n_used = n + 1
            break
    tail_bound = float(np.max(np.abs(cur))) / (1.0 - beta)
    return EnvelopeResult(GridFunction(grid, acc.reshape(grid.shape)), n_used, tail_bound)


# ---------------------------------------------------------------------------
# closed-form affine solutions


@dataclass
class AffineSolution:
    a: float
    b: np.ndarray
    residual: float | None = None

    def __call__(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return self.a + x @ np.atleast_1d(self.b)

    def as_grid_function(self, grid: StateGrid) -> GridFunction:
        return GridFunction(grid, self(grid.points()).reshape(grid.shape))


def affine_solve_gaussian_robust(
    model: GaussianVar1Model,
    spec: RobustSpec,
    residual_grid: StateGrid | None = None,
    quad: QuadratureSpec = DEFAULT_QUAD,
) -> AffineSolution:
    """Exact affine fixed point of the robust operator for a Gaussian VAR(1).

    b solves the discounted forward recursion in the loadings,
    b = alpha beta (I - beta A')^{-1} (lambda0 + A'lambda1); the intercept
    collects the discounted sum of conditional Gaussian log-moments. The
    operator residual is checked by quadrature when a grid is supplied.
    """
    alpha, beta = spec.alpha, spec.beta
    d = model.nu.size
    I = np.eye(d)
    b = alpha * beta * np.linalg.solve(I - beta * model.A.T, model.lambda0 + model.A.T @ model.lambda1)
    load = alpha * model.lambda1 + b
    a = beta / (1.0 - beta) * float(load @ model.nu + 0.5 * load @ model.Sigma @ load)
    sol = AffineSolution(a, b)
    if residual_grid is not None:
        v = sol.as_grid_function(residual_grid)
        tv = apply_robust(spec, model, v, quad)
        sol.residual = float(np.max(np.abs(tv.values - v.values)))
    return sol


@dataclass
class DisasterParams:
    """Reduced coefficients of the jump-intensity recursion
    v(h) = a_const + b_const h + beta log E[e^{v(h')} | h]."""

    a_const: float
    b_const: float
    beta: float
    c: float
    phi: float
    delta: float

    @property
    def q(self) -> float:
        return 1.0 + self.c * self.b_const - self.beta * self.phi

    @property
    def discriminant(self) -> float:
        return self.q**2 - 4.0 * self.c * self.b_const


def disaster_reduced_params(model: DisasterArgModel, spec: RobustSpec) -> DisasterParams:
    """Map deep model parameters to the reduced affine-map coefficients:
    a_const = alpha beta nu_g + alpha^2 beta sigma^2 / 2 and
    b_const = beta (e^{alpha nu_j + alpha^2 sigma_j^2 / 2} - 1)."""
    if model.varsigma != 1.0:
        raise ValueError("closed-form reduction requires varsigma = 1")
    alpha, beta = spec.alpha, spec.beta
    a_const = alpha * beta * model.nu_g + 0.5 * alpha**2 * beta * model.sigma**2
    b_const = beta * (np.exp(alpha * model.nu_j + 0.5 * alpha**2 * model.sigma_j**2) - 1.0)
    return DisasterParams(float(a_const), float(b_const), beta, model.c, model.phi, model.delta)


@dataclass
class DisasterRoots:
    solutions: tuple | None  # (AffineSolution, AffineSolution) ordered b1 <= b2
    q: float
    discriminant: float
    feasible: bool
    note: str = ""


def affine_solve_disaster(params: DisasterParams) -> DisasterRoots:
    """Both affine fixed points of the jump-intensity recursion.

    b_{1,2} = (q -/+ sqrt(q^2 - 4 c b_const)) / (2c) and
    a_i = (a_const - beta delta log(1 - b_i c)) / (1 - beta), returned
    only when the discriminant is positive and both 1 - b_i c > 0;
    otherwise `solutions` is None with the discriminant reported.
    """
    q, disc = params.q, params.discriminant
    if disc <= 0.0:
        return DisasterRoots(None, q, disc, False, "discriminant <= 0: no real affine pair")
    root = np.sqrt(disc)
    bs = ((q - root) / (2.0 * params.c), (q + root) / (2.0 * params.c))
    if any(1.0 - b * params.c <= 0.0 for b in bs):
        return DisasterRoots(None, q, disc, False, "a root violates 1 - b c > 0")
    sols = []
    for b in bs:
        a = (params.a_const - params.beta * params.delta * np.log(1.0 - b * params.c)) / (
            1.0 - params.beta
        )
        sols.append(AffineSolution(float(a), np.array([b])))
    return DisasterRoots(tuple(sols), q, disc, True)


def affine_map_step(params: DisasterParams, a: float, b: float):
    """One step of the affine coefficient map
    (a, b) -> (a_const + beta a - beta delta log(1 - b c),
               b_const + beta phi b / (1 - b c))."""
    if 1.0 - b * params.c <= 0.0:
        raise ValueError("map undefined: 1 - b c <= 0")
    a_next = params.a_const + params.beta * a - params.beta * params.delta * np.log(1.0 - b * params.c)
    b_next = params.b_const + params.beta * params.phi * b / (1.0 - b * params.c)
    return float(a_next), float(b_next)


@dataclass
class AffineMapResult:
    trace: IterationTrace
    a: float
    b: float
    converged: bool
    iterations: int


def affine_map_iterate(
    params: DisasterParams,
    a0: float,
    b0: float,
    max_iter: int = 500,
    tol: float = 1e-12,
    blowup: float = BLOWUP_DEFAULT,
) -> AffineMapResult:
    """Iterate the affine map and label the basin.

    converge-to-smallest: reached a fixed point (the stable small root
    whenever the start differs from the unstable one); at-unstable: exact
    start at the large root; diverge: the map left its domain
    (1 - b c <= 0) or blew past the threshold. Starts that are only
    floating-point close to the unstable root are classified by where
    they flow. Runs that neither settle nor blow up stay unlabeled.
    """
    trace = IterationTrace()
    roots = affine_solve_disaster(params)
    at_unstable_start = (
        roots.feasible and b0 == float(roots.solutions[1].b[0])
    )
    a, b = float(a0), float(b0)
    for it in range(1, max_iter + 1):
        try:
            a_next, b_next = affine_map_step(params, a, b)
        except ValueError:
            trace.basin = "diverge"
            return AffineMapResult(trace, a, b, False, it)
        change = max(abs(a_next - a), abs(b_next - b))
        trace.sup_changes.append(change)
        trace.node_values.append([a_next, b_next])
        a, b = a_next, b_next
        if abs(b) > blowup or abs(a) > blowup:
            trace.basin = "diverge"
            return AffineMapResult(trace, a, b, False, it)
        if change < tol:
            trace.basin = "at-unstable" if at_unstable_start else "converge-to-smallest"
            return AffineMapResult(trace, a, b, True, it)
    return AffineMapResult(trace, a, b, False, max_iter)


def disaster_affine_residual(params: DisasterParams, a: float, b: float, h_grid) -> float:
    """sup over h of |T(a + b h) - (a + b h)|, with T evaluated exactly
    through the intensity's Laplace transform (T maps affine to affine)."""
    a_next, b_next = affine_map_step(params, a, b)
    h = np.asarray(h_grid, dtype=float)
    return float(np.max(np.abs((a_next - a) + (b_next - b) * h)))


# ---------------------------------------------------------------------------
# truncation gap


@dataclass
class TruncationGapReport:
    eps_c: float
    inf_gap: float  # inf over nodes of v - v_C
    rhs: float  # beta/(1-beta) inf log Q(C|x)
    bound_holds: bool
    upper_holds: bool  # v_C <= v + eps_C at every node
    min_mass: float
    per_node_gap: list
    per_node_mass: list

    def to_json(self) -> str:
        return json.dumps(
            {
                "eps_c": self.eps_c,
                "inf_gap": self.inf_gap,
                "rhs": self.rhs,
                "bound_holds": self.bound_holds,
                "upper_holds": self.upper_holds,
                "min_mass": self.min_mass,
            }
        )


def truncation_gap_check(
    v: GridFunction, v_c: GridFunction, model, bounds, beta: float
) -> TruncationGapReport:
    """Check inf_C (v - v_C) >= beta/(1-beta) inf_C log Q(C|x) and the
    implied pointwise bound v_C <= v + eps_C, eps_C = -rhs.

    Both functions must share the grid (nodes inside C)."""
    if v.grid.shape != v_c.grid.shape or any(
        not np.array_equal(a, b) for a, b in zip(v.grid.nodes, v_c.grid.nodes)
    ):
        raise ValueError("v and v_C must share grid nodes inside C")
    pts = v.grid.points()
    mass = np.array([model.truncation_mass(x, bounds) for x in pts])
    if np.any(mass <= 0.0):
        raise ValueError("Q(C|x) = 0 at a grid node")
    gap = v.flat() - v_c.flat()
    rhs = beta / (1.0 - beta) * float(np.min(np.log(mass)))
    eps_c = -rhs
    slack = 1e-9
    return TruncationGapReport(
        eps_c,
        float(np.min(gap)),
        rhs,
        bool(np.min(gap) >= rhs - slack),
        bool(np.all(v_c.flat() <= v.flat() + eps_c + slack)),
        float(np.min(mass)),
        gap.tolist(),
        mass.tolist(),
    )
