"""Config-driven experiment runner.

Each experiment reproduces one named phenomenon end to end and emits a
JSON report plus CSV tables. One experiment per invocation; composition
happens in the shell. Reruns with the same config (seed included) write
byte-identical CSVs: floats are serialized with repr and nothing
wall-clock-dependent goes into the tables.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .epstein_zin import (
    ez_envelope,
    ez_eigenpair,
    ez_operator,
    ez_recover,
    ez_recursion_residual,
    eigenvalue_condition,
)
from .filters import kalman_steady_state
from .grids import GridFunction, grid_build
from .learning import apply_learning, learning_operator
from .models import (
    DisasterArgModel,
    GaussianStateSpaceModel,
    GaussianVar1Model,
    HiddenRegimeModel,
    QuadratureSpec,
    SsyVolModel,
    model_from_config,
)
from .operators import (
    EzSpec,
    LearningSpec,
    RobustSpec,
    apply_robust,
    spectral_radius_est,
    worst_case_density,
)
from .orlicz import thin_tail_check
from .solvers import (
    DisasterParams,
    affine_map_iterate,
    affine_solve_disaster,
    affine_solve_gaussian_robust,
    contraction_solve,
    disaster_affine_residual,
    lower_envelope_robust,
    monotone_solve,
    robust_operator,
    truncated_operator,
    truncation_gap_check,
    upper_envelope_robust,
)

SCHEMA_VERSION = 1


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: object = None
    detail: str = ""

    def as_dict(self) -> dict:
        return {"name": self.name, "passed": bool(self.passed), "value": self.value, "detail": self.detail}


@dataclass
class ExperimentReport:
    experiment: str
    config: dict
    checks: list
    tables: dict = field(default_factory=dict)
    timing_s: float = 0.0
    version: str = __version__
    schema_version: int = SCHEMA_VERSION

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def as_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "version": self.version,
            "experiment": self.experiment,
            "config": self.config,
            "checks": [c.as_dict() for c in self.checks],
            "tables": sorted(self.tables),
            "all_passed": self.all_passed,
            "timing_s": self.timing_s,
        }

    def write(self, out_dir) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for name, (columns, rows) in self.tables.items():
            path = out / f"{name}.csv"
            with open(path, "w", newline="") as fh:
                fh.write(f"# {self.experiment}: {','.join(columns)}\n")
                writer = csv.writer(fh)
                writer.writerow(columns)
                for row in rows:
                    writer.writerow([_cell(v) for v in row])
        report_path = out / "report.json"
        with open(report_path, "w") as fh:
            json.dump(self.as_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        return report_path


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def _merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for k, v in (override or {}).items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


_CATALOG = {
    "ez-gaussian": {
        "summary": "closed-form vs power-iteration eigenpair, eigenvalue condition, "
        "envelope squeeze and recursion residual for the IES != 1 recursion",
        "topic": "Epstein-Zin existence",
    },
    "learning-regime": {
        "summary": "hidden-regime belief recursion: fixed point, parameter-limit "
        "identities, steady-state filter",
        "topic": "learning and ambiguity",
    },
    "nonexistence-ssy": {
        "summary": "stochastic-volatility growth: thin-tail failure, blow-up of "
        "truncated solves as the truncation widens, divergent upper envelope",
        "topic": "non-existence",
    },
    "nonuniqueness-bs": {
        "summary": "disaster-intensity recursion: two affine fixed points, exact "
        "operator residuals, basin-of-attraction sweep",
        "topic": "non-uniqueness",
    },
    "robust-gaussian": {
        "summary": "linear-Gaussian robust recursion: closed-form affine fixed point, "
        "envelope-started monotone solves, kernel diagnostics",
        "topic": "robust preferences",
    },
    "truncation-bound": {
        "summary": "truncated contraction solve versus the untruncated fixed point, "
        "with the discounted log-mass error bound",
        "topic": "compact approximation",
    },
}


def list_experiments() -> list:
    """Stable-ordered catalog with one-line descriptions."""
    return [
        {"tag": tag, "summary": _CATALOG[tag]["summary"], "topic": _CATALOG[tag]["topic"]}
        for tag in sorted(_CATALOG)
    ]


DEFAULT_CONFIGS = {
    "nonuniqueness-bs": {
        "seed": 0,
        "params": {"a_const": 0.0, "b_const": 0.1, "beta": 0.9, "c": 0.2, "phi": 0.8, "delta": 1.0},
        "basin_starts": [0.0, 0.49, 0.99, 1.01, 1.2],
        "h_grid": {"lo": 0.0, "hi": 10.0, "n": 101},
        "solver": {"max_iter": 500, "tol": 1e-12},
        "tolerances": {"root": 1e-12, "residual": 1e-8, "basin": 1e-8},
    },
    "robust-gaussian": {
        "seed": 0,
        "model": {
            "model": "gaussian_var1",
            "params": {"nu": [0.0], "A": [[0.9]], "Sigma": [[0.01]], "lambda0": [1.0], "lambda1": [0.0]},
        },
        "recursion": {"beta": 0.95, "alpha": -1.0},
        "grid": {"half_width_sds": 4.0, "n_nodes": 201},
        "quadrature": {"scheme": "gauss-hermite", "n": 41},
        "solver": {"tol": 2.5e-6, "max_iter": 20000},
        "tolerances": {"residual": 1e-6, "solve_gap": 1e-4},
    },
    "truncation-bound": {
        "seed": 0,
        "model": {
            "model": "gaussian_var1",
            "params": {"nu": [0.0], "A": [[0.9]], "Sigma": [[0.01]], "lambda0": [1.0], "lambda1": [0.0]},
        },
        "recursion": {"beta": 0.95, "alpha": -1.0},
        "grid": {"half_width_sds": 4.0, "n_nodes": 201},
        "quadrature": {"n_truncated": 120},
        "solver": {"tol": 1e-10, "max_iter": 20000},
    },
    "nonexistence-ssy": {
        "seed": 0,
        "model": {"model": "ssy_vol", "params": {"nu_g": 0.0, "nu_h": 0.0, "rho": 0.9, "sigma": 0.25}},
        "recursion": {"beta": 0.95, "alpha": -1.0},
        "truncations": [2.0, 4.0, 6.0, 8.0],
        "grid": {"nodes_per_unit": 40},
        "quadrature": {"n_truncated": 240},
        "solver": {"tol": 1e-6, "max_iter": 20000},
        "thin_tail": {"r": 1.0, "n": 20000},
    },
    "learning-regime": {
        "seed": 0,
        "model": {
            "model": "hidden_regime",
            "params": {
                "Lambda": [[0.9, 0.1], [0.1, 0.9]],
                "obs_mean": [0.02, -0.02],
                "obs_var": [0.0001, 0.0009],
            },
        },
        "recursion": {"beta": 0.9, "theta": 1.0, "vartheta": 2.0},
        "grid": {"n_nodes": 101},
        "quadrature": {"n": 41},
        "solver": {"tol": 1e-9, "max_iter": 20000},
        "kalman": {"A": [[1.0]], "B": [[0.5]], "Sigma_u": [[1.0]], "Sigma_w": [[1.0]], "tol": 1e-12},
        "tolerances": {"residual": 1e-6, "identity": 1e-10, "limit_gap": 1e-3, "kalman": 1e-8},
    },
    "ez-gaussian": {
        "seed": 0,
        "model": {"model": "gaussian_var1", "params": {"nu": [0.0], "A": [[0.5]], "Sigma": [[0.04]]}},
        "recursion": {"beta": 0.96, "gamma": 2.0, "rho_ies": 0.5},
        "consumption_loading": [1.0],
        "grid": {"half_width_sds": 4.0, "n_nodes": 201, "extension_sds": 10.0, "n_ext": 1281},
        "quadrature": {"n": 41},
        "solver": {"tol": 2e-8, "max_iter": 20000},
        "tolerances": {"pair": 1e-6, "agree": 2e-5, "residual": 1e-6},
    },
}


def default_config(tag: str) -> dict:
    if tag not in DEFAULT_CONFIGS:
        raise ValueError(f"unknown experiment tag {tag!r}; known: {sorted(DEFAULT_CONFIGS)}")
    cfg = json.loads(json.dumps(DEFAULT_CONFIGS[tag]))  # deep copy
    cfg["experiment"] = tag
    return cfg


def resolve_config(config) -> dict:
    """Merge a user config (dict or path) over the experiment defaults."""
    if isinstance(config, (str, Path)):
        with open(config) as fh:
            config = json.load(fh)
    if not isinstance(config, dict):
        raise ValueError("config must be a dict or a path to a JSON document")
    tag = config.get("experiment")
    if tag is None:
        raise ValueError("config must name an 'experiment'")
    base = default_config(tag)
    return _merge(base, config)


def run_experiment(config, out_dir=None) -> ExperimentReport:
    """Validate, run, and (when out_dir is given) write report + tables."""
    cfg = resolve_config(config)
    tag = cfg["experiment"]
    runner = _RUNNERS[tag]
    t0 = time.perf_counter()
    report = runner(cfg)
    report.timing_s = time.perf_counter() - t0
    if out_dir is not None:
        report.write(out_dir)
    return report


# ---------------------------------------------------------------------------
# individual experiments


def _run_nonuniqueness_bs(cfg) -> ExperimentReport:
    p = cfg["params"]
    params = DisasterParams(**p)
    tol = cfg["tolerances"]
    checks, tables = [], {}
    roots = affine_solve_disaster(params)
    checks.append(
        CheckResult("affine_pair_exists", roots.feasible, roots.discriminant, roots.note or "two real roots")
    )
    if roots.feasible:
        s1, s2 = roots.solutions
        b1, b2 = float(s1.b[0]), float(s2.b[0])
        tables["roots"] = (
            ["root", "a", "b"],
            [["small", s1.a, b1], ["large", s2.a, b2]],
        )
        hg = np.linspace(cfg["h_grid"]["lo"], cfg["h_grid"]["hi"], cfg["h_grid"]["n"])
        r1 = disaster_affine_residual(params, s1.a, b1, hg)
        r2 = disaster_affine_residual(params, s2.a, b2, hg)
        checks.append(CheckResult("residual_small_root", r1 < tol["residual"], r1))
        checks.append(CheckResult("residual_large_root", r2 < tol["residual"], r2))
        basin_rows = []
        ok = True
        for b0 in cfg["basin_starts"]:
            r = affine_map_iterate(params, 0.0, float(b0), max_iter=cfg["solver"]["max_iter"], tol=cfg["solver"]["tol"])
            expected = "diverge" if b0 > b2 else ("at-unstable" if b0 == b2 else "converge-to-smallest")
            match = r.trace.basin == expected and (
                r.trace.basin != "converge-to-smallest" or abs(r.b - b1) < tol["basin"]
            )
            ok = ok and match
            basin_rows.append([b0, r.trace.basin or "none", r.b, r.iterations, expected])
        tables["basins"] = (["b0", "label", "b_final", "iterations", "expected"], basin_rows)
        checks.append(CheckResult("basin_sweep_matches_theory", ok, len(basin_rows)))
    return ExperimentReport("nonuniqueness-bs", cfg, checks, tables)


def _robust_gaussian_setup(cfg):
    model = model_from_config(cfg["model"])
    spec = RobustSpec(**cfg["recursion"])
    law = model.stationary_law()
    sd = float(np.sqrt(np.atleast_2d(law.cov)[0, 0]))
    mu = float(np.atleast_1d(law.mean)[0])
    half = cfg["grid"]["half_width_sds"] * sd
    grid = grid_build((mu - half, mu + half), cfg["grid"]["n_nodes"])
    return model, spec, grid, (mu - half, mu + half)


def _run_robust_gaussian(cfg) -> ExperimentReport:
    model, spec, grid, _ = _robust_gaussian_setup(cfg)
    quad = QuadratureSpec(n=cfg["quadrature"]["n"])
    tol = cfg["tolerances"]
    checks, tables = [], {}
    sol = affine_solve_gaussian_robust(model, spec, residual_grid=grid, quad=quad)
    vstar = sol.as_grid_function(grid)
    checks.append(CheckResult("closed_form_residual", sol.residual < tol["residual"], sol.residual))
    up = upper_envelope_robust(spec, model, grid, quad=quad)
    lo = lower_envelope_robust(spec, model, grid, quad=quad)
    order_ok = bool(
        np.all(up.func.values >= vstar.values - 1e-9) and np.all(lo.func.values <= vstar.values + 1e-9)
    )
    checks.append(CheckResult("envelopes_bracket_solution", order_ok))
    T = robust_operator(spec, model, grid, quad)
    res_a, _ = monotone_solve(T, up.func, "from-above", tol=cfg["solver"]["tol"], max_iter=cfg["solver"]["max_iter"])
    res_b, _ = monotone_solve(T, lo.func, "from-below", tol=cfg["solver"]["tol"], max_iter=cfg["solver"]["max_iter"])
    gap_a = float(np.max(np.abs(res_a.solution.values - vstar.values)))
    gap_b = float(np.max(np.abs(res_b.solution.values - vstar.values)))
    checks.append(CheckResult("solve_from_above", gap_a < tol["solve_gap"] and res_a.monotone_trace, gap_a))
    checks.append(CheckResult("solve_from_below", gap_b < tol["solve_gap"] and res_b.monotone_trace, gap_b))
    D = worst_case_density(spec, model, vstar, quad)
    row_err = float(np.max(np.abs(D.row_sums() - 1.0)))
    checks.append(CheckResult("kernel_rows_normalized", row_err < 1e-10, row_err))
    diag = spectral_radius_est(D, {"const": GridFunction(grid, np.ones(grid.shape))})
    perron_err = abs(diag.matrix_radius - spec.beta)
    checks.append(CheckResult("discretized_perron_root", perron_err < 1e-8, diag.matrix_radius))
    pts = grid.points()[:, 0]
    tables["solution"] = (
        ["x", "closed_form", "from_above", "from_below"],
        [
            [x, v, a, b]
            for x, v, a, b in zip(pts, vstar.flat(), res_a.solution.flat(), res_b.solution.flat())
        ],
    )
    tables["envelopes"] = (
        ["x", "lower", "upper"],
        [[x, l, u] for x, l, u in zip(pts, lo.func.flat(), up.func.flat())],
    )
    return ExperimentReport("robust-gaussian", cfg, checks, tables)


def _run_truncation_bound(cfg) -> ExperimentReport:
    model, spec, grid, bounds1d = _robust_gaussian_setup(cfg)
    bounds = [bounds1d]
    checks, tables = [], {}
    sol = affine_solve_gaussian_robust(model, spec, residual_grid=grid)
    vstar = sol.as_grid_function(grid)
    quad_t = QuadratureSpec("gauss-legendre-truncated", n=cfg["quadrature"]["n_truncated"], bounds=bounds1d)
    Tc = truncated_operator(spec, model, bounds, grid, quad_t)
    res, _ = contraction_solve(
        Tc, GridFunction(grid, np.zeros(grid.shape)), beta=spec.beta,
        tol=cfg["solver"]["tol"], max_iter=cfg["solver"]["max_iter"],
    )
    rep = truncation_gap_check(vstar, res.solution, model, bounds, spec.beta)
    checks.append(CheckResult("gap_bound_holds", rep.bound_holds, rep.inf_gap, f"rhs={rep.rhs}"))
    checks.append(CheckResult("upper_bound_holds", rep.upper_holds, rep.eps_c))
    pts = grid.points()[:, 0]
    tables["gap"] = (
        ["x", "v", "v_truncated", "gap", "mass"],
        [
            [x, v, vc, g, m]
            for x, v, vc, g, m in zip(pts, vstar.flat(), res.solution.flat(), rep.per_node_gap, rep.per_node_mass)
        ],
    )
    return ExperimentReport("truncation-bound", cfg, checks, tables)


def _run_nonexistence_ssy(cfg) -> ExperimentReport:
    model = model_from_config(cfg["model"])
    spec = RobustSpec(**cfg["recursion"])
    checks, tables = [], {}
    tt = thin_tail_check(model, r=cfg["thin_tail"]["r"], n=cfg["thin_tail"]["n"], seed=cfg["seed"])
    checks.append(CheckResult("thin_tail_fails", tt.overall == "fail", tt.overall))
    tables["thin_tail"] = (
        ["c", "verdict", "max_exponent"],
        [[rec["c"], rec["verdict"], rec.get("max_exponent")] for rec in tt.per_c],
    )
    v0s = []
    rows = []
    for H in cfg["truncations"]:
        n_nodes = int(cfg["grid"]["nodes_per_unit"] * H) + 1
        g = grid_build((-H, H), n_nodes)
        quad_t = QuadratureSpec("gauss-legendre-truncated", n=cfg["quadrature"]["n_truncated"], bounds=(-H, H))
        Tc = truncated_operator(spec, model, [(-H, H)], g, quad_t)
        res, _ = contraction_solve(
            Tc, GridFunction(g, np.zeros(g.shape)), beta=spec.beta,
            tol=cfg["solver"]["tol"], max_iter=cfg["solver"]["max_iter"],
        )
        v0 = float(res.solution(np.array([0.0])))
        v0s.append(v0)
        rows.append([H, v0, res.iterations])
    tables["truncated_values"] = (["H", "v_at_0", "iterations"], rows)
    inc = np.diff(v0s)
    checks.append(CheckResult("truncated_values_increase", bool(np.all(inc > 0)), v0s))
    checks.append(
        CheckResult("blowup_acceleration", bool(inc[-1] > inc[0]), [float(inc[0]), float(inc[-1])])
    )
    law = model.stationary_law()
    sd = float(np.sqrt(np.atleast_2d(law.cov)[0, 0]))
    mu = float(np.atleast_1d(law.mean)[0])
    env_grid = grid_build((mu - 4 * sd, mu + 4 * sd), 93)
    env = upper_envelope_robust(spec, model, env_grid)
    checks.append(CheckResult("upper_envelope_diverges", env.func.diverged, env.func.diverged))
    return ExperimentReport("nonexistence-ssy", cfg, checks, tables)


def _run_learning_regime(cfg) -> ExperimentReport:
    model = model_from_config(cfg["model"])
    rec = cfg["recursion"]
    spec = LearningSpec(beta=rec["beta"], theta=rec["theta"], vartheta=rec["vartheta"])
    quad = QuadratureSpec(n=cfg["quadrature"]["n"])
    tol = cfg["tolerances"]
    checks, tables = [], {}
    grid = grid_build((0.0, 1.0), cfg["grid"]["n_nodes"])
    T = learning_operator(spec, model, grid, quad)
    res, _ = monotone_solve(
        T, GridFunction(grid, np.zeros(grid.shape)), "from-below",
        tol=cfg["solver"]["tol"], max_iter=cfg["solver"]["max_iter"],
    )
    checks.append(CheckResult("fixed_point_residual", res.residual < tol["residual"], res.residual))
    v = res.solution
    # vartheta = theta collapses the two layers into one joint expectation;
    # compare against an independently coded single-expectation evaluation
    spec_eq = LearningSpec(beta=rec["beta"], theta=rec["theta"], vartheta=rec["theta"])
    lhs = apply_learning(spec_eq, model, v, quad)
    rhs = _single_expectation_learning(spec_eq, model, v, quad)
    red_err = float(np.max(np.abs(lhs.values - rhs)))
    checks.append(CheckResult("vartheta_theta_reduction", red_err < tol["identity"], red_err))
    # one-regime degeneracy: operator == rescaled observable recursion
    sub = HiddenRegimeModel([[1.0]], [model.obs_mean[0]], [model.obs_var[0]])
    ratio = spec.vartheta / spec.theta
    f0 = 0.3
    val = apply_learning(spec, sub, f0, quad)
    iid = GaussianVar1Model(
        nu=[model.obs_mean[0]], A=[[0.0]], Sigma=[[model.obs_var[0]]], lambda0=[0.0], lambda1=[1.0]
    )
    rspec = RobustSpec(beta=spec.beta, alpha=spec.alpha / ratio)
    tiny = grid_build((-1.0, 1.0), 3)
    robust_val = float(
        apply_robust(rspec, iid, GridFunction(tiny, np.full((3,), f0 / ratio)), quad).values[1]
    )
    degen_err = abs(val - ratio * robust_val)
    checks.append(CheckResult("single_regime_degeneracy", degen_err < tol["identity"], degen_err))
    big = LearningSpec(beta=rec["beta"], theta=rec["theta"], vartheta=1e6)
    inf_spec = LearningSpec(beta=rec["beta"], theta=rec["theta"], vartheta=np.inf)
    gap = float(np.max(np.abs(apply_learning(big, model, v, quad).values - apply_learning(inf_spec, model, v, quad).values)))
    checks.append(CheckResult("vartheta_limit_gap", gap < tol["limit_gap"], gap))
    kal = cfg["kalman"]
    gss = GaussianStateSpaceModel(kal["A"], kal["B"], kal["Sigma_u"], kal["Sigma_w"])
    filt = kalman_steady_state(gss, tol=kal["tol"])
    a2 = float(np.atleast_2d(kal["B"])[0, 0]) ** 2
    su = float(np.atleast_2d(kal["Sigma_u"])[0, 0])
    sw = float(np.atleast_2d(kal["Sigma_w"])[0, 0])
    # scalar prediction-form fixed point: S^2 + S(su - a2 su - sw) - su sw = 0
    bq = su - a2 * su - sw
    target = 0.5 * (-bq + np.sqrt(bq * bq + 4.0 * su * sw))
    kerr = abs(float(filt.Sigma_bar[0, 0]) - target)
    checks.append(CheckResult("kalman_steady_state", kerr < tol["kalman"], float(filt.Sigma_bar[0, 0])))
    pts = grid.points()[:, 0]
    tables["belief_solution"] = (["belief_p1", "value"], [[p, val_] for p, val_ in zip(pts, v.flat())])
    return ExperimentReport("learning-regime", cfg, checks, tables)


def _single_expectation_learning(spec, model, f: GridFunction, quad) -> np.ndarray:
    """Independent evaluation of beta log E_b E[e^{f(b') + alpha u}]
    (the joint-expectation form the operator collapses to at
    vartheta = theta), written without the layered machinery."""
    from scipy.special import logsumexp as _lse
    from scipy.stats import norm as _norm

    from .models import gauss_hermite

    z, w = gauss_hermite(quad.n)
    n = model.n_regimes
    out = np.empty(f.grid.size)
    for i, coords in enumerate(f.grid.points()):
        b = np.empty(n)
        b[: n - 1] = coords
        b[n - 1] = 1.0 - coords.sum()
        parts = []
        for xi in range(n):
            if b[xi] <= 0.0:
                continue
            obs = model.obs_mean[xi] + np.sqrt(model.obs_var[xi]) * z
            loglik = _norm.logpdf(
                obs[:, None], model.obs_mean[None, :], np.sqrt(model.obs_var)[None, :]
            )
            lp = loglik + np.where(b > 0, np.log(np.clip(b, 1e-300, None)), -np.inf)[None, :]
            lp = lp - _lse(lp, axis=1, keepdims=True)
            nxt = np.exp(lp) @ model.Lambda.T
            fv = f.eval(nxt[:, : n - 1])
            parts.append(np.log(b[xi]) + _lse(np.log(w) + fv + spec.alpha * obs))
        out[i] = spec.beta * _lse(np.array(parts))
    return out.reshape(f.grid.shape)


def _run_ez_gaussian(cfg) -> ExperimentReport:
    model = model_from_config(cfg["model"])
    rec = cfg["recursion"]
    spec = EzSpec(beta=rec["beta"], gamma=rec["gamma"], rho_ies=rec["rho_ies"])
    delta = cfg["consumption_loading"]
    quad = QuadratureSpec(n=cfg["quadrature"]["n"])
    tol = cfg["tolerances"]
    checks, tables = [], {}
    law = model.stationary_law()
    sd = float(np.sqrt(np.atleast_2d(law.cov)[0, 0]))
    mu = float(np.atleast_1d(law.mean)[0])
    half = cfg["grid"]["half_width_sds"] * sd
    ext = cfg["grid"]["extension_sds"] * sd
    grid = grid_build((mu - half - ext, mu + half + ext), cfg["grid"]["n_ext"])
    window = [(mu - half, mu + half)]
    pair = ez_eigenpair(model, spec.gamma, delta, method="closed-form", grid=grid, quad=quad)
    checks.append(CheckResult("eigen_residual", pair.residual_sup < 1e-8, pair.residual_sup))
    pair_pi = ez_eigenpair(model, spec.gamma, delta, method="power-iteration", grid=grid, quad=quad)
    lam_err = abs(pair_pi.lam - pair.lam)
    iota_err = float(np.max(np.abs(pair_pi.log_iota(grid.points()) - pair.log_iota(grid.points()))))
    checks.append(CheckResult("power_iteration_matches", max(lam_err, iota_err) < tol["pair"], [lam_err, iota_err]))
    cond = eigenvalue_condition(spec.beta, pair.lam, spec.kappa)
    checks.append(CheckResult("eigenvalue_condition", cond.passed, cond.value))
    env = ez_envelope(pair, spec, model, grid, quad)
    T = ez_operator(spec, pair, model, grid, quad)
    res_a, _ = monotone_solve(T, env.upper, "from-above", tol=cfg["solver"]["tol"], max_iter=cfg["solver"]["max_iter"])
    res_b, _ = monotone_solve(T, env.lower, "from-below", tol=cfg["solver"]["tol"], max_iter=cfg["solver"]["max_iter"])
    pts = grid.points()
    mask = (pts[:, 0] >= window[0][0]) & (pts[:, 0] <= window[0][1])
    agree = float(np.max(np.abs(res_a.solution.flat() - res_b.solution.flat())[mask]))
    checks.append(CheckResult("two_sided_agreement", agree < tol["agree"], agree))
    v_ez = ez_recover(pair, res_a.solution, spec.kappa)
    resid = ez_recursion_residual(spec, v_ez, model, delta, quad, window=window)
    checks.append(CheckResult("recursion_residual", resid < tol["residual"], resid))
    xs = pts[mask, 0]
    tables["solution"] = (
        ["x", "transformed_fixed_point", "value_recursion_solution"],
        [[x, f, v] for x, f, v in zip(xs, res_a.solution.flat()[mask], v_ez.flat()[mask])],
    )
    return ExperimentReport("ez-gaussian", cfg, checks, tables)


_RUNNERS = {
    "nonuniqueness-bs": _run_nonuniqueness_bs,
    "robust-gaussian": _run_robust_gaussian,
    "truncation-bound": _run_truncation_bound,
    "nonexistence-ssy": _run_nonexistence_ssy,
    "learning-regime": _run_learning_regime,
    "ez-gaussian": _run_ez_gaussian,
}
