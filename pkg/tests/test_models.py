import numpy as np
import pytest
from scipy.integrate import quad as scipy_quad

import recval as rv
from recval import (
    DisasterArgModel,
    GaussianVar1Model,
    HiddenRegimeModel,
    QuadratureSpec,
    RegimeSwitchVarModel,
    SsyVolModel,
    arg_laplace,
    cond_expect,
    model_from_config,
    sample_stationary,
    sample_transition,
    stationary_law,
)


@pytest.fixture
def scalar_var():
    return GaussianVar1Model(nu=[0.1], A=[[0.9]], Sigma=[[0.19]], lambda0=[1.0], lambda1=[0.0])


def test_var_validation():
    with pytest.raises(ValueError):
        GaussianVar1Model(nu=[0.0], A=[[1.0]], Sigma=[[1.0]])
    with pytest.raises(ValueError):
        GaussianVar1Model(nu=[0.0, 0.0], A=[[0.5, 0.0], [0.0, 0.5]], Sigma=[[1.0, 0.5], [0.0, 1.0]])
    with pytest.raises(ValueError):
        GaussianVar1Model(nu=[0.0], A=[[0.5]], Sigma=[[-1.0]])


def test_var_stationary_closed_form(scalar_var):
    # mean nu/(1-a) = 0.1/0.1, variance sigma^2/(1-a^2) = 0.19/0.19
    law = stationary_law(scalar_var)
    assert law.kind == "gaussian"
    assert float(law.mean[0]) == pytest.approx(1.0, abs=1e-12)
    assert float(law.cov[0][0]) == pytest.approx(1.0, abs=1e-12)


def test_var_stationary_sampler_moments(scalar_var):
    draws = stationary_law(scalar_var).sample(200_000, seed=11)
    assert np.mean(draws) == pytest.approx(1.0, abs=0.02)
    assert np.var(draws) == pytest.approx(1.0, abs=0.02)


def test_arg_stationary_gamma_and_simulation():
    m = DisasterArgModel(nu_g=0.0, sigma=0.01, nu_j=-0.15, sigma_j=0.1, phi=0.8, c=0.2, delta=1.0)
    law = stationary_law(m)
    assert law.kind == "gamma"
    assert float(law.mean[0]) == pytest.approx(1.0, abs=1e-12)  # delta c / (1 - phi)
    # long-run simulation of the intensity chain agrees within 1%
    rng = np.random.default_rng(5)
    h = 1.0
    total, n = 0.0, 1_000_000
    for _ in range(10_000):
        h = float(m.sample_transition([h], rng)[0])
    acc = np.empty(n)
    for i in range(n):
        h = float(m.sample_transition([h], rng)[0])
        acc[i] = h
    assert np.mean(acc) == pytest.approx(1.0, rel=0.01)


def test_symmetric_chain_stationary():
    m = HiddenRegimeModel(Lambda=[[0.9, 0.1], [0.1, 0.9]], obs_mean=[0.0, 1.0], obs_var=[1.0, 1.0])
    pi = m.regime_stationary()
    assert np.allclose(pi, [0.5, 0.5])


@pytest.mark.parametrize("model_key", ["var", "ssy", "disaster", "regime"])
def test_cond_expect_normalization(model_key):
    models = {
        "var": (GaussianVar1Model(nu=[0.1], A=[[0.9]], Sigma=[[0.19]]), np.array([0.3])),
        "ssy": (SsyVolModel(nu_g=0.0, nu_h=0.0, rho=0.9, sigma=0.25), np.array([0.4])),
        "disaster": (
            DisasterArgModel(nu_g=0.0, sigma=0.01, nu_j=-0.15, sigma_j=0.1, phi=0.8, c=0.2, delta=1.0),
            np.array([0.7]),
        ),
        "regime": (
            RegimeSwitchVarModel(
                nu_s=[[0.0], [0.1]], A_s=[[[0.5]], [[0.8]]], Sigma_s=[[[0.01]], [[0.04]]],
                Lambda=[[0.9, 0.1], [0.1, 0.9]], lambda0=[1.0], lambda1=[0.0],
            ),
            np.array([0.2, 1.0]),
        ),
    }
    model, x = models[model_key]
    val = cond_expect(model, lambda nxt: np.ones(nxt.shape[0]), x)
    assert val == pytest.approx(1.0, abs=1e-12)


def test_cond_expect_var_linear(scalar_var):
    val = cond_expect(scalar_var, lambda nxt: nxt[:, 0], np.array([0.5]))
    assert val == pytest.approx(0.1 + 0.9 * 0.5, abs=1e-12)


def test_cond_expect_ssy_exponential_affine():
    # E[e^{alpha g'} | h] = exp(alpha nu_g + alpha^2 e^{2h} / 2)
    m = SsyVolModel(nu_g=0.3, nu_h=0.0, rho=0.9, sigma=0.25)
    alpha, h = -1.0, 0.4
    val = cond_expect(m, lambda nxt: np.exp(alpha * nxt[:, 0]), np.array([h]))
    assert val == pytest.approx(np.exp(alpha * 0.3 + 0.5 * np.exp(2 * h)), rel=1e-10)


def test_sampler_determinism(scalar_var):
    a = sample_transition(scalar_var, np.array([0.0]), seed=42)
    b = sample_transition(scalar_var, np.array([0.0]), seed=42)
    assert np.array_equal(a, b)
    sa = sample_stationary(scalar_var, 100, seed=7)
    sb = sample_stationary(scalar_var, 100, seed=7)
    assert np.array_equal(sa, sb)


def test_transition_sample_clt_bound(scalar_var):
    rng = np.random.default_rng(123)
    draws = scalar_var.sample_transition_many(np.array([0.0]), 1_000_000, rng)
    # mean of x' from x=0 is nu; 4 sigma / sqrt(n) = 4 sqrt(0.19) / 1e3
    assert abs(np.mean(draws) - 0.1) < 4 * np.sqrt(0.19) / 1e3


def test_monte_carlo_vs_quadrature_exponential_affine():
    # 50 randomized exponential-affine integrands: MC within 3 standard errors
    rng = np.random.default_rng(2024)
    failures = 0
    for k in range(50):
        a = rng.uniform(-0.6, 0.9)
        sig = rng.uniform(0.05, 0.4) ** 2
        model = GaussianVar1Model(nu=[rng.uniform(-0.2, 0.2)], A=[[a]], Sigma=[[sig]])
        t = rng.uniform(-1.5, 1.5)
        x = np.array([rng.uniform(-1.0, 1.0)])
        f = lambda nxt, t=t: np.exp(t * nxt[:, 0])
        exact = cond_expect(model, f, x)
        n_mc = 40_000
        mc = cond_expect(model, f, x, QuadratureSpec("monte-carlo", n=n_mc, seed=int(k)))
        draws = model.sample_transition_many(x, n_mc, np.random.default_rng(int(k)))
        se = float(np.std(f(np.atleast_2d(draws)))) / np.sqrt(n_mc)
        if abs(mc - exact) > 3 * se:
            failures += 1
    assert failures <= 2  # ~0.3% chance each at 3 SE


def test_arg_laplace_values():
    m = DisasterArgModel(nu_g=0.0, sigma=0.01, nu_j=-0.15, sigma_j=0.1, phi=0.8, c=0.2, delta=1.0)
    assert arg_laplace(m, 0.0, 2.0) == pytest.approx(1.0, abs=1e-15)
    # exp(phi u h / (1 - uc)) (1 - uc)^{-delta} at u=1, h=1: e / 0.8
    assert arg_laplace(m, 1.0, 1.0) == pytest.approx(3.3978522855738063, abs=1e-12)
    with pytest.raises(ValueError):
        arg_laplace(m, 5.0, 1.0)  # uc = 1 boundary


def test_arg_laplace_vs_poisson_gamma_simulation():
    m = DisasterArgModel(nu_g=0.0, sigma=0.01, nu_j=-0.15, sigma_j=0.1, phi=0.8, c=0.2, delta=1.0)
    rng_par = np.random.default_rng(99)
    failures = 0
    for k in range(20):
        # keep u c <= 0.45 so e^{u h'} has finite variance and 3-SE applies
        u = rng_par.uniform(-1.0, 0.45 / m.c)
        h = rng_par.uniform(0.1, 2.5)
        exact = arg_laplace(m, u, h)
        rng = np.random.default_rng(1000 + k)
        n = 400_000
        js = rng.poisson(m.phi * h / m.c, size=n)
        draws = rng.gamma(m.delta + js, m.c)
        vals = np.exp(u * draws)
        se = float(np.std(vals)) / np.sqrt(n)
        if abs(float(np.mean(vals)) - exact) > 3 * se:
            failures += 1
    assert failures <= 1


def test_abs_gaussian_exp_moment_bound():
    # E[exp(Y^r / a^r)], Y = |Z|, is below the three-piece analytic bound;
    # (a, r) kept in the doubles-representable range
    rng = np.random.default_rng(7)
    for _ in range(20):
        a = rng.uniform(1.0, 4.0)
        r = rng.uniform(1.0, 1.75)
        val, _ = scipy_quad(
            lambda y: np.exp((y / a) ** r - 0.5 * y * y) * np.sqrt(2.0 / np.pi), 0.0, 60.0, limit=200
        )
        t = 1.0 / (2.0 - r)
        bound = np.sqrt(2.0 / np.pi) * (
            (2.0 / a**r) ** t * np.exp(2.0 ** (r * t) / a ** (2 * r * t))
            + (4.0 / a**r) ** t
            + np.sqrt(np.pi)
        )
        assert val <= bound


def test_ssy_reduction_matches_full_2d_quadrature():
    m = SsyVolModel(nu_g=0.1, nu_h=0.05, rho=0.9, sigma=0.25)
    alpha, h = -0.8, 0.3
    shift, nodes, logw, au = m.robust_terms(np.array([h]), alpha)
    # reduced: E[e^{alpha g' + 0.7 h'}] = e^{shift} sum w e^{0.7 h'}
    red = np.exp(shift) * float(np.exp(logw) @ np.exp(0.7 * nodes[:, 0]))
    full = cond_expect(m, lambda nxt: np.exp(alpha * nxt[:, 0] + 0.7 * nxt[:, 1]), np.array([h]))
    assert red == pytest.approx(full, rel=1e-10)


def test_degenerate_variance_point_mass():
    m = GaussianVar1Model(nu=[0.2], A=[[0.5]], Sigma=[[0.0]])
    nodes, logw = m.transition_nodes(np.array([1.0]))
    assert nodes.shape[0] == 1
    assert nodes[0, 0] == pytest.approx(0.7)
    assert np.exp(logw[0]) == pytest.approx(1.0)


def test_regime_switch_validation():
    with pytest.raises(ValueError):
        RegimeSwitchVarModel(
            nu_s=[[0.0], [0.0]], A_s=[[[1.1]], [[0.5]]], Sigma_s=[[[0.01]], [[0.01]]],
            Lambda=[[0.9, 0.1], [0.1, 0.9]],
        )
    with pytest.raises(ValueError):
        RegimeSwitchVarModel(
            nu_s=[[0.0], [0.0]], A_s=[[[0.5]], [[0.5]]], Sigma_s=[[[0.01]], [[0.01]]],
            Lambda=[[0.9, 0.3], [0.2, 0.8]],
        )


def test_model_from_config_round_trip():
    doc = {
        "model": "gaussian_var1",
        "params": {"nu": [0.1], "A": [[0.9]], "Sigma": [[0.19]], "lambda0": [1.0], "lambda1": [0.0]},
    }
    m = model_from_config(doc)
    assert isinstance(m, GaussianVar1Model)
    assert m.A[0, 0] == 0.9
    with pytest.raises(ValueError):
        model_from_config({"model": "nope", "params": {}})
    with pytest.raises(ValueError):
        model_from_config({"model": "ssy_vol", "params": {"nu_g": 0.0, "bogus": 1}})


def test_model_from_config_all_tags():
    docs = [
        {"model": "ssy_vol", "params": {"nu_g": 0.0, "nu_h": 0.0, "rho": 0.9, "sigma": 0.25}},
        {
            "model": "disaster_arg",
            "params": {"nu_g": 0.0, "sigma": 0.01, "nu_j": -0.15, "sigma_j": 0.1, "phi": 0.8, "c": 0.2, "delta": 1.0},
        },
        {
            "model": "regime_switch_var",
            "params": {
                "nu_s": [[0.0], [0.1]], "A_s": [[[0.5]], [[0.8]]],
                "Sigma_s": [[[0.01]], [[0.04]]], "Lambda": [[0.9, 0.1], [0.1, 0.9]],
            },
        },
        {
            "model": "hidden_regime",
            "params": {"Lambda": [[0.9, 0.1], [0.1, 0.9]], "obs_mean": [0.02, -0.02], "obs_var": [1e-4, 9e-4]},
        },
        {
            "model": "gaussian_state_space",
            "params": {"A": [[1.0]], "B": [[0.5]], "Sigma_u": [[1.0]], "Sigma_w": [[1.0]]},
        },
    ]
    for doc in docs:
        model_from_config(doc)


def test_disaster_modified_variant_growth_mgf():
    # varsigma < 1: constant jump-noise variance; the truncated Poisson sum
    # must agree with plain Monte Carlo over the jump count
    m = DisasterArgModel(
        nu_g=0.0, sigma=0.01, nu_j=-0.15, sigma_j=0.1, phi=0.8, c=0.2, delta=1.0, varsigma=0.5
    )
    h, alpha = 1.3, -0.9
    val = m.growth_log_mgf(alpha, np.array([h]))
    rng = np.random.default_rng(31)
    js = rng.poisson(h, size=2_000_000).astype(float)
    mc = (
        alpha * m.nu_g
        + 0.5 * alpha**2 * (m.sigma**2 + m.sigma_j**2)
        + np.log(np.mean(np.exp(alpha * m.nu_j * js**m.varsigma)))
    )
    assert val == pytest.approx(mc, abs=2e-3)
