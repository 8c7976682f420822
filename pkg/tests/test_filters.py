import numpy as np
import pytest

from recval import (
    GaussianStateSpaceModel,
    HiddenRegimeModel,
    RiccatiConvergenceError,
    kalman_steady_state,
    regime_filter_update,
)


def test_no_persistence_gives_process_noise():
    m = GaussianStateSpaceModel(A=[[1.0]], B=[[0.0]], Sigma_u=[[1.0]], Sigma_w=[[0.7]])
    filt = kalman_steady_state(m)
    assert filt.Sigma_bar[0, 0] == pytest.approx(0.7, abs=1e-12)


def test_scalar_riccati_fixed_point():
    # prediction form reduces to S^2 - 0.25 S - 1 = 0 for these parameters
    m = GaussianStateSpaceModel(A=[[1.0]], B=[[0.5]], Sigma_u=[[1.0]], Sigma_w=[[1.0]])
    filt = kalman_steady_state(m, tol=1e-14)
    target = 0.5 * (0.25 + np.sqrt(0.25**2 + 4.0))
    assert filt.Sigma_bar[0, 0] == pytest.approx(target, abs=1e-8)
    assert target == pytest.approx(1.1327822, abs=1e-7)
    # one more Riccati step moves nothing
    S = filt.Sigma_bar[0, 0]
    step = 0.25 * (S - S**2 / (S + 1.0)) + 1.0
    assert step == pytest.approx(S, abs=1e-10)


def test_no_hidden_noise_gives_zero():
    m = GaussianStateSpaceModel(A=[[1.0]], B=[[0.5]], Sigma_u=[[1.0]], Sigma_w=[[0.0]])
    filt = kalman_steady_state(m)
    assert filt.Sigma_bar[0, 0] == pytest.approx(0.0, abs=1e-10)


def test_riccati_cap_raises_with_trace():
    m = GaussianStateSpaceModel(A=[[1.0]], B=[[0.9]], Sigma_u=[[1.0]], Sigma_w=[[1.0]])
    with pytest.raises(RiccatiConvergenceError) as err:
        kalman_steady_state(m, tol=1e-14, max_iter=2)
    assert len(err.value.trace) == 2


def test_belief_update_matches_gain_form():
    m = GaussianStateSpaceModel(A=[[2.0]], B=[[0.5]], Sigma_u=[[0.5]], Sigma_w=[[0.2]])
    filt = kalman_steady_state(m, tol=1e-14)
    S = filt.Sigma_bar
    K = m.B @ S @ m.A.T @ np.linalg.inv(m.A @ S @ m.A.T + m.Sigma_u)
    xi, obs = np.array([0.3]), np.array([1.1])
    expected = m.B @ xi + K @ (obs - m.A @ xi)
    assert np.allclose(filt.update(xi, obs), expected, atol=1e-12)


@pytest.fixture
def two_regime():
    return HiddenRegimeModel(
        Lambda=[[0.9, 0.1], [0.1, 0.9]], obs_mean=[0.0, 0.0], obs_var=[1.0, 1.0]
    )


def test_equal_likelihoods_keep_uniform(two_regime):
    out = regime_filter_update(two_regime, [0.5, 0.5], 0.3)
    assert np.allclose(out, [0.5, 0.5], atol=1e-14)


def test_hand_computed_update():
    # likelihood ratio 2:1 at obs=0, symmetric chain -> (19/30, 11/30)
    m = HiddenRegimeModel(
        Lambda=[[0.9, 0.1], [0.1, 0.9]],
        obs_mean=[0.0, 0.0],
        obs_var=[1.0 / (2.0 * np.pi * 4.0), 1.0 / (2.0 * np.pi)],  # densities 2 and 1 at 0
    )
    out = regime_filter_update(m, [0.5, 0.5], 0.0)
    assert out[0] == pytest.approx(19.0 / 30.0, abs=1e-12)
    assert out[1] == pytest.approx(11.0 / 30.0, abs=1e-12)


def test_simplex_preserved(two_regime):
    rng = np.random.default_rng(3)
    for _ in range(50):
        p = rng.dirichlet([1.0, 1.0])
        out = regime_filter_update(two_regime, p, rng.normal())
        assert out.sum() == pytest.approx(1.0, abs=1e-14)
        assert np.all(out >= 0.0)
    # point-mass beliefs stay on the simplex
    out = regime_filter_update(two_regime, [1.0, 0.0], 0.5)
    assert out.sum() == pytest.approx(1.0, abs=1e-14)


def test_degenerate_inputs_rejected(two_regime):
    with pytest.raises(ValueError):
        regime_filter_update(two_regime, [0.7, 0.7], 0.0)
    m = HiddenRegimeModel(Lambda=[[1.0]], obs_mean=[0.0], obs_var=[1e-8])
    with pytest.raises(ValueError):
        regime_filter_update(m, [1.0], 1e6)  # likelihood underflows to zero
