import numpy as np
import pytest

from recval import GridFunction, StateGrid, grid_build, interp_eval


def test_uniform_nodes():
    g = grid_build((-1.0, 1.0), 3)
    assert np.allclose(g.nodes[0], [-1.0, 0.0, 1.0])
    g2 = grid_build((0.0, 4.0), 5)
    assert np.allclose(g2.nodes[0], [0.0, 1.0, 2.0, 3.0, 4.0])


def test_bad_grids_rejected():
    with pytest.raises(ValueError):
        grid_build((-1.0, 1.0), 1)
    with pytest.raises(ValueError):
        grid_build((1.0, -1.0), 5)
    with pytest.raises(ValueError):
        grid_build((0.0, np.inf), 5)
    with pytest.raises(ValueError):
        StateGrid((np.array([0.0, 0.0, 1.0]),))


def test_exact_at_nodes():
    g = grid_build((0.0, 1.0), 11)
    vals = np.sin(g.nodes[0])
    f = GridFunction(g, vals)
    for x, v in zip(g.nodes[0], vals):
        assert interp_eval(f, [x]) == v


def test_midpoint_linearity():
    g = grid_build((0.0, 1.0), 2)
    f = GridFunction(g, np.array([0.0, 2.0]))
    assert interp_eval(f, [0.5]) == pytest.approx(1.0)


def test_clamp_extrapolation():
    g = grid_build((0.0, 1.0), 5, policy="clamp")
    f = GridFunction(g, g.nodes[0] ** 2)
    assert interp_eval(f, [2.5]) == pytest.approx(1.0)
    assert interp_eval(f, [-3.0]) == pytest.approx(0.0)


def test_linear_extrapolation_exact_for_affine():
    g = grid_build((0.0, 1.0), 5, policy="linear")
    f = GridFunction(g, 2.0 * g.nodes[0] - 1.0)
    assert interp_eval(f, [3.0]) == pytest.approx(5.0)
    assert interp_eval(f, [-2.0]) == pytest.approx(-5.0)


def test_2d_interp_and_discrete_dim():
    # second dim is a regime index; queries land exactly on its nodes
    g = StateGrid((np.linspace(0, 1, 5), np.array([0.0, 1.0])))
    vals = np.outer(np.linspace(0, 1, 5), np.array([1.0, 3.0]))
    f = GridFunction(g, vals)
    assert f(np.array([0.5, 1.0])) == pytest.approx(0.5 * 3.0)
    assert f(np.array([0.25, 0.0])) == pytest.approx(0.25)


def test_divergence_flag_blocks_eval():
    g = grid_build((0.0, 1.0), 3)
    with pytest.raises(ValueError):
        GridFunction(g, np.array([0.0, np.inf, 1.0]))
    f = GridFunction(g, np.array([0.0, np.inf, 1.0]), diverged=True)
    with pytest.raises(ValueError):
        f(np.array([0.5]))


def test_csv_round_trip(tmp_path):
    g = grid_build((-1.0, 1.0), 7)
    f = GridFunction(g, np.cos(g.nodes[0]))
    path = tmp_path / "f.csv"
    f.to_csv(path)
    back = GridFunction.from_csv(path)
    assert np.allclose(back.values, f.values)
    assert np.allclose(back.grid.nodes[0], g.nodes[0])
