"""Grids and grid-based value functions.

Value functions live on rectangular state grids with multilinear
interpolation inside the bounds and a per-grid extrapolation policy
outside ("clamp" holds the boundary value, "linear" continues the
boundary cell's slope). Discrete state components (e.g. regime
indices) are represented as an ordinary dimension whose nodes are
0..N-1; queries always land exactly on those nodes.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

EXTRAPOLATION_POLICIES = ("clamp", "linear")


@dataclass
class StateGrid:
    """Rectangular grid: one strictly increasing node array per dimension."""

    nodes: tuple
    policy: str = "linear"

    def __post_init__(self):
        self.nodes = tuple(np.asarray(n, dtype=float) for n in self.nodes)
        if self.policy not in EXTRAPOLATION_POLICIES:
            raise ValueError(f"unknown extrapolation policy {self.policy!r}")
        for n in self.nodes:
            if n.ndim != 1 or n.size < 2:
                raise ValueError("each dimension needs >= 2 nodes")
            if not np.all(np.diff(n) > 0):
                raise ValueError("grid nodes must be strictly increasing")

    @property
    def ndim(self) -> int:
        return len(self.nodes)

    @property
    def shape(self) -> tuple:
        return tuple(n.size for n in self.nodes)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def bounds(self) -> tuple:
        return tuple((n[0], n[-1]) for n in self.nodes)

    def points(self) -> np.ndarray:
        """All grid nodes as a (size, ndim) array in C order."""
        mesh = np.meshgrid(*self.nodes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)


def grid_build(bounds, counts, policy: str = "linear") -> StateGrid:
    """Uniform grid spanning `bounds` with `counts` nodes per dimension.

    `bounds` is (lo, hi) for one dimension or a sequence of such pairs;
    `counts` is an int or a matching sequence of ints >= 2.
    """
    bnds = np.atleast_2d(np.asarray(bounds, dtype=float))
    cnts = np.atleast_1d(np.asarray(counts, dtype=int))
    if cnts.size == 1 and bnds.shape[0] > 1:
        cnts = np.full(bnds.shape[0], cnts[0])
    if bnds.shape[0] != cnts.size:
        raise ValueError("bounds/counts dimension mismatch")
    nodes = []
    for (lo, hi), c in zip(bnds, cnts):
        if not (np.isfinite(lo) and np.isfinite(hi)):
            raise ValueError("grid bounds must be finite")
        if hi <= lo:
            raise ValueError("inverted or empty grid bounds")
        if c < 2:
            raise ValueError("need at least 2 nodes per dimension")
        nodes.append(np.linspace(lo, hi, int(c)))
    return StateGrid(tuple(nodes), policy=policy)


def interp_weights(grid: StateGrid, points: np.ndarray, clamp: bool = True):
    """Multilinear interpolation stencil for a batch of query points.

    Returns (flat_indices, weights) with shapes (m, 2**d): for each query
    point, the flat grid indices of its 2**d stencil corners and the
    corresponding barycentric weights. Weights sum to one per row even
    under linear extrapolation (coefficients outside [0, 1]); with
    `clamp=True` they are also non-negative.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    d = grid.ndim
    if pts.shape[1] != d:
        raise ValueError(f"points have dim {pts.shape[1]}, grid has {d}")
    m = pts.shape[0]
    lo_idx = np.empty((m, d), dtype=np.intp)
    frac = np.empty((m, d))
    for k, nd in enumerate(grid.nodes):
        j = np.searchsorted(nd, pts[:, k], side="right") - 1
        j = np.clip(j, 0, nd.size - 2)
        t = (pts[:, k] - nd[j]) / (nd[j + 1] - nd[j])
        if clamp:
            t = np.clip(t, 0.0, 1.0)
        lo_idx[:, k] = j
        frac[:, k] = t
    n_corners = 1 << d
    idx = np.empty((m, n_corners), dtype=np.intp)
    wts = np.ones((m, n_corners))
    corner_multi = np.empty((d, m), dtype=np.intp)
    for c in range(n_corners):
        for k in range(d):
            on = (c >> k) & 1
            corner_multi[k] = lo_idx[:, k] + on
            wts[:, c] *= frac[:, k] if on else (1.0 - frac[:, k])
        idx[:, c] = np.ravel_multi_index(tuple(corner_multi), grid.shape)
    return idx, wts


@dataclass
class GridFunction:
    """Function values on a StateGrid, evaluated by multilinear interpolation.

    `diverged=True` marks the output of an operator application that
    overflowed; such functions store non-finite values and refuse
    evaluation.
    """

    grid: StateGrid
    values: np.ndarray
    diverged: bool = False

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            if self.values.size == self.grid.size:
                self.values = self.values.reshape(self.grid.shape)
            else:
                raise ValueError("values shape does not match grid shape")
        if not self.diverged and not np.all(np.isfinite(self.values)):
            raise ValueError("non-finite values require the diverged flag")

    def with_values(self, values, diverged: bool = False) -> "GridFunction":
        return GridFunction(self.grid, values, diverged=diverged)

    def eval(self, points) -> np.ndarray:
        if self.diverged:
            raise ValueError("cannot evaluate a divergence-flagged function")
        idx, wts = interp_weights(self.grid, points, clamp=(self.grid.policy == "clamp"))
        return (self.values.ravel()[idx] * wts).sum(axis=1)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim <= 1:
            return float(self.eval(x.reshape(1, -1))[0])
        return self.eval(x)

    def flat(self) -> np.ndarray:
        return self.values.ravel()

    def to_csv(self, path):
        """Node coordinates plus value, one grid node per row."""
        pts = self.grid.points()
        with open(path, "w", newline="") as fh:
            fh.write(
                "# gridfunction: %s,value; policy=%s\n"
                % (",".join(f"x{k}" for k in range(self.grid.ndim)), self.grid.policy)
            )
            writer = csv.writer(fh)
            writer.writerow([f"x{k}" for k in range(self.grid.ndim)] + ["value"])
            for row, val in zip(pts, self.flat()):
                writer.writerow([repr(float(c)) for c in row] + [repr(float(val))])

    @staticmethod
    def from_csv(path) -> "GridFunction":
        with open(path) as fh:
            header = fh.readline()
            policy = "linear"
            if "policy=" in header:
                policy = header.strip().split("policy=")[-1]
            reader = csv.reader(fh)
            cols = next(reader)
            d = len(cols) - 1
            rows = [[float(c) for c in row] for row in reader]
        arr = np.asarray(rows)
        nodes = tuple(np.unique(arr[:, k]) for k in range(d))
        grid = StateGrid(nodes, policy=policy)
        values = np.full(grid.size, np.nan)
        idx = np.ravel_multi_index(
            tuple(np.searchsorted(nodes[k], arr[:, k]) for k in range(d)), grid.shape
        )
        values[idx] = arr[:, d]
        if np.any(np.isnan(values)):
            raise ValueError("csv does not cover the full grid")
        return GridFunction(grid, values)


def interp_eval(f: GridFunction, x) -> float:
    """Evaluate a grid function at one state (exact at nodes)."""
    return f(np.asarray(x, dtype=float))
