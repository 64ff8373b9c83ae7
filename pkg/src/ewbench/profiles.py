"""Profile functions f, g on [0, L] sampled on a Chebyshev–Gauss–Lobatto grid."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .bundle import BoundaryConditionSet

DEFAULT_COUNT = 64
JET_COLUMNS = ("t", "f", "fp", "fpp", "g", "gp", "gpp")


class BadCount(ValueError):
    pass


class NonPositiveProfile(ValueError):
    pass


def cheb_matrix(N: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes x_j = cos(pi j / N) and the differentiation matrix on [-1, 1]."""
    j = np.arange(N + 1)
    x = np.cos(np.pi * j / N)
    c = np.ones(N + 1)
    c[0] = c[-1] = 2.0
    c *= (-1.0) ** j
    X = np.tile(x, (N + 1, 1)).T
    dX = X - X.T
    D = np.outer(c, 1.0 / c) / (dX + np.eye(N + 1))
    # negative-sum trick for the diagonal keeps D @ 1 = 0 to round-off
    D -= np.diag(D.sum(axis=1))
    return x, D


@dataclass(frozen=True, eq=False)
class Grid:
    L: float
    nodes: np.ndarray
    diff1: np.ndarray
    diff2: np.ndarray

    @property
    def count(self) -> int:
        return self.nodes.size

    def interior(self) -> slice:
        return slice(1, self.count - 1)

    def bary_weights(self) -> np.ndarray:
        w = (-1.0) ** np.arange(self.count)
        w[0] *= 0.5
        w[-1] *= 0.5
        return w

    def interpolate(self, values: np.ndarray, t) -> np.ndarray:
        """Barycentric interpolation of nodal ``values`` at points ``t``."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        w = self.bary_weights()
        diff = t[:, None] - self.nodes[None, :]
        exact = diff == 0.0
        diff[exact] = 1.0
        ratio = w[None, :] / diff
        out = (ratio @ values) / ratio.sum(axis=1)
        hit_rows, hit_cols = np.nonzero(exact)
        out[hit_rows] = values[hit_cols]
        return out


def make_grid(L: float, count: int = DEFAULT_COUNT) -> Grid:
    if count < 8:
        raise BadCount(f"need at least 8 nodes, got {count}")
    if not (L > 0):
        raise ValueError(f"L must be positive, got {L}")
    N = count - 1
    x, D = cheb_matrix(N)
    nodes = 0.5 * L * (1.0 - x)
    nodes[0], nodes[-1] = 0.0, float(L)
    D1 = -(2.0 / L) * D
    D2 = D1 @ D1
    for M in (D1, D2):
        M.setflags(write=False)
    nodes.setflags(write=False)
    return Grid(L=float(L), nodes=nodes, diff1=D1, diff2=D2)


@dataclass(frozen=True, eq=False)
class ProfileJet:
    grid: Grid
    f: np.ndarray
    fp: np.ndarray
    fpp: np.ndarray
    g: np.ndarray
    gp: np.ndarray
    gpp: np.ndarray

    def __post_init__(self):
        inner = self.grid.interior()
        if np.any(~(self.f[inner] > 0)):
            raise NonPositiveProfile("f must be positive on interior nodes")
        if np.any(~(self.g[inner] > 0)):
            raise NonPositiveProfile("g must be positive on interior nodes")
        for name in ("f", "fp", "fpp", "g", "gp", "gpp"):
            arr = getattr(self, name)
            if arr.shape != self.grid.nodes.shape:
                raise ValueError(f"{name} has shape {arr.shape}, expected {self.grid.nodes.shape}")
            arr.setflags(write=False)

    @property
    def t(self) -> np.ndarray:
        return self.grid.nodes

    @property
    def L(self) -> float:
        return self.grid.L

    def at(self, i: int) -> tuple[float, float, float, float, float, float]:
        return (self.f[i], self.fp[i], self.fpp[i], self.g[i], self.gp[i], self.gpp[i])

    def callables(self) -> tuple[Callable, Callable]:
        """Spectral interpolants of f and g (used to feed the curvature oracle)."""
        grid, f, g = self.grid, np.array(self.f), np.array(self.g)

        def f_fn(t):
            return float(grid.interpolate(f, t)[0]) if np.ndim(t) == 0 else grid.interpolate(f, t)

        def g_fn(t):
            return float(grid.interpolate(g, t)[0]) if np.ndim(t) == 0 else grid.interpolate(g, t)

        return f_fn, g_fn

    def derivative_consistency(self) -> dict[str, float]:
        """Max deviation of the stored derivative columns from grid differentiation.

        Scaled by the column magnitude so the number is comparable across profiles.
        """
        D1 = self.grid.diff1
        out = {}
        for name, base, deriv in (("fp", self.f, self.fp), ("fpp", self.fp, self.fpp),
                                  ("gp", self.g, self.gp), ("gpp", self.gp, self.gpp)):
            scale = max(1.0, float(np.max(np.abs(deriv))))
            out[name] = float(np.max(np.abs(D1 @ base - deriv)) / scale)
        return out

    # --- serialization ---

    def to_rows(self) -> list[tuple[float, ...]]:
        return list(zip(self.t, self.f, self.fp, self.fpp, self.g, self.gp, self.gpp))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(JET_COLUMNS)
        for row in self.to_rows():
            writer.writerow([repr(float(v)) for v in row])
        return buf.getvalue()

    def to_dict(self) -> dict:
        d = {"L": self.L, "count": self.grid.count}
        for name in JET_COLUMNS:
            d[name] = [float(v) for v in getattr(self, name)]
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def jet_from_values(grid: Grid, f, fp, fpp, g, gp, gpp) -> ProfileJet:
    arrs = [np.array(v, dtype=float) for v in (f, fp, fpp, g, gp, gpp)]
    return ProfileJet(grid, *arrs)


def jet_from_csv(text: str) -> ProfileJet:
    rows = list(csv.reader(io.StringIO(text)))
    header, body = rows[0], rows[1:]
    if tuple(h.strip() for h in header) != JET_COLUMNS:
        raise ValueError(f"unexpected profile columns {header}")
    data = np.array([[float(v) for v in row] for row in body if row])
    t = data[:, 0]
    grid = make_grid(float(t[-1]), len(t))
    if np.max(np.abs(grid.nodes - t)) > 1e-12 * max(1.0, grid.L):
        raise ValueError("profile nodes are not a Chebyshev–Gauss–Lobatto grid on [0, L]")
    return jet_from_values(grid, *data[:, 1:].T)


def jet_from_dict(d: dict) -> ProfileJet:
    grid = make_grid(float(d["L"]), int(d["count"]))
    return jet_from_values(grid, *(d[name] for name in JET_COLUMNS[1:]))


ZERO_TOL = 1e-13


def _bary_at(x: np.ndarray, y: np.ndarray, w: np.ndarray, t: float) -> float:
    r = w / (t - x)
    return float((r @ y) / r.sum())


def differentiate(grid: Grid, values) -> tuple[np.ndarray, np.ndarray]:
    """First and second derivatives of nodal ``values``.

    An endpoint where the samples vanish (odd parity) is factored out first:
    v = w q with w = t, L - t or t (L - t), and q is differentiated instead.
    For a polynomial this is the same derivative as ``diff1 @ v``; near the
    zero it keeps v''/v accurate, which plain differentiation does not.
    """
    v = np.asarray(values, dtype=float)
    t, L, D1 = np.asarray(grid.nodes), grid.L, grid.diff1
    scale = float(np.max(np.abs(v))) if v.size else 0.0
    left = scale > 0 and abs(v[0]) <= ZERO_TOL * scale
    right = scale > 0 and abs(v[-1]) <= ZERO_TOL * scale
    if not (left or right):
        d1 = D1 @ v
        return d1, D1 @ d1
    if left and right:
        w, wp, wpp = t * (L - t), L - 2.0 * t, np.full_like(t, -2.0)
    elif left:
        w, wp, wpp = t.copy(), np.ones_like(t), np.zeros_like(t)
    else:
        w, wp, wpp = L - t, -np.ones_like(t), np.zeros_like(t)
    keep = np.ones(t.size, dtype=bool)
    keep[0], keep[-1] = not left, not right
    # barycentric weights of the reduced node set
    bw = grid.bary_weights()
    if left:
        bw = bw * (t - t[0])
    if right:
        bw = bw * (t - t[-1])
    q = np.empty_like(v)
    q[keep] = v[keep] / w[keep]
    for k, dropped in ((0, left), (-1, right)):
        if dropped:
            q[k] = _bary_at(t[keep], q[keep], bw[keep], t[k])
    qp = D1 @ q
    qpp = D1 @ qp
    return wp * q + w * qp, wpp * q + 2.0 * wp * qp + w * qpp


def sample_profile(grid: Grid, f_callable: Callable, g_callable: Callable) -> ProfileJet:
    """Sample f, g at the nodes; derivatives by spectral differentiation with parity factoring."""
    t = grid.nodes
    f = np.array([float(f_callable(x)) for x in t])
    g = np.array([float(g_callable(x)) for x in t])
    inner = grid.interior()
    if np.any(f[inner] <= 0) or np.any(g[inner] <= 0):
        raise NonPositiveProfile("f and g must be positive at interior nodes")
    fp, fpp = differentiate(grid, f)
    gp, gpp = differentiate(grid, g)
    return ProfileJet(grid, f, fp, fpp, g, gp, gpp)


def parity_residual(jet: ProfileJet, bcs: BoundaryConditionSet) -> np.ndarray:
    """(achieved - target) for every endpoint condition, in ``bcs`` order."""
    out = []
    for bc in bcs:
        idx = 0 if bc.endpoint == "0" else -1
        out.append(getattr(jet, bc.quantity)[idx] - bc.target)
    return np.array(out)
