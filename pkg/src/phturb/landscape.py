"""Persistence landscapes with exact piecewise-linear arithmetic.

All layers of a landscape share one sorted breakpoint grid ``xs``; layer
``k`` is linear between consecutive grid points. The grid contains every
tent corner and every crossing ``(b_i + d_j) / 2`` of a rising and a falling
tent edge, so between grid points the order of the tents never changes and
each k-th maximum is linear. Norms and distances are then integrated
segment by segment in closed form.
"""

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from ._io import csv_text, fmt_float
from ._validation import check_positive_int
from .exceptions import InfinitePairPresent, TooShort

__all__ = [
    "PersistenceLandscape",
    "resolve_essential",
    "landscape_from_diagram",
    "lp_norm",
    "landscape_distance",
    "c1_series",
    "landscape_to_csv",
    "LandscapeTransformer",
]


@dataclass(frozen=True, eq=False)
class PersistenceLandscape:
    """Layers ``values[k]`` sampled at shared breakpoints ``xs``.

    Zero outside ``[xs[0], xs[-1]]``. The empty landscape has no layers.
    """

    xs: np.ndarray
    values: np.ndarray

    @classmethod
    def empty(cls):
        return cls(np.empty(0), np.empty((0, 0)))

    @property
    def n_layers(self) -> int:
        return self.values.shape[0]

    def __call__(self, x, k=0):
        """Evaluate layer ``k`` (0-based) at ``x``."""
        if k >= self.n_layers:
            return np.zeros_like(np.asarray(x, dtype=float))
        return np.interp(x, self.xs, self.values[k], left=0.0, right=0.0)

    def layer(self, k):
        """Critical points (x, y) of layer ``k`` with collinear points removed."""
        xs, ys = self.xs, self.values[k]
        keep = np.ones(len(xs), dtype=bool)
        if len(xs) > 2:
            keep[1:-1] = ~_collinear(xs, ys[None, :])
        nz = np.flatnonzero(ys > 0)
        if nz.size:
            lo, hi = max(nz[0] - 1, 0), min(nz[-1] + 1, len(xs) - 1)
            keep[:lo] = False
            keep[hi + 1:] = False
        return xs[keep], ys[keep]

    def layers(self):
        return [self.layer(k) for k in range(self.n_layers)]


def _collinear(xs, vals):
    """For interior grid points: True where every row is linear across it."""
    h0 = xs[1:-1] - xs[:-2]
    h1 = xs[2:] - xs[1:-1]
    y0, y1, y2 = vals[:, :-2], vals[:, 1:-1], vals[:, 2:]
    # y1 against the chord from y0 to y2, cross-multiplied to avoid division
    lhs = (y1 - y0) * (h0 + h1)
    rhs = (y2 - y0) * h0
    scale = np.maximum(np.abs(vals).max(initial=0.0), 1.0) * (xs[-1] - xs[0] + 1.0)
    return np.all(np.abs(lhs - rhs) <= 1e-12 * scale, axis=0)


def resolve_essential(diagram, policy="drop-essential", cap=None):
    """Finite copy of ``diagram`` according to ``policy``.

    ``"drop-essential"`` removes infinite pairs, ``"cap"`` replaces their
    death by ``cap`` and ``"reject"`` raises :class:`InfinitePairPresent`.
    """
    if diagram.n_essential == 0:
        return diagram
    if policy == "drop-essential":
        return diagram.finite()
    if policy == "reject":
        raise InfinitePairPresent(f"H{diagram.dim} diagram has {diagram.n_essential} infinite pairs")
    if policy == "cap":
        if cap is None:
            raise ValueError("the cap policy needs a cap value")
        from .persistence import PersistenceDiagram

        pts = diagram.points.copy()
        inf = np.isinf(pts[:, 1])
        pts[inf, 1] = np.maximum(pts[inf, 0], cap)
        return PersistenceDiagram.from_points(diagram.dim, pts, keep_zero=False,
                                              n_zero=diagram.n_zero_persistence)
    raise ValueError(f"unknown essential-class policy {policy!r}")


def landscape_from_diagram(diagram, policy="reject", cap=None) -> PersistenceLandscape:
    """Landscape of a diagram, counting multiplicity.

    Parameters
    ----------
    diagram : PersistenceDiagram or array of shape (m, 2)
    policy : {"reject", "drop-essential", "cap"}
        Treatment of infinite deaths, see :func:`resolve_essential`.
    """
    if hasattr(diagram, "points"):
        diagram = resolve_essential(diagram, policy, cap)
        pts = diagram.points
    else:
        pts = np.asarray(diagram, dtype=float).reshape(-1, 2)
        if np.isinf(pts).any():
            raise InfinitePairPresent("diagram has infinite pairs")
    pts = pts[pts[:, 1] > pts[:, 0]]
    if pts.shape[0] == 0:
        return PersistenceLandscape.empty()

    b, d = pts[:, 0], pts[:, 1]
    xs = np.unique(np.concatenate([b, d, (b[:, None] + d[None, :]).ravel() / 2.0]))
    xs = xs[(xs >= b.min()) & (xs <= d.max())]
    # equal-length bars share crossing points that may differ by an ulp or two;
    # a zero-width segment would defeat the collinearity pass below
    tol = 1e-12 * max(1.0, float(np.abs(xs).max()))
    xs = xs[np.concatenate([[True], np.diff(xs) > tol])]
    tents = np.maximum(0.0, np.minimum(xs[:, None] - b[None, :], d[None, :] - xs[:, None]))
    vals = -np.sort(-tents, axis=1).T
    vals = vals[vals.max(axis=1) > 0]
    if len(xs) > 2:
        keep = np.ones(len(xs), dtype=bool)
        keep[1:-1] = ~_collinear(xs, vals)
        xs, vals = xs[keep], vals[:, keep]
    return PersistenceLandscape(xs, np.ascontiguousarray(vals))


def _segment_integral(y0, y1, h, p):
    """Exact integral of |f|^p over segments where f is linear from y0 to y1."""
    a, c = np.abs(y0), np.abs(y1)
    same = (y0 * y1) >= 0
    # same sign: h/(p+1) * sum_i a^i c^(p-i); sign change: h/(p+1) * (a^(p+1) + c^(p+1)) / (a + c)
    poly = sum(a**i * c ** (p - i) for i in range(p + 1))
    denom = np.where(same, 1.0, a + c)
    cross = (a ** (p + 1) + c ** (p + 1)) / denom
    return h / (p + 1) * np.where(same, poly, cross)


def _check_p(p):
    return check_positive_int(p, "p")


def lp_norm(landscape: PersistenceLandscape, p: int = 2) -> float:
    """``(sum_k ||lambda_k||_p^p)^(1/p)`` by exact integration."""
    p = _check_p(p)
    if landscape.n_layers == 0:
        return 0.0
    h = np.diff(landscape.xs)
    v = landscape.values
    total = _segment_integral(v[:, :-1], v[:, 1:], h[None, :], p).sum()
    return float(total ** (1.0 / p))


def _resample(land, grid, n_layers):
    out = np.zeros((n_layers, len(grid)))
    if land.n_layers == 0:
        return out
    xs = land.xs
    inside = (grid >= xs[0]) & (grid <= xs[-1])
    g = grid[inside]
    j = np.clip(np.searchsorted(xs, g, side="right"), 1, len(xs) - 1)
    x0, x1 = xs[j - 1], xs[j]
    t = np.where(x1 > x0, (g - x0) / np.where(x1 > x0, x1 - x0, 1.0), 0.0)
    v = land.values
    out[: land.n_layers, inside] = v[:, j - 1] * (1.0 - t) + v[:, j] * t
    return out


def landscape_distance(l1: PersistenceLandscape, l2: PersistenceLandscape, p: int = 2) -> float:
    """``||l1 - l2||_p`` with missing layers treated as zero."""
    p = _check_p(p)
    if l1.n_layers == 0:
        return lp_norm(l2, p)
    if l2.n_layers == 0:
        return lp_norm(l1, p)
    grid = np.union1d(l1.xs, l2.xs)
    k = max(l1.n_layers, l2.n_layers)
    diff = _resample(l1, grid, k) - _resample(l2, grid, k)
    h = np.diff(grid)
    total = _segment_integral(diff[:, :-1], diff[:, 1:], h[None, :], p).sum()
    return float(total ** (1.0 / p))


def c1_series(norms) -> np.ndarray:
    """``n[t] + |n[t] - n[t-1]|`` for t >= 1."""
    n = np.asarray(norms, dtype=float)
    if n.ndim != 1 or n.shape[0] < 2:
        raise TooShort("the C1 quantity needs at least two norms")
    return n[1:] + np.abs(np.diff(n))


def landscape_to_csv(landscape: PersistenceLandscape) -> str:
    """CSV ``layer,x,y`` of critical points; layers numbered from 1."""
    rows = []
    for k, (xs, ys) in enumerate(landscape.layers(), start=1):
        rows.extend((k, fmt_float(x), fmt_float(y)) for x, y in zip(xs, ys))
    return csv_text(["layer", "x", "y"], rows)


class LandscapeTransformer(TransformerMixin, BaseEstimator):
    """Diagrams -> landscapes, or -> L^p norms when ``norm`` is set.

    Accepts the output of :class:`~phturb.persistence.VietorisRipsPersistence`
    (dicts keyed by dimension) or bare diagrams.
    """

    def __init__(self, homology_dimension=1, policy="drop-essential", norm=None):
        self.homology_dimension = homology_dimension
        self.policy = policy
        self.norm = norm

    def fit(self, X, y=None):
        if self.norm is not None:
            _check_p(self.norm)
        return self

    def transform(self, X):
        out = []
        for item in X:
            dgm = item[self.homology_dimension] if isinstance(item, dict) else item
            land = landscape_from_diagram(dgm, self.policy)
            out.append(land if self.norm is None else lp_norm(land, self.norm))
        return np.array(out) if self.norm is not None else out
