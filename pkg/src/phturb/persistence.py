"""Persistence diagrams over the two-element field.

Two routes are provided:

* :func:`compute_persistence` reduces the boundary matrix of an explicit
  :class:`~phturb.filtration.Filtration` (standard column reduction with
  clearing, optional union-find for H0). Works for any homology dimension.
* :func:`rips_persistence` goes straight from a distance matrix to H0/H1
  diagrams: Kruskal union-find for H0 and a cohomology reduction of edge
  coboundaries for H1, skipping the spanning-tree edges. It never
  materialises the filtration and is what the index pipelines use.

Both produce identical diagrams; the test-suite checks this along with a
brute-force rank oracle.
"""

from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations, permutations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from ._io import csv_text, fmt_float
from .exceptions import InsufficientExpansion
from .filtration import Filtration, distance_matrix

__all__ = [
    "PersistenceDiagram",
    "boundary_matrix",
    "compute_persistence",
    "betti_at",
    "rips_persistence",
    "diagrams_to_csv",
    "read_diagrams_csv",
    "VietorisRipsPersistence",
]


@dataclass(frozen=True, eq=False)
class PersistenceDiagram:
    """Multiset of (birth, death) pairs in one homology dimension.

    ``pairs`` holds the distinct points sorted by (birth, death) and
    ``multiplicity`` their counts. ``n_zero_persistence`` counts pairs with
    birth == death that the computation produced, whether or not they were
    kept in ``pairs``.
    """

    dim: int
    pairs: np.ndarray = field(default_factory=lambda: np.empty((0, 2)))
    multiplicity: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=int))
    n_zero_persistence: int = 0

    def __post_init__(self):
        pairs = np.asarray(self.pairs, dtype=float).reshape(-1, 2)
        mult = np.asarray(self.multiplicity, dtype=int).reshape(-1)
        if mult.shape[0] != pairs.shape[0]:
            raise ValueError("one multiplicity per pair is required")
        if np.any(mult < 1):
            raise ValueError("multiplicities must be positive")
        if np.any(pairs[:, 0] > pairs[:, 1]) or np.any(pairs[:, 0] < 0):
            raise ValueError("pairs need 0 <= birth <= death")
        object.__setattr__(self, "pairs", pairs)
        object.__setattr__(self, "multiplicity", mult)

    @classmethod
    def from_points(cls, dim, points, keep_zero=True, n_zero=0):
        """Build from an (m, 2) array of possibly repeated (birth, death) rows."""
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        zero = pts[:, 0] == pts[:, 1]
        n_zero = int(n_zero + zero.sum())
        if not keep_zero:
            pts = pts[~zero]
        if pts.shape[0] == 0:
            return cls(dim, n_zero_persistence=n_zero)
        uniq, counts = np.unique(pts, axis=0, return_counts=True)
        return cls(dim, uniq, counts, n_zero)

    def __len__(self):
        return int(self.multiplicity.sum())

    def __repr__(self):
        return f"PersistenceDiagram(dim={self.dim}, n={len(self)}, points={self.points.tolist()})"

    @property
    def points(self) -> np.ndarray:
        """All pairs, repeated by multiplicity."""
        return np.repeat(self.pairs, self.multiplicity, axis=0)

    @property
    def births(self):
        return self.points[:, 0]

    @property
    def deaths(self):
        return self.points[:, 1]

    @property
    def persistence(self):
        p = self.points
        return p[:, 1] - p[:, 0]

    @property
    def n_essential(self) -> int:
        return int(self.multiplicity[np.isinf(self.pairs[:, 1])].sum())

    def finite(self) -> "PersistenceDiagram":
        keep = np.isfinite(self.pairs[:, 1])
        return PersistenceDiagram(self.dim, self.pairs[keep], self.multiplicity[keep],
                                  self.n_zero_persistence)

    def betti(self, eps: float) -> int:
        alive = (self.pairs[:, 0] <= eps) & (eps < self.pairs[:, 1])
        return int(self.multiplicity[alive].sum())

    def scaled(self, c: float) -> "PersistenceDiagram":
        return PersistenceDiagram(self.dim, self.pairs * c, self.multiplicity, self.n_zero_persistence)

    def same_as(self, other: "PersistenceDiagram") -> bool:
        return (
            self.dim == other.dim
            and np.array_equal(self.pairs, other.pairs)
            and np.array_equal(self.multiplicity, other.multiplicity)
        )


def boundary_matrix(f: Filtration) -> list:
    """Column ``j``: sorted filtration indices of the facets of simplex ``j``."""
    index = f.index()
    cols = []
    for s in f.simplices:
        if len(s) == 1:
            cols.append([])
        else:
            cols.append(sorted(index[s[:i] + s[i + 1:]] for i in range(len(s))))
    return cols


def _check_expansion(f: Filtration, dims):
    for k in dims:
        if k < 0:
            raise ValueError("homology dimensions must be nonnegative")
        needed = min(k + 1, f.n_vertices - 1)
        if needed > f.max_dim:
            raise InsufficientExpansion(
                f"H{k} needs simplices of dimension {k + 1}; filtration stops at {f.max_dim}"
            )


def _union_find_h0(f: Filtration):
    parent = list(range(f.n_vertices))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    deaths = []
    for s, v in zip(f.simplices, f.values):
        if len(s) != 2:
            continue
        ra, rb = find(s[0]), find(s[1])
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
            deaths.append(float(v))
    roots = sum(1 for a in range(f.n_vertices) if find(a) == a)
    return deaths, roots


def compute_persistence(f: Filtration, dims=(0, 1), keep_zero=False, h0="reduction"):
    """Persistence diagrams of ``f`` for each dimension in ``dims``.

    Parameters
    ----------
    f : Filtration
    dims : iterable of int
    keep_zero : bool
        Keep pairs with birth == death (always counted in
        ``n_zero_persistence``).
    h0 : {"reduction", "union-find"}
        How to pair vertices with edges.

    Returns
    -------
    dict mapping dimension to :class:`PersistenceDiagram`.
    """
    dims = sorted(set(int(k) for k in dims))
    _check_expansion(f, dims)
    if h0 not in ("reduction", "union-find"):
        raise ValueError(f"unknown h0 method {h0!r}")

    fdims = f.dims
    reduce_dims = [k for k in dims if not (k == 0 and h0 == "union-find")]
    cols = boundary_matrix(f)
    pivot_owner = {}  # lowest row -> column whose reduced form ends there

    if reduce_dims:
        top = min(max(reduce_dims) + 1, f.max_dim)
        bottom = max(1, min(reduce_dims))
        cleared = set()
        for q in range(top, bottom - 1, -1):
            for j in np.flatnonzero(fdims == q).tolist():
                if j in cleared:
                    cols[j] = ()
                    continue
                col = set(cols[j])
                while col:
                    low = max(col)
                    owner = pivot_owner.get(low)
                    if owner is None:
                        break
                    col ^= cols[owner]
                cols[j] = col
                if col:
                    pivot_owner[low] = j
                    cleared.add(low)

    out = {}
    for k in dims:
        if k == 0 and h0 == "union-find":
            deaths, roots = _union_find_h0(f)
            pts = [(0.0, d) for d in deaths] + [(0.0, np.inf)] * roots
        else:
            pts = [(f.values[low], f.values[j]) for low, j in pivot_owner.items() if fdims[low] == k]
            for i in np.flatnonzero(fdims == k).tolist():
                positive = k == 0 or not cols[i]
                if positive and i not in pivot_owner:
                    pts.append((f.values[i], np.inf))
        out[k] = PersistenceDiagram.from_points(k, pts, keep_zero=keep_zero)
    return out


def betti_at(f: Filtration, eps: float, k: int) -> int:
    """Number of k-dimensional classes alive at scale ``eps``."""
    return compute_persistence(f, [k], keep_zero=False)[k].betti(eps)


# -- fast Vietoris-Rips route -------------------------------------------------

@lru_cache(maxsize=8)
def _triangles(n):
    if n < 3:
        return np.empty((0, 3), dtype=np.intp)
    return np.array(list(combinations(range(n), 3)), dtype=np.intp)


def _rips_h0(dm, threshold):
    n = dm.shape[0]
    iu, ju = np.triu_indices(n, k=1)
    vals = dm[iu, ju]
    keep = vals <= threshold
    iu, ju, vals = iu[keep], ju[keep], vals[keep]
    order = np.lexsort((ju, iu, vals))
    iu, ju, vals = iu[order], ju[order], vals[order]

    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    deaths = []
    tree = np.zeros(len(vals), dtype=bool)
    components = n
    for e, (a, b) in enumerate(zip(iu.tolist(), ju.tolist())):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
            tree[e] = True
            deaths.append(vals[e])
            components -= 1
            if components == 1:
                break
    return (iu, ju, vals, tree), deaths, components


def _rips_h1(dm, edges, threshold, keep_zero):
    iu, ju, vals, tree = edges
    n = dm.shape[0]
    tris = _triangles(n)
    if tris.shape[0] == 0:
        return [], 0
    a, b, c = tris[:, 0], tris[:, 1], tris[:, 2]
    diam = np.maximum(np.maximum(dm[a, b], dm[a, c]), dm[b, c])
    order = np.lexsort((c, b, a, diam))
    rank = np.empty(len(order), dtype=np.int32)
    rank[order] = np.arange(len(order), dtype=np.int32)
    rank[diam > threshold] = -1
    tri_val = diam[order]

    lookup = np.full((n, n, n), -1, dtype=np.int32)
    for p in permutations((a, b, c)):
        lookup[p[0], p[1], p[2]] = rank

    # Edges are processed from last to first; a column's pivot is its
    # earliest cofacet. Most pivots are unclaimed on first sight, so sets are
    # only built for columns that actually need reducing.
    sel = np.flatnonzero(~tree)[::-1]
    cob = lookup[iu[sel], ju[sel]]
    big = np.iinfo(np.int32).max
    first = np.where(cob >= 0, cob, big).min(axis=1) if len(sel) else np.empty(0, np.int32)

    def column(r):
        row = cob[r]
        return set(row[row >= 0].tolist())

    pts, n_zero = [], 0
    reduced = {}
    for r in range(len(sel)):
        pivot = int(first[r])
        birth = vals[sel[r]]
        if pivot == big:
            pts.append((birth, np.inf))
            continue
        other = reduced.get(pivot)
        if other is None:
            reduced[pivot] = r
        else:
            col = column(r)
            while other is not None:
                if not isinstance(other, set):
                    other = reduced[pivot] = column(other)
                col ^= other
                if not col:
                    break
                pivot = min(col)
                other = reduced.get(pivot)
            if not col:
                pts.append((birth, np.inf))
                continue
            reduced[pivot] = col
        death = tri_val[pivot]
        if death == birth:
            n_zero += 1
            if not keep_zero:
                continue
        pts.append((birth, death))
    return pts, n_zero


def rips_persistence(points_or_dm, dims=(0, 1), max_scale=None, keep_zero=False,
                     metric="euclidean"):
    """H0/H1 Vietoris-Rips diagrams without building the filtration.

    Parameters
    ----------
    points_or_dm : array-like
        Point cloud of shape (n, d), or a distance matrix if
        ``metric="precomputed"``.
    dims : iterable of {0, 1}
    max_scale : float, optional
        Largest filtration value; defaults to the cloud diameter (full
        filtration).
    """
    dims = sorted(set(int(k) for k in dims))
    if not set(dims) <= {0, 1}:
        raise ValueError("rips_persistence supports dimensions 0 and 1; "
                         "use compute_persistence for higher ones")
    if metric == "precomputed":
        dm = np.asarray(points_or_dm, dtype=float)
    elif metric == "euclidean":
        dm = distance_matrix(points_or_dm)
    else:
        raise ValueError(f"unknown metric {metric!r}")
    threshold = np.inf if max_scale is None else float(max_scale)

    edges, deaths, components = _rips_h0(dm, threshold)
    out = {}
    if 0 in dims:
        pts = [(0.0, d) for d in deaths] + [(0.0, np.inf)] * components
        out[0] = PersistenceDiagram.from_points(0, pts, keep_zero=keep_zero)
    if 1 in dims:
        pts, n_zero = _rips_h1(dm, edges, threshold, keep_zero)
        out[1] = PersistenceDiagram.from_points(1, pts, keep_zero=True, n_zero=n_zero)
    return out


# -- file formats -------------------------------------------------------------

def diagrams_to_csv(diagrams) -> str:
    """CSV ``dim,birth,death,multiplicity``; infinite deaths written ``inf``."""
    if isinstance(diagrams, dict):
        diagrams = [diagrams[k] for k in sorted(diagrams)]
    rows = []
    for dgm in diagrams:
        for (b, d), m in zip(dgm.pairs, dgm.multiplicity):
            rows.append((dgm.dim, fmt_float(b), fmt_float(d), int(m)))
    return csv_text(["dim", "birth", "death", "multiplicity"], rows)


def read_diagrams_csv(text: str) -> dict:
    lines = [ln for ln in text.strip().splitlines() if ln.strip()]
    if not lines or lines[0].replace(" ", "") != "dim,birth,death,multiplicity":
        raise ValueError("expected header dim,birth,death,multiplicity")
    acc = {}
    for ln in lines[1:]:
        k, b, d, m = ln.split(",")
        acc.setdefault(int(k), []).extend([(float(b), float(d))] * int(m))
    return {k: PersistenceDiagram.from_points(k, v) for k, v in sorted(acc.items())}


class VietorisRipsPersistence(TransformerMixin, BaseEstimator):
    """Point clouds (or distance matrices) -> per-dimension diagrams.

    ``transform`` maps a sequence of clouds to a list of
    ``{dim: PersistenceDiagram}`` dicts, one per cloud.
    """

    def __init__(self, homology_dimensions=(0, 1), max_scale=None, keep_zero=False,
                 metric="euclidean"):
        self.homology_dimensions = homology_dimensions
        self.max_scale = max_scale
        self.keep_zero = keep_zero
        self.metric = metric

    def fit(self, X, y=None):
        if not set(self.homology_dimensions) <= {0, 1}:
            raise ValueError("homology_dimensions must be a subset of {0, 1}")
        return self

    def transform(self, X):
        return [
            rips_persistence(getattr(x, "points", x), self.homology_dimensions,
                             self.max_scale, self.keep_zero, self.metric)
            for x in X
        ]
