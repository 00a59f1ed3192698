"""Vietoris-Rips filtrations built from a distance matrix."""

from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy.spatial.distance import pdist, squareform

from ._validation import check_distance_matrix, check_points
from .exceptions import DimensionTooLarge

__all__ = ["Filtration", "distance_matrix", "vr_filtration", "dump_filtration"]


def distance_matrix(cloud) -> np.ndarray:
    """Euclidean distance matrix of a point cloud (array or PointCloud)."""
    pts = check_points(getattr(cloud, "points", cloud), "cloud")
    if pts.shape[0] == 1:
        return np.zeros((1, 1))
    return squareform(pdist(pts))


@dataclass(frozen=True, eq=False)
class Filtration:
    """Simplices in filtration order.

    ``simplices[i]`` is a sorted vertex tuple, ``values[i]`` its appearance
    value; order is by (value, dimension, vertex tuple).
    """

    simplices: tuple
    values: np.ndarray
    max_dim: int
    n_vertices: int

    def __len__(self):
        return len(self.simplices)

    @property
    def dims(self) -> np.ndarray:
        return np.fromiter((len(s) - 1 for s in self.simplices), dtype=int, count=len(self.simplices))

    def index(self):
        """Map vertex tuple -> position in filtration order."""
        return {s: i for i, s in enumerate(self.simplices)}

    def count(self, dim):
        return int(np.sum(self.dims == dim))


def vr_filtration(dm, max_dim: int) -> Filtration:
    """Full Vietoris-Rips filtration up to simplices of dimension ``max_dim``.

    A vertex appears at 0, an edge at its length and a higher simplex at
    the longest of its edges.
    """
    dm = check_distance_matrix(dm)
    n = dm.shape[0]
    if max_dim < 0:
        raise ValueError("max_dim must be nonnegative")
    if max_dim >= n:
        raise DimensionTooLarge(f"max_dim={max_dim} needs more than {n} points")

    entries = [(0.0, 0, (v,)) for v in range(n)]
    for k in range(1, max_dim + 1):
        for s in combinations(range(n), k + 1):
            value = max(dm[a, b] for a, b in combinations(s, 2))
            entries.append((float(value), k, s))
    entries.sort()
    return Filtration(
        simplices=tuple(e[2] for e in entries),
        values=np.array([e[0] for e in entries]),
        max_dim=max_dim,
        n_vertices=n,
    )


def dump_filtration(f: Filtration) -> str:
    """Debug listing, one ``value dim v0 v1 ...`` line per simplex."""
    lines = []
    for s, v in zip(f.simplices, f.values):
        lines.append(" ".join([repr(float(v)), str(len(s) - 1), *map(str, s)]))
    return "\n".join(lines) + "\n"
