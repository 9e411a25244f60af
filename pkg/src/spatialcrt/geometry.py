"""Cluster grid layout, point locations, and stationary correlation kernels."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gamma as gamma_fn
from scipy.special import kv


class KernelFamily(str, enum.Enum):
    EXPONENTIAL = "exponential"
    MATERN = "matern"


@dataclass(frozen=True)
class KernelSpec:
    """Isotropic correlation kernel: family plus decay/smoothness parameters.

    ``phi`` is the decay (range) parameter in distance units; ``nu`` is the
    Matern smoothness and is ignored for the exponential family.
    """

    family: KernelFamily = KernelFamily.EXPONENTIAL
    phi: float = 1.0
    nu: float = 0.5

    def __post_init__(self):
        if self.phi <= 0:
            raise ValueError(f"phi must be positive, got {self.phi}")
        if self.family == KernelFamily.MATERN and self.nu <= 0:
            raise ValueError(f"nu must be positive for the Matern kernel, got {self.nu}")

    def corr(self, d):
        if self.family == KernelFamily.EXPONENTIAL:
            return exponential_corr(d, self.phi)
        return matern_corr(d, self.phi, self.nu)

    def to_dict(self) -> dict:
        return {"family": self.family.value, "phi": self.phi, "nu": self.nu}

    @classmethod
    def from_dict(cls, d: dict) -> "KernelSpec":
        return cls(family=KernelFamily(d["family"]), phi=d["phi"], nu=d.get("nu", 0.5))


@dataclass(frozen=True)
class ClusterRegions:
    """Rectangular tiling of the study domain into rows x cols cluster cells.

    ``centers`` has one (x, y) midpoint per cluster in row-major order and
    ``bounds`` the matching (xmin, ymin, xmax, ymax) rectangles; the cells tile
    [0, cols*cell_size] x [0, rows*cell_size] without overlap.
    """

    rows: int
    cols: int
    cell_size: float
    centers: np.ndarray = field(repr=False)
    bounds: np.ndarray = field(repr=False)

    @property
    def n_clusters(self) -> int:
        return self.rows * self.cols

    def max_center_distance(self) -> float:
        diff = self.centers[:, None, :] - self.centers[None, :, :]
        return float(np.sqrt((diff ** 2).sum(axis=-1)).max())

    def grid_index(self, cluster: int) -> tuple[int, int]:
        """(row, col) of a cluster index in the row-major layout."""
        return divmod(cluster, self.cols)


def grid_layout(rows: int, cols: int, cell_size: float = 1.0) -> ClusterRegions:
    """Tile the domain into a rows x cols grid of square cluster cells.

    Cluster indices run row-major; each center sits at the midpoint of its
    cell.
    """
    if rows < 1 or cols < 1:
        raise ValueError(f"grid dimensions must be positive, got {rows}x{cols}")
    if cell_size <= 0:
        raise ValueError(f"cell_size must be positive, got {cell_size}")
    r, c = np.divmod(np.arange(rows * cols), cols)
    x0 = c * cell_size
    y0 = r * cell_size
    bounds = np.column_stack([x0, y0, x0 + cell_size, y0 + cell_size]).astype(float)
    centers = np.column_stack([x0 + cell_size / 2.0, y0 + cell_size / 2.0]).astype(float)
    return ClusterRegions(rows=rows, cols=cols, cell_size=float(cell_size),
                          centers=centers, bounds=bounds)


def sample_locations(regions: ClusterRegions, m: int, rng: np.random.Generator) -> np.ndarray:
    """Draw m locations per cluster, uniform over each cluster's cell.

    Returns an (n_clusters * m, 2) array in cluster-major order: the first m
    rows belong to cluster 0, the next m to cluster 1, and so on.
    """
    if m < 1:
        raise ValueError(f"m must be positive, got {m}")
    u = rng.uniform(size=(regions.n_clusters, m, 2))
    lo = regions.bounds[:, None, :2]
    hi = regions.bounds[:, None, 2:]
    pts = lo + u * (hi - lo)
    return pts.reshape(-1, 2)


def exponential_corr(d, phi: float):
    """exp(-d / phi) correlation at distance d."""
    if phi <= 0:
        raise ValueError(f"phi must be positive, got {phi}")
    d = np.asarray(d, dtype=float)
    if np.any(d < 0):
        raise ValueError("distances must be nonnegative")
    out = np.exp(-d / phi)
    return float(out) if out.ndim == 0 else out


def matern_corr(d, phi: float, nu: float):
    """Matern correlation (1/(2^(nu-1) Gamma(nu))) (d/phi)^nu K_nu(d/phi).

    Defined as 1 at d = 0 by continuity.
    """
    if phi <= 0:
        raise ValueError(f"phi must be positive, got {phi}")
    if nu <= 0:
        raise ValueError(f"nu must be positive, got {nu}")
    d = np.asarray(d, dtype=float)
    if np.any(d < 0):
        raise ValueError("distances must be nonnegative")
    scalar = d.ndim == 0
    d = np.atleast_1d(d)
    out = np.ones_like(d)
    pos = d > 0
    if np.any(pos):
        x = d[pos] / phi
        out[pos] = (2.0 ** (1.0 - nu) / gamma_fn(nu)) * (x ** nu) * kv(nu, x)
    # kv underflows to 0 for very large arguments, which is the correct limit
    out = np.clip(out, 0.0, 1.0)
    return float(out[0]) if scalar else out


def pairwise_distances(locations: np.ndarray) -> np.ndarray:
    """Dense Euclidean distance matrix of a set of planar points."""
    locations = np.asarray(locations, dtype=float)
    diff = locations[:, None, :] - locations[None, :, :]
    return np.sqrt((diff ** 2).sum(axis=-1))


def corr_matrix(locations: np.ndarray, kernel: KernelSpec) -> np.ndarray:
    """Correlation matrix of a point set under an isotropic kernel.

    Symmetric with unit diagonal; duplicate locations simply get entry 1.
    """
    locations = np.asarray(locations, dtype=float)
    if locations.size == 0:
        raise ValueError("locations must be nonempty")
    H = kernel.corr(pairwise_distances(locations))
    H = np.asarray(H, dtype=float)
    np.fill_diagonal(H, 1.0)
    return H


def domain_diagonal(locations: np.ndarray) -> float:
    """Diagonal length of the axis-aligned bounding box of a point set."""
    locations = np.asarray(locations, dtype=float)
    span = locations.max(axis=0) - locations.min(axis=0)
    return float(math.hypot(*span))
