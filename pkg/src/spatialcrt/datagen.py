"""Synthetic trial generation: randomization, covariates, latent fields, outcomes.

The outcome for individual j of cluster i is

    y_ij = theta z_i + gamma x_ij + delta z_i x_ij + u_i + w(s_ij) + eps_ij

with u iid N(0, sigma_b2), w a zero-mean Gaussian random field with
covariance tau2 * H(phi) over all individual locations, and eps iid
N(0, sigma_w2). Everything is driven by a single numpy Generator so a
(config, seed) pair reproduces a trial bit for bit.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .design import Randomization, ScenarioConfig
from .gaussian import NotPositiveDefiniteError, chol_with_jitter
from .geometry import ClusterRegions, corr_matrix, grid_layout, sample_locations


class GenerationError(RuntimeError):
    """Trial generation failed (covariance factorization after jitter retry)."""


@dataclass(frozen=True)
class LatentComponents:
    u: np.ndarray = field(repr=False)    # (I,) cluster effects
    w: np.ndarray = field(repr=False)    # (N,) spatial effects
    eps: np.ndarray = field(repr=False)  # (N,) individual noise


@dataclass(frozen=True)
class TrialData:
    """One generated trial, cluster-major over individuals."""

    locations: np.ndarray = field(repr=False)   # (N, 2)
    cluster_of: np.ndarray = field(repr=False)  # (N,) cluster index per row
    z_cluster: np.ndarray = field(repr=False)   # (I,) 0/1 treatment per cluster
    x: np.ndarray = field(repr=False)           # (N, K) covariates
    y: np.ndarray = field(repr=False)           # (N,) outcomes
    latent: LatentComponents | None = None

    @property
    def n(self) -> int:
        return self.y.size

    @property
    def n_clusters(self) -> int:
        return self.z_cluster.size

    @property
    def cluster_size(self) -> int:
        return self.n // self.n_clusters

    @property
    def z_individual(self) -> np.ndarray:
        return self.z_cluster[self.cluster_of]

    def to_csv(self, include_latent: bool = False) -> str:
        """Flat table with columns id, cluster, sx, sy, z, x..., y (+ u, w, eps)."""
        k = self.x.shape[1]
        x_cols = ["x"] if k == 1 else [f"x{j + 1}" for j in range(k)]
        header = ["id", "cluster", "sx", "sy", "z", *x_cols, "y"]
        if include_latent:
            if self.latent is None:
                raise ValueError("trial was generated without latent storage")
            header += ["u", "w", "eps"]
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        z = self.z_individual
        for i in range(self.n):
            row = [i, int(self.cluster_of[i]),
                   repr(float(self.locations[i, 0])), repr(float(self.locations[i, 1])),
                   int(z[i]), *[repr(float(v)) for v in self.x[i]],
                   repr(float(self.y[i]))]
            if include_latent:
                row += [repr(float(self.latent.u[self.cluster_of[i]])),
                        repr(float(self.latent.w[i])), repr(float(self.latent.eps[i]))]
            writer.writerow(row)
        return buf.getvalue()


def randomize_clusters(n_clusters: int, scheme: Randomization,
                       regions: ClusterRegions, rng: np.random.Generator) -> np.ndarray:
    """0/1 treatment indicators for the clusters, exactly half treated.

    Simple 1:1 draws a uniformly random half; checkerboard treats the even
    (row + col) parity cells so rook-adjacent clusters always differ.
    """
    if n_clusters % 2 != 0:
        raise ValueError(f"need an even cluster count for 1:1 allocation, got {n_clusters}")
    z = np.zeros(n_clusters, dtype=int)
    if scheme == Randomization.SIMPLE_ONE_TO_ONE:
        treated = rng.permutation(n_clusters)[: n_clusters // 2]
        z[treated] = 1
    elif scheme == Randomization.CHECKERBOARD:
        rows = np.array([regions.grid_index(i)[0] for i in range(n_clusters)])
        cols = np.array([regions.grid_index(i)[1] for i in range(n_clusters)])
        z = ((rows + cols) % 2 == 0).astype(int)
        if int(z.sum()) * 2 != n_clusters:
            raise ValueError("checkerboard parity classes are unbalanced on this grid")
    else:
        raise ValueError(f"unknown randomization scheme {scheme!r}")
    return z


def generate_trial(cfg: ScenarioConfig, replicate_seed,
                   include_latent: bool = False) -> TrialData:
    """Generate one trial under a scenario; deterministic given the seed.

    Draw order is fixed (locations, assignment, covariates, cluster effects,
    field normals, noise) so that trials with the same seed share randomness
    regardless of variance settings.
    """
    rng = np.random.default_rng(replicate_seed)
    rows, cols, cell = cfg.grid
    regions = grid_layout(rows, cols, cell)
    vc = cfg.variance_components()
    n_clusters = regions.n_clusters
    n = n_clusters * cfg.m

    locations = sample_locations(regions, cfg.m, rng)
    cluster_of = np.repeat(np.arange(n_clusters), cfg.m)
    z_cluster = randomize_clusters(n_clusters, cfg.randomization, regions, rng)
    x = rng.standard_normal((n, 1))
    u = rng.standard_normal(n_clusters) * np.sqrt(vc.sigma_b2)
    field_normals = rng.standard_normal(n)
    if vc.tau2 > 0:
        H = corr_matrix(locations, cfg.kernel)
        try:
            chol = chol_with_jitter(vc.tau2 * H)
        except NotPositiveDefiniteError as exc:
            raise GenerationError(
                f"spatial covariance for scenario {cfg.label!r} is not positive "
                f"definite after jitter (pivot {exc.pivot_index})") from exc
        w = chol.lower @ field_normals
    else:
        w = np.zeros(n)
    eps = rng.standard_normal(n) * np.sqrt(vc.sigma_w2)

    z_ind = z_cluster[cluster_of].astype(float)
    xb = cfg.gamma * x[:, 0] + cfg.delta * z_ind * x[:, 0]
    y = cfg.theta * z_ind + xb + u[cluster_of] + w + eps
    latent = LatentComponents(u=u, w=w, eps=eps) if include_latent else None
    return TrialData(locations=locations, cluster_of=cluster_of,
                     z_cluster=z_cluster, x=x, y=y, latent=latent)


def aggregate_clusters(data: TrialData) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-cluster means of y and x, with the cluster treatment vector.

    Groups by cluster label, so any row order works.
    """
    n_clusters = data.n_clusters
    counts = np.bincount(data.cluster_of, minlength=n_clusters).astype(float)
    if np.any(counts == 0):
        raise ValueError("every cluster needs at least one individual")
    ybar = np.bincount(data.cluster_of, weights=data.y, minlength=n_clusters) / counts
    xbar = np.column_stack([
        np.bincount(data.cluster_of, weights=data.x[:, j], minlength=n_clusters)
        for j in range(data.x.shape[1])
    ]) / counts[:, None]
    return ybar, xbar, data.z_cluster.copy()
