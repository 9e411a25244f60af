"""CRT design arithmetic: ICC, variance partitioning, sizing, scenarios."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.stats import norm

from .geometry import KernelFamily, KernelSpec


@dataclass(frozen=True)
class VarianceComponents:
    """Within-cluster, between-cluster, and spatial marginal variances."""

    sigma_w2: float
    sigma_b2: float
    tau2: float

    def __post_init__(self):
        if self.sigma_w2 <= 0:
            raise ValueError(f"sigma_w2 must be positive, got {self.sigma_w2}")
        if self.sigma_b2 < 0 or self.tau2 < 0:
            raise ValueError("sigma_b2 and tau2 must be nonnegative")

    @property
    def total(self) -> float:
        return self.sigma_w2 + self.sigma_b2 + self.tau2


@dataclass(frozen=True)
class DesignTarget:
    """Inputs for cluster-count sizing under a two-sided quantile rule."""

    theta: float
    power: float
    alpha: float
    m: int
    icc: float

    def __post_init__(self):
        if not 0 < self.power < 1:
            raise ValueError(f"power must lie in (0,1), got {self.power}")
        if not 0 < self.alpha < 1:
            raise ValueError(f"alpha must lie in (0,1), got {self.alpha}")
        if self.m < 1:
            raise ValueError(f"cluster size m must be positive, got {self.m}")
        if not 0 <= self.icc < 1:
            raise ValueError(f"icc must lie in [0,1), got {self.icc}")
        if self.theta == 0:
            raise ValueError("theta must be nonzero for sizing")


@dataclass(frozen=True)
class ClusterRequirement:
    """Sizing result: per-arm sample size and total cluster counts."""

    n_per_arm: float
    total_raw: int   # ceil(2 * n_per_arm / m)
    total_even: int  # total_raw rounded up to an even count for 1:1 allocation


def icc_from_components(vc: VarianceComponents) -> float:
    """Intracluster correlation sigma_b2 / (sigma_b2 + tau2 + sigma_w2)."""
    total = vc.total
    if total <= 0:
        raise ValueError("variance components sum to zero")
    return vc.sigma_b2 / total


def variance_partition(icc: float, f: float, sigma_w2: float) -> VarianceComponents:
    """Split non-residual variance into cluster and spatial parts.

    ``f`` is the share of sigma_b2 + tau2 assigned to the cluster component:
    sigma_b2 = sigma_w2 / (1/icc - 1/f) and tau2 = (1 - f) sigma_b2 / f.
    Round-trips through icc_from_components.
    """
    if sigma_w2 <= 0:
        raise ValueError(f"sigma_w2 must be positive, got {sigma_w2}")
    if not 0 < f <= 1:
        raise ValueError(f"f must lie in (0,1], got {f}")
    if not 0 < icc < 1:
        raise ValueError(f"icc must lie in (0,1) for partitioning, got {icc}")
    denom = 1.0 / icc - 1.0 / f
    if denom <= 0:
        raise ValueError(
            f"need 1/icc > 1/f for a positive sigma_b2 (icc={icc}, f={f})")
    sigma_b2 = sigma_w2 / denom
    tau2 = (1.0 - f) * sigma_b2 / f
    return VarianceComponents(sigma_w2=sigma_w2, sigma_b2=sigma_b2, tau2=tau2)


def design_effect(m: int, icc: float) -> float:
    """Variance inflation 1 + (m - 1) * icc from cluster randomization."""
    if m < 1:
        raise ValueError(f"m must be positive, got {m}")
    if not 0 <= icc < 1:
        raise ValueError(f"icc must lie in [0,1), got {icc}")
    return 1.0 + (m - 1) * icc


def required_clusters(target: DesignTarget, sigma_w2: float) -> ClusterRequirement:
    """Cluster counts for a two-arm CRT with a continuous outcome.

    Per-arm sample size is 2 sigma_w2 (z_power + z_alpha/2)^2 / theta^2 times
    the design effect; the total cluster count is its ceiling over m, doubled
    for both arms, with the next even value alongside for 1:1 allocation.
    """
    if sigma_w2 <= 0:
        raise ValueError(f"sigma_w2 must be positive, got {sigma_w2}")
    z_power = norm.ppf(target.power)
    z_alpha = norm.ppf(1.0 - target.alpha / 2.0)
    deff = design_effect(target.m, target.icc)
    n_per_arm = 2.0 * sigma_w2 * (z_power + z_alpha) ** 2 / target.theta ** 2 * deff
    total_raw = math.ceil(2.0 * n_per_arm / target.m)
    total_even = total_raw + (total_raw % 2)
    return ClusterRequirement(n_per_arm=n_per_arm, total_raw=total_raw,
                              total_even=total_even)


class Randomization(str, enum.Enum):
    SIMPLE_ONE_TO_ONE = "simple_1to1"
    CHECKERBOARD = "checkerboard"


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything needed to generate one trial under a simulation scenario."""

    label: str
    icc: float
    f: float
    sigma_w2: float
    phi: float
    kernel: KernelSpec
    grid: tuple[int, int, float]  # rows, cols, cell_size
    m: int
    theta: float = 0.6
    gamma: float = 0.1
    delta: float = 0.1
    randomization: Randomization = Randomization.SIMPLE_ONE_TO_ONE
    seed: int = 0

    def __post_init__(self):
        if not isinstance(self.randomization, Randomization):
            object.__setattr__(self, "randomization", Randomization(self.randomization))
        if not isinstance(self.grid, tuple):
            rows, cols, cell = self.grid
            object.__setattr__(self, "grid", (int(rows), int(cols), float(cell)))
        rows, cols, _ = self.grid
        n_clusters = rows * cols
        if (self.randomization == Randomization.SIMPLE_ONE_TO_ONE
                and n_clusters % 2 != 0):
            raise ValueError(
                f"1:1 allocation needs an even cluster count, grid gives {n_clusters}")
        # fails early when the icc/f pair is infeasible
        self.variance_components()

    def variance_components(self) -> VarianceComponents:
        if self.icc == 0:
            return VarianceComponents(sigma_w2=self.sigma_w2, sigma_b2=0.0, tau2=0.0)
        return variance_partition(self.icc, self.f, self.sigma_w2)

    @property
    def n_clusters(self) -> int:
        rows, cols, _ = self.grid
        return rows * cols

    @property
    def n_individuals(self) -> int:
        return self.n_clusters * self.m

    def with_theta(self, theta: float) -> "ScenarioConfig":
        return replace(self, theta=float(theta))

    def to_dict(self) -> dict:
        return {
            "label": self.label, "icc": self.icc, "f": self.f,
            "sigma_w2": self.sigma_w2, "phi": self.phi,
            "kernel": self.kernel.to_dict(), "grid": list(self.grid),
            "m": self.m, "theta": self.theta, "gamma": self.gamma,
            "delta": self.delta, "randomization": self.randomization.value,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        rows, cols, cell = d["grid"]
        return cls(
            label=d["label"], icc=d["icc"], f=d["f"], sigma_w2=d["sigma_w2"],
            phi=d["phi"], kernel=KernelSpec.from_dict(d["kernel"]),
            grid=(int(rows), int(cols), float(cell)), m=int(d["m"]),
            theta=d.get("theta", 0.6), gamma=d.get("gamma", 0.1),
            delta=d.get("delta", 0.1),
            randomization=Randomization(d.get("randomization", "simple_1to1")),
            seed=int(d.get("seed", 0)),
        )


# Fixed study-wide settings behind the six stock scenarios.
STOCK_SIGMA_W2 = 2.25
STOCK_F = 0.5
STOCK_M = 40
STOCK_GRID = (4, 4, 1.0)
_STOCK_ROWS = [
    ("A", 0.05, 1.5), ("B", 0.05, 3.5),
    ("C", 0.15, 1.5), ("D", 0.15, 3.5),
    ("E", 0.25, 1.5), ("F", 0.25, 3.5),
]


def scenario_table() -> list[ScenarioConfig]:
    """The six stock scenarios A-F (ICC x spatial range crossing).

    All use a 4x4 unit grid of 16 clusters, m = 40, sigma_w2 = 2.25, f = 0.5,
    and an exponential kernel; the true effect defaults to the 0.6 target and
    is swept over default_theta_grid() by studies.
    """
    out = []
    for label, icc, phi in _STOCK_ROWS:
        out.append(ScenarioConfig(
            label=label, icc=icc, f=STOCK_F, sigma_w2=STOCK_SIGMA_W2, phi=phi,
            kernel=KernelSpec(family=KernelFamily.EXPONENTIAL, phi=phi),
            grid=STOCK_GRID, m=STOCK_M,
        ))
    return out


def scenario_by_label(label: str) -> ScenarioConfig:
    for cfg in scenario_table():
        if cfg.label == label:
            return cfg
    raise KeyError(f"unknown scenario label {label!r} (expected A-F)")


def default_theta_grid() -> np.ndarray:
    """True-effect sweep 0, 0.1, ..., 1.4 used by the stock scenarios."""
    return np.round(np.arange(0, 15) * 0.1, 10)
