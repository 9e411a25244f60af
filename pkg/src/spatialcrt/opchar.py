"""Decision rule and operating-characteristic summaries over replicates."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .inference import ModelKind


@dataclass(frozen=True)
class DecisionRule:
    """Declare efficacy when P(theta > delta | data) exceeds the threshold."""

    delta: float = 0.0
    threshold: float = 0.95

    def __post_init__(self):
        if not 0 < self.threshold < 1:
            raise ValueError(f"threshold must lie in (0,1), got {self.threshold}")


def decide(prob: float, rule: DecisionRule) -> bool:
    """True iff the exceedance probability strictly exceeds the threshold."""
    if not 0 <= prob <= 1:
        raise ValueError(f"prob must lie in [0,1], got {prob}")
    return prob > rule.threshold


@dataclass(frozen=True)
class ReplicateResult:
    """Outcome of fitting one model to one simulated trial."""

    scenario: str
    theta_true: float
    model: ModelKind
    replicate: int
    seed: int
    post_mean: float
    post_sd: float
    prob_exceeds: float
    ci_lo: float
    ci_hi: float
    rejected: bool
    covered: bool
    fit_wall_time: float
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.error is not None


@dataclass(frozen=True)
class OpCharSummary:
    """Aggregated operating characteristics for one (scenario, theta, model) cell."""

    scenario: str
    theta_true: float
    model: ModelKind
    n_reps: int
    rejection_rate: float
    mod_se: float
    emp_se: float
    pct_re: float
    bias: float
    mse: float
    coverage: float
    mc_se_rejection: float
    n_failed: int = 0
    flagged: bool = False

    def to_dict(self) -> dict:
        d = {
            "scenario": self.scenario, "theta_true": self.theta_true,
            "model": self.model.value, "n_reps": self.n_reps,
            "rejection_rate": self.rejection_rate, "mod_se": self.mod_se,
            "emp_se": self.emp_se, "pct_re": self.pct_re, "bias": self.bias,
            "mse": self.mse, "coverage": self.coverage,
            "mc_se_rejection": self.mc_se_rejection,
            "n_failed": self.n_failed, "flagged": self.flagged,
        }
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "OpCharSummary":
        d = dict(d)
        d["model"] = ModelKind(d["model"])
        return cls(**d)


def summarize(results: list[ReplicateResult], theta_true: float,
              modse_aggregator: str = "mean") -> OpCharSummary:
    """Operating characteristics of one cell from its replicate results.

    Failed replicates are excluded from every statistic; a cell with more
    than 1% failures is flagged. The rejection rate is the false positive
    rate at theta_true = 0 and power otherwise. pct_re compares the
    model-based posterior sd (mean over replicates, or median when
    configured) to the empirical sd of posterior means.
    """
    if not results:
        raise ValueError("no replicate results to summarize")
    scenario = results[0].scenario
    model = results[0].model
    for r in results:
        if (r.scenario, r.model) != (scenario, model) or r.theta_true != theta_true:
            raise ValueError("summarize expects a single (scenario, theta, model) cell")
    results = sorted(results, key=lambda r: r.replicate)  # exact order invariance
    ok = [r for r in results if not r.failed]
    n_failed = len(results) - len(ok)
    if len(ok) < 2:
        raise ValueError(f"need at least 2 successful replicates, got {len(ok)}")
    means = np.array([r.post_mean for r in ok])
    sds = np.array([r.post_sd for r in ok])
    s = len(ok)
    rejection_rate = sum(r.rejected for r in ok) / s
    if modse_aggregator == "mean":
        mod_se = float(np.mean(sds))
    elif modse_aggregator == "median":
        mod_se = float(np.median(sds))
    else:
        raise ValueError(f"unknown modse aggregator {modse_aggregator!r}")
    emp_se = float(np.std(means, ddof=1))
    pct_re = (mod_se / emp_se - 1.0) * 100.0 if emp_se > 0 else math.inf
    bias = float(np.mean(means)) - theta_true
    mse = float(np.mean((means - theta_true) ** 2))
    coverage = sum(r.covered for r in ok) / s
    mc_se = math.sqrt(rejection_rate * (1.0 - rejection_rate) / s)
    return OpCharSummary(
        scenario=scenario, theta_true=theta_true, model=model, n_reps=s,
        rejection_rate=rejection_rate, mod_se=mod_se, emp_se=emp_se,
        pct_re=pct_re, bias=bias, mse=mse, coverage=coverage,
        mc_se_rejection=mc_se, n_failed=n_failed,
        flagged=n_failed > 0.01 * len(results),
    )
