"""Penalized-complexity priors for variance/range hyperparameters.

PC priors here are exponential on the standard-deviation scale, and
lambda phi^-2 exp(-lambda/phi) on the spatial range (base model: flat field).
Fixed effects get independent normal priors with a shared variance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .gaussian import GaussianDist


def pc_sd_rate(u: float, alpha: float) -> float:
    """Rate of the exponential sd prior calibrated by P(sigma > u) = alpha."""
    if u <= 0:
        raise ValueError(f"u must be positive, got {u}")
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0,1), got {alpha}")
    return -math.log(alpha) / u


def pc_sd_logpdf(sigma: float, lam: float) -> float:
    """log of the exponential density lambda * exp(-lambda * sigma)."""
    if sigma < 0:
        raise ValueError(f"sigma must be nonnegative, got {sigma}")
    if lam <= 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    return math.log(lam) - lam * sigma


def pc_range_rate(phi0: float, alpha: float) -> float:
    """Rate of the range prior calibrated by P(phi < phi0) = alpha.

    The range prior CDF is exp(-lambda / phi), so lambda = -phi0 log(alpha).
    """
    if phi0 <= 0:
        raise ValueError(f"phi0 must be positive, got {phi0}")
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0,1), got {alpha}")
    return -phi0 * math.log(alpha)


def pc_range_logpdf(phi: float, lam: float) -> float:
    """log of the range density lambda * phi^-2 * exp(-lambda / phi)."""
    if phi <= 0:
        raise ValueError(f"phi must be positive, got {phi}")
    if lam <= 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    return math.log(lam) - 2.0 * math.log(phi) - lam / phi


# Stock calibrations: residual sd P(sigma_w > 10) = 0.1, cluster and spatial
# sds P(. > 3) = 0.1, spatial range P(phi < 7) = 0.5, fixed effects N(0, 1000)
# except the fixed-effects cluster model which needs N(0, 1) to tame the
# collinearity between the treatment column and the cluster dummies.
DEFAULT_SD_CALIBRATION = {"sigma_w": (10.0, 0.1), "sigma_b": (3.0, 0.1), "tau": (3.0, 0.1)}
DEFAULT_RANGE_CALIBRATION = (7.0, 0.5)
DEFAULT_FE_VARIANCE = 1000.0
FM_FE_VARIANCE = 1.0


@dataclass(frozen=True)
class PriorSpec:
    """Prior settings for one model fit.

    ``sd_rates`` maps hyperparameter names (sigma_w, sigma_b, tau) to
    exponential rates on the sd scale; ``range_rate`` is the rate of the
    spatial range prior; fixed effects are iid N(fe_mean, fe_variance).
    """

    fe_mean: float = 0.0
    fe_variance: float = DEFAULT_FE_VARIANCE
    sd_rates: dict[str, float] = field(default_factory=dict)
    range_rate: float | None = None

    def __post_init__(self):
        if self.fe_variance <= 0:
            raise ValueError(f"fe_variance must be positive, got {self.fe_variance}")
        for name, lam in self.sd_rates.items():
            if lam <= 0:
                raise ValueError(f"sd rate for {name} must be positive, got {lam}")
        if self.range_rate is not None and self.range_rate <= 0:
            raise ValueError(f"range_rate must be positive, got {self.range_rate}")

    def fixed_effect_prior(self, k: int) -> GaussianDist:
        """Independent N(fe_mean, fe_variance) prior over k coefficients."""
        return GaussianDist.iid(k, mean=self.fe_mean, variance=self.fe_variance)

    def hyper_logpdf(self, name: str, value: float) -> float:
        """Prior log-density of one hyperparameter on its natural scale."""
        if name == "phi":
            if self.range_rate is None:
                raise KeyError("no range prior configured")
            return pc_range_logpdf(value, self.range_rate)
        return pc_sd_logpdf(value, self.sd_rates[name])

    def to_dict(self) -> dict:
        return {"fe_mean": self.fe_mean, "fe_variance": self.fe_variance,
                "sd_rates": dict(self.sd_rates), "range_rate": self.range_rate}

    @classmethod
    def from_dict(cls, d: dict) -> "PriorSpec":
        return cls(fe_mean=d.get("fe_mean", 0.0),
                   fe_variance=d.get("fe_variance", DEFAULT_FE_VARIANCE),
                   sd_rates=dict(d.get("sd_rates", {})),
                   range_rate=d.get("range_rate"))


def default_sd_rates() -> dict[str, float]:
    return {name: pc_sd_rate(u, a) for name, (u, a) in DEFAULT_SD_CALIBRATION.items()}


def default_priors(fe_variance: float = DEFAULT_FE_VARIANCE) -> PriorSpec:
    """Stock priors: PC sd priors, PC range prior, N(0, fe_variance) effects."""
    phi0, alpha = DEFAULT_RANGE_CALIBRATION
    return PriorSpec(fe_mean=0.0, fe_variance=fe_variance,
                     sd_rates=default_sd_rates(),
                     range_rate=pc_range_rate(phi0, alpha))
