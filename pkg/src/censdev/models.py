"""Concrete model families: exponential survival regression, censored
binomial adverse-event models A-G, and a generic censored normal GLM.

Every model exposes the same surface the sampler and the selection layer
drive:

* ``params``: ordered schema of named components with support descriptors
  ("real", "positive" or "unit");
* ``log_prior(theta)``: joint log prior density, -inf outside support;
* ``outcome_family(theta, obs)``: the outcome distribution of one row;
* ``rows_for_param(j, data)``: row indices whose likelihood terms depend on
  component ``j`` (None means all rows), which lets single-site Metropolis
  updates skip untouched rows.

Adverse-event variants (one study-level binomial count per row, covariates
``drug``, ``drug_class``, ``study``):

* A - one pooled incidence, Beta prior;
* B - one incidence per drug class, independent Beta priors;
* C - drug incidences on the identity scale drawn from a common Beta
  hyperdistribution; the spread parameter gets a half-Cauchy prior and is
  mapped to a Beta concentration of 1/spread^2;
* D/E/F - hierarchical linear predictor mu + delta_drug through a logit,
  cloglog or probit link, delta ~ Normal(0, sigma^2), sigma ~ half-Cauchy;
* G - one incidence per study, no pooling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .distributions import (
    Binomial,
    Exponential,
    Family,
    Normal,
    clamp_probability,
    link_invert,
)
from .exceptions import DataError, SchemaError
from .likelihood import (
    CensoredDataset,
    LikelihoodMode,
    Observation,
    loglik_dinterval_style,
    loglik_exact,
)

__all__ = [
    "Param",
    "SurvivalExpModel",
    "PooledBinomialModel",
    "TwoGroupBinomialModel",
    "DrugMeanBinomialModel",
    "DrugLinkBinomialModel",
    "SaturatedBinomialModel",
    "NormalGlmModel",
    "ae_model",
    "AE_VARIANTS",
    "outcome_families",
    "log_posterior_unnorm",
]

_NEG_INF = float("-inf")

# Rate/probability guards: keep families constructible at any proposal so a
# wild Metropolis step is rejected by its likelihood, not by an exception.
_MAX_RATE = 1e12
_MIN_RATE = 1e-12


@dataclass(frozen=True)
class Param:
    """One named parameter with its support descriptor."""

    name: str
    support: str  # "real" | "positive" | "unit"

    def __post_init__(self):
        if self.support not in ("real", "positive", "unit"):
            raise SchemaError(f"unknown support {self.support!r} for {self.name!r}")


def _normal_logpdf_prec(x: float, mean: float, precision: float) -> float:
    return 0.5 * (math.log(precision) - math.log(2.0 * math.pi)) - 0.5 * precision * (
        x - mean
    ) ** 2


def _beta_logpdf(x: float, a: float, b: float) -> float:
    if x <= 0.0 or x >= 1.0:
        return _NEG_INF
    log_norm = math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
    return log_norm + (a - 1.0) * math.log(x) + (b - 1.0) * math.log1p(-x)


def _half_cauchy_logpdf(x: float, scale: float) -> float:
    if x < 0.0 or not math.isfinite(x):
        return _NEG_INF
    r = x / scale
    return math.log(2.0 / math.pi) - math.log(scale) - math.log1p(r * r)


class Model:
    """Base class: schema bookkeeping shared by every model."""

    params: tuple[Param, ...]
    label: str = ""

    @property
    def param_names(self) -> tuple[str, ...]:
        return tuple(p.name for p in self.params)

    @property
    def supports(self) -> tuple[str, ...]:
        return tuple(p.support for p in self.params)

    def check_theta(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (len(self.params),):
            raise SchemaError(
                f"{type(self).__name__} expects {len(self.params)} parameters, "
                f"got shape {theta.shape}"
            )
        return theta

    def log_prior(self, theta) -> float:
        raise NotImplementedError

    def outcome_family(self, theta, obs: Observation) -> Family:
        raise NotImplementedError

    def rows_for_param(self, j: int, data: CensoredDataset) -> Optional[Sequence[int]]:
        return None

    def initial_theta(self) -> np.ndarray:
        """Starting point: prior means where defined, neutral values otherwise."""
        defaults = {"real": 0.0, "positive": 1.0, "unit": 0.5}
        return np.array([defaults[p.support] for p in self.params])


class SurvivalExpModel(Model):
    """Exponential survival regression with a binary group covariate.

    Per-row hazard rate exp(b0 + b1 * group); independent Normal(0, tau)
    priors on both coefficients with fixed small precision.
    """

    def __init__(self, tau0: float = 0.01, tau1: float = 0.01, group_col: int = 0):
        self.tau0 = float(tau0)
        self.tau1 = float(tau1)
        self.group_col = group_col
        self.params = (Param("b0", "real"), Param("b1", "real"))
        self.label = "survival-exponential"

    def log_prior(self, theta):
        b0, b1 = self.check_theta(theta)
        return _normal_logpdf_prec(b0, 0.0, self.tau0) + _normal_logpdf_prec(
            b1, 0.0, self.tau1
        )

    def outcome_family(self, theta, obs):
        b0, b1 = theta
        group = obs.covariates[self.group_col]
        eta = b0 + b1 * group
        rate = math.exp(min(eta, math.log(_MAX_RATE)))
        return Exponential(rate=max(rate, _MIN_RATE))


class _BinomialModel(Model):
    """Shared helpers for the study-level adverse-event variants."""

    def _trials(self, obs: Observation) -> int:
        if obs.trials is None:
            raise DataError("adverse-event models need a trials count on every row")
        return obs.trials

    def _binomial(self, trials: int, p: float) -> Binomial:
        return Binomial(trials=trials, prob=clamp_probability(p))


class PooledBinomialModel(_BinomialModel):
    """Variant A: one incidence shared by every study."""

    def __init__(self, beta_shapes: tuple[float, float] = (1.0, 1.0)):
        self.beta_shapes = beta_shapes
        self.params = (Param("p_pool", "unit"),)
        self.label = "A"

    def log_prior(self, theta):
        (p,) = self.check_theta(theta)
        return _beta_logpdf(p, *self.beta_shapes)

    def outcome_family(self, theta, obs):
        return self._binomial(self._trials(obs), theta[0])


class TwoGroupBinomialModel(_BinomialModel):
    """Variant B: independent incidences for the two drug classes."""

    def __init__(
        self,
        beta_shapes: tuple[float, float] = (1.0, 1.0),
        class_col: int = 1,
    ):
        self.beta_shapes = beta_shapes
        self.class_col = class_col
        self.params = (Param("p_class0", "unit"), Param("p_class1", "unit"))
        self.label = "B"

    def log_prior(self, theta):
        theta = self.check_theta(theta)
        return sum(_beta_logpdf(p, *self.beta_shapes) for p in theta)

    def _class_of(self, obs):
        return int(obs.covariates[self.class_col])

    def outcome_family(self, theta, obs):
        return self._binomial(self._trials(obs), theta[self._class_of(obs)])

    def rows_for_param(self, j, data):
        return [i for i, o in enumerate(data) if self._class_of(o) == j]


class DrugMeanBinomialModel(_BinomialModel):
    """Variant C: drug incidences partially pooled on the identity scale.

    p_d ~ Beta(mu * kappa, (1 - mu) * kappa) with kappa = 1 / spread^2,
    spread ~ half-Cauchy(scale), mu ~ Beta(beta_shapes).
    """

    def __init__(
        self,
        n_drugs: int = 5,
        beta_shapes: tuple[float, float] = (1.0, 1.0),
        half_cauchy_scale: float = 1.0,
        drug_col: int = 0,
    ):
        self.n_drugs = n_drugs
        self.beta_shapes = beta_shapes
        self.half_cauchy_scale = half_cauchy_scale
        self.drug_col = drug_col
        self.params = (
            Param("mu", "unit"),
            Param("spread", "positive"),
            *(Param(f"p_drug{d}", "unit") for d in range(n_drugs)),
        )
        self.label = "C"

    def log_prior(self, theta):
        theta = self.check_theta(theta)
        mu, spread = theta[0], theta[1]
        if not 0.0 < mu < 1.0 or spread <= 0.0:
            return _NEG_INF
        kappa = 1.0 / (spread * spread)
        total = _beta_logpdf(mu, *self.beta_shapes)
        total += _half_cauchy_logpdf(spread, self.half_cauchy_scale)
        for p in theta[2:]:
            total += _beta_logpdf(p, mu * kappa, (1.0 - mu) * kappa)
        return total

    def _drug_of(self, obs):
        return int(obs.covariates[self.drug_col])

    def outcome_family(self, theta, obs):
        return self._binomial(self._trials(obs), theta[2 + self._drug_of(obs)])

    def rows_for_param(self, j, data):
        if j < 2:
            return []  # hyperparameters touch the prior only
        drug = j - 2
        return [i for i, o in enumerate(data) if self._drug_of(o) == drug]


class DrugLinkBinomialModel(_BinomialModel):
    """Variants D/E/F: hierarchical drug effects behind a link function."""

    def __init__(
        self,
        link: str,
        n_drugs: int = 5,
        mean_precision: float = 0.01,
        half_cauchy_scale: float = 1.0,
        drug_col: int = 0,
        label: str = "",
    ):
        self.link = link
        self.n_drugs = n_drugs
        self.mean_precision = mean_precision
        self.half_cauchy_scale = half_cauchy_scale
        self.drug_col = drug_col
        self.params = (
            Param("mu", "real"),
            Param("sigma", "positive"),
            *(Param(f"delta_drug{d}", "real") for d in range(n_drugs)),
        )
        self.label = label or {"logit": "D", "cloglog": "E", "probit": "F"}[link]

    def log_prior(self, theta):
        theta = self.check_theta(theta)
        mu, sigma = theta[0], theta[1]
        if sigma <= 0.0:
            return _NEG_INF
        total = _normal_logpdf_prec(mu, 0.0, self.mean_precision)
        total += _half_cauchy_logpdf(sigma, self.half_cauchy_scale)
        prec = 1.0 / (sigma * sigma)
        for delta in theta[2:]:
            total += _normal_logpdf_prec(delta, 0.0, prec)
        return total

    def _drug_of(self, obs):
        return int(obs.covariates[self.drug_col])

    def outcome_family(self, theta, obs):
        eta = theta[0] + theta[2 + self._drug_of(obs)]
        return self._binomial(self._trials(obs), link_invert(self.link, eta))

    def rows_for_param(self, j, data):
        if j == 0:
            return None
        if j == 1:
            return []
        drug = j - 2
        return [i for i, o in enumerate(data) if self._drug_of(o) == drug]


class SaturatedBinomialModel(_BinomialModel):
    """Variant G: one incidence per study, no pooling."""

    def __init__(
        self,
        n_studies: int,
        beta_shapes: tuple[float, float] = (1.0, 1.0),
        study_col: int = 2,
    ):
        self.n_studies = n_studies
        self.beta_shapes = beta_shapes
        self.study_col = study_col
        self.params = tuple(Param(f"p_study{s}", "unit") for s in range(n_studies))
        self.label = "G"

    def log_prior(self, theta):
        theta = self.check_theta(theta)
        return sum(_beta_logpdf(p, *self.beta_shapes) for p in theta)

    def _study_of(self, obs):
        return int(obs.covariates[self.study_col])

    def outcome_family(self, theta, obs):
        return self._binomial(self._trials(obs), theta[self._study_of(obs)])

    def rows_for_param(self, j, data):
        return [i for i, o in enumerate(data) if self._study_of(o) == j]


class NormalGlmModel(Model):
    """Generic censored normal regression (tobit-style escape hatch).

    Mean is a linear function of all covariates plus an intercept; the
    residual scale gets a half-Cauchy prior.  Provided for completeness,
    exercised only by smoke tests.
    """

    def __init__(
        self,
        n_covariates: int,
        coef_precision: float = 0.01,
        half_cauchy_scale: float = 1.0,
    ):
        self.n_covariates = n_covariates
        self.coef_precision = coef_precision
        self.half_cauchy_scale = half_cauchy_scale
        self.params = (
            Param("intercept", "real"),
            *(Param(f"beta{k}", "real") for k in range(n_covariates)),
            Param("sigma", "positive"),
        )
        self.label = "censored-normal-glm"

    def log_prior(self, theta):
        theta = self.check_theta(theta)
        sigma = theta[-1]
        if sigma <= 0.0:
            return _NEG_INF
        total = _half_cauchy_logpdf(sigma, self.half_cauchy_scale)
        for coef in theta[:-1]:
            total += _normal_logpdf_prec(coef, 0.0, self.coef_precision)
        return total

    def outcome_family(self, theta, obs):
        mean = theta[0] + float(np.dot(theta[1:-1], obs.covariates))
        sigma = max(theta[-1], _MIN_RATE)
        return Normal(mean=mean, precision=1.0 / (sigma * sigma))


AE_VARIANTS = ("A", "B", "C", "D", "E", "F", "G")


def ae_model(
    variant: str,
    n_drugs: int = 5,
    n_studies: Optional[int] = None,
    beta_shapes: tuple[float, float] = (1.0, 1.0),
    half_cauchy_scale: float = 1.0,
    mean_precision: float = 0.01,
) -> Model:
    """Build one of the adverse-event binomial variants A-G."""
    variant = variant.upper()
    if variant == "A":
        return PooledBinomialModel(beta_shapes)
    if variant == "B":
        return TwoGroupBinomialModel(beta_shapes)
    if variant == "C":
        return DrugMeanBinomialModel(n_drugs, beta_shapes, half_cauchy_scale)
    if variant in ("D", "E", "F"):
        link = {"D": "logit", "E": "cloglog", "F": "probit"}[variant]
        return DrugLinkBinomialModel(
            link, n_drugs, mean_precision, half_cauchy_scale
        )
    if variant == "G":
        if n_studies is None:
            raise SchemaError("variant G needs the number of studies")
        return SaturatedBinomialModel(n_studies)
    raise SchemaError(f"unknown adverse-event variant {variant!r}")


def outcome_families(model: Model, theta, data: CensoredDataset) -> list[Family]:
    """Per-row outcome distributions at a fixed parameter vector."""
    return [model.outcome_family(theta, obs) for obs in data]


def log_posterior_unnorm(
    model: Model,
    theta,
    data: CensoredDataset,
    mode: LikelihoodMode = LikelihoodMode.EXACT,
    latent_values=None,
) -> float:
    """Log prior plus the mode's sampler log-likelihood (unnormalized).

    In DINTERVAL mode the sampler target conditions on the supplied latent
    values; they are required there and rejected elsewhere.
    """
    theta = model.check_theta(theta)
    lp = model.log_prior(theta)
    if lp == _NEG_INF:
        return _NEG_INF
    dists = outcome_families(model, theta, data)
    if mode is LikelihoodMode.EXACT:
        if latent_values is not None:
            raise SchemaError("latent values are only meaningful in DINTERVAL mode")
        return lp + loglik_exact(data, dists)
    if latent_values is None:
        raise SchemaError("DINTERVAL mode requires latent values for censored rows")
    return lp + loglik_dinterval_style(data, dists, latent_values).sampler_loglik
