"""Probability kernels and link functions for censored-data likelihoods.

Every family exposes the same small surface: ``log_pdf``, ``log_cdf``,
``log_sf``, ``log_interval_prob``, ``sample`` and ``sample_truncated``.
The interval convention throughout is

    P(a <= Y <= b) = F(b) - F(a^-),

where ``F(a^-)`` is the left limit of the CDF: ``F(a - 1)`` on integer
support, ``F(a)`` for continuous families.  One-sided censoring reduces to
this with an infinite bound, so a single stable kernel serves left-, right-
and interval-censored contributions.  Truncated sampling uses the same
region convention (inclusive integer endpoints; for continuous families the
boundary carries no mass either way).

Tail quantities are computed in log space with ``log1p``/``expm1``
complements so that ``log(1 - F)`` survives far into the tail instead of
rounding through probability one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special as sc

from .exceptions import (
    BoundaryError,
    BoundOrderError,
    DegenerateRegionError,
    ParameterError,
)

__all__ = [
    "Exponential",
    "Normal",
    "Binomial",
    "Beta",
    "HalfCauchy",
    "Family",
    "LinkFunction",
    "link_apply",
    "link_invert",
    "clamp_probability",
    "bernoulli_log_prob",
    "bernoulli_kl",
    "kl_divergence",
    "PROB_CLAMP",
]

# Probabilities fed to links or Bernoulli terms are clamped to this band so
# extreme Metropolis proposals yield huge-but-finite log terms, not -inf.
PROB_CLAMP = 1e-12

_NEG_INF = float("-inf")
_LOG_HALF = math.log(0.5)


def clamp_probability(p: float) -> float:
    """Clamp ``p`` into [PROB_CLAMP, 1 - PROB_CLAMP]."""
    if p < PROB_CLAMP:
        return PROB_CLAMP
    if p > 1.0 - PROB_CLAMP:
        return 1.0 - PROB_CLAMP
    return p


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ParameterError(message)


def _finite(x) -> bool:
    return math.isfinite(x)


def _log_diff_from_logs(log_hi: float, log_lo: float) -> float:
    """log(exp(log_hi) - exp(log_lo)) for log_lo <= log_hi, stable."""
    if log_lo == _NEG_INF:
        return log_hi
    delta = log_lo - log_hi
    if delta >= 0.0:
        # Equal within rounding: the difference has no mass left.
        return _NEG_INF
    return log_hi + math.log(-math.expm1(delta))


class Family:
    """Common interval/truncation machinery shared by all kernels.

    Subclasses provide ``log_pdf``, ``log_cdf``, ``log_sf`` and ``sample``;
    discrete ones override ``log_cdf_left_limit`` and
    ``_sample_truncated_impl``.
    """

    is_discrete = False

    # -- mandatory surface -------------------------------------------------
    def log_pdf(self, y: float) -> float:
        raise NotImplementedError

    def log_cdf(self, y: float) -> float:
        raise NotImplementedError

    def log_sf(self, y: float) -> float:
        """log P(Y > y), the survival complement of ``log_cdf``."""
        raise NotImplementedError

    def sample(self, rng: np.random.Generator) -> float:
        raise NotImplementedError

    # -- shared machinery --------------------------------------------------
    def log_cdf_left_limit(self, a: float) -> float:
        """log F(a^-); continuous families have no atom at ``a``."""
        return self.log_cdf(a)

    def log_sf_left_limit(self, a: float) -> float:
        """log P(Y >= a) = log(1 - F(a^-))."""
        if a == _NEG_INF:
            return 0.0
        if self.is_discrete:
            return self.log_sf(math.ceil(a) - 1)
        return self.log_sf(a)

    def log_interval_prob(self, a: float, b: float) -> float:
        """log P(a <= Y <= b) with bounds possibly infinite.

        Evaluates whichever of the CDF or survival representation keeps the
        subtraction well conditioned; returns ``-inf`` for regions of zero
        probability rather than raising.
        """
        if math.isnan(a) or math.isnan(b):
            raise BoundOrderError("interval bounds must not be NaN")
        if a > b:
            raise BoundOrderError(f"interval bounds out of order: {a} > {b}")
        if a == _NEG_INF and b == math.inf:
            return 0.0
        log_cdf_b = self.log_cdf(b)
        if a == _NEG_INF:
            return log_cdf_b
        log_sf_a = self.log_sf_left_limit(a)
        if b == math.inf:
            return log_sf_a
        if log_cdf_b <= _LOG_HALF:
            return _log_diff_from_logs(log_cdf_b, self.log_cdf_left_limit(a))
        # Right half of the distribution: difference of survival functions.
        return _log_diff_from_logs(log_sf_a, self.log_sf(b))

    def sample_truncated(
        self, lower: float, upper: float, rng: np.random.Generator
    ) -> float:
        """Draw from the family restricted to the region [lower, upper].

        Integer endpoints are inclusive on discrete support, mirroring the
        interval-probability convention above.
        """
        if not lower < upper:
            raise BoundOrderError(
                f"truncation bounds out of order: {lower} >= {upper}"
            )
        log_mass = self.log_interval_prob(lower, upper)
        if log_mass < math.log(1e-290):
            raise DegenerateRegionError(
                f"truncation region [{lower}, {upper}] has zero probability"
            )
        return self._sample_truncated_impl(lower, upper, rng)

    def _sample_truncated_impl(self, lower, upper, rng):
        raise NotImplementedError


@dataclass(frozen=True)
class Exponential(Family):
    """Exponential kernel with rate parameterization: f(y) = rate * exp(-rate*y)."""

    rate: float

    def __post_init__(self):
        _require(_finite(self.rate) and self.rate > 0.0, f"rate must be positive, got {self.rate}")

    def log_pdf(self, y):
        if y < 0.0 or not _finite(y):
            return _NEG_INF
        return math.log(self.rate) - self.rate * y

    def log_cdf(self, y):
        if y <= 0.0:
            return _NEG_INF
        if y == math.inf:
            return 0.0
        return math.log(-math.expm1(-self.rate * y))

    def log_sf(self, y):
        if y <= 0.0:
            return 0.0
        return -self.rate * y

    def mean(self):
        return 1.0 / self.rate

    def sample(self, rng):
        return rng.exponential(1.0 / self.rate)

    def _sample_truncated_impl(self, lower, upper, rng):
        # Memoryless shift keeps the inverse CDF stable however far out the
        # region sits: Y = a + Exp(rate) conditioned on Y - a <= b - a.
        a = max(lower, 0.0)
        u = rng.uniform()
        if upper == math.inf:
            return a - math.log1p(-u) / self.rate
        width_mass = -math.expm1(-self.rate * (upper - a))
        return a - math.log1p(-u * width_mass) / self.rate


@dataclass(frozen=True)
class Normal(Family):
    """Normal kernel parameterized by mean and precision (1 / variance)."""

    mean: float
    precision: float

    def __post_init__(self):
        _require(_finite(self.mean), f"mean must be finite, got {self.mean}")
        _require(
            _finite(self.precision) and self.precision > 0.0,
            f"precision must be positive, got {self.precision}",
        )

    @property
    def sd(self) -> float:
        return self.precision ** -0.5

    def _z(self, y):
        return (y - self.mean) * math.sqrt(self.precision)

    def log_pdf(self, y):
        if not _finite(y):
            return _NEG_INF
        z = self._z(y)
        return 0.5 * (math.log(self.precision) - math.log(2.0 * math.pi)) - 0.5 * z * z

    def log_cdf(self, y):
        if y == math.inf:
            return 0.0
        if y == _NEG_INF:
            return _NEG_INF
        return float(sc.log_ndtr(self._z(y)))

    def log_sf(self, y):
        if y == math.inf:
            return _NEG_INF
        if y == _NEG_INF:
            return 0.0
        return float(sc.log_ndtr(-self._z(y)))

    def sample(self, rng):
        return self.mean + self.sd * rng.standard_normal()

    def _sample_truncated_impl(self, lower, upper, rng):
        sd = self.sd
        alpha = _NEG_INF if lower == _NEG_INF else (lower - self.mean) / sd
        beta = math.inf if upper == math.inf else (upper - self.mean) / sd
        z = _truncated_standard_normal(alpha, beta, rng)
        return self.mean + sd * z


def _truncated_standard_normal(alpha, beta, rng):
    """Exact rejection sampler for N(0,1) restricted to [alpha, beta].

    One-sided tails use Robert's shifted-exponential proposal; two-sided
    regions use a uniform proposal with the exact acceptance ratio.  No
    tuning parameters, all branches exact.
    """
    if beta == math.inf and alpha == _NEG_INF:
        return rng.standard_normal()
    if beta == math.inf:
        if alpha <= 0.0:
            while True:
                z = rng.standard_normal()
                if z >= alpha:
                    return z
        return _normal_tail(alpha, rng)
    if alpha == _NEG_INF:
        if beta >= 0.0:
            while True:
                z = rng.standard_normal()
                if z <= beta:
                    return z
        return -_normal_tail(-beta, rng)
    # Two-sided: uniform proposal, accept with exp((c - z^2)/2) where c is
    # the minimum of z^2 over the interval.
    if alpha <= 0.0 <= beta:
        c = 0.0
    else:
        c = min(alpha * alpha, beta * beta)
    while True:
        z = rng.uniform(alpha, beta)
        if math.log(rng.uniform()) <= 0.5 * (c - z * z):
            return z


def _normal_tail(a, rng):
    """Robert (1995) exponential-proposal sampler for N(0,1) on [a, inf), a > 0."""
    rate = 0.5 * (a + math.sqrt(a * a + 4.0))
    while True:
        z = a + rng.exponential(1.0 / rate)
        if math.log(rng.uniform()) <= -0.5 * (z - rate) ** 2:
            return z


@dataclass(frozen=True)
class Binomial(Family):
    """Binomial kernel on {0, ..., trials}."""

    trials: int
    prob: float

    is_discrete = True

    def __post_init__(self):
        _require(
            isinstance(self.trials, (int, np.integer)) and self.trials >= 1,
            f"trials must be a positive integer, got {self.trials}",
        )
        _require(
            _finite(self.prob) and 0.0 <= self.prob <= 1.0,
            f"prob must lie in [0, 1], got {self.prob}",
        )

    def log_pdf(self, y):
        if y != math.floor(y) or y < 0 or y > self.trials:
            return _NEG_INF
        k, n, p = int(y), self.trials, self.prob
        if p == 0.0:
            return 0.0 if k == 0 else _NEG_INF
        if p == 1.0:
            return 0.0 if k == n else _NEG_INF
        log_comb = (
            math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)
        )
        return log_comb + k * math.log(p) + (n - k) * math.log1p(-p)

    def _tail_logsumexp(self, ks):
        terms = [self.log_pdf(k) for k in ks]
        hi = max(terms)
        if hi == _NEG_INF:
            return _NEG_INF
        return hi + math.log(sum(math.exp(t - hi) for t in terms))

    def log_cdf(self, y):
        if y == math.inf:
            return 0.0
        m = math.floor(y)
        if m < 0:
            return _NEG_INF
        n, p = self.trials, self.prob
        if m >= n or p == 0.0:
            return 0.0
        # P(X <= m) = I_{1-p}(n - m, m + 1)
        cdf = float(sc.betainc(n - m, m + 1, 1.0 - p))
        if cdf > 1e-290:
            return math.log(min(cdf, 1.0))
        # Deep lower tail: sum the few pmf terms directly in log space.
        return self._tail_logsumexp(range(0, int(m) + 1))

    def log_sf(self, y):
        if y == math.inf:
            return _NEG_INF
        m = math.floor(y)
        n, p = self.trials, self.prob
        if m < 0:
            return 0.0
        if m >= n:
            return _NEG_INF
        # P(X > m) = P(X >= m + 1) = I_p(m + 1, n - m)
        sf = float(sc.betainc(m + 1, n - m, p))
        if sf > 1e-290:
            return math.log(min(sf, 1.0))
        return self._tail_logsumexp(range(int(m) + 1, n + 1))

    def log_cdf_left_limit(self, a):
        return self.log_cdf(math.ceil(a) - 1)

    def sample(self, rng):
        return float(rng.binomial(self.trials, self.prob))

    def _sample_truncated_impl(self, lower, upper, rng):
        lo = 0 if lower == _NEG_INF else max(0, math.ceil(lower))
        hi = self.trials if upper == math.inf else min(self.trials, math.floor(upper))
        support = np.arange(lo, hi + 1)
        log_mass = np.array([self.log_pdf(k) for k in support])
        log_mass -= log_mass.max()
        mass = np.exp(log_mass)
        mass /= mass.sum()
        return float(rng.choice(support, p=mass))


@dataclass(frozen=True)
class Beta(Family):
    """Beta kernel on (0, 1) with shape parameters alpha, beta."""

    alpha: float
    beta: float

    def __post_init__(self):
        _require(
            _finite(self.alpha) and self.alpha > 0.0,
            f"alpha must be positive, got {self.alpha}",
        )
        _require(
            _finite(self.beta) and self.beta > 0.0,
            f"beta must be positive, got {self.beta}",
        )

    def log_pdf(self, y):
        if y <= 0.0 or y >= 1.0:
            return _NEG_INF
        a, b = self.alpha, self.beta
        log_norm = math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        return log_norm + (a - 1.0) * math.log(y) + (b - 1.0) * math.log1p(-y)

    def log_cdf(self, y):
        if y <= 0.0:
            return _NEG_INF
        if y >= 1.0:
            return 0.0
        cdf = float(sc.betainc(self.alpha, self.beta, y))
        if cdf <= 0.0:
            return _NEG_INF
        return math.log(min(cdf, 1.0))

    def log_sf(self, y):
        if y <= 0.0:
            return 0.0
        if y >= 1.0:
            return _NEG_INF
        sf = float(sc.betainc(self.beta, self.alpha, 1.0 - y))
        if sf <= 0.0:
            return _NEG_INF
        return math.log(min(sf, 1.0))

    def sample(self, rng):
        return rng.beta(self.alpha, self.beta)

    def _sample_truncated_impl(self, lower, upper, rng):
        lo = 0.0 if lower == _NEG_INF else max(0.0, min(lower, 1.0))
        hi = 1.0 if upper == math.inf else max(0.0, min(upper, 1.0))
        c_lo = float(sc.betainc(self.alpha, self.beta, lo))
        c_hi = float(sc.betainc(self.alpha, self.beta, hi))
        u = rng.uniform(c_lo, c_hi)
        return float(sc.betaincinv(self.alpha, self.beta, u))


@dataclass(frozen=True)
class HalfCauchy(Family):
    """Half-Cauchy kernel on [0, inf); used as a heavy-tailed scale prior."""

    scale: float

    def __post_init__(self):
        _require(
            _finite(self.scale) and self.scale > 0.0,
            f"scale must be positive, got {self.scale}",
        )

    def log_pdf(self, y):
        if y < 0.0 or not _finite(y):
            return _NEG_INF
        r = y / self.scale
        return math.log(2.0 / math.pi) - math.log(self.scale) - math.log1p(r * r)

    def log_cdf(self, y):
        if y <= 0.0:
            return _NEG_INF
        if y == math.inf:
            return 0.0
        return math.log(2.0 / math.pi * math.atan(y / self.scale))

    def log_sf(self, y):
        if y <= 0.0:
            return 0.0
        if y == math.inf:
            return _NEG_INF
        return math.log1p(-2.0 / math.pi * math.atan(y / self.scale))

    def sample(self, rng):
        return self.scale * abs(rng.standard_cauchy())

    def _sample_truncated_impl(self, lower, upper, rng):
        lo = max(lower, 0.0)
        c_lo = 0.0 if lo <= 0.0 else 2.0 / math.pi * math.atan(lo / self.scale)
        c_hi = 1.0 if upper == math.inf else 2.0 / math.pi * math.atan(upper / self.scale)
        u = rng.uniform(c_lo, c_hi)
        return self.scale * math.tan(0.5 * math.pi * u)


# ---------------------------------------------------------------------------
# Link functions
# ---------------------------------------------------------------------------

LinkFunction = str  # one of "identity", "logit", "cloglog", "probit"

_LINKS = ("identity", "logit", "cloglog", "probit")


def _check_link(link: str) -> None:
    if link not in _LINKS:
        raise ParameterError(f"unknown link {link!r}; expected one of {_LINKS}")


def link_apply(link: LinkFunction, p: float) -> float:
    """Map an incidence probability to the linear-predictor scale."""
    _check_link(link)
    if not 0.0 < p < 1.0:
        raise BoundaryError(f"link argument must lie strictly in (0, 1), got {p}")
    if link == "identity":
        return p
    if link == "logit":
        return math.log(p) - math.log1p(-p)
    if link == "cloglog":
        return math.log(-math.log1p(-p))
    return float(sc.ndtri(p))


def link_invert(link: LinkFunction, eta: float) -> float:
    """Map a linear predictor back to a probability in (0, 1).

    Outputs of the non-identity links are clamped to the standard
    probability band; float saturation would otherwise return exactly 0
    or 1 for |eta| beyond roughly 37.
    """
    _check_link(link)
    if link == "identity":
        return eta
    if link == "logit":
        return clamp_probability(float(sc.expit(eta)))
    if link == "cloglog":
        return clamp_probability(-math.expm1(-math.exp(min(eta, 700.0))))
    return clamp_probability(float(sc.ndtr(eta)))


# ---------------------------------------------------------------------------
# Bernoulli helpers and predictive divergences
# ---------------------------------------------------------------------------


def bernoulli_log_prob(z: int, p: float) -> float:
    """log Bernoulli(z; p) with the standard probability clamp applied."""
    p = clamp_probability(p)
    return math.log(p) if z == 1 else math.log1p(-p)


def bernoulli_kl(p: float, q: float) -> float:
    """KL(Bernoulli(p) || Bernoulli(q)), both arguments clamped."""
    p = clamp_probability(p)
    q = clamp_probability(q)
    return p * (math.log(p) - math.log(q)) + (1.0 - p) * (
        math.log1p(-p) - math.log1p(-q)
    )


def kl_divergence(f: Family, g: Family) -> float:
    """KL(f || g) between two kernels of the same family.

    Used by the optimism estimator, which cross-evaluates the per-row
    predictive distributions at paired posterior draws.
    """
    if type(f) is not type(g):
        raise ParameterError(
            f"KL divergence requires matching families, got {type(f).__name__} vs {type(g).__name__}"
        )
    if isinstance(f, Exponential):
        r = f.rate / g.rate
        return math.log(r) + 1.0 / r - 1.0
    if isinstance(f, Normal):
        var_f, var_g = 1.0 / f.precision, 1.0 / g.precision
        return 0.5 * (
            math.log(var_g / var_f)
            + (var_f + (f.mean - g.mean) ** 2) / var_g
            - 1.0
        )
    if isinstance(f, Binomial):
        if f.trials != g.trials:
            raise ParameterError("binomial KL requires equal trial counts")
        return f.trials * bernoulli_kl(f.prob, g.prob)
    raise ParameterError(f"no closed-form KL for family {type(f).__name__}")
