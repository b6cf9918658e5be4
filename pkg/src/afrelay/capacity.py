"""Effective capacity of the relay link.

E_C(theta) = -(1/theta) ln E{(1 + snr)^(-tt)}, with snr = mu0 * gamma_eq and
tt the normalised exponent of ``QosContext``.  Values are in bits per slot
(the rate carries the factor B*T0); ``normalized`` divides that factor out.
"""
import math
from dataclasses import dataclass

import numpy as np

from .allocation import allocate, resolve_policy
from .channel import (DEFAULT_CHUNK, DEFAULT_SNR_MODEL, boosted_equivalent_snr,
                      cdf_gamma_eq, iter_fading, pdf_gamma_eq)
from .errors import DegenerateResultError, DomainError
from .specfun import QuadratureSpec, integrate_semi_infinite

MIN_MC_SAMPLES = 1000
ANALYTIC_QUAD = QuadratureSpec(abs_tol=1e-15, rel_tol=1e-11, max_subdivisions=4000)


@dataclass(frozen=True)
class EffectiveCapacityResult:
    value: float
    normalized: float
    theta: float
    method: str
    std_error: float = None
    sample_count: int = None

    @property
    def normalized_std_error(self):
        if self.std_error is None:
            return None
        return self.std_error * self.normalized / self.value if self.value else 0.0


@dataclass(frozen=True)
class QosTailSpec:
    epsilon: float
    delta: float

    def __post_init__(self):
        if not 0 < self.epsilon <= 1:
            raise DomainError("epsilon must lie in (0, 1]")
        if not self.delta > 0:
            raise DomainError("delta must be positive")


def theta_grid(theta_min=1e-4, theta_max=1e-1, points=25):
    """Log-spaced QoS exponents (1/bit)."""
    if points < 1 or not 0 < theta_min <= theta_max:
        raise DomainError("theta grid needs points >= 1 and 0 < min <= max")
    return np.logspace(math.log10(theta_min), math.log10(theta_max), int(points))


def instantaneous_rate(gamma, ctx):
    """Bits carried in one slot: B * T/(T+1) * T0 * log2(1 + gamma)."""
    gamma = np.asarray(gamma, dtype=float)
    if np.any(gamma < 0):
        raise DomainError("SNR must be nonnegative")
    out = ctx.frame_scale * ctx.rate_factor * np.log1p(gamma) / math.log(2.0)
    return out if out.ndim else float(out)


def queue_tail(eps, theta, q):
    """Approximate buffer overflow probability Pr{Q > q} = eps * exp(-theta q)."""
    if q < 0:
        raise DomainError("queue threshold must be nonnegative")
    return eps * math.exp(-theta * q)


def delay_tail(spec, theta, d):
    """Approximate delay violation probability Pr{D > d} = eps * exp(-theta delta d)."""
    if d < 0:
        raise DomainError("delay bound must be nonnegative")
    return spec.epsilon * math.exp(-theta * spec.delta * d)


def _policy_snr(sample, policy, exact_snr, model):
    mu = allocate(sample, policy)
    if exact_snr:
        return boosted_equivalent_snr(sample.gamma_sr, sample.gamma_rd, mu, model)
    return mu * sample.gamma_eq


class _Moments:
    """Running mean and sum of squared deviations, merged chunk by chunk."""

    def __init__(self):
        self.n = 0
        self.mean = 0.0
        self.m2 = 0.0

    def add(self, values):
        k = values.size
        if k == 0:
            return
        mean_k = float(np.mean(values))
        m2_k = float(np.sum((values - mean_k) ** 2))
        delta = mean_k - self.mean
        total = self.n + k
        self.mean += delta * k / total
        self.m2 += m2_k + delta * delta * self.n * k / total
        self.n = total

    @property
    def std_error(self):
        return math.sqrt(self.m2 / (self.n - 1) / self.n)


def effective_capacity_mc(policy, budget, ctx, n=10**6, seed=0, *,
                          exact_snr=False, model=DEFAULT_SNR_MODEL,
                          chunk=DEFAULT_CHUNK):
    """Monte Carlo effective capacity of ``policy``.

    By default the relay power multiplies gamma_eq (the same approximation
    the optimal policies are derived under).  ``exact_snr=True`` instead
    feeds mu0 into the two-hop SNR formula; the difference between the two
    is the approximation gap.  The standard error comes from the delta method
    on the inner sample mean.
    """
    if n < MIN_MC_SAMPLES:
        raise DomainError(f"need at least {MIN_MC_SAMPLES} samples")
    tt = ctx.tilde_theta
    shifted, raw = _Moments(), _Moments()
    for sample in iter_fading(budget, n, seed, chunk, model):
        log_term = -tt * np.log1p(_policy_snr(sample, policy, exact_snr, model))
        # (1+snr)^-tt - 1 keeps precision as theta -> 0; the raw power keeps
        # it when the moment itself is tiny (large theta)
        shifted.add(np.expm1(log_term))
        raw.add(np.exp(log_term))
    if raw.mean <= 0.0:
        raise DegenerateResultError("E{(1+snr)^-tt} underflowed to zero")
    if raw.mean < 0.5:
        moment, acc = raw.mean, raw
        value = -math.log(moment) / ctx.theta
    else:
        moment, acc = 1.0 + shifted.mean, shifted
        value = -math.log1p(shifted.mean) / ctx.theta
    se = acc.std_error / (ctx.theta * moment)
    return EffectiveCapacityResult(value=value, normalized=value / ctx.frame_scale,
                                   theta=ctx.theta, method="monte_carlo",
                                   std_error=se, sample_count=acc.n)


def ergodic_capacity_mc(policy, budget, ctx, n=10**6, seed=0, *,
                        exact_snr=False, model=DEFAULT_SNR_MODEL,
                        chunk=DEFAULT_CHUNK):
    """Sample mean of the slot rate; the theta -> 0 limit of E_C."""
    acc = _Moments()
    for sample in iter_fading(budget, n, seed, chunk, model):
        acc.add(instantaneous_rate(_policy_snr(sample, policy, exact_snr, model), ctx))
    return EffectiveCapacityResult(value=acc.mean, normalized=acc.mean / ctx.frame_scale,
                                   theta=ctx.theta, method="ergodic_monte_carlo",
                                   std_error=acc.std_error, sample_count=acc.n)


def outage_integral(gamma_t, gamma_bar):
    """Probability that gamma_eq falls below the cutoff (zero relay power)."""
    return cdf_gamma_eq(gamma_t, gamma_bar)


def waterfill_moment(gamma_t, gamma_bar, tt, quad=ANALYTIC_QUAD):
    """E{(1 + mu0 gamma_eq)^-tt} for the water-filling rule, as (I1, I2).

    I1 is the outage probability and I2 the integral of
    (x/gamma_t)^(-tt/(1+tt)) against the gamma_eq density above the cutoff.
    """
    a = tt / (1.0 + tt)
    i1 = outage_integral(gamma_t, gamma_bar)
    # I2 = (1 - I1) - D with D the integral of 1 - (x/gamma_t)^-a; D is
    # computed directly so that small tt keeps its relative precision
    deficit = integrate_semi_infinite(
        lambda x: -np.expm1(-a * np.log(x / gamma_t)) * pdf_gamma_eq(x, gamma_bar),
        gamma_t, quad, scale=0.5 * gamma_bar)
    # rounding can push a vanishing I2 a hair below zero
    i2 = max((1.0 - i1) - deficit, 0.0)
    return i1, i2, deficit


def effective_capacity_analytic(gamma_t, gamma_bar, ctx, quad=ANALYTIC_QUAD):
    """Effective capacity of a long-term water-filling policy by quadrature.

    ``gamma_t`` must come from a long-term cutoff solver at the same
    exponent, since the integrand uses the water-filling rule.
    """
    if not (gamma_t > 0 and gamma_bar > 0):
        raise DomainError("gamma_t and gamma_bar must be positive")
    tt = ctx.tilde_theta
    _, _, deficit = waterfill_moment(gamma_t, gamma_bar, tt, quad)
    if deficit >= 1.0:
        raise DegenerateResultError("E{(1+snr)^-tt} is not positive")
    value = -math.log1p(-deficit) / ctx.theta
    return EffectiveCapacityResult(value=value, normalized=value / ctx.frame_scale,
                                   theta=ctx.theta, method="analytic_quadrature")


def hd_effective_capacity(budget, ctx, n=10**6, seed=0, **mc_kw):
    """Half-duplex two-hop baseline: rate factor 1/2, no IRI constraint.

    The relay still water-fills, with its cutoff set by E{mu0} = 1 at the
    half-duplex exponent.
    """
    hd = ctx.half_duplex()
    policy, _ = resolve_policy("hd_baseline", budget, hd.tilde_theta)
    return effective_capacity_mc(policy, budget, hd, n, seed, **mc_kw)
