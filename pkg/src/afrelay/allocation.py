"""Relay power policies under inter-relay interference (IRI) constraints.

The optimal policies all share the water-filling shape

    mu(g) = (1/g) * ((g/gamma_t)^(1/(tt+1)) - 1)   for g >= gamma_t, else 0,

with ``tt`` the normalised QoS exponent.  What differs between the four
constraint regimes is how the cutoff ``gamma_t`` is found and, for the
per-sample (short-term) regimes, whether the IRI cap ``q0/gamma_ir`` clips
the allocation from above (weak) or lifts it from below (strong).
"""
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import special

from .channel import DEFAULT_SNR_MODEL, LinkBudget, sample_fading
from .errors import (BracketError, DomainError, InfeasibleConstraintError,
                     UnresolvedPolicyError)
from .specfun import (QuadratureSpec, RootBracket, find_root_monotone,
                      integrate_semi_infinite)
from .channel import pdf_gamma_eq

STRENGTHS = ("weak", "strong")
HORIZONS = ("short_term", "long_term")
POLICY_KINDS = ("optimal", "constant", "truncated_inversion", "hd_baseline")

# fixed stream used to make the short-term root function deterministic
SOLVER_SEED = 20240917
SOLVER_SAMPLES = 10**6

_SOLVER_QUAD = QuadratureSpec(abs_tol=1e-13, rel_tol=1e-11, max_subdivisions=4000)
_BRACKET = (1e-8, 1e3)  # relative to gamma_bar
_MAX_EXPANSIONS = 6
_LOG_TOL = 1e-11
# (q0/g)*g may differ from q0 by an ulp or two
IRI_RTOL = 8 * np.finfo(float).eps


def tilde_theta(theta, b, t0, t=None):
    """Dimensionless exponent theta * B * (T/(T+1)) * T0 / ln 2.

    ``t=None`` stands for the asymptotic frame length, T/(T+1) = 1.
    """
    if not (theta > 0 and b > 0 and t0 > 0):
        raise DomainError("theta, bandwidth and symbol time must be positive")
    return theta * b * rate_factor(t) * t0 / math.log(2.0)


def rate_factor(t=None):
    if t is None:
        return 1.0
    if int(t) < 1:
        raise DomainError("frame length must be >= 1 symbol")
    return t / (t + 1.0)


@dataclass(frozen=True)
class QosContext:
    theta: float
    bandwidth_b: float = 1e5
    symbol_time_t0: float = 1e-3
    frame_symbols_t: int = None  # None: asymptotic, T/(T+1) = 1

    def __post_init__(self):
        if not self.theta > 0:
            raise DomainError("theta must be positive")
        rate_factor(self.frame_symbols_t)

    @property
    def rate_factor(self):
        return rate_factor(self.frame_symbols_t)

    @property
    def tilde_theta(self):
        return tilde_theta(self.theta, self.bandwidth_b, self.symbol_time_t0,
                           self.frame_symbols_t)

    @property
    def frame_scale(self):
        """B * T0: bits per unit of log2(1 + snr)."""
        return self.bandwidth_b * self.symbol_time_t0

    def with_theta(self, theta):
        return replace(self, theta=theta)

    def half_duplex(self):
        # two slots per symbol: T/(T+1) with T = 1
        return replace(self, frame_symbols_t=1)


@dataclass(frozen=True)
class ConstraintSpec:
    strength: str
    horizon: str
    q0: float

    def __post_init__(self):
        if self.strength not in STRENGTHS:
            raise DomainError(f"strength must be one of {STRENGTHS}")
        if self.horizon not in HORIZONS:
            raise DomainError(f"horizon must be one of {HORIZONS}")
        if not self.q0 > 0:
            raise DomainError("q0 must be positive")

    @classmethod
    def parse(cls, name, q0):
        """Build from a selector such as ``"weak-long"`` or ``"strong-short"``."""
        try:
            strength, horizon = name.split("-")
        except ValueError:
            raise DomainError(f"bad constraint selector {name!r}") from None
        return cls(strength, f"{horizon}_term", q0)

    @property
    def selector(self):
        return f"{self.strength}-{self.horizon.split('_')[0]}"


@dataclass(frozen=True)
class CutoffSolution:
    gamma_t: float
    achieved_mean_mu: float
    achieved_mean_mu_gamma_ir: float
    solver_residual: float
    target_mean_mu: float = 1.0


@dataclass(frozen=True)
class PowerPolicy:
    kind: str
    constraint: ConstraintSpec = None
    cutoff_gamma_t: float = None
    tilde_theta: float = 0.0

    def __post_init__(self):
        if self.kind not in POLICY_KINDS:
            raise DomainError(f"policy kind must be one of {POLICY_KINDS}")
        if self.kind == "truncated_inversion" and self.constraint is None:
            raise DomainError("truncated inversion needs a constraint carrying q0")

    @property
    def needs_cutoff(self):
        return self.kind != "constant"

    def with_cutoff(self, gamma_t):
        return replace(self, cutoff_gamma_t=gamma_t)


# ---------------------------------------------------------------------------
# Pointwise rules
# ---------------------------------------------------------------------------

def mu_waterfill(gamma_eq, gamma_t, tilde_theta):
    """Water-filling power coefficient, zero below the cutoff ``gamma_t``."""
    if not gamma_t > 0:
        raise DomainError("gamma_t must be positive")
    g = np.asarray(gamma_eq, dtype=float)
    above = g >= gamma_t
    safe = np.where(above, g, gamma_t)
    out = np.where(above,
                   np.expm1(np.log(safe / gamma_t) / (tilde_theta + 1.0)) / safe,
                   0.0)
    return out if out.ndim else float(out)


def gamma_ir_star(gamma_eq, gamma_t, tilde_theta, q0):
    """IRI-link SNR at which the cap q0/gamma_ir equals the water-filling level."""
    mu = np.asarray(mu_waterfill(gamma_eq, gamma_t, tilde_theta))
    if np.any(mu <= 0):
        raise DomainError("gamma_ir_star is undefined where the water-filling "
                          "power is zero (gamma_eq <= gamma_t)")
    out = q0 / mu
    return out if out.ndim else float(out)


def _iri_level(q0, gamma_ir):
    with np.errstate(divide="ignore"):
        return q0 / np.asarray(gamma_ir, dtype=float)


def _short_term_mu(gamma_eq, gamma_ir, gamma_t, tt, constraint):
    w = mu_waterfill(gamma_eq, gamma_t, tt)
    cap = _iri_level(constraint.q0, gamma_ir)
    mixed = np.minimum(w, cap) if constraint.strength == "weak" else np.maximum(w, cap)
    return np.where(np.asarray(gamma_eq) >= gamma_t, mixed, 0.0)


def _truncated_inversion_mu(gamma_ir, gamma_t, q0):
    g = np.asarray(gamma_ir, dtype=float)
    return np.where(g >= gamma_t, _iri_level(q0, np.where(g > 0, g, 1.0)), 0.0)


def allocate(sample, policy):
    """Power coefficient mu0 for every draw in ``sample`` under ``policy``."""
    if policy.kind == "constant":
        out = np.ones_like(np.asarray(sample.gamma_eq, dtype=float))
        return out if out.ndim else float(out)
    if policy.cutoff_gamma_t is None:
        raise UnresolvedPolicyError(f"{policy.kind} policy has no cutoff")
    gt = policy.cutoff_gamma_t
    c = policy.constraint
    if policy.kind == "truncated_inversion":
        out = _truncated_inversion_mu(sample.gamma_ir, gt, c.q0)
    elif policy.kind == "optimal" and c is not None and c.horizon == "short_term":
        out = _short_term_mu(sample.gamma_eq, sample.gamma_ir, gt, policy.tilde_theta, c)
    else:
        out = mu_waterfill(sample.gamma_eq, gt, policy.tilde_theta)
    out = np.asarray(out)
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# Cutoff solvers
# ---------------------------------------------------------------------------

def _solve_log_cutoff(excess, gamma_bar):
    """Root in log(gamma_t) of a decreasing ``excess``; widens the bracket."""
    lo = math.log(_BRACKET[0] * gamma_bar)
    hi = math.log(_BRACKET[1] * gamma_bar)
    widen = math.log(1e3)
    for _ in range(_MAX_EXPANSIONS):
        f_lo, f_hi = excess(lo), excess(hi)
        if f_lo >= 0 >= f_hi:
            break
        if f_lo < 0:
            lo -= widen
        if f_hi > 0:
            hi += widen
    else:
        raise BracketError("could not bracket the cutoff threshold")
    return math.exp(find_root_monotone(excess, RootBracket(lo, hi, _LOG_TOL), "illinois"))


def long_term_target(constraint, gamma_bar_ir):
    """Mean-power target: q0/gamma_bar when a weak constraint binds, else 1."""
    if constraint is None or constraint.strength == "strong":
        return 1.0
    return min(constraint.q0 / gamma_bar_ir, 1.0)


def mean_mu_long_term(gamma_t, gamma_bar, tt, quad=_SOLVER_QUAD):
    """E{mu} of the water-filling rule, integrated against the gamma_eq density."""
    return integrate_semi_infinite(
        lambda x: mu_waterfill(x, gamma_t, tt) * pdf_gamma_eq(x, gamma_bar),
        gamma_t, quad, scale=0.5 * gamma_bar)


def solve_cutoff_long_term(constraint, gamma_bar, tt, gamma_bar_ir=None):
    """Cutoff for the long-term (average) IRI constraints.

    ``constraint=None`` is the unconstrained problem E{mu} = 1.  Weak
    constraints target min(q0/gamma_bar, 1); strong constraints target 1 and
    are infeasible for q0 > gamma_bar.
    """
    gamma_bar_ir = gamma_bar if gamma_bar_ir is None else gamma_bar_ir
    if constraint is not None:
        if constraint.horizon != "long_term":
            raise DomainError("solve_cutoff_long_term needs a long-term constraint")
        if constraint.strength == "strong" and constraint.q0 > gamma_bar_ir:
            raise InfeasibleConstraintError(
                f"strong long-term constraint q0={constraint.q0:g} exceeds "
                f"the average IRI SNR {gamma_bar_ir:g}")
    target = long_term_target(constraint, gamma_bar_ir)

    def excess(u):
        return mean_mu_long_term(math.exp(u), gamma_bar, tt) - target

    gamma_t = _solve_log_cutoff(excess, gamma_bar)
    achieved = mean_mu_long_term(gamma_t, gamma_bar, tt)
    return CutoffSolution(gamma_t=gamma_t, achieved_mean_mu=achieved,
                          achieved_mean_mu_gamma_ir=achieved * gamma_bar_ir,
                          solver_residual=abs(achieved - target),
                          target_mean_mu=target)


def _weak_short_term_moments(gamma_t, q0, gamma_bar, gamma_bar_ir, tt, quad):
    """(E{mu}, E{mu gamma_ir}) of the weak per-sample rule by quadrature.

    gamma_ir is exponential and independent of gamma_eq, so the expectation
    of min(w, q0/gamma_ir) over gamma_ir is closed-form in u = q0/(w gbar_ir):
        E{mu | w}          = w (1 - e^-u) + (q0/gbar_ir) E1(u)
        E{mu gamma_ir | w} = w gbar_ir (1 - (1+u) e^-u) + q0 e^-u
    which leaves a single integral over gamma_eq.
    """
    def inner(x, which):
        w = np.asarray(mu_waterfill(x, gamma_t, tt))
        on = w > 0
        with np.errstate(divide="ignore", over="ignore"):
            u = np.where(on, q0 / np.where(on, w, 1.0) / gamma_bar_ir, np.inf)
        tail = np.exp(-u)
        if which == 0:
            val = -w * np.expm1(-u) + q0 / gamma_bar_ir * special.exp1(u)
        else:
            # 1 - (1+u) e^-u, written to avoid cancellation at small u
            head = -np.expm1(-u) - u * tail
            val = w * gamma_bar_ir * head + q0 * tail
        return np.where(on, val, 0.0) * pdf_gamma_eq(x, gamma_bar)

    return tuple(integrate_semi_infinite(lambda x: inner(x, k), gamma_t, quad,
                                         scale=0.5 * gamma_bar) for k in (0, 1))


def mean_mu_short_term_weak(gamma_t, q0, gamma_bar, tt, gamma_bar_ir=None,
                            quad=_SOLVER_QUAD):
    """E{mu} of the weak per-sample rule at cutoff ``gamma_t``."""
    gamma_bar_ir = gamma_bar if gamma_bar_ir is None else gamma_bar_ir
    return _weak_short_term_moments(gamma_t, q0, gamma_bar, gamma_bar_ir, tt, quad)[0]


def solve_cutoff_short_term(constraint, gamma_bar, tt, gamma_bar_ir=None,
                            n=SOLVER_SAMPLES, seed=SOLVER_SEED,
                            model=DEFAULT_SNR_MODEL):
    """Cutoff for the per-sample IRI constraints, from E{mu} = 1.

    Weak: the gamma_ir expectation is done in closed form and the rest by
    quadrature, so the cutoff is exact to solver tolerance.

    Strong: E{q0/gamma_ir} diverges under Rayleigh fading, so E{mu} is
    infinite for every finite cutoff and the equation has no exact root.
    The sample mean over one fixed stream of ``n`` draws is used instead;
    the cutoff it gives depends on ``n`` and ``seed``, and the true mean
    power of the resulting policy is unbounded.
    """
    if constraint.horizon != "short_term":
        raise DomainError("solve_cutoff_short_term needs a short-term constraint")
    gamma_bar_ir = gamma_bar if gamma_bar_ir is None else gamma_bar_ir
    q0 = constraint.q0

    if constraint.strength == "weak":
        def excess(u):
            return mean_mu_short_term_weak(math.exp(u), q0, gamma_bar, tt, gamma_bar_ir) - 1.0

        try:
            gamma_t = _solve_log_cutoff(excess, gamma_bar)
        except BracketError as exc:
            raise InfeasibleConstraintError(
                f"weak short-term q0={q0:g} needs a cutoff below the search range") from exc
        achieved, achieved_iri = _weak_short_term_moments(
            gamma_t, q0, gamma_bar, gamma_bar_ir, tt, _SOLVER_QUAD)
        return CutoffSolution(gamma_t=gamma_t, achieved_mean_mu=achieved,
                              achieved_mean_mu_gamma_ir=achieved_iri,
                              solver_residual=abs(achieved - 1.0))

    budget = LinkBudget(gamma_bar, gamma_bar, gamma_bar_ir)
    s = sample_fading(budget, n, seed, model=model)
    g_eq, g_ir = s.gamma_eq, s.gamma_ir

    def mean_mu(gamma_t):
        return float(np.mean(_short_term_mu(g_eq, g_ir, gamma_t, tt, constraint)))

    gamma_t = _solve_log_cutoff(lambda u: mean_mu(math.exp(u)) - 1.0, gamma_bar)
    mu = _short_term_mu(g_eq, g_ir, gamma_t, tt, constraint)
    achieved = float(np.mean(mu))
    return CutoffSolution(gamma_t=gamma_t, achieved_mean_mu=achieved,
                          achieved_mean_mu_gamma_ir=float(np.mean(mu * g_ir)),
                          solver_residual=abs(achieved - 1.0))


def mean_mu_truncated_inversion(gamma_t, q0, gamma_bar_ir, quad=_SOLVER_QUAD):
    """E{mu} for truncated channel inversion: (q0/gamma_bar) * E1(gamma_t/gamma_bar)."""
    return integrate_semi_infinite(
        lambda x: q0 / x * np.exp(-x / gamma_bar_ir) / gamma_bar_ir,
        gamma_t, quad, scale=gamma_bar_ir)


def solve_cutoff_truncated_inversion(q0, gamma_bar_ir):
    """Cutoff on gamma_ir such that the inversion policy has E{mu} = 1."""
    if not math.isfinite(q0):
        raise DomainError("truncated inversion needs a finite q0")

    def excess(u):
        return mean_mu_truncated_inversion(math.exp(u), q0, gamma_bar_ir) - 1.0

    gamma_t = _solve_log_cutoff(excess, gamma_bar_ir)
    achieved = mean_mu_truncated_inversion(gamma_t, q0, gamma_bar_ir)
    # mu * gamma_ir = q0 wherever the relay transmits
    outage = -math.expm1(-gamma_t / gamma_bar_ir)
    return CutoffSolution(gamma_t=gamma_t, achieved_mean_mu=achieved,
                          achieved_mean_mu_gamma_ir=q0 * (1.0 - outage),
                          solver_residual=abs(achieved - 1.0))


def resolve_policy(kind, budget, tt, constraint=None, **solver_kw):
    """Build a ready-to-use PowerPolicy and its cutoff solution.

    ``constraint`` selects the regime for ``kind="optimal"``; ``None`` means
    no IRI constraint.  ``hd_baseline`` ignores the constraint and is solved
    with E{mu} = 1 at the exponent ``tt`` it is given (callers pass the
    half-duplex exponent).
    """
    gamma_bar = budget.gamma_bar
    if kind == "constant":
        return PowerPolicy("constant", constraint, None, tt), None
    if kind == "truncated_inversion":
        if constraint is None:
            raise DomainError("truncated inversion needs q0")
        sol = solve_cutoff_truncated_inversion(constraint.q0, budget.gamma_bar_ir)
    elif kind == "hd_baseline":
        constraint = None
        sol = solve_cutoff_long_term(None, gamma_bar, tt, budget.gamma_bar_ir)
    elif kind == "optimal":
        if constraint is not None and constraint.horizon == "short_term":
            sol = solve_cutoff_short_term(constraint, gamma_bar, tt,
                                          budget.gamma_bar_ir, **solver_kw)
        else:
            sol = solve_cutoff_long_term(constraint, gamma_bar, tt, budget.gamma_bar_ir)
    else:
        raise DomainError(f"unknown policy kind {kind!r}")
    return PowerPolicy(kind, constraint, sol.gamma_t, tt), sol


def constraint_report(sample, policy):
    """Empirical mean-power and IRI statistics of ``policy`` on ``sample``.

    For the strong short-term rule the draws below the cutoff get mu = 0 and
    so cannot meet mu*gamma_ir >= q0; they are counted separately as
    ``exempt_fraction`` rather than as violations.
    """
    mu = np.asarray(allocate(sample, policy), dtype=float)
    iri = mu * sample.gamma_ir
    n = mu.size
    rep = {
        "n": n,
        "mean_mu": float(mu.mean()),
        "mean_mu_se": float(mu.std(ddof=1) / math.sqrt(n)),
        "mean_iri": float(iri.mean()),
        "mean_iri_se": float(iri.std(ddof=1) / math.sqrt(n)),
        "violation_fraction": 0.0,
        "exempt_fraction": 0.0,
    }
    c = policy.constraint
    if c is None or policy.kind != "optimal" or c.horizon != "short_term":
        return rep
    if c.strength == "weak":
        rep["violation_fraction"] = float(np.mean(iri > c.q0 * (1 + IRI_RTOL)))
    else:
        active = sample.gamma_eq >= policy.cutoff_gamma_t
        rep["violation_fraction"] = float(
            np.mean(active & (iri < c.q0 * (1 - IRI_RTOL))))
        rep["exempt_fraction"] = float(np.mean(~active))
    return rep
