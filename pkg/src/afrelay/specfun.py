"""Numerical kernels: modified Bessel functions K0/K1, adaptive quadrature
and bracketed bisection.

Everything here works on numpy arrays; the integrands passed to the
quadrature routines must accept a 1-D array of abscissae and return an
array of the same shape.
"""
from dataclasses import dataclass

import numpy as np

from .errors import BracketError, ConvergenceError, DomainError

EULER_GAMMA = 0.57721566490153286061

# Power series below this argument, Steed's continued fraction above.
BESSEL_CROSSOVER = 2.0
_SERIES_TERMS = 22
_CF_MAXIT = 10000
_CF_EPS = 1e-16


def _harmonic(n):
    return sum(1.0 / k for k in range(1, n + 1))


# coefficients of the small-argument series, t = x^2/4
_K = np.arange(_SERIES_TERMS)
_FACT = np.array([float(np.prod(np.arange(1, k + 1))) for k in _K])
_C0 = 1.0 / _FACT**2  # t^k / (k!)^2
_C1 = 1.0 / (_FACT * _FACT * (_K + 1))  # t^k / (k! (k+1)!)
_H = np.array([_harmonic(int(k)) for k in _K])
_H1 = np.array([_harmonic(int(k) + 1) for k in _K])


def _k01_series(x):
    t = 0.25 * x * x
    powers = t[:, None] ** _K[None, :]
    i0 = powers @ _C0
    i1 = 0.5 * x * (powers @ _C1)
    lg = np.log(0.5 * x) + EULER_GAMMA
    k0 = -lg * i0 + powers @ (_H * _C0)
    k1 = 1.0 / x + lg * i1 - 0.25 * x * (powers @ ((_H + _H1) * _C1))
    return k0, k1


def _k01_scaled_cf(x):
    """Steed's CF2 for order zero; returns (e^x K0, e^x K1)."""
    b = 2.0 * (1.0 + x)
    d = 1.0 / b
    h = d.copy()
    delh = d.copy()
    q1 = np.zeros_like(x)
    q2 = np.ones_like(x)
    a1 = 0.25
    q = np.full_like(x, a1)
    c = np.full_like(x, a1)
    a = -a1
    s = 1.0 + q * delh
    for i in range(2, _CF_MAXIT):
        a -= 2 * (i - 1)
        c = -a * c / i
        qnew = (q1 - b * q2) / a
        q1 = q2
        q2 = qnew
        q = q + c * qnew
        b = b + 2.0
        d = 1.0 / (b + a * d)
        delh = (b * d - 1.0) * delh
        h = h + delh
        dels = q * delh
        s = s + dels
        if np.all(np.abs(dels) < _CF_EPS * np.abs(s)):
            break
    else:
        raise ConvergenceError("Bessel continued fraction did not converge")
    h = a1 * h
    k0e = np.sqrt(np.pi / (2.0 * x)) / s
    k1e = k0e * (x + 0.5 - h) / x
    return k0e, k1e


def _as_positive_array(x):
    arr = np.asarray(x, dtype=float)
    if np.any(~(arr > 0)):
        raise DomainError("modified Bessel K requires x > 0")
    return arr


def bessel_k01e(x):
    """Exponentially scaled pair ``(e^x K0(x), e^x K1(x))`` for x > 0."""
    arr = _as_positive_array(x)
    flat = np.atleast_1d(arr).ravel()
    k0e = np.empty_like(flat)
    k1e = np.empty_like(flat)
    small = flat <= BESSEL_CROSSOVER
    if np.any(small):
        xs = flat[small]
        k0, k1 = _k01_series(xs)
        scale = np.exp(xs)
        k0e[small] = k0 * scale
        k1e[small] = k1 * scale
    if np.any(~small):
        k0e[~small], k1e[~small] = _k01_scaled_cf(flat[~small])
    k0e = k0e.reshape(arr.shape)
    k1e = k1e.reshape(arr.shape)
    if arr.ndim == 0:
        return float(k0e), float(k1e)
    return k0e, k1e


def _unscaled(x, which):
    arr = _as_positive_array(x)
    flat = np.atleast_1d(arr).ravel()
    out = np.empty_like(flat)
    small = flat <= BESSEL_CROSSOVER
    if np.any(small):
        out[small] = _k01_series(flat[small])[which]
    if np.any(~small):
        xl = flat[~small]
        with np.errstate(under="ignore"):
            out[~small] = _k01_scaled_cf(xl)[which] * np.exp(-xl)
    out = out.reshape(arr.shape)
    return float(out) if arr.ndim == 0 else out


def bessel_k0(x):
    """Modified Bessel function of the second kind, order 0.

    Raises DomainError for x <= 0. Underflows to 0 for x beyond ~745.
    """
    return _unscaled(x, 0)


def bessel_k1(x):
    """Modified Bessel function of the second kind, order 1."""
    return _unscaled(x, 1)


# ---------------------------------------------------------------------------
# Quadrature
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QuadratureSpec:
    abs_tol: float = 1e-10
    rel_tol: float = 1e-8
    max_subdivisions: int = 4000

    def __post_init__(self):
        if not self.abs_tol > 0 or not self.rel_tol > 0:
            raise ValueError("quadrature tolerances must be positive")
        if int(self.max_subdivisions) < 1:
            raise ValueError("max_subdivisions must be >= 1")


DEFAULT_QUADRATURE = QuadratureSpec()

# Gauss-Kronrod 7/15 nodes and weights on [-1, 1]
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])
_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
_KWEIGHTS = np.concatenate([_WGK[:-1], _WGK[::-1]])
_GWEIGHTS = np.zeros(15)
# Gauss nodes are the odd-indexed Kronrod nodes (±xgk[1], ±xgk[3], ±xgk[5], 0)
_GWEIGHTS[[1, 3, 5]] = _WG[:3]
_GWEIGHTS[[13, 11, 9]] = _WG[:3]
_GWEIGHTS[7] = _WG[3]
_EPS = np.finfo(float).eps


def _gk15(f, lo, hi):
    """Apply the 15-point Kronrod rule to every panel [lo_i, hi_i] at once."""
    centre = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    x = centre[:, None] + half[:, None] * _NODES[None, :]
    fx = np.asarray(f(x.ravel()), dtype=float).reshape(x.shape)
    if not np.all(np.isfinite(fx)):
        raise ConvergenceError("integrand returned a non-finite value")
    kron = half * (fx @ _KWEIGHTS)
    gauss = half * (fx @ _GWEIGHTS)
    mean = kron / (2.0 * half)
    resasc = np.abs(half) * (np.abs(fx - mean[:, None]) @ _KWEIGHTS)
    resabs = np.abs(half) * (np.abs(fx) @ _KWEIGHTS)
    err = np.abs(kron - gauss)
    # QUADPACK error scaling
    with np.errstate(divide="ignore", invalid="ignore"):
        scaled = resasc * np.minimum(1.0, (200.0 * err / resasc) ** 1.5)
    err = np.where(resasc > 0, scaled, err)
    floor = 50.0 * _EPS * resabs
    err = np.where(resabs > np.finfo(float).tiny / (50 * _EPS),
                   np.maximum(err, floor), err)
    return kron, err


def _adaptive(f, a, b, spec):
    lo = np.array([a])
    hi = np.array([b])
    value, err = _gk15(f, lo, hi)
    while True:
        total = value.sum()
        total_err = err.sum()
        tol = max(spec.abs_tol, spec.rel_tol * abs(total))
        if total_err <= tol:
            return float(total)
        # bisect the worst panels until the untouched ones fit in half the budget
        order = np.argsort(-err, kind="stable")
        remaining = total_err - np.cumsum(err[order])
        n_split = int(np.searchsorted(-remaining, -0.5 * tol)) + 1
        if lo.size + n_split > spec.max_subdivisions:
            raise ConvergenceError(
                f"quadrature did not converge within {spec.max_subdivisions} "
                f"subdivisions (estimate {float(total)!r}, error {total_err:.3g})",
                estimate=float(total), error=float(total_err))
        split = np.zeros(lo.size, dtype=bool)
        split[order[:n_split]] = True
        mid = 0.5 * (lo[split] + hi[split])
        new_lo = np.concatenate([lo[split], mid])
        new_hi = np.concatenate([mid, hi[split]])
        new_value, new_err = _gk15(f, new_lo, new_hi)
        lo = np.concatenate([lo[~split], new_lo])
        hi = np.concatenate([hi[~split], new_hi])
        value = np.concatenate([value[~split], new_value])
        err = np.concatenate([err[~split], new_err])
        keep = np.argsort(lo, kind="stable")
        lo, hi, value, err = lo[keep], hi[keep], value[keep], err[keep]


def integrate_finite(f, a, b, spec=DEFAULT_QUADRATURE):
    """Adaptive Gauss-Kronrod (7/15) integral of ``f`` over [a, b].

    Global error control as in QUADPACK, but batched: each pass bisects the
    panels with the largest error estimates until the untouched panels hold
    at most half the error budget, and evaluates all new panels with a
    single call to ``f``.

    Raises ConvergenceError (carrying the best estimate) when the number of
    panels would exceed ``spec.max_subdivisions``.
    """
    a = float(a)
    b = float(b)
    if not a < b:
        raise DomainError("integrate_finite requires a < b")
    return _adaptive(f, a, b, spec)


def integrate_semi_infinite(f, a, spec=DEFAULT_QUADRATURE, scale=1.0):
    """Integral of ``f`` over [a, inf).

    Uses the substitution x = a + scale * t / (1 - t), t in [0, 1), so that
    dx = scale / (1 - t)^2 dt.  ``scale`` should be of the order of the decay
    length of ``f``; the default of 1 is the plain mapping.
    """
    a = float(a)
    if not scale > 0:
        raise DomainError("scale must be positive")

    def mapped(t):
        u = 1.0 - t
        return f(a + scale * t / u) * (scale / (u * u))

    return _adaptive(mapped, 0.0, 1.0, spec)


# ---------------------------------------------------------------------------
# Root finding
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RootBracket:
    lo: float
    hi: float
    tol: float = 1e-12

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError("bracket requires lo < hi")
        if not self.tol > 0:
            raise ValueError("bracket tolerance must be positive")


ROOT_METHODS = ("bisection", "illinois")
_ILLINOIS_MAXIT = 200


def find_root_monotone(f, bracket, method="bisection"):
    """Root of ``f`` inside ``bracket``, given a sign change at its ends.

    ``"bisection"`` halves the bracket each step.  ``"illinois"`` is the
    Illinois variant of regula falsi: it keeps a valid bracket like bisection
    but converges superlinearly, so it needs far fewer evaluations of an
    expensive ``f``.  Either way the result is the midpoint of a final
    sub-bracket no wider than ``bracket.tol`` (or an exact zero), and always
    lies inside [lo, hi].
    """
    if method not in ROOT_METHODS:
        raise DomainError(f"method must be one of {ROOT_METHODS}")
    lo, hi = float(bracket.lo), float(bracket.hi)
    flo = f(lo)
    if flo == 0:
        return lo
    fhi = f(hi)
    if fhi == 0:
        return hi
    if np.sign(flo) == np.sign(fhi):
        raise BracketError(
            f"f({lo!r})={flo!r} and f({hi!r})={fhi!r} have the same sign")
    # weights for the false-position step; halved when one end gets stuck
    wlo, whi = flo, fhi
    side = 0
    it = 0
    while hi - lo > bracket.tol:
        it += 1
        if method == "illinois" and it <= _ILLINOIS_MAXIT:
            x = (lo * whi - hi * wlo) / (whi - wlo)
            if not lo < x < hi:
                x = 0.5 * (lo + hi)
        else:
            x = 0.5 * (lo + hi)
            if x <= lo or x >= hi:
                break
        fx = f(x)
        if fx == 0:
            return x
        if np.sign(fx) == np.sign(flo):
            lo, flo, wlo = x, fx, fx
            if side == -1:
                whi *= 0.5
            side = -1
        else:
            hi, fhi, whi = x, fx, fx
            if side == 1:
                wlo *= 0.5
            side = 1
    return 0.5 * (lo + hi)
