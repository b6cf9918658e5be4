import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from afrelay.allocation import ConstraintSpec, PowerPolicy, QosContext, resolve_policy
from afrelay.capacity import (EffectiveCapacityResult, QosTailSpec, delay_tail,
                              effective_capacity_analytic, effective_capacity_mc,
                              ergodic_capacity_mc, hd_effective_capacity,
                              instantaneous_rate, queue_tail, theta_grid, waterfill_moment)
from afrelay.channel import LinkBudget
from afrelay.errors import DomainError

mpmath.mp.dps = 30


def closed_form_moment(gamma_t, gamma_bar, tt):
    """E{(1+mu gamma_eq)^-tt} of the water-filling rule via Meijer G functions."""
    z = mpmath.mpf(4) * gamma_t / gamma_bar
    s = 1 / (1 + mpmath.mpf(tt))
    g_a = lambda b: mpmath.meijerg([[], [0, mpmath.mpf(3) / 2]], [b, []], z)
    g_b = lambda b: mpmath.meijerg([[], [0, mpmath.mpf(1) / 2 + s]], [b, []], z)
    rp = mpmath.sqrt(mpmath.pi)
    return float(1
                 - rp * gamma_t / gamma_bar * (g_a([-1, 2, 0]) + g_a([-1, 1, 1]))
                 + rp / 4 * z ** ((1 + 2 * tt) / (1 + tt))
                 * (g_b([-1, 1 + s, -1 + s]) + g_b([-1, s, s])))


# -- small helpers ------------------------------------------------------------

def test_queue_tail_examples():
    assert queue_tail(0.3, 0.5, 0.0) == 0.3
    assert queue_tail(0.3, math.log(2), 1.0) == pytest.approx(0.15)
    assert queue_tail(1.0, 0.01, 100.0) == pytest.approx(math.exp(-1))
    with pytest.raises(DomainError):
        queue_tail(1.0, 0.1, -1.0)


def test_delay_tail_examples():
    assert delay_tail(QosTailSpec(0.2, 3.0), 0.1, 0.0) == 0.2
    assert delay_tail(QosTailSpec(0.5, 1.0), math.log(5), 1.0) == pytest.approx(0.1)
    spec1, spec2 = QosTailSpec(1.0, 1.0), QosTailSpec(1.0, 2.0)
    assert delay_tail(spec2, 0.3, 2.0) == pytest.approx(delay_tail(spec1, 0.3, 2.0) ** 2)
    with pytest.raises(DomainError):
        QosTailSpec(0.0, 1.0)
    with pytest.raises(DomainError):
        delay_tail(spec1, 0.1, -1.0)


def test_theta_grid():
    g = theta_grid()
    assert len(g) == 25 and g[0] == pytest.approx(1e-4) and g[-1] == pytest.approx(1e-1)
    assert np.allclose(np.diff(np.log(g)), np.log(g[1] / g[0]))
    with pytest.raises(DomainError):
        theta_grid(points=0)


def test_instantaneous_rate():
    ctx = QosContext(0.01)
    assert instantaneous_rate(1.0, ctx) == pytest.approx(100.0)
    assert instantaneous_rate(0.0, ctx) == 0.0
    assert instantaneous_rate(3.0, QosContext(0.01, frame_symbols_t=1)) == pytest.approx(100.0)
    with pytest.raises(DomainError):
        instantaneous_rate(-1.0, ctx)


# -- analytic path ------------------------------------------------------------

@pytest.mark.parametrize("gamma_t,gamma_bar,tt", [
    (0.5, 10.0, 1.44), (2.0, 10.0, 0.3), (0.05, 100.0, 5.0), (3.0, 100.0, 0.01)])
def test_moment_matches_meijer_closed_form(gamma_t, gamma_bar, tt):
    i1, i2, _ = waterfill_moment(gamma_t, gamma_bar, tt)
    assert i1 + i2 == pytest.approx(closed_form_moment(gamma_t, gamma_bar, tt), rel=1e-10)


@given(st.floats(1e-3, 10.0), st.floats(1e-3, 30.0))
def test_moment_in_unit_interval(u, tt):
    i1, i2, deficit = waterfill_moment(u * 10.0, 10.0, tt)
    assert 0 <= i1 <= 1 and 0 <= i2 <= 1 - i1 + 1e-12
    assert deficit == pytest.approx(1 - i1 - i2, abs=1e-12)


def test_analytic_small_theta_keeps_precision():
    # at theta = 1e-8 the deficit is ~1e-6; E_C must still be resolved to 1e-9
    ctx = QosContext(1e-8)
    gt = resolve_policy("optimal", LinkBudget.symmetric(10.0), ctx.tilde_theta)[1].gamma_t
    a = effective_capacity_analytic(gt, 10.0, ctx)
    b = effective_capacity_analytic(gt, 10.0, QosContext(2e-8))
    assert a.value > b.value > 0
    assert a.normalized == pytest.approx(a.value / 100.0)


def test_analytic_domain():
    with pytest.raises(DomainError):
        effective_capacity_analytic(0.0, 10.0, QosContext(0.01))


# -- Monte Carlo path ----------------------------------------------------------

BUDGET = LinkBudget.symmetric(10.0)
GRID = theta_grid(1e-4, 1e-1, 7)


def _policies(ctx):
    weak = ConstraintSpec("weak", "long_term", 10 ** 0.8)
    return {
        "optimal": resolve_policy("optimal", BUDGET, ctx.tilde_theta, weak)[0],
        "constant": resolve_policy("constant", BUDGET, ctx.tilde_theta)[0],
        "truncated_inversion": resolve_policy("truncated_inversion", BUDGET,
                                              ctx.tilde_theta, weak)[0],
    }


@pytest.mark.parametrize("kind", ["optimal", "constant", "truncated_inversion"])
def test_ec_nonincreasing_in_theta(kind):
    vals, ses = [], []
    for th in GRID:
        ctx = QosContext(float(th))
        r = effective_capacity_mc(_policies(ctx)[kind], BUDGET, ctx, 2 * 10**5, seed=5)
        vals.append(r.value)
        ses.append(r.std_error)
    for k in range(len(vals) - 1):
        assert vals[k + 1] <= vals[k] + 3 * math.hypot(ses[k], ses[k + 1])


def test_fixed_policy_is_exactly_monotone_on_common_sample():
    pol = PowerPolicy("constant")
    vals = [effective_capacity_mc(pol, BUDGET, QosContext(float(t)), 10**5, seed=1).value
            for t in GRID]
    assert all(b <= a for a, b in zip(vals, vals[1:]))


@pytest.mark.parametrize("theta", [1e-3, 3e-2])
def test_ec_below_ergodic(theta):
    ctx = QosContext(theta)
    pol = _policies(ctx)["optimal"]
    ec = effective_capacity_mc(pol, BUDGET, ctx, 2 * 10**5, seed=2)
    erg = ergodic_capacity_mc(pol, BUDGET, ctx, 2 * 10**5, seed=2)
    assert ec.value <= erg.value + 3 * math.hypot(ec.std_error, erg.std_error)


def test_weak_long_term_monotone_in_q0():
    ctx = QosContext(0.01)
    vals = []
    for q0_db in (0.0, 5.0, 8.0, 10.0, 15.0):
        c = ConstraintSpec("weak", "long_term", 10 ** (q0_db / 10))
        _, sol = resolve_policy("optimal", BUDGET, ctx.tilde_theta, c)
        vals.append(effective_capacity_analytic(sol.gamma_t, 10.0, ctx).value)
    assert all(b >= a - 1e-9 for a, b in zip(vals, vals[1:]))
    assert vals[-1] == pytest.approx(vals[-2], rel=1e-9)


@pytest.mark.parametrize("theta", [1e-4, 5e-3, 1e-1])
def test_mc_agrees_with_analytic(theta):
    ctx = QosContext(theta)
    _, sol = resolve_policy("optimal", BUDGET, ctx.tilde_theta,
                            ConstraintSpec("weak", "long_term", 10 ** 0.5))
    pol = PowerPolicy("optimal", ConstraintSpec("weak", "long_term", 10 ** 0.5),
                      sol.gamma_t, ctx.tilde_theta)
    mc = effective_capacity_mc(pol, BUDGET, ctx, 10**6, seed=8)
    an = effective_capacity_analytic(sol.gamma_t, 10.0, ctx)
    assert abs(mc.value - an.value) <= max(0.02 * an.value, 4 * mc.std_error)


def test_mc_chunking_and_seed():
    pol = PowerPolicy("constant")
    ctx = QosContext(0.01)
    a = effective_capacity_mc(pol, BUDGET, ctx, 5000, seed=3, chunk=1024)
    b = effective_capacity_mc(pol, BUDGET, ctx, 5000, seed=3, chunk=1024)
    assert a == b
    assert isinstance(a, EffectiveCapacityResult) and a.sample_count == 5000
    assert a.normalized_std_error == pytest.approx(a.std_error / 100.0)
    with pytest.raises(DomainError):
        effective_capacity_mc(pol, BUDGET, ctx, 10)


def test_exact_snr_matches_approximation_at_unit_power():
    # mu = 1 leaves nothing for the approximation to move
    ctx = QosContext(0.01)
    pol = _policies(ctx)["constant"]
    approx = effective_capacity_mc(pol, BUDGET, ctx, 10**5, seed=4, model="af")
    exact = effective_capacity_mc(pol, BUDGET, ctx, 10**5, seed=4, model="af", exact_snr=True)
    assert exact.value == pytest.approx(approx.value, rel=1e-12)


def test_hd_baseline_uses_half_rate():
    ctx = QosContext(1e-4)
    hd = hd_effective_capacity(BUDGET, ctx, 2 * 10**5, seed=6)
    pol = resolve_policy("hd_baseline", BUDGET, ctx.tilde_theta)[0]
    fd = effective_capacity_mc(pol, BUDGET, ctx, 2 * 10**5, seed=6)
    # at small theta E_C is close to the ergodic rate, halved by the two-slot frame
    assert hd.value == pytest.approx(fd.value / 2, rel=0.01)


def test_exact_snr_gap_is_reported():
    ctx = QosContext(0.01)
    pol = _policies(ctx)["optimal"]
    approx = effective_capacity_mc(pol, BUDGET, ctx, 10**5, seed=4, model="af")
    exact = effective_capacity_mc(pol, BUDGET, ctx, 10**5, seed=4, model="af", exact_snr=True)
    assert exact.value != approx.value
    assert abs(exact.value - approx.value) < 0.5 * approx.value
