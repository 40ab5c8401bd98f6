import math

import numpy as np
import pytest

from drawdown_lab.closedform import BrownianParams, bes3_drawdown_lt, bm_provider
from drawdown_lab.errors import DomainViolation, HorizonTooShort
from drawdown_lab.mc import (EV_FIRST, OCC_X_BELOW, STOP_DD, STOP_DD_DU, SimConfig, StoppingRule,
                             estimate_law, simulate_paths)
from drawdown_lab.numeigen import numeric_model

FAST = SimConfig(dt=1e-3, n=20000, seed=7, bridge=True)


def test_seed_determinism(bm):
    a = estimate_law(bm, "drawdown_transform", 0.0, {"q": 0.5, "a": 1.0}, FAST)
    b = estimate_law(bm, "drawdown_transform", 0.0, {"q": 0.5, "a": 1.0}, FAST)
    assert a.estimate == b.estimate and a.se == b.se
    c = estimate_law(bm, "drawdown_transform", 0.0, {"q": 0.5, "a": 1.0}, SimConfig(dt=1e-3, n=20000, seed=8, bridge=True))
    assert c.estimate != a.estimate


def test_chunking_and_offsets_do_not_change_paths(bm):
    rule = StoppingRule(STOP_DD, lower=1.0)
    full = simulate_paths(bm, 0.0, rule, SimConfig(dt=1e-2, n=900, seed=3))
    chunked = simulate_paths(bm, 0.0, rule, SimConfig(dt=1e-2, n=900, seed=3, chunk=250))
    assert np.array_equal(full.t, chunked.t) and np.array_equal(full.extra, chunked.extra)
    tail = simulate_paths(bm, 0.0, rule, SimConfig(dt=1e-2, n=400, seed=3), first_path=500)
    assert np.array_equal(full.t[500:], tail.t)


def _within(est, ref, k=4.0):
    return abs(est.estimate - ref) <= k * est.se


def test_bm_drawdown_transform(bm):
    est = estimate_law(bm, "drawdown_transform", 0.0, {"q": 0.5, "a": 1.0}, FAST)
    assert _within(est, 1 / math.cosh(1))


def test_bes3_exact_scheme(bes3):
    est = estimate_law(bes3, "drawdown_transform", 2.0, {"q": 0.5, "a": 1.0}, FAST)
    assert _within(est, bes3_drawdown_lt(2.0, 0.5, 1.0))


def test_euler_scheme_on_numeric_model():
    m = numeric_model(lambda x: 0.3 + 0 * x, lambda x: 1.0 + 0 * x)
    est = estimate_law(m, "drawdown_transform", 0.0, {"q": 0.5, "a": 1.0}, FAST)
    from drawdown_lab.closedform import bm_drawdown_lt
    assert _within(est, bm_drawdown_lt(BrownianParams(0.3, 1.0), 0.5, 1.0))


def test_ordering_outcomes_partition(bm):
    prm = {"q": 0.5, "a": 1.0, "b": 1.0}
    parts = [estimate_law(bm, n, 0.0, prm, FAST).estimate for n in ("dd_before_du", "du_before_dd", "clock_before_both")]
    assert sum(parts) == pytest.approx(1.0, abs=1e-12)


def test_support_of_drawdown_location(bm):
    # on {sigma_a < hat sigma_b} with a >= b the process stops in (x - a, x - a + b)
    a, b = 1.5, 1.0
    batch = simulate_paths(bm, 0.0, StoppingRule(STOP_DD_DU, lower=a, upper=b), SimConfig(dt=1e-4, n=5000, seed=11))
    stop = batch.extra[batch.code == EV_FIRST]
    assert stop.size > 100
    tol = 5 * math.sqrt(1e-4)
    assert np.all(stop > -a - tol) and np.all(stop < -a + b + tol)


def test_occupation_within_elapsed_time(bm):
    batch = simulate_paths(bm, 0.0, StoppingRule(STOP_DD, OCC_X_BELOW, lower=1.0, level=0.0),
                           SimConfig(dt=1e-3, n=3000, seed=5))
    assert np.all(batch.occupation >= 0) and np.all(batch.occupation <= batch.t + 1e-12)


def test_crossing_bias_direction(bm):
    cfg = SimConfig(dt=1e-2, n=40000, seed=9)
    coarse = estimate_law(bm, "drawdown_cdf", 0.0, {"a": 1.0, "t": 1.0}, cfg)
    fine = estimate_law(bm, "drawdown_cdf", 0.0, {"a": 1.0, "t": 1.0}, SimConfig(dt=5e-3, n=40000, seed=9))
    assert fine.estimate >= coarse.estimate - 2 * coarse.se


def test_richardson_diagnostic(bm):
    cfg = SimConfig(dt=1e-3, n=10000, seed=1, bridge=True, richardson_n=5000)
    est = estimate_law(bm, "drawdown_transform", 0.0, {"q": 0.5, "a": 1.0}, cfg)
    assert math.isfinite(est.richardson_shift) and est.richardson_se > 0
    assert abs(est.richardson_shift) < 4 * est.richardson_se


def test_errors(bm):
    with pytest.raises(HorizonTooShort):
        estimate_law(bm, "drawdown_transform", 0.0, {"q": 0.0, "a": 3.0}, SimConfig(dt=1e-2, n=2000, horizon=0.5))
    with pytest.raises(DomainViolation):
        estimate_law(bm, "no_such_law", 0.0, {}, FAST)
