import math

import numpy as np
import pytest

from drawdown_lab.closedform import BrownianParams, bes3_drawdown_lt, bm_drawdown_lt, bm_provider
from drawdown_lab.errors import GeometryViolation
from drawdown_lab.model import build_kernel
from drawdown_lab.occupation import (occ_below_start_until_dd, occ_below_until_up, occ_dd_above_at_exp,
                                     occ_dd_above_until_dd, occ_du_below_until_dd, occ_exit_down,
                                     occ_exit_up)
from drawdown_lab.passage import dd_before_du, drawdown_transform, exit_transform


def test_exit_up_reduces_to_exit_transform(bm):
    ref = exit_transform(bm, 0.25, 0.5, 1.0, 0.0).value
    assert occ_exit_up(bm, 0.0, 0.25, 0.5, 0.4, 0.0, 1.0).value == pytest.approx(ref, rel=1e-13)
    # vanishing time below y close to b recovers the exit transform at rate q + p
    near = occ_exit_up(bm, 0.5, 0.25, 0.5, 1.0 - 1e-9, 0.0, 1.0).value
    assert near == pytest.approx(exit_transform(bm, 0.75, 0.5, 1.0, 0.0).value, rel=1e-6)


@pytest.mark.parametrize("model", ["bm", "bm_drift"])
def test_exit_branch_continuity(request, model):
    m = request.getfixturevalue(model)
    for fn, args in ((occ_exit_up, (0.5, 0.25)), (occ_exit_down, (0.5,))):
        lo = fn(m, *args, 0.4 - 1e-10, 0.4, 0.0, 1.0).value
        hi = fn(m, *args, 0.4 + 1e-10, 0.4, 0.0, 1.0).value
        at = fn(m, *args, 0.4, 0.4, 0.0, 1.0).value
        assert abs(lo - hi) < 1e-8 and abs(at - hi) < 1e-8


def test_two_sided_recovery(bm):
    # x = y, a far below, b far above: the occupation transform of the half line
    v = occ_exit_up(bm, 0.5, 0.25, 0.0, 0.0, -30.0, 1.0).value
    k = build_kernel(bm, 0.25)
    kqp = build_kernel(bm, 0.75)
    expected = k.sp(0.0) / (k.w1(0.0, 1.0) + k.w(1.0, 0.0) * kqp.dlog_plus(0.0))
    assert v == pytest.approx(float(expected), rel=1e-9)


def test_exit_down_ruin_limit(bm):
    assert occ_exit_down(bm, 1e-6, 0.5, 0.6, 0.0, 1.0).value == pytest.approx(0.5, abs=1e-4)
    assert occ_exit_down(bm, 0.5, 1e-6, 0.6, 0.0, 1.0).value == pytest.approx(1.0, abs=1e-4)


def test_below_until_up_limits(bm):
    k = build_kernel(bm, 0.25)
    lemma = float(k.phi_plus(0.5) / k.phi_plus(1.0))
    assert occ_below_until_up(bm, 0.0, 0.25, 0.5, 0.2, 1.0).value == pytest.approx(lemma, rel=1e-12)
    assert occ_below_until_up(bm, 0.5, 0.25, 0.5, -40.0, 1.0).value == pytest.approx(lemma, abs=1e-6)


def test_below_start_limits(bm):
    assert occ_below_start_until_dd(bm, 0.0, 0.0, 1.0).value == pytest.approx(1.0, abs=1e-10)
    assert occ_below_start_until_dd(bm, 0.5, 0.0, 1e-3).value == pytest.approx(1.0, abs=5e-3)


@pytest.mark.parametrize("mu", [-1.0, 0.0, 1.0])
def test_identity_in_law_bm(mu):
    p = BrownianParams(mu, 1.0)
    m = bm_provider(p)
    for q in (0.1, 0.5, 1.0, 2.0, 5.0):
        v = occ_dd_above_until_dd(m, q, 0.0, 0.4, 1.0).value
        assert v == pytest.approx(bm_drawdown_lt(p, q, 0.6), rel=1e-6)


@pytest.mark.parametrize("x", [1.5, 2.0, 4.0])
def test_identity_in_law_bes3(bes3, x):
    for q in (0.1, 0.5, 1.0, 2.0, 5.0):
        v = occ_dd_above_until_dd(bes3, q, x, 0.5, 1.0).value
        assert v == pytest.approx(bes3_drawdown_lt(x, q, 0.5), rel=1e-6)


def test_dd_above_examples(bm):
    assert occ_dd_above_until_dd(bm, 0.5, 0.0, 0.5, 1.0).value == pytest.approx(1 / math.cosh(0.5), rel=1e-9)
    assert occ_dd_above_until_dd(bm, 0.5, 0.0, 1.0 - 1e-3, 1.0).value == pytest.approx(1.0, abs=2e-3)


def test_du_below_limits(bm, bm_drift):
    assert occ_du_below_until_dd(bm, 0.5, 0.0, 40.0, 1.0).value == pytest.approx(1 / math.cosh(1), rel=1e-6)
    assert occ_du_below_until_dd(bm, 1e-8, 0.0, 1.0, 1.0).value == pytest.approx(1.0, abs=1e-6)
    for y in (1.0, 1.5, 3.0):
        assert occ_du_below_until_dd(bm_drift, 0.5, 0.0, y, 1.0).value >= dd_before_du(bm_drift, 0.5, 0.0, 1.0, y).value


def test_dd_above_at_exp_limits(bm):
    assert occ_dd_above_at_exp(bm, 0.5, 1e-6, 0.0, 0.5).value == pytest.approx(1.0, abs=1e-4)
    assert occ_dd_above_at_exp(bm, 0.5, 0.0, 0.0, 0.5).value == 1.0


def test_dd_above_at_exp_large_rate(bm):
    # converges to P(sigma_y > e_q) = 1 - 1/cosh(y) at q = 0.5; the gap decays like p^(-1/2)
    target = 1 - 1 / math.cosh(1.0)
    gaps = [occ_dd_above_at_exp(bm, 0.5, p, 0.0, 1.0).value - target for p in (1e2, 1e3, 1e4)]
    assert all(g > 0 for g in gaps)
    assert gaps[0] / gaps[1] == pytest.approx(math.sqrt(10), rel=0.1)
    assert gaps[1] / gaps[2] == pytest.approx(math.sqrt(10), rel=0.1)


def test_exit_up_monotone_in_both_rates(bm_drift):
    rates = [0.1, 0.5, 1.0, 3.0]
    grid = np.array([[occ_exit_up(bm_drift, q, p, 0.5, 0.4, 0.0, 1.0).value for p in rates] for q in rates])
    assert np.all((grid >= 0) & (grid <= 1))
    assert np.all(np.diff(grid, axis=0) <= 1e-12)
    assert np.all(np.diff(grid, axis=1) <= 1e-12)


def test_exp_clock_occupation_monotonicity(bm_drift):
    # p discounts the occupation; q is the rate of the clock that ends the window, so a
    # larger q means less occupation and a larger transform
    rates = [0.1, 0.5, 1.0, 3.0]
    grid = np.array([[occ_dd_above_at_exp(bm_drift, q, p, 0.0, 0.5).value for p in rates] for q in rates])
    assert np.all((grid >= 0) & (grid <= 1))
    assert np.all(np.diff(grid, axis=1) <= 1e-12)
    assert np.all(np.diff(grid, axis=0) >= -1e-12)


def test_single_rate_monotonicity(bm_drift):
    qs = [0.1, 0.5, 1.0, 3.0]
    for fn in (lambda q: occ_below_start_until_dd(bm_drift, q, 0.0, 1.0),
               lambda q: occ_dd_above_until_dd(bm_drift, q, 0.0, 0.3, 1.0),
               lambda q: occ_du_below_until_dd(bm_drift, q, 0.0, 1.5, 1.0),
               lambda q: occ_exit_down(bm_drift, q, 0.5, 0.4, 0.0, 1.0)):
        vals = [fn(q).value for q in qs]
        assert np.all(np.diff(vals) <= 1e-12)
        assert 0 <= min(vals) and max(vals) <= 1


def test_geometry(bm):
    with pytest.raises(GeometryViolation):
        occ_dd_above_until_dd(bm, 0.5, 0.0, 1.5, 1.0)
    with pytest.raises(GeometryViolation):
        occ_du_below_until_dd(bm, 0.5, 0.0, 0.5, 1.0)
    with pytest.raises(GeometryViolation):
        occ_exit_up(bm, 0.5, 0.2, 0.5, 1.5, 0.0, 1.0)


def test_identity_in_law_with_strong_upward_drift(bm_drift):
    # the exponent grows slowly, so the panels reach u ~ 350 where s' underflows
    p = BrownianParams(1.0, 1.0)
    v = occ_dd_above_until_dd(bm_drift, 0.1, 0.0, 0.3, 2.0).value
    assert v == pytest.approx(bm_drawdown_lt(p, 0.1, 1.7), rel=1e-10)
