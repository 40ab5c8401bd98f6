import math

import numpy as np
import pytest

from drawdown_lab.closedform import (BrownianParams, bes3_drawdown_lt, bm_drawdown_lt, bm_drawup_lt,
                                     bm_prob_dd_before_du)
from drawdown_lab.errors import DomainViolation, GeometryViolation
from drawdown_lab.passage import (dd_before_du, dd_first_density, down_before_drawup, drawdown_transform,
                                  drawup_transform, du_before_dd, du_first_density, exit_transform,
                                  max_at_drawdown_survival, up_before_drawdown)


def test_exit_transform(bm):
    assert exit_transform(bm, 0.5, 0.5, 1.0, 0.0).value == pytest.approx(math.sinh(0.5) / math.sinh(1), rel=1e-13)
    assert exit_transform(bm, 0.0, 0.5, 1.0, 0.0).value == pytest.approx(0.5, rel=1e-14)
    assert exit_transform(bm, 0.5, 0.5, 0.5, 0.0).value == 1.0
    assert exit_transform(bm, 0.5, 0.5 - 1e-12, 0.5, 0.0).value == pytest.approx(1.0, abs=1e-9)


def test_exit_transform_geometry(bm):
    with pytest.raises(GeometryViolation):
        exit_transform(bm, 0.5, 2.0, 1.0, 0.0)


def test_down_before_drawup(bm):
    assert down_before_drawup(bm, 0.5, 1.0, 0.0, 1.0).value == pytest.approx(math.exp(-1 / math.tanh(1)), rel=1e-11)
    assert down_before_drawup(bm, 0.5, 1.0, 1.0, 1.0).value == 1.0
    assert down_before_drawup(bm, 0.0, 1.0, 0.0, 1.0).value == pytest.approx(math.exp(-1), rel=1e-11)


def test_up_before_drawdown(bm):
    assert up_before_drawdown(bm, 0.5, 0.0, 1.0, 1.0).value == pytest.approx(math.exp(-1 / math.tanh(1)), rel=1e-11)


def test_drawdown_transform_values(bm, bm_drift, bes3):
    assert drawdown_transform(bm, 0.5, 0.0, 1.0).value == pytest.approx(1 / math.cosh(1), rel=1e-9)
    assert drawdown_transform(bm, 0.0, 0.0, 1.0).value == pytest.approx(1.0, abs=1e-9)
    expected = 2 * math.exp(-1) / (2 * math.cosh(2) - math.sinh(2))
    assert drawdown_transform(bm_drift, 1.5, 0.0, 1.0).value == pytest.approx(expected, rel=1e-8)
    assert drawdown_transform(bes3, 0.5, 2.0, 1.0).value == pytest.approx(bes3_drawdown_lt(2.0, 0.5, 1.0), rel=1e-8)


def test_drawup_transform(bm_drift):
    res = drawup_transform(bm_drift, 0.7, 0.0, 0.8)
    assert res.value == pytest.approx(bm_drawup_lt(BrownianParams(1.0, 1.0), 0.7, 0.8), rel=1e-8)


def test_transient_model_reports_missing_mass():
    from drawdown_lab.closedform import bm_provider
    m = bm_provider(BrownianParams(1.0, 1.0))
    res = drawup_transform(m, 0.0, 0.0, 1.0)
    # X drifts up, so the drawup is eventually reached with probability one
    assert res.value == pytest.approx(1.0, abs=1e-9)
    down = drawdown_transform(m, 0.0, 0.0, 1.0)
    assert down.value == pytest.approx(1.0, abs=1e-9)


def test_max_at_drawdown(bm, bm_drift):
    assert max_at_drawdown_survival(bm, 0.0, 1.0, 1.0).value == pytest.approx(math.exp(-1), rel=1e-12)
    assert max_at_drawdown_survival(bm, 0.0, 0.0, 1.0).value == 1.0
    assert max_at_drawdown_survival(bm_drift, 0.0, 1.0, 1.0).value == pytest.approx(
        math.exp(-2 / math.expm1(2)), rel=1e-12)


@pytest.mark.parametrize("mu", [-0.6, 0.0, 0.6])
@pytest.mark.parametrize("a,b", [(1.0, 1.0), (1.5, 0.7), (0.6, 1.3)])
def test_ordering_matches_closed_form(mu, a, b):
    from drawdown_lab.closedform import bm_provider
    p = BrownianParams(mu, 1.0)
    m = bm_provider(p)
    pair = bm_prob_dd_before_du(p, 0.8, a, b)
    assert dd_before_du(m, 0.8, 0.0, a, b).value == pytest.approx(pair.dd_first, rel=1e-7)
    assert du_before_dd(m, 0.8, 0.0, a, b).value == pytest.approx(pair.du_first, rel=1e-7)


def test_symmetric_value(bm):
    assert dd_before_du(bm, 0.5, 0.0, 1.0, 1.0).value == pytest.approx(1 / (math.cosh(1) + 1), rel=1e-10)


@pytest.mark.parametrize("model", ["bm", "bes3"])
def test_route_agreement_at_equal_thresholds(request, model):
    m = request.getfixturevalue(model)
    x = 0.0 if model == "bm" else 3.0
    for q in (0.1, 0.5, 2.0):
        direct = dd_before_du(m, q, x, 1.0, 1.0, route="direct").value
        comp = dd_before_du(m, q, x, 1.0, 1.0, route="complement").value
        assert direct == pytest.approx(comp, abs=1e-7)
        near = dd_before_du(m, q, x, 1.0, 1.0 + 1e-9, route="complement").value
        assert near == pytest.approx(direct, abs=1e-7)


def test_large_b_recovers_drawdown_transform(bm):
    assert dd_before_du(bm, 0.5, 0.0, 1.0, 30.0).value == pytest.approx(1 / math.cosh(1), rel=1e-8)


def test_monotonicity(bm_drift):
    m = bm_drift
    qs = [dd_before_du(m, q, 0.0, 1.0, 0.8).value for q in (0.1, 0.5, 1.0, 2.0)]
    assert np.all(np.diff(qs) <= 1e-12)
    aa = [dd_before_du(m, 0.5, 0.0, a, 0.8).value for a in (0.5, 0.8, 1.2, 2.0)]
    assert np.all(np.diff(aa) <= 1e-12)
    bb = [dd_before_du(m, 0.5, 0.0, 1.0, b).value for b in (0.5, 0.9, 1.4, 3.0)]
    assert np.all(np.diff(bb) >= -1e-12)


def test_density_mass_and_sign(bm_drift):
    d = dd_first_density(bm_drift, 0.5, 0.0, 1.5, 1.0)
    u = np.linspace(d.support[0], d.support[1], 41)[1:-1]
    assert np.all(d.pdf(u) >= 0)
    assert d.mass == pytest.approx(dd_before_du(bm_drift, 0.5, 0.0, 1.5, 1.0).value, rel=1e-12)
    e = du_first_density(bm_drift, 0.5, 0.0, 1.0, 1.5)
    assert np.all(e.pdf(np.linspace(0.01, 0.99, 30)) >= 0)


def test_q_to_zero_symmetric_limit(bm):
    diffs = [abs(dd_before_du(bm, q, 0.0, 1.0, 1.0).value - 0.5) for q in (1e-1, 1e-2, 1e-3)]
    assert diffs == sorted(diffs, reverse=True)
    assert diffs[-1] < 3e-2


def test_validation(bm, bes3):
    with pytest.raises(DomainViolation, match="a must be positive"):
        dd_before_du(bm, 0.5, 0.0, -1.0, 1.0)
    with pytest.raises(DomainViolation):
        drawdown_transform(bm, -0.1, 0.0, 1.0)
    with pytest.raises(DomainViolation):
        drawdown_transform(bes3, 0.5, 1.0, 1.0)
    with pytest.raises(GeometryViolation):
        dd_before_du(bm, 0.5, 0.0, 1.0, 2.0, route="direct")
