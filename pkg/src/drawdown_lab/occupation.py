"""Laplace transforms of occupation times.

* ``A``: time below ``y`` before ``X`` exits ``(a, b)`` (:func:`occ_exit_up`,
  :func:`occ_exit_down`) and its one-sided version (:func:`occ_below_until_up`).
* ``B``: time below the start ``x`` before the drawdown time ``sigma_a``
  (:func:`occ_below_start_until_dd`).
* ``C``: time the drawdown spends above ``y`` before ``sigma_a``
  (:func:`occ_dd_above_until_dd`).
* ``D``: time the drawup spends below ``y`` before ``sigma_a``
  (:func:`occ_du_below_until_dd`).
* ``E``: time the drawdown spends above ``y`` before an exponential clock
  (:func:`occ_dd_above_at_exp`), and its complement ``e_q - E``
  (:func:`occ_dd_below_at_exp`).
"""

from __future__ import annotations

import math

import numpy as np

from .errors import DomainViolation, GeometryViolation
from .model import build_kernel
from .passage import (TOL, check_rate, check_threshold, dd_before_du, drawdown_transform,
                      du_first_density, drawdown_accumulator, length_scale)
from .quad import ExponentAccumulator, integrate
from .results import LawResult


def _check_window(model, x, y, a, b):
    model.check_state(a)
    if not (a < y < b):
        raise GeometryViolation("levels must satisfy a < y < b")
    if not (a < x < b):
        raise GeometryViolation("x must lie in (a, b)")


def occ_exit_up(model, q, p, x, y, a, b) -> LawResult:
    """``E_x{exp(-q A - p tau_b^+); tau_b^+ < tau_a^-}`` with ``A`` the time below ``y`` before exit.

    At ``q = 0`` the occupation weight vanishes and the exit transform at rate ``p``
    is returned.
    """
    check_rate(q)
    check_rate(p, "p")
    _check_window(model, x, y, a, b)
    kp = build_kernel(model, p)
    if q == 0:
        val = float(kp.w(x, a) / kp.w(b, a))
        return LawResult(val, 1e-15, "closed-form", {"route": "exit-transform"})
    kqp = build_kernel(model, q + p)
    core = kp.sp(y) / (kp.w1(y, b) + kp.w(b, y) * kqp.ratio(y, a))
    if x <= y:
        val = kqp.w(x, a) / kqp.w(y, a) * core
        route = "below-level"
    else:
        val = kp.w(x, y) / kp.w(b, y) + kp.w(b, x) / kp.w(b, y) * core
        route = "above-level"
    return LawResult(float(val), 1e-14, "closed-form", {"route": route})


def occ_exit_down(model, q, x, y, a, b) -> LawResult:
    """``E_x{exp(-q A); tau_a^- < tau_b^+}``; at ``q = 0`` the ruin probability."""
    check_rate(q)
    _check_window(model, x, y, a, b)
    k = build_kernel(model, q)
    ds, sp = model.scale_diff, model.scale_deriv
    if x <= y:
        core = sp(y) / (k.w1(y, a) + sp(y) / ds(b, y) * k.w(y, a))
        val = k.w(y, x) / k.w(y, a) + k.w(x, a) / k.w(y, a) * core
        route = "below-level"
    else:
        val = ds(b, x) * sp(y) / (ds(b, y) * k.w1(y, a) + sp(y) * k.w(y, a))
        route = "above-level"
    return LawResult(float(val), 1e-14, "closed-form", {"route": route})


def occ_below_until_up(model, q, p, x, y, b) -> LawResult:
    """``E_x{exp(-q int_0^{tau_b^+} 1{X < y} dt - p tau_b^+)}`` for ``y < x < b``."""
    check_rate(q)
    check_rate(p, "p", positive=True)
    model.check_state(y)
    if not (y < x < b):
        raise GeometryViolation("levels must satisfy y < x < b")
    kp = build_kernel(model, p)
    kqp = build_kernel(model, q + p)
    core = kp.sp(y) / (kp.w1(y, b) + kp.w(b, y) * kqp.dlog_plus(y))
    val = kp.w(x, y) / kp.w(b, y) + kp.w(b, x) / kp.w(b, y) * core
    return LawResult(float(val), 1e-14, "closed-form", {"route": "one-sided"})


def _below_start(k, model, x, a, tol):
    """Survival term, integral term and error of the transform of ``B`` from start ``x``.

    The running maximum climbs from ``x`` at rate ``h(u)``; from a peak ``u`` the
    drawdown completes at rate ``g(u) = s'(u) s'(x) / den(u)`` weighted by the
    occupation below ``x``.  Both share ``den(u) = s'(x) W_q(x, u - a) + (s(u) - s(x)) W_{q,1}(x, u - a)``.
    """
    ds, sp = model.scale_diff, model.scale_deriv
    spx = sp(x)

    def parts(u):
        lf, w, w1, _, _ = k.scaled_terms(x, u - a)
        return lf, w1, spx * w + ds(u, x) * w1

    def rate(u):
        _, w1, den = parts(u)
        return sp(u) * w1 / den

    def payload(u):
        lf, _, den = parts(u)
        return sp(u) * spx / den * np.exp(-lf)

    acc = ExponentAccumulator(rate, x, payloads=[payload], limit=x + a,
                              scale=max(a, 1e-3), tol=tol)
    surv = math.exp(-acc.h_total)
    return surv, acc.tail(0), acc.tail_errors[0] + acc.error_H * surv


def occ_below_start_until_dd(model, q, x, a, tol=TOL) -> LawResult:
    """``E_x{exp(-q B)}`` with ``B`` the time spent below ``x`` before ``sigma_a``.

    The value is the sum of a survival term (the maximum reaches ``x + a`` first)
    and an integral over the maximum at the drawdown time.
    """
    check_rate(q)
    check_threshold(a, "a")
    model.check_state(x - a)
    k = build_kernel(model, q)
    surv, integral, err = _below_start(k, model, x, a, tol)
    return LawResult(surv + integral, err, "quadrature",
                     {"survival_term": surv, "integral_term": integral})


def occ_dd_above_until_dd(model, q, x, y, a, tol=TOL) -> LawResult:
    """``E_x{exp(-q C); sigma_a < inf}`` with ``C`` the time the drawdown spends above ``y < a``."""
    check_rate(q)
    check_threshold(a, "a")
    if not 0 < y < a:
        raise GeometryViolation("y must lie in (0, a)")
    model.check_state(x - a)
    k = build_kernel(model, q)
    lsp, rel = model.log_scale_deriv, model.scale_diff_rel

    # everything is divided by s'(u - y), and s' enters through logarithms, so a
    # scale derivative that underflows far out cannot produce 0 / 0
    def terms(u):
        lf, w, w1, _, _ = k.scaled_terms(u - y, u - a)
        den = w + rel(u, u - y) * w1
        return lf, w1, den

    def rate(u):
        _, w1, den = terms(u)
        return np.exp(lsp(u) - lsp(u - y)) * w1 / den

    def payload(m):
        lf, _, den = terms(m)
        return np.exp(lsp(m) - lf) / den

    acc = ExponentAccumulator(rate, x, payloads=[payload], scale=length_scale(model, x, a), tol=tol)
    return LawResult(acc.tail(0), acc.tail_errors[0], "quadrature",
                     {"panels": acc.n_panels, "truncation": acc.u_end})


def occ_du_below_until_dd(model, q, x, y, a, tol=TOL) -> LawResult:
    """``E_x{exp(-q D); sigma_a < inf}`` with ``D`` the time the drawup spends below ``y >= a``.

    At ``q = 0`` the transform reduces to ``P_x(sigma_a < inf)``.
    """
    check_rate(q)
    check_threshold(a, "a")
    if not y >= a:
        raise GeometryViolation("y must be at least a")
    model.check_state(x - y, what="x - y")
    if q == 0:
        res = drawdown_transform(model, 0.0, x, a, tol)
        return LawResult(res.value, res.error, "quadrature", {"route": "q=0", **res.diagnostics})
    first = dd_before_du(model, q, x, a, y, tol=tol)
    k = build_kernel(model, q)
    c = y - a
    dens = du_first_density(model, q, x, a, y, tol)

    def after(u):
        u = np.atleast_1d(np.asarray(u, float))
        out = np.empty_like(u)
        for i, ui in enumerate(u):
            surv, integral, _ = _below_start(k, model, ui + c, a, tol)
            out[i] = surv + integral
        return out

    second = integrate(lambda u: dens.pdf(u) * after(u), x, x + a, tol=tol)
    return LawResult(first.value + second.value, first.error + second.error, "quadrature",
                     {"dd_first": first.value, "du_first_term": second.value})


def occ_dd_above_at_exp(model, q, p, x, y, tol=TOL) -> LawResult:
    """``E_x{exp(-p E)}`` with ``E`` the time the drawdown spends above ``y`` before ``e_q``.

    Limits: ``p = 0`` gives 1.  At ``q = 0`` there is no clock and the occupation
    time of a recurrent model is infinite, so 0 is returned.
    """
    check_rate(q)
    check_rate(p, "p")
    check_threshold(y, "y")
    model.check_state(x - y, what="x - y")
    if p == 0:
        return LawResult(1.0, 0.0, "closed-form", {"route": "p=0"})
    if q == 0:
        return LawResult(0.0, 0.0, "closed-form", {"route": "q=0"})
    return _dd_above_at_exp(model, q, p, x, y, tol)


def occ_dd_below_at_exp(model, q, p, x, y, tol=TOL) -> LawResult:
    """``E_x{exp(-p (e_q - E))}``, the transform of the time the drawdown spends at or
    below ``y`` before ``e_q``.

    The value is ``q / (q + p)`` times the transform of ``E``
    under a clock of rate ``q + p`` evaluated at the negative rate ``-p``.
    """
    check_rate(q, positive=True)
    check_rate(p, "p")
    check_threshold(y, "y")
    model.check_state(x - y, what="x - y")
    if p == 0:
        return LawResult(1.0, 0.0, "closed-form", {"route": "p=0"})
    res = _dd_above_at_exp(model, q + p, -p, x, y, tol)
    c = q / (q + p)
    return LawResult(c * res.value, c * res.error, "quadrature", {"route": "complement", **res.diagnostics})


def _dd_above_at_exp(model, q, p, x, y, tol):
    # valid for p > -q
    k = build_kernel(model, q)
    kqp = build_kernel(model, q + p)
    ratio = p / (q + p)

    def terms(u):
        lf, w, w1xy, w1yx, w2yx = k.scaled_terms(u, u - y)
        ld = kqp.dlog_plus(u - y)
        num = w2yx + w1xy * ld
        den = w1yx + w * ld
        return lf, ld, num, den

    def rate(u):
        _, _, num, den = terms(u)
        return num / den

    def payload(m):
        lf, ld, _, den = terms(m)
        return ratio * ld / den * np.exp(model.log_scale_deriv(m) - lf)

    acc = ExponentAccumulator(rate, x, payloads=[payload], scale=max(y, 1e-3), tol=tol)
    surv = math.exp(-acc.h_total)
    integral = acc.tail(0)
    # 1 - surv - integral, summed without losing the small remainder
    val = math.fsum([1.0, -surv, -integral])
    return LawResult(val, acc.tail_errors[0] + acc.error_H * surv, "quadrature",
                     {"panels": acc.n_panels, "survival_term": surv, "integral_term": integral})
