"""Default probabilities and drawdown option prices.

Default risk uses a hazard that is switched on by a drawdown, price or drawup
condition; the probability of default before a drawdown of ``a`` is one minus the
corresponding occupation transform.  Option prices are obtained by numerical
Laplace inversion of the occupation transform of the drawdown before an
exponential clock, with maturity and strike both randomised.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DivergentAcceleration, DomainViolation, GeometryViolation
from .inversion import PROB_SLACK, invert, invert2
from .occupation import (occ_below_start_until_dd, occ_dd_above_at_exp, occ_dd_above_until_dd,
                         occ_dd_below_at_exp, occ_du_below_until_dd)
from .passage import check_rate, check_threshold, dd_before_du, drawdown_transform
from .quad import gk15
from .results import LawResult

HAZARDS = ("constant-rate", "drawdown-corridor", "below-start", "drawup-deficit")


@dataclass(frozen=True)
class HazardSpec:
    """Hazard rate ``q`` switched on by ``variant``.

    * ``constant-rate``: always on.
    * ``drawdown-corridor``: on while the drawdown exceeds ``level`` (``0 < level < a``).
    * ``below-start``: on while the process is below its starting point.
    * ``drawup-deficit``: on while the drawup is below ``level`` (``level >= a``).
    """

    variant: str
    rate: float
    level: float | None = None

    def __post_init__(self):
        if self.variant not in HAZARDS:
            raise DomainViolation(f"unknown hazard variant {self.variant!r}")
        if not self.rate > 0:
            raise DomainViolation("hazard rate must be positive")
        if self.variant in ("drawdown-corridor", "drawup-deficit") and self.level is None:
            raise DomainViolation(f"{self.variant} hazard needs a level")


@dataclass(frozen=True)
class PricingSpec:
    """Contract terms for the drawdown options.

    ``barrier`` is the drawdown level ``y``, ``strike`` the time ``K`` the drawdown
    must spend above it, ``maturity`` ``T``.  ``payoff_deriv`` is ``f'`` for the
    quantile option (``f(0) = 0``); ``cap`` truncates the outer integral for payoffs
    that are not bounded.
    """

    barrier: float = 0.3
    strike: float = 0.2
    maturity: float = 1.0
    rate: float = 0.0
    alpha: float = 1.0
    payoff_deriv: Callable | None = None
    cap: float | None = None

    def __post_init__(self):
        if not self.maturity > 0:
            raise DomainViolation("maturity must be positive")
        if not 0 < self.strike < self.maturity:
            raise DomainViolation("strike must lie in (0, T)")
        if not self.barrier > 0:
            raise DomainViolation("barrier must be positive")
        if not self.rate >= 0:
            raise DomainViolation("rate must be nonnegative")
        if not 0 < self.alpha <= 1:
            raise DomainViolation("alpha must lie in (0, 1]")


def default_before_drawdown(model, x: float, hazard: HazardSpec, a: float) -> LawResult:
    """Probability that the hazard kills the process before the drawdown reaches ``a``."""
    check_threshold(a, "a")
    q = hazard.rate
    if hazard.variant == "constant-rate":
        res = drawdown_transform(model, q, x, a)
    elif hazard.variant == "drawdown-corridor":
        if not 0 < hazard.level < a:
            raise GeometryViolation("corridor level must lie in (0, a)")
        res = occ_dd_above_until_dd(model, q, x, hazard.level, a)
    elif hazard.variant == "below-start":
        res = occ_below_start_until_dd(model, q, x, a)
    else:
        if not hazard.level >= a:
            raise GeometryViolation("drawup-deficit level must be at least a")
        res = occ_du_below_until_dd(model, q, x, hazard.level, a)
    # a transient model may never reach the drawdown; that mass defaults eventually only
    # if it is killed, which the transform already excludes
    return LawResult(1.0 - res.value, res.error, res.method,
                     {"variant": hazard.variant, "transform": res.value})


def dd_before_du_before_default(model, x: float, q: float, a: float, b: float) -> LawResult:
    """``P_x(sigma_a < hat sigma_b ^ e_q)`` with ``e_q`` the default time."""
    return dd_before_du(model, q, x, a, b)


def _occupation_exceedance(model, x, y, T, K, order=12, tol=1e-2):
    """``P_x(int_0^T 1{Y_t > y} dt > K)`` by double inversion in ``(T, K)``.

    The direct route inverts the transform of the time above ``y``.  When the
    occupation piles up near ``T`` (small ``y``) that inversion oscillates, and the
    complementary time below ``y``, which then piles up near zero, is inverted at
    ``T - K`` instead.  The route with the smaller diagnostic is kept.
    """
    def direct(q, p):
        return occ_dd_above_at_exp(model, q, p, x, y).value / (q * p)

    def complement(q, p):
        return occ_dd_below_at_exp(model, q, p, x, y).value / (q * p)

    best = None
    try:
        res = invert2(direct, T, K, order=order, tol=math.inf)
        best = LawResult(1.0 - res.value, res.error, res.method, {"route": "direct", **res.diagnostics})
    except DivergentAcceleration:
        pass
    if best is None or best.error > 0.5 * tol:
        try:
            res = invert2(complement, T, T - K, order=order, tol=math.inf)
            if best is None or res.error < best.error:
                best = LawResult(res.value, res.error, res.method, {"route": "complement", **res.diagnostics})
        except DivergentAcceleration:
            pass
    if best is None or not math.isfinite(best.value) or best.error > tol:
        err = math.inf if best is None else best.error
        raise DivergentAcceleration(f"double inversion diagnostic {err:.3g} exceeds {tol:.3g}")
    return best


def _no_drawdown_prob(model, x, y, T, order=14):
    # P_x(occupation above y is zero on [0, T]) = P_x(sigma_y > T)
    res = invert(lambda q: (1.0 - drawdown_transform(model, q, x, y).value) / q, T, order,
                 tol=1e-2)
    return res


def _clamp_prob(v, err=0.0):
    # excursions covered by the inversion's own diagnostic are clamped
    slack = max(PROB_SLACK, err)
    if v < -slack or v > 1 + slack:
        raise DivergentAcceleration(f"probability {v:.6g} outside [0, 1]")
    return min(max(v, 0.0), 1.0)


def parisian_digital_price(model, x: float, spec: PricingSpec) -> LawResult:
    """``exp(-r T) P_x(int_0^T 1{Y_t > y} dt > K)`` by double Laplace inversion."""
    model.check_state(x)
    disc = math.exp(-spec.rate * spec.maturity)
    res = _occupation_exceedance(model, x, spec.barrier, spec.maturity, spec.strike)
    prob = _clamp_prob(res.value, res.error)
    return LawResult(disc * prob, disc * res.error, "inversion",
                     {"probability": prob, **res.diagnostics})


def _raw_exceedance(model, x, u, alpha, T):
    # unclamped inverted value with its diagnostic
    if alpha >= 1.0:
        res = _no_drawdown_prob(model, x, u, T)
        return 1.0 - res.value, res.error, res.diagnostics
    res = _occupation_exceedance(model, x, u, T, (1.0 - alpha) * T)
    return res.value, res.error, res.diagnostics


def exceedance_probability(model, x: float, u: float, alpha: float, T: float) -> LawResult:
    """``P_x(Y_T^alpha > u)``, the probability that the drawdown spends more than
    ``(1 - alpha) T`` above ``u``; for ``alpha = 1`` the maximum drawdown exceeds ``u``."""
    value, err, diag = _raw_exceedance(model, x, u, alpha, T)
    return LawResult(_clamp_prob(value, err), err, "inversion", diag)


def alpha_quantile_price(model, x: float, spec: PricingSpec, tol: float = 1e-3,
                         u_max: float | None = None, max_panels: int = 8) -> LawResult:
    """``exp(-r T) E_x{f(Y_T^alpha)} = exp(-r T) int_0^inf f'(u) P_x(Y_T^alpha > u) du``.

    The outer integral runs to ``spec.cap`` when given, otherwise to the first ``u``
    where the exceedance probability drops below ``tol`` (it is decreasing in ``u``).
    The integral uses composite 15-point Gauss-Kronrod rules on 1, 2, 4, ...
    panels (at most ``max_panels``) and stops when successive values differ by less
    than ``tol`` or than the inversion noise; that difference is the quadrature
    error.  Exceedance probabilities are cached per ``u``.  Inverted values are projected
    onto ``[0, 1]``; the reported error integrates ``f'`` against the inversion
    diagnostic plus the size of any projection, so overshoot near ``u = 0`` is
    accounted for rather than hidden.
    """
    if spec.payoff_deriv is None:
        raise DomainViolation("alpha-quantile pricing needs the payoff derivative")
    model.check_state(x)
    T, alpha = spec.maturity, spec.alpha
    cache = {}

    def prob(u):
        if u not in cache:
            if u <= 0:
                cache[u] = (1.0, 0.0)
            else:
                value, err, _ = _raw_exceedance(model, x, u, alpha, T)
                clipped = min(max(value, 0.0), 1.0)
                cache[u] = (clipped, err + abs(value - clipped))
        return cache[u][0]

    if u_max is None:
        u_max = spec.cap
    if u_max is None:
        u_max = math.sqrt(T)
        while prob(u_max) > tol:
            u_max *= 1.5
    fp = spec.payoff_deriv

    def integrand(u):
        u = np.atleast_1d(u)
        return np.array([float(fp(ui)) * prob(float(ui)) if ui > 0 else 0.0 for ui in u])

    def noise():
        # trapezoid of |f'| * node error over the evaluated nodes, flat at both ends
        nodes = np.array(sorted(u for u in cache if 0 < u <= u_max))
        bad = np.array([abs(float(fp(u))) * cache[u][1] for u in nodes])
        grid = np.concatenate([[0.0], nodes, [u_max]])
        vals = np.concatenate([bad[:1], bad, bad[-1:]])
        return float(np.sum(0.5 * (vals[1:] + vals[:-1]) * np.diff(grid)))

    # composite GK15 with doubling panel counts: an adaptive rule would chase the
    # inversion noise, so refinement stops once the change is below tol or the noise
    panels, prev, value = 1, None, None
    while True:
        edges = np.linspace(0.0, u_max, panels + 1)
        k, _, _ = gk15(integrand, edges[:-1], edges[1:])
        value = float(k.sum())
        inv_err = noise()
        if prev is not None:
            change = abs(value - prev)
            if change <= max(tol * (1.0 + abs(value)), 2.0 * inv_err) or panels >= max_panels:
                break
        prev, panels = value, 2 * panels
    nodes = [u for u in cache if 0 < u <= u_max]
    disc = math.exp(-spec.rate * T)
    return LawResult(disc * value, disc * (change + inv_err), "inversion",
                     {"u_max": u_max, "evaluations": len(cache), "panels": panels, "quadrature_error": change,
                      "inversion_error": inv_err,
                      "max_node_error": max((cache[u][1] for u in nodes), default=0.0)})
