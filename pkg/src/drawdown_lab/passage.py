"""First-passage, drawdown and drawup ordering laws.

Notation: ``tau_y`` is the first hitting time of ``y``, ``sigma_a`` the first time the
drawdown ``Y = running max - X`` reaches ``a``, ``hat sigma_b`` the first time the
drawup ``hat Y = X - running min`` reaches ``b`` and ``e_q`` an independent
exponential clock of rate ``q`` (``q = 0`` means no clock).  All functions return a
:class:`~drawdown_lab.results.LawResult`.

Inner exponents of the form ``exp(-int R(v, v - a) dv)`` with
``R(x, y) = W_{q,1}(x, y) / W_q(x, y)`` are handled by
:class:`~drawdown_lab.quad.ExponentAccumulator` so that every outer integral shares
one panel representation.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import DomainViolation, GeometryViolation
from .model import DiffusionModel, build_kernel
from .quad import ExponentAccumulator, integrate
from .results import Density, LawResult

TOL = 1e-11


def check_rate(q, name="q", positive=False):
    if not (q > 0 if positive else q >= 0) or not math.isfinite(q):
        raise DomainViolation(f"{name} must be {'positive' if positive else 'nonnegative'}")


def check_threshold(v, name):
    if not v > 0 or not math.isfinite(v):
        raise DomainViolation(f"{name} must be positive")


def length_scale(model: DiffusionModel, x: float, a: float) -> float:
    return max(a, 1e-3)


# accumulators shared by several laws

def drawdown_accumulator(model, q, x, a, tol=TOL, limit=None, reach=None):
    """Rightward accumulator of ``R(v, v - a)`` from ``x`` with payload ``s'(v) / W_q(v, v - a)``.

    ``tail(0, z)`` is ``E_z{exp(-q sigma_a)}`` for ``z >= x``.
    """
    k = build_kernel(model, q)
    return ExponentAccumulator(
        lambda v: k.ratio(v, v - a), x, direction=1,
        payloads=[lambda v: k.sp(v) / k.w(v, v - a)],
        limit=limit, scale=length_scale(model, x, a), tol=tol, reach=reach)


def drawup_accumulator(model, q, x, b, tol=TOL, limit=None, reach=None):
    """Leftward accumulator of ``-R(v, v + b)`` from ``x`` with payload ``s'(v) / W_q(v + b, v)``.

    ``tail(0, z)`` is ``E_z{exp(-q hat sigma_b)}`` for ``z <= x``.  When ``limit`` is
    omitted the panels run down to the left boundary (or until the exponent decays).
    """
    k = build_kernel(model, q)
    if limit is None and math.isfinite(model.left_boundary):
        limit = model.left_boundary
    return ExponentAccumulator(
        lambda v: -k.ratio(v, v + b), x, direction=-1,
        payloads=[lambda v: k.sp(v) / k.w(v + b, v)],
        limit=limit, scale=length_scale(model, x, b), tol=tol, reach=reach)


def exit_transform(model: DiffusionModel, q: float, x: float, y: float, z: float) -> LawResult:
    """``E_x{exp(-q tau_y); tau_y < tau_z} = W_q(x, z) / W_q(y, z)`` for ``x`` strictly between ``y`` and ``z``."""
    check_rate(q)
    model.check_state(x, y, z)
    if not (x - y) * (z - x) > 0 and x != y:
        raise GeometryViolation("x must lie strictly between y and z")
    if x == y:
        return LawResult(1.0, 0.0, "closed-form", {"route": "kernel-ratio"})
    k = build_kernel(model, q)
    val = float(k.w(x, z) / k.w(y, z))
    return LawResult(val, 1e-15 * abs(val), "closed-form", {"route": "kernel-ratio"})


def down_before_drawup(model, q, m, n, b, tol=TOL) -> LawResult:
    """``P_m(tau_n^- < hat sigma_b ^ e_q) = exp(int_n^m R(v, v + b) dv)`` for ``n <= m``."""
    check_rate(q)
    check_threshold(b, "b")
    if not n <= m:
        raise GeometryViolation("n must not exceed m")
    model.check_state(n)
    if n == m:
        return LawResult(1.0, 0.0, "quadrature", {"route": "empty"})
    k = build_kernel(model, q)
    res = integrate(lambda v: k.ratio(v, v + b), n, m, tol=tol)
    val = math.exp(res.value)
    return LawResult(val, val * res.error, "quadrature", {"intervals": res.n_intervals})


def up_before_drawdown(model, q, n, m, a, tol=TOL) -> LawResult:
    """``P_n(tau_m^+ < sigma_a ^ e_q) = exp(-int_n^m R(v, v - a) dv)`` for ``n <= m``."""
    check_rate(q)
    check_threshold(a, "a")
    if not n <= m:
        raise GeometryViolation("n must not exceed m")
    model.check_state(n - a)
    if n == m:
        return LawResult(1.0, 0.0, "quadrature", {"route": "empty"})
    k = build_kernel(model, q)
    res = integrate(lambda v: k.ratio(v, v - a), n, m, tol=tol)
    val = math.exp(-res.value)
    return LawResult(val, val * res.error, "quadrature", {"intervals": res.n_intervals})


def drawdown_transform(model, q, x, a, tol=TOL) -> LawResult:
    """``E_x{exp(-q sigma_a)}`` (``P_x(sigma_a < inf)`` at ``q = 0``).

    At ``q = 0`` a transient model yields a defective value; the missing mass is
    reported under ``diagnostics["mass_at_infinity"]`` and never renormalised.
    """
    check_rate(q)
    check_threshold(a, "a")
    model.check_state(x - a)
    acc = drawdown_accumulator(model, q, x, a, tol)
    val = acc.tail(0)
    diag = {"route": "drawdown-tail", "panels": acc.n_panels, "truncation": acc.u_end}
    if q == 0:
        diag["mass_at_infinity"] = max(0.0, 1.0 - val)
    return LawResult(val, acc.tail_errors[0], "quadrature", diag)


def drawup_transform(model, q, x, b, tol=TOL) -> LawResult:
    """``E_x{exp(-q hat sigma_b)}``, the mirror image of :func:`drawdown_transform`."""
    check_rate(q)
    check_threshold(b, "b")
    model.check_state(x)
    acc = drawup_accumulator(model, q, x, b, tol)
    val = acc.tail(0)
    diag = {"route": "drawup-tail", "panels": acc.n_panels, "truncation": acc.u_end}
    if q == 0:
        diag["mass_at_infinity"] = max(0.0, 1.0 - val)
    return LawResult(val, acc.tail_errors[0], "quadrature", diag)


def max_at_drawdown_survival(model, x, m, a, tol=TOL) -> LawResult:
    """``P_x(running max at sigma_a >= m) = exp(-int_x^m s'(v) / (s(v) - s(v - a)) dv)``."""
    check_threshold(a, "a")
    if not m >= x:
        raise GeometryViolation("m must be at least x")
    model.check_state(x - a)
    if m == x:
        return LawResult(1.0, 0.0, "quadrature", {"route": "empty"})
    res = integrate(lambda v: model.scale_deriv(v) / model.scale_diff(v, v - a), x, m, tol=tol)
    val = math.exp(-res.value)
    return LawResult(val, val * res.error, "quadrature", {"intervals": res.n_intervals})


def _ordering_query(model, q, x, a, b):
    check_rate(q)
    check_threshold(a, "a")
    check_threshold(b, "b")
    model.check_state(x - max(a, b), what="x - max(a, b)")


def dd_first_density(model, q, x, a, b, tol=TOL, acc=None) -> Density:
    """Density in ``u`` of ``P_x(sigma_a < hat sigma_b ^ e_q, X_{sigma_a} in b - a + du)``, ``a >= b``.

    Supported on ``(x - b, x)``; ``mass`` is the probability itself.
    """
    _ordering_query(model, q, x, a, b)
    if a < b:
        raise GeometryViolation("this density requires a >= b")
    k = build_kernel(model, q)
    c = a - b
    if acc is None and c > 0:
        acc = drawup_accumulator(model, q, x, b, tol, limit=x - a)

    def pdf(u):
        u = np.asarray(u, float)
        base = k.sp(u + b) * k.w(x, u) / k.w(u + b, u) ** 2
        if c == 0:
            return base
        return base * np.exp(acc.H(u) - acc.H(u - c))

    res = integrate(pdf, x - b, x, tol=tol)
    return Density((x - b, x), pdf, res.value)


def du_first_density(model, q, x, a, b, tol=TOL, acc=None) -> Density:
    """Density in ``u`` of ``P_x(hat sigma_b < sigma_a ^ e_q, X_{hat sigma_b} in b - a + du)``, ``b >= a``.

    Supported on ``(x, x + a)``.
    """
    _ordering_query(model, q, x, a, b)
    if b < a:
        raise GeometryViolation("this density requires b >= a")
    k = build_kernel(model, q)
    c = b - a
    if acc is None and c > 0:
        acc = drawdown_accumulator(model, q, x, a, tol, limit=x + b)

    def pdf(u):
        u = np.asarray(u, float)
        base = k.sp(u - a) * k.w(u, x) / k.w(u, u - a) ** 2
        if c == 0:
            return base
        return base * np.exp(acc.H(u) - acc.H(u + c))

    res = integrate(pdf, x, x + a, tol=tol)
    return Density((x, x + a), pdf, res.value)


def dd_before_du(model, q, x, a, b, route="auto", tol=TOL) -> LawResult:
    """``P_x(sigma_a < hat sigma_b ^ e_q)``.

    Parameters
    ----------
    route : {"auto", "direct", "complement"}
        ``"direct"`` integrates the density of ``X_{sigma_a}`` and needs ``a >= b``.
        ``"complement"`` subtracts ``P_x(hat sigma_b < sigma_a < e_q)`` from the
        drawdown transform and needs ``b >= a``.  ``"auto"`` picks ``direct`` when
        ``a >= b``.
    """
    _ordering_query(model, q, x, a, b)
    if route == "auto":
        route = "direct" if a >= b else "complement"
    if route == "direct":
        if a < b:
            raise GeometryViolation("the direct route requires a >= b")
        dens = dd_first_density(model, q, x, a, b, tol)
        return LawResult(dens.mass, tol * (1 + dens.mass), "quadrature",
                         {"route": "direct", "density": dens})
    if route != "complement":
        raise ValueError(f"unknown route {route!r}")
    if b < a:
        raise GeometryViolation("the complement route requires b >= a")
    c = b - a
    acc = drawdown_accumulator(model, q, x, a, tol, reach=x + b)
    total = acc.tail(0)
    dens = du_first_density(model, q, x, a, b, tol, acc=acc)
    res = integrate(lambda u: dens.pdf(u) * acc.tail(0, u + c), x, x + a, tol=tol)
    val = total - res.value
    diag = {"route": "complement", "drawdown_transform": total, "subtracted": res.value,
            "panels": acc.n_panels}
    if q == 0:
        diag["mass_at_infinity"] = max(0.0, 1.0 - total)
    return LawResult(val, acc.tail_errors[0] + res.error, "quadrature", diag)


def du_before_dd(model, q, x, a, b, route="auto", tol=TOL) -> LawResult:
    """``P_x(hat sigma_b < sigma_a ^ e_q)``; mirror image of :func:`dd_before_du`.

    ``"direct"`` needs ``b >= a``; ``"complement"`` needs ``a >= b`` and subtracts
    ``P_x(sigma_a < hat sigma_b < e_q)`` from the drawup transform.
    """
    _ordering_query(model, q, x, a, b)
    if route == "auto":
        route = "direct" if b >= a else "complement"
    if route == "direct":
        if b < a:
            raise GeometryViolation("the direct route requires b >= a")
        dens = du_first_density(model, q, x, a, b, tol)
        return LawResult(dens.mass, tol * (1 + dens.mass), "quadrature",
                         {"route": "direct", "density": dens})
    if route != "complement":
        raise ValueError(f"unknown route {route!r}")
    if a < b:
        raise GeometryViolation("the complement route requires a >= b")
    c = a - b
    acc = drawup_accumulator(model, q, x, b, tol, reach=x - a)
    total = acc.tail(0)
    dens = dd_first_density(model, q, x, a, b, tol, acc=acc)
    res = integrate(lambda u: dens.pdf(u) * acc.tail(0, u - c), x - b, x, tol=tol)
    val = total - res.value
    diag = {"route": "complement", "drawup_transform": total, "subtracted": res.value,
            "panels": acc.n_panels}
    return LawResult(val, acc.tail_errors[0] + res.error, "quadrature", diag)
