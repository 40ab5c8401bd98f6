"""Closed-form eigenfunctions and laws for Brownian motion with drift and BES(3).

Brownian motion ``dX = mu dt + sigma dB`` uses ``delta = mu / sigma**2`` and
``gamma(q) = sqrt(delta**2 + 2 q / sigma**2)``.  The scale function is
``s(x) = (1 - exp(-2 delta x)) / delta`` which becomes ``2 x`` when ``delta = 0``, so
that ``w_q = gamma`` holds on both branches.

The three-dimensional Bessel process lives on ``(0, inf)`` with ``nu(q) = sqrt(2 q)``,
``s(x) = -1/x`` and eigenfunctions normalised at ``x = 1``.

Hyperbolic functions are evaluated through ``exp(-2 z)`` so that arguments of
several hundred do not overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DomainViolation
from .model import DiffusionModel, EigenPair, _scalarize


# stable hyperbolic helpers, valid for z > 0

def coth(z):
    z = np.asarray(z, float)
    return _scalarize(1.0 / np.tanh(z))


def csch(z):
    z = np.asarray(z, float)
    return _scalarize(2.0 * np.exp(-z) / -np.expm1(-2.0 * z))


def log_sinh(z):
    z = np.asarray(z, float)
    return _scalarize(z + np.log(-np.expm1(-2.0 * z)) - math.log(2.0))


def _xcoth_minus_one(z):
    # z coth z - 1, accurate for small z
    z = np.asarray(z, float)
    small = np.abs(z) < 1e-3
    zs = np.where(small, 1.0, z)
    direct = zs / np.tanh(zs) - 1.0
    series = z * z / 3.0 - z ** 4 / 45.0
    return np.where(small, series, direct)


@dataclass(frozen=True)
class BrownianParams:
    """Drift ``mu`` and volatility ``sigma > 0`` of a Brownian motion."""

    mu: float = 0.0
    sigma: float = 1.0

    def __post_init__(self):
        if not self.sigma > 0:
            raise DomainViolation("sigma must be positive")

    @property
    def delta(self) -> float:
        return self.mu / self.sigma ** 2

    def gamma(self, q: float) -> float:
        if q < 0:
            raise DomainViolation("q must be nonnegative")
        return math.sqrt(self.delta ** 2 + 2.0 * q / self.sigma ** 2)


@dataclass(frozen=True)
class Bessel3Params:
    """BES(3) has no free parameters; the state interval is ``(0, inf)``."""

    @staticmethod
    def nu(q: float) -> float:
        if q < 0:
            raise DomainViolation("q must be nonnegative")
        return math.sqrt(2.0 * q)


def _const(c):
    return lambda x: np.full_like(np.asarray(x, float), c)


def bm_eigenpair(params: BrownianParams, q: float) -> EigenPair:
    g, d = params.gamma(q), params.delta
    return EigenPair(
        log_plus=lambda x: (g - d) * np.asarray(x, float),
        log_minus=lambda x: -(g + d) * np.asarray(x, float),
        dlog_plus=_const(g - d),
        dlog_minus=_const(-(g + d)),
    )


def bm_provider(params: BrownianParams) -> DiffusionModel:
    """Brownian motion with drift as a :class:`DiffusionModel` with analytic eigenfunctions."""
    mu, sigma, d = params.mu, params.sigma, params.delta
    if d == 0.0:
        scale = lambda x: 2.0 * np.asarray(x, float)
        scale_deriv = _const(2.0)
        scale_diff = lambda x, y: 2.0 * (np.asarray(x, float) - y)
        log_scale_deriv = lambda x: math.log(2.0) + 0.0 * np.asarray(x, float)
        scale_diff_rel = lambda x, y: np.asarray(x, float) - y
    else:
        scale = lambda x: -np.expm1(-2.0 * d * np.asarray(x, float)) / d
        scale_deriv = lambda x: 2.0 * np.exp(-2.0 * d * np.asarray(x, float))

        def scale_diff(x, y):
            x, y = np.asarray(x, float), np.asarray(y, float)
            return np.exp(-2.0 * d * y) * -np.expm1(-2.0 * d * (x - y)) / d

        log_scale_deriv = lambda x: math.log(2.0) - 2.0 * d * np.asarray(x, float)
        scale_diff_rel = lambda x, y: -np.expm1(-2.0 * d * (np.asarray(x, float) - y)) / (2.0 * d)
    return DiffusionModel(
        drift=_const(mu),
        diffusion=_const(sigma),
        left_boundary=-math.inf,
        kappa=0.0,
        scale=scale,
        scale_deriv=scale_deriv,
        scale_diff=scale_diff,
        log_scale_deriv=log_scale_deriv,
        scale_diff_rel=scale_diff_rel,
        eigen=lambda q: bm_eigenpair(params, q),
        name="bm",
        params={"mu": mu, "sigma": sigma},
    )


bm_model = bm_provider


def bes3_eigenpair(q: float) -> EigenPair:
    nu = Bessel3Params.nu(q)
    lsn = log_sinh(nu)

    def log_plus(x):
        x = np.asarray(x, float)
        return log_sinh(nu * x) - np.log(x) - lsn

    def dlog_plus(x):
        x = np.asarray(x, float)
        return _xcoth_minus_one(nu * x) / x

    return EigenPair(
        log_plus=log_plus,
        log_minus=lambda x: -nu * (np.asarray(x, float) - 1.0) - np.log(x),
        dlog_plus=dlog_plus,
        dlog_minus=lambda x: -nu - 1.0 / np.asarray(x, float),
    )


def bes3_provider(params: Bessel3Params | None = None) -> DiffusionModel:
    """Three-dimensional Bessel process ``dX = dt / X + dB`` on ``(0, inf)``."""

    def drift(x):
        x = np.asarray(x, float)
        if np.any(x <= 0):
            raise DomainViolation("BES(3) is defined for x > 0")
        return 1.0 / x

    return DiffusionModel(
        drift=drift,
        diffusion=_const(1.0),
        left_boundary=0.0,
        kappa=1.0,
        scale=lambda x: -1.0 / np.asarray(x, float),
        scale_deriv=lambda x: 1.0 / np.asarray(x, float) ** 2,
        scale_diff=lambda x, y: (np.asarray(x, float) - y) / (np.asarray(x, float) * y),
        log_scale_deriv=lambda x: -2.0 * np.log(x),
        scale_diff_rel=lambda x, y: (np.asarray(x, float) - y) * y / np.asarray(x, float),
        eigen=bes3_eigenpair,
        name="bes3",
        params={},
    )


bes3_model = bes3_provider


class OrderingPair(NamedTuple):
    """``dd_first = P(sigma_a < hat sigma_b ^ e_q)``, ``du_first = P(hat sigma_b < sigma_a ^ e_q)``."""

    dd_first: float
    du_first: float


def bm_drawdown_lt(params: BrownianParams, q: float, a: float) -> float:
    """``E{exp(-q sigma_a)}`` for Brownian motion with drift."""
    if not a > 0:
        raise DomainViolation("a must be positive")
    g, d = params.gamma(q), params.delta
    if g == 0.0:
        return 1.0
    # gamma e^{-delta a} / (gamma cosh(gamma a) - delta sinh(gamma a)), rescaled by e^{-gamma a}
    den = 0.5 * (g - d) + 0.5 * (g + d) * math.exp(-2.0 * g * a)
    return g * math.exp(-(d + g) * a) / den


def bm_drawup_lt(params: BrownianParams, q: float, b: float) -> float:
    """``E{exp(-q hat sigma_b)}``: the drawdown transform of ``-X``."""
    return bm_drawdown_lt(BrownianParams(-params.mu, params.sigma), q, b)


def bes3_drawdown_lt(x: float, q: float, a: float) -> float:
    """``E_x{exp(-q sigma_a)}`` for BES(3); requires ``x > a > 0``."""
    if not a > 0:
        raise DomainViolation("a must be positive")
    if not x > a:
        raise DomainViolation("BES(3) drawdown transform requires x > a")
    nu = Bessel3Params.nu(q)
    if nu == 0.0:
        return 1.0
    z = nu * a
    sech = 2.0 * math.exp(-z) / (1.0 + math.exp(-2.0 * z))
    return sech * ((x - a) / x + math.tanh(z) / (nu * x))


def _first_branch(sig2, q, g, d, c, excess):
    # (sig2 g / 2q)(e^{-d c}(g coth(g c) + d) csch(g c) - g csch^2(g c)) e^{-excess (d + g coth(g c))}
    z = g * c
    e2 = math.exp(-2.0 * z)
    om = -math.expm1(-2.0 * z)
    cth = (1.0 + e2) / om
    # e^{-d c} csch(g c) = 2 e^{-(d + g) c} / om
    t1 = (g * cth + d) * 2.0 * math.exp(-(d + g) * c) / om
    t2 = g * 4.0 * e2 / (om * om)
    return sig2 * g / (2.0 * q) * (t1 - t2) * math.exp(-excess * (d + g * cth))


def bm_prob_dd_before_du(params: BrownianParams, q: float, a: float, b: float) -> OrderingPair:
    """Both ordering probabilities of drawdown ``a`` and drawup ``b`` before ``e_q``.

    Returns ``OrderingPair(P(sigma_a < hat sigma_b ^ e_q), P(hat sigma_b < sigma_a ^ e_q))``
    for Brownian motion with drift, using the branch matching the sign of ``a - b``.
    """
    if not (a > 0 and b > 0):
        raise DomainViolation("a and b must be positive")
    if not q > 0:
        raise DomainViolation("q must be positive")
    g, d, sig2 = params.gamma(q), params.delta, params.sigma ** 2
    if a >= b:
        dd = _first_branch(sig2, q, g, d, b, a - b)
        # the drawup counterpart is the same expression for -X with roles of a, b swapped
        du = (1.0 - dd) * bm_drawup_lt(params, q, b) if a > b else _first_branch(sig2, q, g, -d, a, 0.0)
    else:
        du = _first_branch(sig2, q, g, -d, a, b - a)
        dd = (1.0 - du) * bm_drawdown_lt(params, q, a)
    return OrderingPair(float(dd), float(du))


def bm_prob_du_before_dd(params: BrownianParams, q: float, a: float, b: float) -> float:
    """``P(hat sigma_b < sigma_a ^ e_q)`` for Brownian motion with drift."""
    return bm_prob_dd_before_du(params, q, a, b).du_first


def bm_symmetric_ordering(q: float, a: float, sigma: float = 1.0) -> float:
    """Driftless case ``a = b``: ``1 / (cosh(sqrt(2 q) a / sigma) + 1)``."""
    z = math.sqrt(2.0 * q) * a / sigma
    e = math.exp(-z)
    return 2.0 * e / (1.0 + e) ** 2
