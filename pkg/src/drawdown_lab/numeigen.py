"""Numerical eigenfunctions for models without closed forms.

The positive solutions of ``(sigma^2 / 2) f'' + mu f' = q f`` are obtained through
the Riccati equation for ``rho = f'/f``,

    rho' = (2 / sigma^2) (q - mu rho) - rho^2,

integrated in the direction in which the wanted solution dominates: forward from a
left anchor for ``phi_q^+`` and backward from a right anchor for ``phi_q^-``.  Both
anchors start from the local WKB slope, the root of
``(sigma^2 / 2) rho^2 + mu rho - q = 0`` of the right sign, and the anchor distance
is doubled until the solution on the window no longer moves.  ``log f`` is carried
along so no growing exponentials are ever formed.

Outside the window the log-eigenfunctions are continued linearly with the slope at
the window edge.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import solve_ivp

from .errors import DomainViolation, NonConvergence, WindowTooWide
from .model import DiffusionModel, EigenPair, _scalarize


@dataclass(frozen=True)
class OdeEigenConfig:
    """Integration settings for :func:`solve_eigenpair`.

    Parameters
    ----------
    rtol, atol : float
        Tolerances passed to the ODE solver.
    x_lo, x_hi : float
        Window on which the eigenfunctions are required; must contain kappa.
    anchor : float
        Initial far-field anchor distance beyond the window.
    anchor_tol : float
        Stop doubling the anchor distance once ``rho`` on the window moves less than this.
    max_doublings : int
        Cap on anchor doublings before :class:`NonConvergence` is raised.
    """

    rtol: float = 1e-11
    atol: float = 1e-12
    x_lo: float = -10.0
    x_hi: float = 10.0
    anchor: float = 4.0
    anchor_tol: float = 1e-8
    max_doublings: int = 8

    def __post_init__(self):
        if not (self.rtol > 0 and self.atol > 0 and self.anchor > 0 and self.anchor_tol > 0):
            raise DomainViolation("tolerances and anchor distance must be positive")
        if not self.x_lo < self.x_hi:
            raise DomainViolation("x_lo must be below x_hi")


def _wkb_slope(mu, sig, q, sign):
    # root of (sig^2 / 2) r^2 + mu r - q = 0 with the requested sign
    disc = math.sqrt(mu * mu + 2.0 * q * sig * sig)
    if sign > 0:
        return 2.0 * q / (mu + disc) if mu + disc > 0 else (disc - mu) / sig ** 2
    return -2.0 * q / (disc - mu) if disc - mu > 0 else -(disc + mu) / sig ** 2


class _Branch:
    """One Riccati solution on ``[lo, hi]`` with linear continuation of ``log f``."""

    def __init__(self, sol, lo, hi, kappa):
        self.sol, self.lo, self.hi = sol, lo, hi
        self.l0 = float(sol.sol(kappa)[1])
        self.edge = {lo: sol.sol(lo), hi: sol.sol(hi)}

    def _eval(self, x):
        x = np.asarray(x, dtype=float)
        xc = np.clip(x, self.lo, self.hi)
        y = self.sol.sol(xc.ravel()).reshape((2,) + xc.shape)
        rho, logf = y[0].copy(), y[1] - self.l0
        for b in (self.lo, self.hi):
            mask = (x < b) if b == self.lo else (x > b)
            if np.any(mask):
                r, lf = self.edge[b]
                rho = np.where(mask, r, rho)
                logf = np.where(mask, lf - self.l0 + r * (x - b), logf)
        return rho, logf

    def log(self, x):
        return _scalarize(self._eval(x)[1])

    def dlog(self, x):
        return _scalarize(self._eval(x)[0])


def _riccati(model, q):
    def rhs(x, y):
        mu = float(model.drift(x))
        sig = float(model.diffusion(x))
        r = y[0]
        return [2.0 / sig ** 2 * (q - mu * r) - r * r, r]
    return rhs


def _integrate(model, q, start, stop, rho0, cfg):
    sol = solve_ivp(_riccati(model, q), (start, stop), [rho0, 0.0], method="LSODA",
                    rtol=cfg.rtol, atol=cfg.atol, dense_output=True)
    if not sol.success or not np.all(np.isfinite(sol.y)):
        raise NonConvergence(f"Riccati integration failed: {sol.message}")
    return sol


def _solve_side(model, q, cfg, sign):
    lo, hi = cfg.x_lo, cfg.x_hi
    grid = np.linspace(lo, hi, 201)
    dist, prev = cfg.anchor, None
    for _ in range(cfg.max_doublings + 1):
        if sign > 0 and lo - dist <= model.left_boundary:
            # anchored just inside a finite left boundary, where the bounded solution is flat
            start = model.left_boundary + 1e-9 * max(1.0, hi - model.left_boundary)
            return _Branch(_integrate(model, q, start, hi, 0.0, cfg), lo, hi, model.kappa)
        start = lo - dist if sign > 0 else hi + dist
        rho0 = _wkb_slope(float(model.drift(start)), float(model.diffusion(start)), q, sign)
        sol = _integrate(model, q, start, hi if sign > 0 else lo, rho0, cfg)
        rho = sol.sol(grid)[0]
        if prev is not None:
            change = np.max(np.abs(rho - prev) / np.maximum(1.0, np.abs(rho)))
            if change < cfg.anchor_tol:
                return _Branch(sol, lo, hi, model.kappa)
        prev = rho
        dist *= 2.0
    raise NonConvergence("anchor doubling did not stabilise the eigenfunction")


def solve_eigenpair(model: DiffusionModel, q: float, config: OdeEigenConfig | None = None) -> EigenPair:
    """Numerical :class:`EigenPair` for ``model`` at rate ``q > 0``.

    Raises
    ------
    WindowTooWide
        If the window is not inside the state interval or does not contain kappa.
    NonConvergence
        If the anchor doubling does not stabilise or the ODE solver fails.
    """
    cfg = config or OdeEigenConfig()
    if not q > 0:
        raise DomainViolation("numerical eigenfunctions require q > 0")
    if not cfg.x_lo > model.left_boundary:
        raise WindowTooWide("window extends beyond the left boundary")
    if not cfg.x_lo < model.kappa < cfg.x_hi:
        raise WindowTooWide("window must contain kappa")
    plus = _solve_side(model, q, cfg, 1)
    minus = _solve_side(model, q, cfg, -1)
    return EigenPair(plus.log, minus.log, plus.dlog, minus.dlog)


class _ScaleTable:
    """``log s'`` and ``s`` from ``(log s')' = -2 mu / sigma^2``, anchored at kappa."""

    def __init__(self, model, cfg):
        def rhs(x, y):
            lsp = -2.0 * float(model.drift(x)) / float(model.diffusion(x)) ** 2
            return [lsp, math.exp(y[0])]

        k = model.kappa
        self.lo, self.hi = cfg.x_lo, cfg.x_hi
        up = solve_ivp(rhs, (k, self.hi), [0.0, 0.0], rtol=cfg.rtol, atol=cfg.atol, dense_output=True)
        dn = solve_ivp(rhs, (k, self.lo), [0.0, 0.0], rtol=cfg.rtol, atol=cfg.atol, dense_output=True)
        if not (up.success and dn.success):
            raise NonConvergence("scale function integration failed")
        self.up, self.dn, self.k = up.sol, dn.sol, k
        self.slope = {self.lo: -2.0 * float(model.drift(self.lo)) / float(model.diffusion(self.lo)) ** 2,
                      self.hi: -2.0 * float(model.drift(self.hi)) / float(model.diffusion(self.hi)) ** 2}

    def _eval(self, x):
        x = np.asarray(x, dtype=float)
        flat = x.ravel()
        xc = np.clip(flat, self.lo, self.hi)
        out = np.where(xc >= self.k, self.up(xc), self.dn(xc))
        lsp, s = out[0].copy(), out[1].copy()
        for b in (self.lo, self.hi):
            mask = flat < b if b == self.lo else flat > b
            if np.any(mask):
                lb, sb = (self.dn if b == self.lo else self.up)(b)
                c, d = self.slope[b], flat[mask] - b
                lsp[mask] = lb + c * d
                # s' = exp(lb + c t): integral from b
                grow = d if c == 0 else np.expm1(c * d) / c
                s[mask] = sb + math.exp(lb) * grow
        return lsp.reshape(x.shape), s.reshape(x.shape)

    def deriv(self, x):
        return _scalarize(np.exp(self._eval(x)[0]))

    def value(self, x):
        return _scalarize(self._eval(x)[1])


def numeric_model(drift, diffusion, left_boundary=-math.inf, kappa=0.0, config=None,
                  name="custom", params=None) -> DiffusionModel:
    """A :class:`DiffusionModel` whose scale function and eigenfunctions are computed numerically.

    Eigenpairs are cached per rate.  Coefficients must accept scalar arguments.
    """
    cfg = config or OdeEigenConfig(x_lo=max(kappa - 10.0, _inside(left_boundary, kappa)),
                                   x_hi=kappa + 10.0)
    holder = {}

    @lru_cache(maxsize=64)
    def eigen(q):
        return solve_eigenpair(holder["model"], q, cfg)

    probe = DiffusionModel(drift=drift, diffusion=diffusion, left_boundary=left_boundary,
                           kappa=kappa, scale=lambda x: x, scale_deriv=lambda x: np.ones_like(x))
    table = _ScaleTable(probe, cfg)
    model = DiffusionModel(drift=drift, diffusion=diffusion, left_boundary=left_boundary,
                           kappa=kappa, scale=table.value, scale_deriv=table.deriv,
                           eigen=eigen, name=name, params=dict(params or {}))
    holder["model"] = model
    return model


def _inside(left, kappa):
    if not math.isfinite(left):
        return -math.inf
    return left + 0.02 * (kappa - left)
