"""Diffusion models and the rate-q kernel calculus built from their eigenfunctions.

For a regular diffusion ``dX = mu(X) dt + sigma(X) dB`` on ``(l, inf)`` every law in
this package is expressed through the scale function ``s`` and, for a rate
``q > 0``, through the positive increasing/decreasing solutions ``phi_q^+`` and
``phi_q^-`` of ``(L f) = q f``.  The two-variable kernel

    W_q(x, y) = (phi_q^+(x) phi_q^-(y) - phi_q^+(y) phi_q^-(x)) / w_q

and its partial derivatives ``W_{q,1} = d/dx W_q``, ``W_{q,2} = d/dy W_{q,1}`` are
provided by :class:`QKernel`.  At ``q = 0`` the kernel degenerates to
``W_0(x, y) = s(x) - s(y)``.

Eigenfunctions are handled on the log scale: a provider returns ``log phi`` and the
logarithmic derivative ``phi'/phi``, which keeps products such as
``phi^+(x) phi^-(y)`` finite far out in the state space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Mapping

import numpy as np

from .errors import DomainViolation, EigenfunctionUnavailable, NonPositiveDiffusion

EPS = np.finfo(float).eps
FD_STEP = EPS ** (1.0 / 3.0)
COINCIDENT_REL = 1e-7


def _scalarize(arr):
    arr = np.asarray(arr)
    return arr[()] if arr.ndim == 0 else arr


def _central_diff(f, x):
    x = np.asarray(x, dtype=float)
    h = FD_STEP * np.maximum(1.0, np.abs(x))
    return (f(x + h) - f(x - h)) / (2.0 * h)


@dataclass(frozen=True)
class EigenPair:
    """Increasing/decreasing eigenfunctions at a single rate, on the log scale.

    ``dlog_plus``/``dlog_minus`` are ``phi'/phi``; when omitted they are obtained by
    central differences of the log-eigenfunctions.
    """

    log_plus: Callable
    log_minus: Callable
    dlog_plus: Callable | None = None
    dlog_minus: Callable | None = None

    @classmethod
    def from_functions(cls, phi_plus, phi_minus, dphi_plus=None, dphi_minus=None):
        """Wrap plain eigenfunctions (and optional derivatives) as an :class:`EigenPair`."""
        dlp = None if dphi_plus is None else (lambda x: dphi_plus(x) / phi_plus(x))
        dlm = None if dphi_minus is None else (lambda x: dphi_minus(x) / phi_minus(x))
        return cls(lambda x: np.log(phi_plus(x)), lambda x: np.log(phi_minus(x)), dlp, dlm)

    def rate_plus(self, x):
        if self.dlog_plus is not None:
            return self.dlog_plus(x)
        return _central_diff(self.log_plus, x)

    def rate_minus(self, x):
        if self.dlog_minus is not None:
            return self.dlog_minus(x)
        return _central_diff(self.log_minus, x)

    @property
    def analytic(self) -> bool:
        return self.dlog_plus is not None and self.dlog_minus is not None


@dataclass(frozen=True, eq=False)
class DiffusionModel:
    """A time-homogeneous diffusion on ``(left_boundary, inf)``.

    Parameters
    ----------
    drift, diffusion : callable
        Vectorised coefficient functions ``mu(x)`` and ``sigma(x)``.
    left_boundary : float
        Left end ``l`` of the state interval (``-inf`` allowed).
    kappa : float
        Point where the eigenfunctions are normalised to one.
    scale, scale_deriv : callable, optional
        Scale function and its derivative.  When absent they are computed from the
        coefficients by quadrature, anchored at ``scale_anchor`` (defaults to kappa).
    eigen : callable, optional
        ``q -> EigenPair``.  Required for every law with ``q > 0``.
    name : str
        Short label used by the CLI and by the simulator to pick a scheme.
    params : mapping
        Free-form model parameters (e.g. ``{"mu": 0.0, "sigma": 1.0}``).
    scale_anchor : float, optional
        Point where ``s' = 1`` for the numerical scale function.
    scale_diff : callable, optional
        ``(x, y) -> s(x) - s(y)`` evaluated without cancellation; defaults to the
        plain difference.
    log_scale_deriv : callable, optional
        ``log s'(x)``; defaults to the logarithm of ``scale_deriv``.
    scale_diff_rel : callable, optional
        ``(x, y) -> (s(x) - s(y)) / s'(y)``; defaults to the quotient.  Models whose
        ``s'`` underflows far out supply both in closed form.
    """

    drift: Callable
    diffusion: Callable
    left_boundary: float = -math.inf
    kappa: float = 0.0
    scale: Callable | None = None
    scale_deriv: Callable | None = None
    eigen: Callable[[float], EigenPair] | None = None
    name: str = "custom"
    params: Mapping = field(default_factory=dict)
    scale_anchor: float | None = None
    scale_diff: Callable | None = None
    log_scale_deriv: Callable | None = None
    scale_diff_rel: Callable | None = None

    def __post_init__(self):
        if not self.kappa > self.left_boundary:
            raise DomainViolation("kappa must lie inside the state interval")
        probe = self.probe_grid()
        sig = np.asarray(self.diffusion(probe), dtype=float)
        if not np.all(np.isfinite(sig)) or np.any(np.broadcast_to(sig, probe.shape) <= 0):
            raise NonPositiveDiffusion("diffusion coefficient must be strictly positive on I")
        if self.scale_anchor is None:
            object.__setattr__(self, "scale_anchor", self.kappa)
        if self.scale_deriv is None:
            object.__setattr__(self, "scale_deriv", self._numeric_scale_deriv)
        if self.scale_diff is None:
            diff = self._numeric_scale_diff if self.scale is None else (lambda x, y: self.scale(x) - self.scale(y))
            object.__setattr__(self, "scale_diff", diff)
        if self.scale is None:
            object.__setattr__(self, "scale", self._numeric_scale)
        if self.log_scale_deriv is None:
            object.__setattr__(self, "log_scale_deriv", lambda x: np.log(self.scale_deriv(x)))
        if self.scale_diff_rel is None:
            object.__setattr__(self, "scale_diff_rel", lambda x, y: self.scale_diff(x, y) / self.scale_deriv(y))

    def probe_grid(self, n=41):
        lo = self.kappa - 5.0
        if math.isfinite(self.left_boundary):
            lo = max(lo, self.left_boundary + 0.05 * (self.kappa - self.left_boundary))
        return np.linspace(lo, self.kappa + 5.0, n)

    def check_state(self, *xs, what="x"):
        for x in xs:
            if not np.all(np.asarray(x) > self.left_boundary):
                raise DomainViolation(f"{what} must lie in the state interval ({self.left_boundary}, inf)")

    # Numerical fallbacks; models with closed forms override both callables.
    def _numeric_scale_deriv(self, x):
        from .quad import integrate

        def one(v):
            res = integrate(lambda u: 2.0 * self.drift(u) / self.diffusion(u) ** 2,
                            self.scale_anchor, v, tol=1e-12) if v != self.scale_anchor else None
            return math.exp(-res.value) if res is not None else 1.0

        return _scalarize(np.vectorize(one, otypes=[float])(np.asarray(x, dtype=float)))

    def _numeric_scale_diff(self, x, y):
        from .quad import integrate

        def one(u, v):
            if u == v:
                return 0.0
            return integrate(self._numeric_scale_deriv, v, u, tol=1e-12).value

        return _scalarize(np.vectorize(one, otypes=[float])(np.asarray(x, float), np.asarray(y, float)))

    def _numeric_scale(self, x):
        from .quad import integrate

        def one(v):
            if v == self.scale_anchor:
                return 0.0
            return integrate(self._numeric_scale_deriv, self.scale_anchor, v, tol=1e-12).value

        return _scalarize(np.vectorize(one, otypes=[float])(np.asarray(x, dtype=float)))


class QKernel:
    """Kernel ``W_q`` and its derivatives for one model at one rate ``q >= 0``.

    Instances are immutable and safe to share.  All methods broadcast over numpy
    arrays.  Eigenfunctions are renormalised so that ``phi_q^+(kappa) =
    phi_q^-(kappa) = 1`` and ``wronskian`` is the constant ``w_q``.
    """

    def __init__(self, model: DiffusionModel, q: float):
        if not q >= 0:
            raise DomainViolation("q must be nonnegative")
        self.model = model
        self.q = float(q)
        self.s = model.scale
        self.sp = model.scale_deriv
        self.ds = model.scale_diff
        if self.q == 0.0:
            self.pair = None
            self.wronskian = None
            return
        if model.eigen is None:
            raise EigenfunctionUnavailable(f"model {model.name!r} has no eigenfunction provider")
        try:
            pair = model.eigen(self.q)
        except EigenfunctionUnavailable:
            raise
        except Exception as exc:  # provider-specific failures
            raise EigenfunctionUnavailable(f"eigenfunctions unavailable at q={q}: {exc}") from exc
        self.pair = pair
        k = model.kappa
        self._lp0 = float(pair.log_plus(k))
        self._lm0 = float(pair.log_minus(k))
        w = (float(pair.rate_plus(k)) - float(pair.rate_minus(k))) / float(self.sp(k))
        if not w > 0 or not math.isfinite(w):
            raise EigenfunctionUnavailable(f"non-positive Wronskian {w} at q={q}")
        self.wronskian = w

    # eigenfunctions, normalised at kappa
    def log_plus(self, x):
        return self.pair.log_plus(x) - self._lp0

    def log_minus(self, x):
        return self.pair.log_minus(x) - self._lm0

    def phi_plus(self, x):
        return np.exp(self.log_plus(x))

    def phi_minus(self, x):
        return np.exp(self.log_minus(x))

    def dlog_plus(self, x):
        """Logarithmic derivative ``phi_q^+'(x) / phi_q^+(x)``."""
        return self.pair.rate_plus(x)

    def dlog_minus(self, x):
        return self.pair.rate_minus(x)

    def _close(self, x, y):
        return np.abs(x - y) < COINCIDENT_REL * np.maximum(1.0, np.abs(x))

    def w(self, x, y):
        """``W_q(x, y)``; antisymmetric, positive for ``x > y``."""
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        close = self._close(x, y)
        if self.q == 0.0:
            out = self.ds(x, y)
        else:
            a = self.log_plus(x) + self.log_minus(y)
            b = self.log_plus(y) + self.log_minus(x)
            with np.errstate(over="ignore", invalid="ignore"):
                out = -np.exp(a) * np.expm1(b - a) / self.wronskian
        if np.any(close):
            out = np.where(close, self.sp(y) * (x - y), out)
        return _scalarize(out)

    def w1(self, x, y):
        """``W_{q,1}(x, y) = d/dx W_q(x, y)``; equals ``s'(y)`` on the diagonal."""
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        close = self._close(x, y)
        if self.q == 0.0:
            out = self.sp(x) * np.ones_like(x)
        else:
            a = self.log_plus(x) + self.log_minus(y)
            b = self.log_plus(y) + self.log_minus(x)
            with np.errstate(over="ignore", invalid="ignore"):
                out = np.exp(a) * (self.dlog_plus(x) - self.dlog_minus(x) * np.exp(b - a)) / self.wronskian
        if np.any(close):
            out = np.where(close, self.sp(y), out)
        return _scalarize(out)

    def w2(self, x, y):
        """``W_{q,2}(x, y) = d/dy W_{q,1}(x, y)``; zero at ``q = 0``."""
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        if self.q == 0.0:
            return _scalarize(np.zeros_like(x))
        a = self.log_plus(x) + self.log_minus(y)
        b = self.log_plus(y) + self.log_minus(x)
        with np.errstate(over="ignore", invalid="ignore"):
            out = np.exp(a) * (self.dlog_plus(x) * self.dlog_minus(y)
                               - self.dlog_plus(y) * self.dlog_minus(x) * np.exp(b - a)) / self.wronskian
        return _scalarize(out)

    def ratio(self, x, y):
        """``W_{q,1}(x, y) / W_q(x, y)``."""
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        if self.q == 0.0:
            return _scalarize(self.sp(x) / self.w(x, y))
        # computed without forming exp(a), so far-field arguments cannot overflow
        a = self.log_plus(x) + self.log_minus(y)
        b = self.log_plus(y) + self.log_minus(x)
        num = self.dlog_plus(x) - self.dlog_minus(x) * np.exp(b - a)
        den = -np.expm1(b - a)
        close = self._close(x, y)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = num / den
        if np.any(close):
            out = np.where(close, self.w1(x, y) / np.where(close, self.w(x, y), 1.0), out)
        return _scalarize(out)

    def scaled_terms(self, x, y):
        """Kernel values at ``(x, y)`` and ``(y, x)`` with a common factor removed.

        Returns ``(log_factor, W(x,y), W1(x,y), W1(y,x), W2(y,x))`` where the last four
        are divided by ``exp(log_factor)``, ``log_factor = log phi^+(x) + log phi^-(y)``.
        Ratios of these terms are therefore free of overflow for far-out arguments.
        """
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        if self.q == 0.0:
            one = np.ones_like(x)
            return (0.0 * one, self.ds(x, y) * one, self.sp(x) * one,
                    self.sp(y) * one, 0.0 * one)
        a = self.log_plus(x) + self.log_minus(y)
        d = self.log_plus(y) + self.log_minus(x) - a
        e = np.exp(d)
        rpx, rmx = self.dlog_plus(x), self.dlog_minus(x)
        rpy, rmy = self.dlog_plus(y), self.dlog_minus(y)
        wq = self.wronskian
        w = -np.expm1(d) / wq
        close = self._close(x, y)
        if np.any(close):
            # first-order expansion; the factor exp(a) is reinstated by dividing it out
            w = np.where(close, self.sp(y) * (x - y) * np.exp(-a), w)
        w1xy = (rpx - rmx * e) / wq
        w1yx = (rpy * e - rmy) / wq
        w2yx = (rpy * rmx * e - rpx * rmy) / wq
        return a, w, w1xy, w1yx, w2yx

    def wronskian_residual(self, x):
        """Relative deviation of the Wronskian identity at ``x`` (zero for exact providers)."""
        x = np.asarray(x, float)
        lhs = (self.dlog_plus(x) - self.dlog_minus(x)) * np.exp(self.log_plus(x) + self.log_minus(x))
        rhs = self.wronskian * self.sp(x)
        return _scalarize(np.abs(lhs - rhs) / np.abs(rhs))


@lru_cache(maxsize=512)
def _cached_kernel(model, q):
    return QKernel(model, q)


def build_kernel(model: DiffusionModel, q: float) -> QKernel:
    """Return the (cached) :class:`QKernel` of ``model`` at rate ``q``."""
    if not q >= 0:
        raise DomainViolation("q must be nonnegative")
    return _cached_kernel(model, float(q))


def kernel_derivatives(kernel: QKernel, x, y):
    """``(W_{q,1}(x, y), W_{q,2}(x, y))``."""
    return kernel.w1(x, y), kernel.w2(x, y)
