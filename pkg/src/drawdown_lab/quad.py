"""Quadrature for nested "outer integral of an exponentiated inner integral" structures.

Three tools are provided:

* :func:`integrate` - vectorised adaptive 15-point Gauss-Kronrod on a finite interval.
* :func:`integrate_to_inf` - the same on ``[a, inf)``, truncated where a decay witness
  (an upper envelope of the remaining tail mass) falls below ``tol / 10``.
* :class:`ExponentAccumulator` - a panel representation of ``H(u) = int_base^u h``
  together with tail integrals ``int_z^inf f(v) exp(-(H(v) - H(z))) dv`` for many
  ``z`` at once.  Building it once turns nested quadrature from quadratic into
  linear cost.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import legendre as npleg

from .errors import MaxDepthExceeded, NonConvergence, NumericalError, TailNotDecaying

# Gauss-Kronrod 15/7 abscissae and weights on [-1, 1] (nonnegative half, ascending |x| reversed)
_XGK = np.array([
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0,
])
_WGK = np.array([
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327,
])

# full 15-node layout: -x0..-x6, 0, x6..x0
GK_NODES = np.concatenate([-_XGK[:-1], [0.0], _XGK[-2::-1]])
GK_WEIGHTS = np.concatenate([_WGK[:-1], [_WGK[-1]], _WGK[-2::-1]])
G_WEIGHTS = np.zeros(15)
G_WEIGHTS[[1, 3, 5]] = _WG[:3]
G_WEIGHTS[7] = _WG[3]
G_WEIGHTS[[9, 11, 13]] = _WG[2::-1]

EPS = np.finfo(float).eps


@dataclass(frozen=True)
class QuadResult:
    value: float
    error: float
    n_intervals: int
    truncation: float | None = None


def gk15(f, lo, hi):
    """Kronrod estimate and QUADPACK-style error for each interval ``[lo_i, hi_i]``."""
    lo = np.atleast_1d(np.asarray(lo, float))
    hi = np.atleast_1d(np.asarray(hi, float))
    c = 0.5 * (lo + hi)
    hw = 0.5 * (hi - lo)
    x = c[:, None] + hw[:, None] * GK_NODES[None, :]
    fx = np.asarray(f(x.ravel()), float)
    fx = np.broadcast_to(fx, x.ravel().shape).reshape(x.shape)
    if not np.all(np.isfinite(fx)):
        raise NumericalError("integrand is not finite on the integration interval")
    k = hw * (fx @ GK_WEIGHTS)
    g = hw * (fx @ G_WEIGHTS)
    mean = 0.5 * (fx @ GK_WEIGHTS)
    asc = np.abs(hw) * (np.abs(fx - mean[:, None]) @ GK_WEIGHTS)
    absk = np.abs(hw) * (np.abs(fx) @ GK_WEIGHTS)
    err = np.abs(k - g)
    with np.errstate(divide="ignore", invalid="ignore"):
        scaled = np.where(asc > 0, asc * np.minimum(1.0, (200.0 * err / np.where(asc > 0, asc, 1.0)) ** 1.5), err)
    floor = 50.0 * EPS * absk
    err = np.maximum(scaled, floor)
    return k, err, floor


def integrate(f, a, b, tol=1e-10, max_intervals=20000, initial=1):
    """Adaptive Gauss-Kronrod integral of a vectorised ``f`` over ``[a, b]``.

    Intervals are bisected until every local error is below its share
    ``tol * (1 + |value|) * width / (b - a)`` of the budget.

    Returns
    -------
    QuadResult
        ``value``, summed ``error`` and the final number of intervals.

    Raises
    ------
    MaxDepthExceeded
        If the interval budget is exhausted; carries the partial value and error.
    """
    a, b = float(a), float(b)
    if a == b:
        return QuadResult(0.0, 0.0, 0)
    sign = 1.0
    if b < a:
        a, b, sign = b, a, -1.0
    edges = np.linspace(a, b, initial + 1)
    lo, hi = edges[:-1], edges[1:]
    done_val = 0.0
    done_err = 0.0
    n_total = len(lo)
    length = b - a
    while True:
        k, err, floor = gk15(f, lo, hi)
        total = done_val + k.sum()
        budget = tol * (1.0 + abs(total))
        ok = err <= budget * (hi - lo) / length
        # an error already at the roundoff floor cannot be reduced by bisection
        ok |= err <= 2.0 * floor
        # intervals too small to split are accepted as they are
        tiny = (hi - lo) <= 64 * EPS * np.maximum(1.0, np.abs(lo))
        ok |= tiny
        done_val += k[ok].sum()
        done_err += err[ok].sum()
        if np.all(ok):
            return QuadResult(sign * done_val, done_err, n_total)
        lo, hi = lo[~ok], hi[~ok]
        mid = 0.5 * (lo + hi)
        lo, hi = np.concatenate([lo, mid]), np.concatenate([mid, hi])
        n_total += len(lo) // 2
        if n_total > max_intervals:
            k, err, _ = gk15(f, lo, hi)
            raise MaxDepthExceeded(
                f"interval budget {max_intervals} exhausted",
                value=sign * (done_val + k.sum()), error=done_err + err.sum())


def integrate_to_inf(f, a, decay_witness, tol=1e-10, scale=1.0, max_doublings=60):
    """``int_a^inf f`` truncated at the first ``m`` with ``decay_witness(m) < tol / 10``.

    The doubling schedule starts at ``m = a + 4 * scale``.
    """
    step = 4.0 * scale
    for _ in range(max_doublings):
        m = a + step
        w = float(decay_witness(m))
        if w < tol / 10.0:
            res = integrate(f, a, m, tol=tol, initial=8)
            return QuadResult(res.value, res.error + w, res.n_intervals, truncation=m)
        step *= 2.0
    raise TailNotDecaying(f"decay witness still {w:.3g} at m={m:.6g}")


# panel machinery for the accumulator
_EPS = float(np.finfo(float).eps)
_NGL = 24
# relative size of Legendre tails that is indistinguishable from roundoff
_NOISE = 2e-13
_GL_T, _GL_W = npleg.leggauss(_NGL)
_VAND = npleg.legvander(_GL_T, _NGL - 1)
_PROJ = (_VAND * _GL_W[:, None]).T * ((2 * np.arange(_NGL) + 1) / 2.0)[:, None]
# coefficients of the antiderivative from -1, and its values at the nodes and at 1
_INT = npleg.legint(np.eye(_NGL), lbnd=-1)
_INT_NODES = npleg.legvander(_GL_T, _NGL) @ _INT
_INT_END = npleg.legvander(np.array([1.0]), _NGL)[0] @ _INT


def _legcoef(vals):
    """Legendre coefficients of the degree-23 interpolant through the GL nodes (last axis)."""
    return vals @ _PROJ.T


def _tail_size(c):
    return np.abs(c[..., -3:]).sum(axis=-1)


class ExponentAccumulator:
    """Cumulative exponent ``H`` of a nonnegative-ish rate ``h`` away from ``base``.

    The half-line ``{base + direction * t : t >= 0}`` (optionally cut at ``limit``) is
    split into panels.  On each panel ``h`` and every payload ``f`` (and
    ``f * exp(-H)``) are resolved by 24-node Legendre series, so ``H`` is available in
    closed polynomial form anywhere.

    Parameters
    ----------
    h : callable
        Vectorised exponent rate.
    base : float
        Starting point; ``H(base) = 0``.
    direction : {+1, -1}
        Extend to the right (``+1``) or to the left (``-1``).  With ``-1``,
        ``H(u) = int_u^base h``.
    payloads : sequence of callables
        Functions ``f`` whose tail integrals :meth:`tail` will be requested.
    limit : float, optional
        Finite end point.  Without it panels extend until ``exp(-H)`` and every
        payload contribution is below ``tol / 10``.
    scale : float
        Typical length scale; sets the first panel width.
    tol : float
        Absolute accuracy target for ``H`` and the tail integrals.
    reach : float, optional
        Without ``limit``, keep adding panels at least up to this point even after
        the exponent has decayed (for callers that evaluate ``H`` further out).
    """

    def __init__(self, h, base, direction=1, payloads=(), limit=None, scale=1.0,
                 tol=1e-11, max_panels=5000, h_stop=None, reach=None):
        if direction not in (1, -1):
            raise ValueError("direction must be +1 or -1")
        self.h = h
        self.base = float(base)
        self.direction = direction
        self.payloads = tuple(payloads)
        self.tol = tol
        self.limit = None if limit is None else float(limit)
        self.scale = float(scale)
        t_end = None if limit is None else direction * (self.limit - self.base)
        if t_end is not None and t_end < 0:
            raise ValueError("limit lies on the wrong side of base")
        self.h_stop = -math.log(tol / 10.0) + 5.0 if h_stop is None else h_stop
        self.t_reach = 0.0 if reach is None else max(0.0, direction * (float(reach) - self.base))
        self._build(t_end, max_panels)

    def _u(self, t):
        return self.base + self.direction * t

    def _panel(self, t0, w, h_start):
        t = t0 + 0.5 * w * (_GL_T + 1.0)
        u = self._u(t)
        hv = np.asarray(self.h(u), float) * np.ones_like(u)
        if not np.all(np.isfinite(hv)):
            return None
        ch = _legcoef(hv)
        ich = (_INT @ ch) * (0.5 * w)
        big_h = (_INT_NODES @ ch) * (0.5 * w) + h_start
        d_h = float(_INT_END @ ch) * (0.5 * w)
        fvals = []
        for f in self.payloads:
            fv = np.asarray(f(u), float) * np.ones_like(u)
            if not np.all(np.isfinite(fv)):
                return None
            fvals.append(fv)
        return t, ch, ich, big_h, d_h, fvals

    def _assess(self, w, ch, big_h, h_start, d_h, fvals):
        """Return ``(ok, error_of_H, payload_errors)`` for a candidate panel."""
        atol = 1e-3 * self.tol
        eh = _tail_size(ch) * w
        ok = abs(d_h) <= 2.0
        if eh > atol and _tail_size(ch) > _NOISE * np.abs(ch).max():
            ok = False
        damp = np.exp(-(big_h - h_start))
        weight = math.exp(-h_start) if h_start < 700 else 0.0
        efs = []
        for fv in fvals:
            cf = _legcoef(fv * damp)
            tail = _tail_size(cf)
            ef = tail * w * weight
            if ef > atol and tail > _NOISE * np.abs(cf).max():
                ok = False
            efs.append(max(ef, 1e-16 * abs(cf[0]) * w * weight))
        return ok, max(eh, 1e-16 * abs(ch[0]) * w), efs

    def _build(self, t_end, max_panels):
        starts, widths, coefs, icoefs, h_starts, nodes_h, node_f = [], [], [], [], [], [], []
        err_h, err_f = [], []
        t0, h0 = 0.0, 0.0
        w = 0.25 * self.scale
        wmin = 1e-12 * max(1.0, self.scale)
        while True:
            if t_end is not None:
                if t0 >= t_end * (1 - 1e-15) - 1e-300:
                    break
                w = min(w, t_end - t0)
            halved = False
            while True:
                p = self._panel(t0, w, h0)
                if p is not None:
                    ok, eh, efs = self._assess(w, p[1], p[3], h0, p[4], p[5])
                    if ok:
                        break
                w *= 0.5
                halved = True
                if w < wmin:
                    raise NonConvergence(
                        f"exponent rate not resolvable near u={self._u(t0):.6g}")
            t, ch, ich, big_h, d_h, fvals = p
            starts.append(t0)
            widths.append(w)
            coefs.append(ch)
            icoefs.append(ich)
            h_starts.append(h0)
            nodes_h.append(big_h)
            node_f.append(fvals)
            err_h.append(eh)
            err_f.append(efs)
            t0 += w
            h0 += d_h
            if len(starts) > max_panels:
                raise TailNotDecaying(f"accumulator exceeded {max_panels} panels")
            if t_end is None and h0 > self.h_stop and t0 >= self.t_reach:
                mass = [abs(fv[-1]) * math.exp(-(big_h[-1] - 0.0)) * w * 10 for fv in fvals]
                if all(m_ < self.tol / 10.0 for m_ in mass):
                    break
            if t_end is None and t0 > 1e6 * max(1.0, self.scale):
                raise TailNotDecaying(f"exponent only reached {h0:.3g} at t={t0:.3g}")
            if not halved:
                w *= 1.5
        self.t_starts = np.array(starts)
        self.widths = np.array(widths)
        self.t_edges = np.append(self.t_starts, self.t_starts[-1] + self.widths[-1]) if starts else np.array([0.0])
        self.icoefs = np.array(icoefs) if icoefs else np.zeros((0, _NGL + 1))
        self.h_starts = np.array(h_starts)
        self.h_total = h0
        self.t_max = t0
        self.u_end = self._u(t0)
        self.n_panels = len(starts)
        # panel integrals of every payload and backward tail sums at panel starts
        self._panel_h = np.array(nodes_h) if nodes_h else np.zeros((0, _NGL))
        self.error_H = float(np.sum(err_h))
        self._tails = []
        self.tail_errors = []
        for k in range(len(self.payloads)):
            seg = np.array([
                0.5 * widths[j] * np.dot(_GL_W, node_f[j][k] * np.exp(-(self._panel_h[j] - h_starts[j])))
                for j in range(self.n_panels)])
            dh = np.append(np.diff(self.h_starts), self.h_total - self.h_starts[-1]) if self.n_panels else seg
            s = np.zeros(self.n_panels + 1)
            for j in range(self.n_panels - 1, -1, -1):
                s[j] = seg[j] + math.exp(-dh[j]) * s[j + 1]
            self._tails.append(s)
            trunc = 0.0
            if t_end is None and self.n_panels:
                trunc = abs(seg[-1]) * math.exp(-self.h_total)
            # floating-point floor of the panel sums and of the cumulative exponent
            roundoff = _EPS * (_NGL + self.n_panels) * (float(np.sum(np.abs(seg))) + abs(s[0]) * self.h_total)
            self.tail_errors.append(float(sum(e[k] for e in err_f)) + abs(s[0]) * self.error_H + trunc
                                    + roundoff)

    def _locate(self, u):
        t = self.direction * (np.asarray(u, float) - self.base)
        if np.any(t < -1e-12 * max(1.0, self.scale)) or np.any(t > self.t_max * (1 + 1e-12) + 1e-12):
            raise ValueError("point outside the accumulator range")
        t = np.clip(t, 0.0, self.t_max)
        j = np.clip(np.searchsorted(self.t_starts, t, side="right") - 1, 0, self.n_panels - 1)
        s = 2.0 * (t - self.t_starts[j]) / self.widths[j] - 1.0
        return t, j, np.clip(s, -1.0, 1.0)

    def H(self, u):
        """``int_base^u h`` (or ``int_u^base h`` when extending to the left)."""
        u_arr = np.asarray(u, float)
        if self.n_panels == 0:
            return np.zeros_like(u_arr)[()]
        _, j, s = self._locate(u_arr)
        v = npleg.legvander(np.atleast_1d(s), _NGL)
        out = self.h_starts[j] + np.einsum("ij,ij->i", v, np.atleast_2d(self.icoefs[np.atleast_1d(j)]))
        return out.reshape(u_arr.shape)[()]

    def survival(self, u):
        """``exp(-H(u))``."""
        return np.exp(-self.H(u))

    def tail(self, k, z=None):
        """``int f_k(v) exp(-(H(v) - H(z))) |dv|`` from ``z`` to the far end.

        ``z`` defaults to ``base``.  Vectorised over ``z``.
        """
        tails = self._tails[k]
        if z is None:
            return float(tails[0])
        z_arr = np.atleast_1d(np.asarray(z, float))
        t, j, s = self._locate(z_arr)
        end_t = self.t_starts[j] + self.widths[j]
        seg_w = end_t - t
        # GL nodes on [t, end of panel]
        tn = t[:, None] + 0.5 * seg_w[:, None] * (_GL_T[None, :] + 1.0)
        un = self._u(tn)
        hz = self.H(self._u(t)) if np.ndim(t) else self.H(self._u(t))
        hn = self.H(un.ravel()).reshape(un.shape)
        fv = np.asarray(self.payloads[k](un.ravel()), float) * np.ones(un.size)
        fv = fv.reshape(un.shape)
        part = 0.5 * seg_w * ((fv * np.exp(-(hn - hz[:, None]))) @ _GL_W)
        h_end = np.append(self.h_starts[1:], self.h_total)[j]
        out = part + np.exp(-(h_end - hz)) * tails[j + 1]
        return out.reshape(np.shape(z))[()] if np.ndim(z) else float(out[0])
