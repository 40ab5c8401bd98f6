"""Monte Carlo oracle for every law in the package.

Paths are simulated by a numba kernel that tracks the running maximum and minimum,
detects the stopping rule of the requested functional and accumulates one
occupation time.  Each path draws from its own xoshiro256+ stream seeded from
``(seed, path index)`` through splitmix64, so results do not depend on the number
of worker threads.

Schemes:

* ``exact-gaussian``: exact increments of Brownian motion with drift.
* ``exact-norm3d``: BES(3) as the norm of a three-dimensional Brownian motion.
* ``euler``: Euler-Maruyama with drift and diffusion tabulated on a grid.

With ``bridge=True`` the maximum and minimum of the Brownian bridge between grid
points are sampled exactly (locally frozen coefficients for the non-Gaussian
schemes), which removes the ``O(sqrt(dt))`` monitoring bias of barrier functionals.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numba
import numpy as np
from numba import njit, prange

from .errors import DomainViolation, HorizonTooShort, NonFiniteState

# prefer OpenMP; the bundled TBB is often too old and only produces a warning
numba.config.THREADING_LAYER_PRIORITY = ["omp", "tbb", "workqueue"]

# stopping rules
STOP_EXIT, STOP_UP, STOP_DD, STOP_DD_DU, STOP_HORIZON, STOP_DU = 0, 1, 2, 3, 4, 5
# occupation indicators
OCC_NONE, OCC_X_BELOW, OCC_DD_ABOVE, OCC_DU_BELOW = 0, 1, 2, 3
# outcome codes
EV_FIRST, EV_SECOND, EV_CLOCK, EV_HORIZON, EV_NONFINITE = 0, 1, 2, 3, 4
SCHEMES = {"exact-gaussian": 0, "exact-norm3d": 1, "euler": 2}

_M64 = (1 << 64) - 1


@njit(cache=True, inline="always")
def _splitmix(x):
    x = x + np.uint64(0x9E3779B97F4A7C15)
    z = x
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return x, z ^ (z >> np.uint64(31))


@njit(cache=True)
def _seed_state(seed, path):
    # the generator state is an immutable 4-tuple so that it stays in registers
    x = np.uint64(seed) ^ (np.uint64(path) * np.uint64(0xD1B54A32D192ED03))
    x, s0 = _splitmix(x)
    x, s1 = _splitmix(x)
    x, s2 = _splitmix(x)
    x, s3 = _splitmix(x)
    return (s0, s1, s2, s3)


@njit(cache=True, inline="always")
def _next(s):
    # xoshiro256+
    s0, s1, s2, s3 = s
    r = s0 + s3
    t = s1 << np.uint64(17)
    s2 ^= s0
    s3 ^= s1
    s1 ^= s2
    s0 ^= s3
    s2 ^= t
    s3 = (s3 << np.uint64(45)) | (s3 >> np.uint64(19))
    return r, (s0, s1, s2, s3)


@njit(cache=True, inline="always")
def _uniform(s):
    # top 53 bits as a double in (0, 1)
    r, s = _next(s)
    return ((r >> np.uint64(11)) + np.uint64(1)) * (1.0 / 9007199254740993.0), s


def _ziggurat_tables():
    # Marsaglia-Tsang ziggurat with 128 layers
    m1 = 2147483648.0
    dn = tn = 3.442619855899
    vn = 9.91256303526217e-3
    kn, wn, fn = np.zeros(128, np.int64), np.zeros(128), np.zeros(128)
    q = vn / math.exp(-0.5 * dn * dn)
    kn[0] = int((dn / q) * m1)
    kn[1] = 0
    wn[0] = q / m1
    wn[127] = dn / m1
    fn[0] = 1.0
    fn[127] = math.exp(-0.5 * dn * dn)
    for i in range(126, 0, -1):
        dn = math.sqrt(-2.0 * math.log(vn / dn + math.exp(-0.5 * dn * dn)))
        kn[i + 1] = int((dn / tn) * m1)
        tn = dn
        fn[i] = math.exp(-0.5 * dn * dn)
        wn[i] = dn / m1
    return kn, wn, fn


_ZKN, _ZWN, _ZFN = _ziggurat_tables()
_ZR = 3.442619855899


@njit(cache=True)
def _normal_tail(s, hz, iz):
    while True:
        x = hz * _ZWN[iz]
        if iz == 0:
            while True:
                u, s = _uniform(s)
                x = -math.log(u) / _ZR
                u, s = _uniform(s)
                y = -math.log(u)
                if y + y >= x * x:
                    break
            return (_ZR + x if hz > 0 else -_ZR - x), s
        u, s = _uniform(s)
        if _ZFN[iz] + u * (_ZFN[iz - 1] - _ZFN[iz]) < math.exp(-0.5 * x * x):
            return x, s
        r, s = _next(s)
        hz = np.int64(r >> np.uint64(32)) - 2147483648
        iz = hz & 127
        if abs(hz) < _ZKN[iz]:
            return hz * _ZWN[iz], s


@njit(cache=True, inline="always")
def _normal(s):
    r, s = _next(s)
    hz = np.int64(r >> np.uint64(32)) - 2147483648
    iz = hz & 127
    if abs(hz) < _ZKN[iz]:
        return hz * _ZWN[iz], s
    return _normal_tail(s, hz, iz)


@njit(cache=True)
def _frac_below(y0, y1, level):
    # fraction of a linear segment from y0 to y1 lying below level
    if y0 < level and y1 < level:
        return 1.0
    if y0 >= level and y1 >= level:
        return 0.0
    if y0 < level:
        return (level - y0) / (y1 - y0)
    return (level - y1) / (y0 - y1)


@njit(cache=True)
def _coef(tab, lo, h, x):
    u = (x - lo) / h
    n = tab.shape[0]
    if u <= 0.0:
        return tab[0]
    if u >= n - 1:
        return tab[n - 1]
    i = int(u)
    w = u - i
    return tab[i] * (1.0 - w) + tab[i + 1] * w


@njit(cache=True)
def _simulate_one(path, seed, x0, dt, n_steps, horizon, scheme, mu, sig, tab_lo, tab_h,
                  mu_tab, sig_tab, left, stop, occ, lv, clock_rate, bridge, alpha, ybuf):
    s = _seed_state(seed, path)
    clock = np.inf
    if clock_rate > 0.0:
        u, s = _uniform(s)
        clock = -math.log(u) / clock_rate
    x = x0
    z1, z2, z3 = x0, 0.0, 0.0
    mx, mn = x0, x0
    t, occ_t = 0.0, 0.0
    max_dd = 0.0
    code = EV_HORIZON
    track_max = stop == STOP_DD or stop == STOP_DD_DU or occ == OCC_DD_ABOVE or alpha >= 0.0
    track_min = stop == STOP_DU or stop == STOP_DD_DU or occ == OCC_DU_BELOW
    for k in range(n_steps):
        h = dt
        last = False
        if t + h >= clock:
            h = clock - t
            last = True
        if h <= 0.0:
            code = EV_CLOCK
            break
        sq = math.sqrt(h)
        if scheme == 0:
            z, s = _normal(s)
            x1 = x + mu * h + sig * sq * z
            vol = sig
        elif scheme == 1:
            z, s = _normal(s)
            z1 += sq * z
            z, s = _normal(s)
            z2 += sq * z
            z, s = _normal(s)
            z3 += sq * z
            x1 = math.sqrt(z1 * z1 + z2 * z2 + z3 * z3)
            vol = 1.0
        else:
            m0 = _coef(mu_tab, tab_lo, tab_h, x)
            vol = _coef(sig_tab, tab_lo, tab_h, x)
            z, s = _normal(s)
            x1 = x + m0 * h + vol * sq * z
        if not math.isfinite(x1) or x1 <= left:
            code = EV_NONFINITE
            t += h
            break
        bmax = max(x, x1)
        bmin = min(x, x1)
        if bridge:
            # extremes are sampled only when they can matter: beyond 7 local standard
            # deviations the excursion probability is below exp(-98)
            d = x1 - x
            var = vol * vol * h
            cut = 7.0 * vol * sq
            hi_lv = mx if track_max else np.inf
            if stop == STOP_EXIT or stop == STOP_UP:
                hi_lv = min(hi_lv, lv[1])
            if stop == STOP_DU or stop == STOP_DD_DU:
                hi_lv = min(hi_lv, mn + lv[1])
            lo_lv = mn if track_min else -np.inf
            if stop == STOP_EXIT:
                lo_lv = max(lo_lv, lv[0])
            if stop == STOP_DD or stop == STOP_DD_DU:
                lo_lv = max(lo_lv, mx - lv[0])
            if alpha >= 1.0:
                lo_lv = max(lo_lv, mx - max_dd)
            if bmax + cut > hi_lv:
                u, s = _uniform(s)
                bmax = 0.5 * (x + x1 + math.sqrt(d * d - 2.0 * var * math.log(u)))
            if bmin - cut < lo_lv:
                u, s = _uniform(s)
                bmin = 0.5 * (x + x1 - math.sqrt(d * d - 2.0 * var * math.log(u)))
        mx_new = max(mx, bmax)
        mn_new = min(mn, bmin)
        # occupation over the step, linear between grid values
        if occ == OCC_X_BELOW:
            occ_t += h * _frac_below(x, x1, lv[2])
        elif occ == OCC_DD_ABOVE:
            occ_t += h * (1.0 - _frac_below(mx - x, mx_new - x1, lv[2]))
        elif occ == OCC_DU_BELOW:
            occ_t += h * _frac_below(x - mn, x1 - mn_new, lv[2])
        if stop == STOP_HORIZON and alpha >= 0.0:
            ybuf[k] = mx_new - x1
            max_dd = max(max_dd, mx - bmin, mx_new - x1)
        t += h
        hit = -1
        if stop == STOP_EXIT:
            if bmax >= lv[1]:
                hit = EV_FIRST
            elif bmin <= lv[0]:
                hit = EV_SECOND
        elif stop == STOP_UP:
            if bmax >= lv[1]:
                hit = EV_FIRST
        elif stop == STOP_DD:
            if mx - bmin >= lv[0] or mx_new - x1 >= lv[0]:
                hit = EV_FIRST
        elif stop == STOP_DU:
            if bmax - mn >= lv[1] or x1 - mn_new >= lv[1]:
                hit = EV_SECOND
        elif stop == STOP_DD_DU:
            dd = mx - bmin >= lv[0] or mx_new - x1 >= lv[0]
            du = bmax - mn >= lv[1] or x1 - mn_new >= lv[1]
            if dd and du:
                u, s = _uniform(s)
                hit = EV_FIRST if u < 0.5 else EV_SECOND
            elif dd:
                hit = EV_FIRST
            elif du:
                hit = EV_SECOND
        x, mx, mn = x1, mx_new, mn_new
        if hit >= 0:
            code = hit
            break
        if last:
            code = EV_CLOCK
            break
    extra = x
    if stop == STOP_HORIZON and alpha >= 0.0:
        if alpha >= 1.0:
            extra = max_dd
        else:
            m = min(k + 1, ybuf.shape[0])
            srt = np.sort(ybuf[:m])
            # inf{y : time with Y > y <= (1 - alpha) T} on the step grid
            j = int(math.ceil(alpha * m)) - 1
            extra = srt[max(j, 0)]
    return t, occ_t, code, extra


@njit(parallel=True, cache=True)
def _simulate_batch(first, n, seed, x0, dt, n_steps, horizon, scheme, mu, sig, tab_lo, tab_h,
                    mu_tab, sig_tab, left, stop, occ, lv, clock_rate, bridge, alpha):
    t_out = np.empty(n)
    occ_out = np.empty(n)
    code_out = np.empty(n, dtype=np.int8)
    extra_out = np.empty(n)
    buf_len = n_steps if (stop == STOP_HORIZON and alpha >= 0.0) else 1
    for i in prange(n):
        ybuf = np.empty(buf_len)
        t, o, c, e = _simulate_one(first + i, seed, x0, dt, n_steps, horizon, scheme, mu, sig,
                                   tab_lo, tab_h, mu_tab, sig_tab, left, stop, occ, lv,
                                   clock_rate, bridge, alpha, ybuf)
        t_out[i] = t
        occ_out[i] = o
        code_out[i] = c
        extra_out[i] = e
    return t_out, occ_out, code_out, extra_out



@njit(cache=True)
def _simulate_batch_serial(first, n, seed, x0, dt, n_steps, horizon, scheme, mu, sig, tab_lo, tab_h,
                    mu_tab, sig_tab, left, stop, occ, lv, clock_rate, bridge, alpha):
    t_out = np.empty(n)
    occ_out = np.empty(n)
    code_out = np.empty(n, dtype=np.int8)
    extra_out = np.empty(n)
    buf_len = n_steps if (stop == STOP_HORIZON and alpha >= 0.0) else 1
    for i in range(n):
        ybuf = np.empty(buf_len)
        t, o, c, e = _simulate_one(first + i, seed, x0, dt, n_steps, horizon, scheme, mu, sig,
                                   tab_lo, tab_h, mu_tab, sig_tab, left, stop, occ, lv,
                                   clock_rate, bridge, alpha, ybuf)
        t_out[i] = t
        occ_out[i] = o
        code_out[i] = c
        extra_out[i] = e
    return t_out, occ_out, code_out, extra_out


@dataclass(frozen=True)
class SimConfig:
    """Simulation settings.

    Parameters
    ----------
    dt : float
        Step size.
    horizon : float
        Time after which a path is censored (the maturity for fixed-horizon functionals).
    n : int
        Number of paths.
    seed : int
        64-bit seed; path ``i`` always uses the stream derived from ``(seed, i)``.
    scheme : str
        ``"auto"`` picks the exact scheme of the model when one exists.
    bridge : bool
        Sample Brownian-bridge extremes between grid points.
    richardson_n : int
        Paths used for the ``dt`` versus ``dt / 2`` diagnostic; 0 disables it.
    chunk : int
        Paths per kernel call.
    """

    dt: float = 1e-3
    horizon: float = 50.0
    n: int = 100_000
    seed: int = 20240601
    scheme: str = "auto"
    bridge: bool = False
    richardson_n: int = 0
    chunk: int = 200_000

    def __post_init__(self):
        if not (self.dt > 0 and self.horizon > 0 and self.n >= 1):
            raise DomainViolation("dt and horizon must be positive and n at least 1")
        if self.scheme not in ("auto", *SCHEMES):
            raise DomainViolation(f"unknown scheme {self.scheme!r}")


@dataclass(frozen=True)
class SimEstimate:
    """Monte Carlo estimate with its standard error and discretisation diagnostic.

    ``richardson_shift`` is the estimate at ``dt / 2`` minus the estimate at ``dt``
    on ``richardson_n`` paths and ``richardson_se`` the standard error of that
    difference (both ``nan`` when the diagnostic was not run).
    """

    estimate: float
    se: float
    n_effective: int
    richardson_shift: float = math.nan
    richardson_se: float = math.nan
    censored: int = 0
    diagnostics: dict = field(default_factory=dict)


@dataclass(frozen=True)
class StoppingRule:
    """What the kernel simulates: stopping rule, occupation indicator and levels.

    Levels are absolute: ``lower``/``upper`` for exits and ``a``/``b`` thresholds
    for drawdown/drawup rules.  ``level`` is the occupation level.
    """

    stop: int
    occupation: int = OCC_NONE
    lower: float = 0.0
    upper: float = 0.0
    level: float = 0.0
    clock_rate: float = 0.0
    alpha: float = -1.0

    def levels(self):
        return np.array([self.lower, self.upper, self.level, 0.0])


@dataclass
class PathBatch:
    """Per-path output: stopping time, occupation time, outcome code and an extra value.

    ``extra`` is the terminal state, or the drawdown quantile for quantile rules.
    """

    t: np.ndarray
    occupation: np.ndarray
    code: np.ndarray
    extra: np.ndarray


def set_threads(n: int | None = None):
    """Set the kernel thread count (``DRAWDOWN_LAB_THREADS`` when ``n`` is omitted)."""
    n = n or int(os.environ.get("DRAWDOWN_LAB_THREADS", "0") or 0)
    if n > 0:
        numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))


def _scheme_args(model, scheme):
    if scheme == "auto":
        scheme = {"bm": "exact-gaussian", "bes3": "exact-norm3d"}.get(model.name, "euler")
    empty = np.zeros(2)
    if scheme == "exact-gaussian":
        if model.name != "bm":
            raise DomainViolation("exact-gaussian scheme requires a Brownian model")
        return 0, float(model.params["mu"]), float(model.params["sigma"]), 0.0, 1.0, empty, empty
    if scheme == "exact-norm3d":
        if model.name != "bes3":
            raise DomainViolation("exact-norm3d scheme requires the BES(3) model")
        return 1, 0.0, 1.0, 0.0, 1.0, empty, empty
    # tabulate the coefficients around kappa
    lo = model.kappa - 50.0
    if math.isfinite(model.left_boundary):
        lo = model.left_boundary + 1e-6
    hi = model.kappa + 50.0
    grid = np.linspace(lo, hi, 100_001)
    mu_tab = np.ascontiguousarray(np.broadcast_to(np.asarray(model.drift(grid), float), grid.shape))
    sig_tab = np.ascontiguousarray(np.broadcast_to(np.asarray(model.diffusion(grid), float), grid.shape))
    return 2, 0.0, 1.0, lo, grid[1] - grid[0], mu_tab, sig_tab


def simulate_paths(model, x0: float, rule: StoppingRule, config: SimConfig,
                   observers=(), first_path: int = 0, dt: float | None = None, n: int | None = None):
    """Simulate paths from ``x0`` under ``rule`` and return a :class:`PathBatch`.

    ``observers`` are called with each chunk (a :class:`PathBatch`) as it is produced.
    Raises :class:`NonFiniteState` if a path leaves the state interval.
    """
    model.check_state(x0)
    set_threads()
    dt = dt or config.dt
    n = n or config.n
    scheme, mu, sig, lo, h, mu_tab, sig_tab = _scheme_args(model, config.scheme)
    n_steps = int(math.ceil(config.horizon / dt - 1e-9))
    left = model.left_boundary if math.isfinite(model.left_boundary) else -np.inf
    parts = []
    for start in range(0, n, config.chunk):
        m = min(config.chunk, n - start)
        kernel = _simulate_batch if numba.get_num_threads() > 1 else _simulate_batch_serial
        t, o, c, e = kernel(first_path + start, m, np.uint64(config.seed & _M64), float(x0),
                                     float(dt), n_steps, float(config.horizon), scheme, mu, sig,
                                     lo, h, mu_tab, sig_tab, float(left), rule.stop, rule.occupation,
                                     rule.levels(), float(rule.clock_rate), bool(config.bridge),
                                     float(rule.alpha))
        batch = PathBatch(t, o, c, e)
        if np.any(c == EV_NONFINITE):
            raise NonFiniteState("a simulated path left the state interval or became non-finite")
        for obs in observers:
            obs(batch)
        parts.append(batch)
    return PathBatch(*(np.concatenate([getattr(p, f) for p in parts])
                       for f in ("t", "occupation", "code", "extra")))


# functionals: name -> (rule builder, sample map, clock-free transform flag)

def _rule_and_sample(name, x, prm):
    g = prm.get
    if name == "exit_transform":
        q, y, z = g("q", 0.0), prm["y"], prm["z"]
        lo, hi = min(y, z), max(y, z)
        want = EV_FIRST if y > x else EV_SECOND
        return (StoppingRule(STOP_EXIT, lower=lo, upper=hi),
                lambda b: np.exp(-q * b.t) * (b.code == want), q)
    if name == "drawdown_transform":
        q = g("q", 0.0)
        return StoppingRule(STOP_DD, lower=prm["a"]), lambda b: np.exp(-q * b.t) * (b.code == EV_FIRST), q
    if name == "drawup_transform":
        q = g("q", 0.0)
        return StoppingRule(STOP_DU, upper=prm["b"]), lambda b: np.exp(-q * b.t) * (b.code == EV_SECOND), q
    if name == "drawdown_cdf":
        rule = StoppingRule(STOP_DD, lower=prm["a"])
        return rule, lambda b: ((b.code == EV_FIRST) & (b.t <= prm["t"])).astype(float), math.inf
    if name in ("dd_before_du", "du_before_dd", "clock_before_both"):
        want = {"dd_before_du": EV_FIRST, "du_before_dd": EV_SECOND, "clock_before_both": EV_CLOCK}[name]
        rule = StoppingRule(STOP_DD_DU, lower=prm["a"], upper=prm["b"], clock_rate=prm["q"])
        return rule, lambda b: (b.code == want).astype(float), 0.0
    if name in ("occ_exit_up", "occ_exit_down"):
        q, a, bb, y = prm["q"], prm["a"], prm["b"], prm["y"]
        p = g("p", 0.0)
        rule = StoppingRule(STOP_EXIT, OCC_X_BELOW, lower=a, upper=bb, level=y)
        if name == "occ_exit_up":
            return rule, lambda b: np.exp(-q * b.occupation - p * b.t) * (b.code == EV_FIRST), p
        return rule, lambda b: np.exp(-q * b.occupation) * (b.code == EV_SECOND), 0.0
    if name == "occ_below_until_up":
        q, p = prm["q"], prm["p"]
        rule = StoppingRule(STOP_UP, OCC_X_BELOW, upper=prm["b"], level=prm["y"])
        return rule, lambda b: np.exp(-q * b.occupation - p * b.t) * (b.code == EV_FIRST), p
    if name == "occ_below_start_until_dd":
        q = prm["q"]
        rule = StoppingRule(STOP_DD, OCC_X_BELOW, lower=prm["a"], level=x)
        return rule, lambda b: np.exp(-q * b.occupation) * (b.code == EV_FIRST), 0.0
    if name == "occ_dd_above_until_dd":
        q = prm["q"]
        rule = StoppingRule(STOP_DD, OCC_DD_ABOVE, lower=prm["a"], level=prm["y"])
        return rule, lambda b: np.exp(-q * b.occupation) * (b.code == EV_FIRST), 0.0
    if name == "occ_du_below_until_dd":
        q = prm["q"]
        rule = StoppingRule(STOP_DD, OCC_DU_BELOW, lower=prm["a"], level=prm["y"])
        return rule, lambda b: np.exp(-q * b.occupation) * (b.code == EV_FIRST), 0.0
    if name == "occ_dd_above_at_exp":
        p = prm["p"]
        rule = StoppingRule(STOP_HORIZON, OCC_DD_ABOVE, level=prm["y"], clock_rate=prm["q"])
        return rule, lambda b: np.exp(-p * b.occupation) * (b.code == EV_CLOCK), 0.0
    if name == "parisian":
        rule = StoppingRule(STOP_HORIZON, OCC_DD_ABOVE, level=prm["y"])
        return rule, lambda b: (b.occupation > prm["K"]).astype(float), math.inf
    if name == "alpha_quantile":
        f = prm.get("payoff", lambda u: u)
        rule = StoppingRule(STOP_HORIZON, alpha=prm["alpha"])
        return rule, lambda b: np.asarray(f(b.extra), float), math.inf
    raise DomainViolation(f"unknown functional {name!r}")


FUNCTIONALS = ("exit_transform", "drawdown_transform", "drawup_transform", "drawdown_cdf",
               "dd_before_du", "du_before_dd", "clock_before_both", "occ_exit_up",
               "occ_exit_down", "occ_below_until_up", "occ_below_start_until_dd",
               "occ_dd_above_until_dd", "occ_du_below_until_dd", "occ_dd_above_at_exp",
               "parisian", "alpha_quantile")


def _horizon_for(name, prm, config):
    if name in ("parisian", "alpha_quantile"):
        return prm["T"]
    if name == "drawdown_cdf":
        return prm["t"] + config.dt
    return config.horizon


def _run(model, name, x, prm, config, dt, n, first):
    rule, sample, kill = _rule_and_sample(name, x, prm)
    cfg = config
    horizon = _horizon_for(name, prm, config)
    if horizon != config.horizon:
        cfg = SimConfig(dt=config.dt, horizon=horizon, n=config.n, seed=config.seed,
                        scheme=config.scheme, bridge=config.bridge, chunk=config.chunk)
    batch = simulate_paths(model, x, rule, cfg, dt=dt, n=n, first_path=first)
    censored = int(np.sum(batch.code == EV_HORIZON)) if rule.stop != STOP_HORIZON else 0
    # censoring is harmless when the discount at the horizon is negligible
    if censored > 1e-3 * n and not kill * cfg.horizon > 40.0:
        raise HorizonTooShort(f"{censored} of {n} paths censored at horizon {cfg.horizon}")
    vals = sample(batch)
    return vals, censored


def estimate_law(model, name: str, x: float, params: dict, config: SimConfig | None = None) -> SimEstimate:
    """Monte Carlo estimate of functional ``name`` started from ``x``.

    ``name`` is one of :data:`FUNCTIONALS`; ``params`` uses the argument names of the
    matching analytic function (e.g. ``q``, ``a``, ``b``, ``y``, ``p``), plus ``t``
    for ``drawdown_cdf``, ``T``/``K`` for ``parisian`` and ``T``/``alpha``/``payoff``
    for ``alpha_quantile``.

    Raises
    ------
    HorizonTooShort
        If more than 0.1% of the paths are censored at the horizon.
    """
    config = config or SimConfig()
    vals, censored = _run(model, name, x, params, config, config.dt, config.n, 0)
    est = float(np.mean(vals))
    se = float(np.std(vals, ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else math.inf
    shift = shift_se = math.nan
    if config.richardson_n > 0:
        m = min(config.richardson_n, config.n)
        # fresh path indices so the fine run is independent of the coarse one
        fine, _ = _run(model, name, x, params, config, config.dt / 2.0, m, config.n)
        coarse = vals[:m]
        shift = float(np.mean(fine) - np.mean(coarse))
        shift_se = float(math.sqrt(np.var(fine, ddof=1) / m + np.var(coarse, ddof=1) / m))
    return SimEstimate(est, se, len(vals), shift, shift_se, censored,
                       {"dt": config.dt, "bridge": config.bridge, "functional": name})
