"""Reference limit objects: normal CDF, Yeh curves L(a,b), the closed-form
sup law H(a,b,.), and Brownian sheet sampling.

Products of the form exp(theta * lambda^2) * Phi(-m * lambda) are evaluated
through the scaled complementary error function, so H stays finite and
accurate out to lambda ~ 10.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .sampler import _rng_for


def normal_cdf(z):
    """Standard normal CDF via the complementary error function."""
    z = np.asarray(z, dtype=float)
    out = 0.5 * special.erfc(-z / math.sqrt(2.0))
    return float(out) if out.ndim == 0 else out


def normal_cdf_scaled(log_scale, z):
    """exp(log_scale) * Phi(z), stable when Phi(z) underflows.

    For z < 0 this is 0.5 * erfcx(-z/sqrt(2)) * exp(log_scale - z^2/2),
    which keeps products like exp(4 lambda^2) Phi(-3 lambda) finite.
    """
    s = np.asarray(log_scale, dtype=float)
    z = np.asarray(z, dtype=float)
    neg = z < 0
    zn = np.where(neg, z, -1.0)
    scaled = 0.5 * special.erfcx(-zn / math.sqrt(2.0)) * np.exp(s - 0.5 * zn * zn)
    plain = np.exp(np.minimum(s, 700.0)) * 0.5 * special.erfc(-z / math.sqrt(2.0))
    out = np.where(neg, scaled, plain)
    return float(out) if out.ndim == 0 else out


def yeh_constants(a, b):
    """Breakpoint abscissa k and scale c for the curve L(a,b).

    a, b lie in (1, +inf]; the three infinite cases follow their own
    closed forms rather than a large-float limit.
    """
    a = float(a)
    b = float(b)
    if not (a > 1.0) or not (b > 1.0):
        raise ValueError("need a > 1 and b > 1 (possibly infinite)")
    a_inf = math.isinf(a)
    b_inf = math.isinf(b)
    if a_inf and b_inf:
        return 1.0, 1.0
    if a_inf:
        return (b - 1.0) / b, (b - 1.0) / b
    if b_inf:
        return 1.0, a / (a - 1.0)
    return a * (b - 1.0) / (a * b - 1.0), a * (b - 1.0) / (b * (a - 1.0))


@dataclass(frozen=True)
class CurveSpec:
    """Yeh's polygonal curve L(a,b) with vertices (0,1), (k, 1-k/a), (1,0)."""

    a: float
    b: float
    k: float = field(init=False)
    c: float = field(init=False)

    def __post_init__(self):
        k, c = yeh_constants(self.a, self.b)
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "c", c)

    @property
    def break_y(self) -> float:
        return 1.0 - (0.0 if math.isinf(self.a) else self.k / self.a)

    @property
    def vertices(self):
        return ((0.0, 1.0), (self.k, self.break_y), (1.0, 0.0))

    def y_of_x(self, x):
        """Height of the curve at abscissa x in [0, 1]."""
        x = np.asarray(x, dtype=float)
        seg1 = 1.0 - (0.0 if math.isinf(self.a) else 1.0 / self.a) * x
        if math.isinf(self.b):
            seg2 = np.ones_like(x)
        else:
            seg2 = self.b - self.b * x
        return np.where(x <= self.k, seg1, seg2)


def _inv(v: float) -> float:
    return 0.0 if math.isinf(v) else 1.0 / v


def yeh_H(a, b, lam):
    """Closed-form distribution of sup of the Brownian sheet over L(a,b)."""
    k, c = yeh_constants(a, b)
    ia, ib = _inv(a), _inv(b)
    lam = np.asarray(lam, dtype=float)
    if np.any(lam < 0):
        raise ValueError("lambda must be nonnegative")
    sc = math.sqrt(c)
    t1 = normal_cdf(lam * (1.0 + c * ia) / sc)
    t2 = normal_cdf_scaled(-2.0 * lam**2 * ia, lam * (c * ia - 1.0) / sc)
    t3 = normal_cdf_scaled(-2.0 * lam**2 * ib, lam * (ib - c) / sc)
    t4 = normal_cdf_scaled(2.0 * lam**2 * (2.0 - ia - ib), lam * (ib - c - 2.0) / sc)
    out = t1 - t2 - t3 + t4
    return float(out) if np.ndim(out) == 0 else out


def yeh_H_sf(a, b, lam):
    """1 - H(a,b,lam) computed without cancellation in the deep tail."""
    k, c = yeh_constants(a, b)
    ia, ib = _inv(a), _inv(b)
    lam = np.asarray(lam, dtype=float)
    sc = math.sqrt(c)
    t1c = normal_cdf(-lam * (1.0 + c * ia) / sc)
    t2 = normal_cdf_scaled(-2.0 * lam**2 * ia, lam * (c * ia - 1.0) / sc)
    t3 = normal_cdf_scaled(-2.0 * lam**2 * ib, lam * (ib - c) / sc)
    t4 = normal_cdf_scaled(2.0 * lam**2 * (2.0 - ia - ib), lam * (ib - c - 2.0) / sc)
    out = t1c + t2 + t3 - t4
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class SheetSample:
    """Brownian sheet on the (n+1)^d lattice of [0,1]^d, zero on the 0-faces."""

    n: int
    d: int
    values: np.ndarray
    seed: int


def sample_sheet(n: int, d: int, seed: int) -> SheetSample:
    """Cumulative sums of iid N(0, n^-d) cell increments."""
    if n < 1:
        raise ValueError("need n >= 1")
    if d not in (1, 2):
        raise ValueError("only d in {1, 2}")
    rng = _rng_for(seed)
    inc = rng.normal(scale=n ** (-d / 2.0), size=(n,) * d)
    padded = np.zeros((n + 1,) * d)
    padded[(slice(1, None),) * d] = inc
    for axis in range(d):
        padded = np.cumsum(padded, axis=axis)
    return SheetSample(n=n, d=d, values=padded, seed=int(seed))


def _segment_sup(values: np.ndarray, p0, p1, samples: int) -> float:
    """Exact sup of the bilinear interpolant along one segment.

    The restriction to each lattice cell is quadratic in the segment
    parameter, so the max is attained at a piece endpoint or at the
    parabola vertex; `samples` extra uniform parameters are included for
    robustness.
    """
    n = values.shape[0] - 1
    p0 = np.asarray(p0, float)
    p1 = np.asarray(p1, float)
    dvec = p1 - p0
    ts = {0.0, 1.0}
    for dim in range(2):
        if abs(dvec[dim]) > 1e-15:
            lines = np.arange(n + 1) / n
            t = (lines - p0[dim]) / dvec[dim]
            ts.update(t[(t > 0.0) & (t < 1.0)].tolist())
    if samples > 0:
        ts.update(np.linspace(0.0, 1.0, samples + 2).tolist())
    ts = np.array(sorted(ts))

    def interp(tq):
        pts = p0[None, :] + tq[:, None] * dvec[None, :]
        u = np.clip(pts[:, 0] * n, 0.0, n)
        v = np.clip(pts[:, 1] * n, 0.0, n)
        i = np.minimum(u.astype(int), n - 1)
        j = np.minimum(v.astype(int), n - 1)
        fu = u - i
        fv = v - j
        return (
            values[i, j] * (1 - fu) * (1 - fv)
            + values[i + 1, j] * fu * (1 - fv)
            + values[i, j + 1] * (1 - fu) * fv
            + values[i + 1, j + 1] * fu * fv
        )

    best = float(interp(ts).max())
    # per-piece quadratic vertex refinement
    ta, tb = ts[:-1], ts[1:]
    tm = 0.5 * (ta + tb)
    ga, gm, gb = interp(ta), interp(tm), interp(tb)
    denom = ga - 2.0 * gm + gb
    with np.errstate(divide="ignore", invalid="ignore"):
        dt = 0.25 * (ga - gb) / denom
    ok = (denom < -1e-300) & (np.abs(dt) < 0.5)
    if ok.any():
        tv = tm[ok] + dt[ok] * (tb[ok] - ta[ok])
        best = max(best, float(interp(tv).max()))
    return best


def sup_on_curve(values: np.ndarray, curve: CurveSpec, samples_per_segment: int = 0) -> float:
    """Max of the bilinear interpolant of a [0,1]^2 lattice field over L(a,b)."""
    if values.ndim != 2 or values.shape[0] != values.shape[1]:
        raise ValueError("expected a square lattice field on [0,1]^2")
    v0, v1, v2 = curve.vertices
    s1 = _segment_sup(values, v0, v1, samples_per_segment)
    s2 = _segment_sup(values, v1, v2, samples_per_segment)
    return max(s1, s2)


def _curve_xy_of_tau(curve: CurveSpec, tau: np.ndarray):
    """Point (x, y) of L(a,b) whose slope coordinate x/y equals tau."""
    a, b, k = curve.a, curve.b, curve.k
    tau_break = np.inf if curve.break_y == 0 else k / curve.break_y
    if math.isinf(a):
        x1, y1 = tau, np.ones_like(tau)
    else:
        x1, y1 = a * tau / (a + tau), a / (a + tau)
    if math.isinf(b):
        with np.errstate(divide="ignore"):
            y2 = np.where(tau > 0, 1.0 / np.maximum(tau, 1e-300), np.inf)
        x2 = np.ones_like(tau)
    else:
        y2 = b / (1.0 + b * tau)
        x2 = b * tau / (1.0 + b * tau)
    seg1 = tau <= tau_break
    return np.where(seg1, x1, x2), np.where(seg1, y1, y2)


def curve_sup_samples(curve: CurveSpec, n_steps: int, n_samples: int, seed: int,
                      batch: int = 64) -> np.ndarray:
    """Exact-law samples of sup of the Brownian sheet over L(a,b).

    Along L(a,b) the sheet restricts to y * B(x/y) for a standard Brownian
    motion B; the part with x/y >= 1 equals x * B~(y/x) where B~ is the
    bridge-completed time inversion of B.  Both pieces live on [0,1] in
    their own clocks, so a uniform grid of n_steps resolves the whole sup
    without any tail truncation.
    """
    tau = np.arange(1, n_steps + 1) / n_steps
    x_lo, y_lo = _curve_xy_of_tau(curve, tau)        # tau in (0, 1]
    with np.errstate(divide="ignore"):
        x_hi, y_hi = _curve_xy_of_tau(curve, 1.0 / tau)  # tau in [1, inf)
    rng = _rng_for(seed)
    out = np.empty(n_samples)
    done = 0
    scale = 1.0 / math.sqrt(n_steps)
    while done < n_samples:
        nb = min(batch, n_samples - done)
        bm = np.cumsum(rng.standard_normal((nb, n_steps)) * scale, axis=1)
        z = bm[:, -1:]
        # bridge from 0 to z over u in (0,1]: u*z + (W(u) - u*W(1))
        w = np.cumsum(rng.standard_normal((nb, n_steps)) * scale, axis=1)
        bridge = tau[None, :] * z + w - tau[None, :] * w[:, -1:]
        lo = (y_lo[None, :] * bm).max(axis=1)
        hi = (x_hi[None, :] * bridge).max(axis=1)
        out[done:done + nb] = np.maximum(0.0, np.maximum(lo, hi))
        done += nb
    return out
