"""Numerical primitives shared by the criteria and the simulator.

* ``solve_c`` / ``c_prime``: the implicit composite delay c(t) = tau(t) - delta(t - c(t))
  and its derivative.
* ``integrate``: adaptive Gauss-Kronrod (7/15) quadrature for single integrals.
* ``CumulativeIntegral``: a tabulated antiderivative that answers many
  sliding-window integrals at once; windows are what every criterion needs.
* ``moving_sup``, ``tail_inf``/``tail_sup``, ``slow_variation_score``:
  finite surrogates for sup over a window, liminf/limsup and slow variation.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import legendre as L

from .errors import BracketError, DegenerateError, MaxDepthError, NonFiniteError, NumericalError
from .expr import Expr, as_constant, differentiate

Evaluable = Callable[[np.ndarray], np.ndarray]


# ----------------------------------------------------------------------------
# composite delay


@dataclass(frozen=True)
class CompositeDelay:
    """The pair (tau, delta) whose composite delay c solves c = tau(t) - delta(t - c)."""

    tau: Expr
    delta: Expr
    tau_prime: Expr
    delta_prime: Expr
    D: float
    root_tol: float = 1e-12

    @classmethod
    def build(cls, tau: Expr, delta: Expr, D: float, root_tol: float = 1e-12) -> "CompositeDelay":
        return cls(tau, delta, differentiate(tau), differentiate(delta), float(D), float(root_tol))

    @property
    def delta_constant(self) -> float | None:
        return as_constant(self.delta)


def solve_c(cd: CompositeDelay, t, explicit: bool = True):
    """Composite delay c(t) in [0, D].

    With a constant delta and ``explicit`` set, c = tau - delta exactly.
    Otherwise F(c) = c - tau(t) + delta(t - c), increasing in c, is bracketed
    on [0, D] and bisected, then polished by one secant step.
    """
    scalar = np.ndim(t) == 0
    tt = np.atleast_1d(np.asarray(t, dtype=float))
    d0 = cd.delta_constant
    if explicit and d0 is not None:
        c = np.asarray(cd.tau(tt), dtype=float) - d0
        return float(c[0]) if scalar else c

    tau = np.asarray(cd.tau(tt), dtype=float)

    def F(c):
        return c - tau + cd.delta(tt - c)

    D = cd.D
    lo = np.zeros_like(tt)
    hi = np.full_like(tt, D)
    flo = F(lo)
    fhi = F(hi)
    bad = (flo > cd.root_tol) | (fhi < -cd.root_tol) | ~np.isfinite(flo) | ~np.isfinite(fhi)
    if np.any(bad):
        k = int(np.argmax(bad))
        raise BracketError(
            f"F(0,t)={flo[k]:.3g} and F(D,t)={fhi[k]:.3g} do not bracket a root at t={tt[k]!r}"
        )
    width_tol = 4 * np.finfo(float).eps * max(D, 1.0)
    for _ in range(200):
        if np.max(hi - lo) <= width_tol:
            break
        mid = 0.5 * (lo + hi)
        fm = F(mid)
        right = fm > 0
        hi = np.where(right, mid, hi)
        fhi = np.where(right, fm, fhi)
        lo = np.where(right, lo, mid)
        flo = np.where(right, flo, fm)
    denom = fhi - flo
    with np.errstate(all="ignore"):
        c = np.where(denom > 0, lo - flo * (hi - lo) / denom, 0.5 * (lo + hi))
    c = np.clip(c, lo, hi)
    res = np.abs(F(c))
    if np.any(res > cd.root_tol):
        k = int(np.argmax(res))
        raise NumericalError(f"solve_c residual {res[k]:.3g} exceeds root_tol at t={tt[k]!r}")
    return float(c[0]) if scalar else c


def c_prime(cd: CompositeDelay, t, c):
    """Derivative of the composite delay: 1 - (1 - tau'(t)) / (1 - delta'(t - c))."""
    denom = 1.0 - np.asarray(cd.delta_prime(np.asarray(t, dtype=float) - c), dtype=float)
    if np.any(denom <= 1e-12):
        raise DegenerateError("delta'(t - c) >= 1: composite delay is not differentiable")
    out = 1.0 - (1.0 - np.asarray(cd.tau_prime(t), dtype=float)) / denom
    return float(out) if np.ndim(out) == 0 else out


# ----------------------------------------------------------------------------
# quadrature

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

# ascending node order; Gauss nodes sit at the odd positions
KRONROD_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
KRONROD_WEIGHTS = np.concatenate([_WGK[:-1], _WGK[::-1]])
GAUSS_WEIGHTS = np.concatenate([_WG[:-1], _WG[::-1]])

# partial-cell weights: integrate the degree-14 interpolant on the Kronrod nodes
_VINV = np.linalg.inv(L.legvander(KRONROD_NODES, 14))
_ANTI = np.zeros((16, 15))
for _n in range(15):
    _e = np.zeros(15)
    _e[_n] = 1.0
    _ANTI[:, _n] = L.legint(_e, lbnd=-1)
_PARTIAL = _ANTI @ _VINV  # legvander(theta, 15) @ _PARTIAL -> weights on [-1, theta]


def vectorized(f: Callable, probe=None) -> Evaluable:
    """Wrap ``f`` so it maps a float array to a float array.

    ``f`` is probed once on ``probe`` (two points in its domain); if that
    fails it is wrapped elementwise.
    """
    probe = np.array([0.25, 0.5]) if probe is None else np.asarray(probe, dtype=float)[:2]
    try:
        out = np.asarray(f(probe), dtype=float)
        if out.shape == probe.shape:
            return lambda x: np.asarray(f(x), dtype=float)
        if out.ndim == 0:
            return lambda x: np.broadcast_to(np.asarray(f(x), dtype=float), np.shape(x))
    except Exception:  # noqa: BLE001 - probing only
        pass
    return np.vectorize(lambda s: float(f(float(s))), otypes=[float])


def _gk15(f: Evaluable, a: float, b: float) -> tuple[float, float]:
    half = 0.5 * (b - a)
    vals = f(0.5 * (a + b) + half * KRONROD_NODES)
    if not np.all(np.isfinite(vals)):
        k = int(np.argmax(~np.isfinite(vals)))
        raise NonFiniteError(f"integrand not finite at s={0.5 * (a + b) + half * KRONROD_NODES[k]!r}")
    kron = half * float(vals @ KRONROD_WEIGHTS)
    gauss = half * float(vals[1::2] @ GAUSS_WEIGHTS)
    return kron, abs(kron - gauss)


def integrate(f: Callable, a: float, b: float, tol: float = 1e-10, max_depth: int = 50) -> float:
    """Adaptive Gauss-Kronrod quadrature of ``f`` over [a, b] to absolute ``tol``.

    The interval with the largest |K15 - G7| estimate is bisected until the
    summed estimate is below ``tol`` (or below the round-off floor).

    Raises:
        NonFiniteError: ``f`` is not finite at a node.
        MaxDepthError: bisection depth exceeded ``max_depth``.
    """
    if a == b:
        return 0.0
    if b < a:
        return -integrate(f, b, a, tol, max_depth)
    fv = vectorized(f, [a, b])
    kron, err = _gk15(fv, a, b)
    heap = [(-err, a, b, kron, 0)]
    total, total_err = kron, err
    eps = np.finfo(float).eps
    while total_err > max(tol, 50 * eps * abs(total)):
        neg_err, lo, hi, k_old, depth = heapq.heappop(heap)
        if depth >= max_depth:
            raise MaxDepthError(f"quadrature on [{a}, {b}] did not reach tol={tol} at depth {max_depth}")
        mid = 0.5 * (lo + hi)
        k1, e1 = _gk15(fv, lo, mid)
        k2, e2 = _gk15(fv, mid, hi)
        total += k1 + k2 - k_old
        total_err += e1 + e2 + neg_err
        heapq.heappush(heap, (-e1, lo, mid, k1, depth + 1))
        heapq.heappush(heap, (-e2, mid, hi, k2, depth + 1))
    return float(total)


class CumulativeIntegral:
    """Tabulated antiderivative G(x) = integral of f from ``a`` to x on [a, b].

    Each cell of width <= ``step`` carries a 15-point Kronrod rule. Values of
    G inside a cell integrate the degree-14 interpolant through the same
    nodes, so ``f`` is sampled once and any number of windows are cheap. Cells
    are halved until the summed |K15 - G7| estimate is below ``tol`` (at most
    ``max_refine`` times); the final estimate is kept in ``error_estimate``.
    """

    def __init__(self, f: Callable, a: float, b: float, step: float, tol: float | None = None,
                 max_refine: int = 3):
        if not b > a:
            b = a + step
        fv = vectorized(f, [a, b])
        n = max(1, math.ceil((b - a) / step - 1e-9))
        for _ in range(max_refine + 1):
            h = (b - a) / n
            centers = a + h * (np.arange(n) + 0.5)
            nodes = centers[:, None] + 0.5 * h * KRONROD_NODES[None, :]
            vals = fv(nodes.ravel()).reshape(n, 15)
            if not np.all(np.isfinite(vals)):
                k = int(np.argmax(~np.isfinite(vals.ravel())))
                raise NonFiniteError(f"integrand not finite at s={nodes.ravel()[k]!r}")
            kron = 0.5 * h * (vals @ KRONROD_WEIGHTS)
            gauss = 0.5 * h * (vals[:, 1::2] @ GAUSS_WEIGHTS)
            err = float(np.sum(np.abs(kron - gauss)))
            if tol is None or err <= tol:
                break
            n *= 2
        self.a, self.b, self.n, self.h = float(a), float(b), n, h
        self.vals = vals
        self.cum = np.concatenate([[0.0], np.cumsum(kron)])
        self.error_estimate = err

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        slack = 1e-9 * max(1.0, abs(self.a), abs(self.b))
        if x.size and (x.min() < self.a - slack or x.max() > self.b + slack):
            raise ValueError(f"query outside tabulated range [{self.a}, {self.b}]")
        flat = x.ravel()
        out = np.empty_like(flat)
        for s in range(0, flat.size, 1 << 16):
            xs = flat[s:s + (1 << 16)]
            k = np.clip(np.floor((xs - self.a) / self.h).astype(np.int64), 0, self.n - 1)
            theta = np.clip(2.0 * (xs - (self.a + k * self.h)) / self.h - 1.0, -1.0, 1.0)
            w = L.legvander(theta, 15) @ _PARTIAL
            out[s:s + xs.size] = self.cum[k] + 0.5 * self.h * np.einsum("ij,ij->i", w, self.vals[k])
        return out.reshape(x.shape)

    def window(self, lo, hi) -> np.ndarray:
        """Integral over [lo, hi]; zero-length windows give exactly 0."""
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        out = self(hi) - self(lo)
        return np.where(hi == lo, 0.0, out)


def window_integrals(f: Callable, lo, hi, step: float, tol: float | None = None) -> np.ndarray:
    """Integral of ``f`` over each window [lo_k, hi_k]."""
    lo, hi = np.broadcast_arrays(np.asarray(lo, dtype=float), np.asarray(hi, dtype=float))
    if lo.size == 0:
        return np.zeros(lo.shape)
    table = CumulativeIntegral(f, float(min(lo.min(), hi.min())), float(max(lo.max(), hi.max())), step, tol)
    return table.window(lo, hi)


# ----------------------------------------------------------------------------
# windows and tails


def moving_sup(f: Callable, t, width: float, step: float):
    """max of ``f`` over the grid {t - width, ..., t} with spacing <= ``step``."""
    if width < 0:
        raise ValueError("width must be nonnegative")
    fv = vectorized(f, np.ravel(t)[:1].tolist() * 2)
    n = max(1, math.ceil(width / step - 1e-12)) if width > 0 else 0
    offsets = np.linspace(width, 0.0, n + 1) if n else np.zeros(1)
    scalar = np.ndim(t) == 0
    tt = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.empty_like(tt)
    chunk = max(1, (1 << 22) // offsets.size)
    for s in range(0, tt.size, chunk):
        pts = tt[s:s + chunk, None] - offsets[None, :]
        out[s:s + chunk] = fv(pts.ravel()).reshape(pts.shape).max(axis=1)
    return float(out[0]) if scalar else out


def tail_grid(cfg) -> np.ndarray:
    """Uniform grid on [tail_start, horizon] with spacing ``grid_step``."""
    n = int(math.floor((cfg.horizon - cfg.tail_start) / cfg.grid_step + 1e-9))
    return cfg.tail_start + cfg.grid_step * np.arange(n + 1)


def trend_starts(cfg) -> list[float]:
    """Starts of the dyadically shrinking tail windows ending at ``horizon``."""
    span = cfg.horizon - cfg.tail_start
    return [cfg.horizon - span / 2**k for k in range(max(1, cfg.trend_levels))]


@dataclass(frozen=True)
class TailEstimate:
    """Finite-tail stand-in for a liminf (``kind="inf"``) or limsup (``"sup"``)."""

    value: float
    trend: tuple[tuple[float, float], ...]
    converged: bool
    kind: str
    at: float  # time where the extremum is attained

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "value": self.value,
            "at": self.at,
            "converged": self.converged,
            "trend": [[s, v] for s, v in self.trend],
        }


def tail_estimate(values: np.ndarray, grid: np.ndarray, cfg, kind: str) -> TailEstimate:
    """Extremum of ``values`` over the whole tail grid, with a convergence trend.

    The trend lists extrema over dyadically shrinking windows ending at the
    horizon. The estimate counts as converged when the last two trend entries
    differ by less than ``cfg.margin``, and, if the extremum sits on the last
    grid point, the final window is flat to within the margin (otherwise the
    function is still moving when the horizon cuts it off).
    """
    values = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(values)):
        k = int(np.argmax(~np.isfinite(values)))
        raise NonFiniteError(f"tail function not finite at t={grid[k]!r}")
    pick = np.argmin if kind == "inf" else np.argmax
    trend = []
    for start in trend_starts(cfg):
        sel = grid >= start - 1e-12 * max(1.0, abs(start))
        if not np.any(sel):
            sel = grid >= grid[-1]
        trend.append((float(start), float(values[sel][pick(values[sel])])))
    k = int(pick(values))
    value = float(values[k])
    converged = len(trend) < 2 or abs(trend[-1][1] - trend[-2][1]) < cfg.margin
    if k == values.size - 1 and values.size > 1:
        # extremum at the horizon: only trust it if the final window is flat
        final = values[grid >= trend[-1][0] - 1e-12 * max(1.0, abs(trend[-1][0]))]
        converged = converged and float(np.ptp(final)) < cfg.margin
    return TailEstimate(value, tuple(trend), bool(converged), kind, float(grid[k]))


def tail_inf(f: Callable, cfg, grid: np.ndarray | None = None) -> TailEstimate:
    """Grid infimum of ``f`` on [tail_start, horizon] with a shrinking-window trend."""
    grid = tail_grid(cfg) if grid is None else grid
    return tail_estimate(vectorized(f, grid)(grid), grid, cfg, "inf")


def tail_sup(f: Callable, cfg, grid: np.ndarray | None = None) -> TailEstimate:
    """Grid supremum of ``f`` on [tail_start, horizon] with a shrinking-window trend."""
    grid = tail_grid(cfg) if grid is None else grid
    return tail_estimate(vectorized(f, grid)(grid), grid, cfg, "sup")


def slow_variation_score(f: Callable, cfg, shifts: Sequence[float] | None = None,
                         grid: np.ndarray | None = None) -> float:
    """max |f(t + h) - f(t)| over the shifts and the final tail window.

    A small score is consistent with slow variation; it cannot prove it.
    """
    shifts = cfg.slow_shifts if shifts is None else shifts
    if not shifts:
        return 0.0
    grid = tail_grid(cfg) if grid is None else grid
    ts = grid[grid >= trend_starts(cfg)[-1] - 1e-12]
    if ts.size == 0:
        ts = grid[-1:]
    fv = vectorized(f, ts)
    base = fv(ts)
    return float(max(np.max(np.abs(fv(ts + h) - base)) for h in shifts))
