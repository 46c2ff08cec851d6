"""Method-of-steps integration of the neutral equation.

The unknown is the neutral combination z(t) = x(t) - sum R_i(t) x(t - r_i(t)),
which obeys the retarded equation

    z'(t) = -sum P_j(t) x(t - tau_j(t)) + sum Q_k(t) x(t - delta_k(t)).

z is advanced with classical RK4 on a fixed grid and x is recovered from
x(t) = z(t) + sum R_i(t) x(t - r_i(t)). That needs r_i >= r_min > 0, so
the reconstruction only looks at stored nodes. Delayed values come from
4-point Lagrange interpolation of the stored nodes (the history is used
exactly for arguments <= t0).

A trajectory is evidence about one solution. It never overrides a
criterion verdict, which quantifies over all solutions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .delay_kernel import CompositeDelay, CumulativeIntegral, solve_c
from .errors import BlowupError, RMinError, ValidationError
from .expr import Expr, as_expr, scalar_function
from .model import NddeProblem, validation_grid

BLOWUP = 1e150


@dataclass(frozen=True)
class History:
    """Initial function on [t0 - D, t0]."""

    phi: Expr

    @classmethod
    def parse(cls, text) -> "History":
        return cls(as_expr(text))

    def check(self, problem: NddeProblem, step: float) -> None:
        grid = validation_grid(problem.t0 - problem.D, problem.t0, step)
        try:
            values = np.asarray(self.phi(grid), dtype=float) * np.ones_like(grid)
        except Exception as exc:  # noqa: BLE001 - re-raised as validation failure
            raise ValidationError(f"history cannot be evaluated: {exc}", "history") from None
        if not np.all(np.isfinite(values)):
            k = int(np.argmax(~np.isfinite(values)))
            raise ValidationError("history is not finite", "history", float(grid[k]))


def _lagrange4(u: float) -> tuple[float, float, float, float]:
    """Weights of the cubic through nodes 0, 1, 2, 3 evaluated at ``u``."""
    a, b, c = u - 1.0, u - 2.0, u - 3.0
    return (-a * b * c / 6.0, u * b * c / 2.0, -u * a * c / 2.0, u * a * b / 6.0)


@dataclass(frozen=True)
class Trajectory:
    grid: np.ndarray
    x: np.ndarray
    z: np.ndarray
    zeros: tuple[float, ...]
    history: History
    dt: float

    @property
    def t0(self) -> float:
        return float(self.grid[0])

    def x_at(self, s):
        """Solution at ``s`` (history for s <= t0, cubic interpolation of nodes otherwise)."""
        s_arr = np.atleast_1d(np.asarray(s, dtype=float))
        if s_arr.size and s_arr.max() > self.grid[-1] + 1e-9 * self.dt:
            raise ValueError(f"query beyond the trajectory end {self.grid[-1]}")
        out = np.empty_like(s_arr)
        past = s_arr <= self.t0
        if np.any(past):
            out[past] = np.asarray(self.history.phi(s_arr[past]), dtype=float) * np.ones(int(past.sum()))
        live = ~past
        if np.any(live):
            u = (s_arr[live] - self.t0) / self.dt
            n = self.x.size - 1
            j0 = np.clip(np.floor(u).astype(np.int64) - 1, -3, max(n - 3, -3))
            idx = j0[:, None] + np.arange(4)[None, :]
            prefix = np.asarray(self.history.phi(self.t0 + self.dt * np.arange(-3, 0)), dtype=float)
            prefix = prefix * np.ones(3)
            table = np.concatenate([prefix, self.x])
            w = np.stack(_lagrange4(u - j0), axis=1)
            out[live] = np.einsum("ij,ij->i", w, table[idx + 3])
        return float(out[0]) if np.ndim(s) == 0 else out.reshape(np.shape(s))


def integrate_ndde(problem: NddeProblem, history: History, t_end: float, dt: float,
                   r_min: float | None = None) -> Trajectory:
    """Fixed-step RK4 solution on [t0, t_end].

    Args:
        problem: the equation.
        history: initial function on [t0 - D, t0].
        t_end: final time.
        dt: step; must satisfy dt <= r_min / 4.
        r_min: lower bound for every neutral delay; defaults to their grid minimum.

    Raises:
        RMinError: a neutral delay drops below ``r_min`` or dt is too large.
        BlowupError: |x| exceeded the overflow guard.
    """
    t0 = problem.t0
    if not t_end > t0 or not dt > 0:
        raise ValidationError("need t_end > t0 and dt > 0", "simulate")
    n_steps = int(math.ceil((t_end - t0) / dt - 1e-9))
    half = t0 + 0.5 * dt * np.arange(2 * n_steps + 1)

    def on_half(e: Expr) -> list[float]:
        return (np.asarray(e(half), dtype=float) * np.ones_like(half)).tolist()

    R = [on_half(n.R) for n in problem.neutral]
    r = [on_half(n.r) for n in problem.neutral]
    P = [on_half(p.P) for p in problem.positive]
    tau = [on_half(p.tau) for p in problem.positive]
    Q = [on_half(q.Q) for q in problem.negative]
    delta = [on_half(q.delta) for q in problem.negative]

    if r:
        lowest = min(min(ri) for ri in r)
        bound = lowest if r_min is None else r_min
        if lowest < bound:
            raise RMinError(f"a neutral delay reaches {lowest:.6g} < r_min={bound:.6g}")
        if not bound > 0:
            raise RMinError("neutral delays must stay positive for explicit reconstruction")
        if dt > bound / 4 + 1e-15:
            raise RMinError(f"dt={dt} exceeds r_min/4={bound / 4:.6g}")

    phi = scalar_function(history.phi)
    prefix = [phi(t0 - k * dt) for k in (3, 2, 1)]
    xs: list[float] = []
    zs: list[float] = []

    def node(j: int) -> float:
        return xs[j] if j >= 0 else prefix[j + 3]

    def interp(s: float) -> float:
        # s > t0; nodes 0..len(xs)-1 are available
        u = (s - t0) / dt
        j0 = int(math.floor(u)) - 1
        last = len(xs) - 1
        if j0 + 3 > last:
            j0 = last - 3
        w0, w1, w2, w3 = _lagrange4(u - j0)
        return w0 * node(j0) + w1 * node(j0 + 1) + w2 * node(j0 + 2) + w3 * node(j0 + 3)

    def past(s: float) -> float:
        return phi(s) if s <= t0 else interp(s)

    def reconstruct(h: int, t: float, z: float) -> float:
        return z + sum(R[i][h] * past(t - r[i][h]) for i in range(len(R)))

    def rhs(h: int, t: float, z: float) -> float:
        x_here = None
        acc = 0.0
        for j in range(len(P)):
            s = t - tau[j][h]
            if s >= t - 1e-14 * max(1.0, abs(t)):
                x_here = reconstruct(h, t, z) if x_here is None else x_here
                acc -= P[j][h] * x_here
            else:
                acc -= P[j][h] * past(s)
        for k in range(len(Q)):
            s = t - delta[k][h]
            if s >= t - 1e-14 * max(1.0, abs(t)):
                x_here = reconstruct(h, t, z) if x_here is None else x_here
                acc += Q[k][h] * x_here
            else:
                acc += Q[k][h] * past(s)
        return acc

    x0 = phi(t0)
    xs.append(x0)
    zs.append(x0 - sum(R[i][0] * phi(t0 - r[i][0]) for i in range(len(R))))
    for n in range(n_steps):
        t = t0 + n * dt
        z = zs[-1]
        h = 2 * n
        k1 = rhs(h, t, z)
        k2 = rhs(h + 1, t + 0.5 * dt, z + 0.5 * dt * k1)
        k3 = rhs(h + 1, t + 0.5 * dt, z + 0.5 * dt * k2)
        k4 = rhs(h + 2, t + dt, z + dt * k3)
        z_new = z + dt * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
        t_new = t0 + (n + 1) * dt
        x_new = reconstruct(h + 2, t_new, z_new)
        if not abs(x_new) <= BLOWUP:
            raise BlowupError(f"|x| exceeded {BLOWUP:g} at t={t_new!r}")
        zs.append(z_new)
        xs.append(x_new)

    grid = t0 + dt * np.arange(n_steps + 1)
    x = np.array(xs)
    return Trajectory(grid, x, np.array(zs), tuple(_zeros(grid, x)), history, dt)


def _zeros(grid: np.ndarray, x: np.ndarray) -> list[float]:
    out = []
    prev_zero = False
    for k in range(x.size):
        if x[k] == 0.0:
            if not prev_zero:
                out.append(float(grid[k]))
            prev_zero = True
            continue
        prev_zero = False
        if k + 1 < x.size and x[k + 1] != 0.0 and (x[k] < 0) != (x[k + 1] < 0):
            frac = x[k] / (x[k] - x[k + 1])
            out.append(float(grid[k] + frac * (grid[k + 1] - grid[k])))
    return out


def detect_zeros(traj: Trajectory) -> list[float]:
    """Crossing times refined by linear interpolation; a run of exact zeros counts once."""
    return _zeros(traj.grid, traj.x)


def y_transform(problem: NddeProblem, traj: Trajectory, tol: float = 1e-10) -> np.ndarray:
    """y(t) = x(t) - sum R_i x(t - r_i) - sum int_{t - c_k(t)}^t Q_k(s) x(s - delta_k(s)) ds on the grid.

    For an eventually positive solution y is eventually positive and
    non-increasing, which makes it a useful cross-check.
    """
    t = traj.grid
    y = traj.x.copy()
    for n in problem.neutral:
        y -= np.asarray(n.R(t), dtype=float) * traj.x_at(t - np.asarray(n.r(t), dtype=float) * np.ones_like(t))
    for k, q in enumerate(problem.negative):
        cd = CompositeDelay.build(problem.positive[k].tau, q.delta, problem.D)
        c = np.asarray(solve_c(cd, t), dtype=float)

        def g(s, q=q):
            return np.asarray(q.Q(s), dtype=float) * traj.x_at(s - np.asarray(q.delta(s), dtype=float) * np.ones_like(s))

        lo = min(float(np.min(t - c)), traj.t0)
        table = CumulativeIntegral(g, lo, float(t[-1]), traj.dt, tol)
        y -= table.window(t - c, t)
    return y


class Evidence(str, Enum):
    OSCILLATING = "EMPIRICALLY_OSCILLATING"
    NONOSCILLATING = "EMPIRICALLY_NONOSCILLATING"
    UNDECIDED = "UNDECIDED"


@dataclass(frozen=True)
class Classification:
    label: Evidence
    sign_changes: int
    window: tuple[float, float]
    min_abs: float

    def to_dict(self) -> dict:
        return {"label": self.label.value, "sign_changes": self.sign_changes,
                "window": list(self.window), "min_abs": self.min_abs}


def classify(traj: Trajectory, window: float, floor: float = 1e-12) -> Classification:
    """Count sign changes of x on the final ``window``.

    Two or more changes mean oscillating; none with |x| > ``floor`` throughout
    mean non-oscillating; anything else is undecided.
    """
    lo = float(traj.grid[-1] - window)
    sel = traj.grid >= lo - 1e-12
    xw = traj.x[sel]
    signs = np.sign(xw)
    signs = signs[signs != 0]
    changes = int(np.count_nonzero(signs[1:] != signs[:-1]))
    min_abs = float(np.min(np.abs(xw)))
    if changes >= 2:
        label = Evidence.OSCILLATING
    elif changes == 0 and min_abs > floor:
        label = Evidence.NONOSCILLATING
    else:
        label = Evidence.UNDECIDED
    return Classification(label, changes, (lo, float(traj.grid[-1])), min_abs)


def write_trajectory(traj: Trajectory, path: str | Path) -> None:
    """Space-delimited text with header ``t x z``."""
    lines = ["t x z"]
    lines += [f"{t:.12g} {x:.12g} {z:.12g}" for t, x, z in zip(traj.grid, traj.x, traj.z)]
    Path(path).write_text("\n".join(lines) + "\n")
