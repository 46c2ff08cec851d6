"""Oscillation criteria for the neutral equation.

Every criterion compares a tail statistic with a threshold (1/e, or 1 for
D1 and D3). liminf and limsup are replaced by extrema over the finite tail
grid, so a criterion certifies OSCILLATORY only when its preconditions
pass, the statistic exceeds threshold + margin, and the shrinking-window
trend of the tail extremum has settled.

Families:

* ``I``          A1, B1, C1, D1, after reducing to a non-neutral equation
                 with coefficients pbar_star (conditions H1, H2).
* ``slow``       A2, B2, C2: limsup versions that need slow variation.
* ``const``      A3(m), B3(m), D3(m) for constant delays, via omega.
* ``const_slow`` Am(m), Bm(m): limsup versions of A3/B3.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterable, Sequence

import numpy as np

from .delay_kernel import (
    CompositeDelay,
    CumulativeIntegral,
    TailEstimate,
    c_prime,
    moving_sup,
    slow_variation_score,
    solve_c,
    tail_estimate,
    tail_grid,
    trend_starts,
    window_integrals,
)
from .errors import DivZeroError, NddeError, NumericalError, PreconditionError
from .expr import Expr, as_constant, differentiate, to_text
from .model import AnalysisConfig, NddeProblem, is_constant_delay, validation_grid

INV_E = math.exp(-1.0)

FAMILY_IDS = {
    "I": ("A1", "B1", "C1", "D1"),
    "slow": ("A2", "B2", "C2"),
    "const": ("A3", "B3", "D3"),
    "const_slow": ("Am", "Bm"),
}


class Verdict(str, Enum):
    OSCILLATORY = "OSCILLATORY"
    INCONCLUSIVE = "INCONCLUSIVE"
    INAPPLICABLE = "INAPPLICABLE"


@dataclass(frozen=True)
class Precondition:
    name: str
    passed: bool
    detail: str = ""

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "detail": self.detail}


@dataclass(frozen=True)
class CriterionReport:
    id: str
    family: str
    m: int | None
    statistic: float
    threshold: float
    margin_used: float
    verdict: Verdict
    preconditions: tuple[Precondition, ...]
    diagnostics: dict = field(default_factory=dict)

    @property
    def key(self) -> str:
        return self.id if self.m is None else f"{self.id}(m={self.m})"

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "family": self.family,
            "m": self.m,
            "statistic": self.statistic,
            "threshold": self.threshold,
            "margin": self.margin_used,
            "verdict": self.verdict.value,
            "preconditions": [p.to_dict() for p in self.preconditions],
            "diagnostics": self.diagnostics,
        }


def decide(statistic: float, threshold: float, margin: float,
           preconditions: Iterable[Precondition], converged: bool) -> Verdict:
    """OSCILLATORY iff preconditions pass, statistic > threshold + margin and the tail converged."""
    if not all(p.passed for p in preconditions):
        return Verdict.INAPPLICABLE
    if math.isfinite(statistic) and statistic > threshold + margin and converged:
        return Verdict.OSCILLATORY
    return Verdict.INCONCLUSIVE


def make_report(cid: str, family: str, m: int | None, estimate: TailEstimate | None,
                threshold: float, cfg: AnalysisConfig, preconditions: Sequence[Precondition],
                diagnostics: dict | None = None) -> CriterionReport:
    diagnostics = dict(diagnostics or {})
    statistic = math.nan
    converged = False
    if estimate is not None:
        statistic = estimate.value
        converged = estimate.converged
        diagnostics["tail"] = estimate.to_dict()
    verdict = decide(statistic, threshold, cfg.margin, preconditions, converged)
    return CriterionReport(cid, family, m, statistic, threshold, cfg.margin, verdict,
                           tuple(preconditions), diagnostics)


# ----------------------------------------------------------------------------
# transformed coefficients


def build_kernels(problem: NddeProblem, cfg: AnalysisConfig) -> tuple[CompositeDelay, ...]:
    """One composite delay per positive term, negative list padded to N_p."""
    return tuple(
        CompositeDelay.build(p.tau, q.delta, problem.D, cfg.root_tol)
        for p, q in zip(problem.positive, problem.padded_negative)
    )


def pbar(problem: NddeProblem, kernels: Sequence[CompositeDelay], i: int, t, explicit: bool = True):
    """Transformed coefficient P_i(t) - Q_i(t - c_i(t)) (1 - c_i'(t)) (``i`` is 0-based)."""
    P = problem.positive[i].P
    if i >= problem.N_q:
        return P(t)
    cd = kernels[i]
    Q = problem.negative[i].Q
    c = solve_c(cd, t, explicit=explicit)
    t_arr = np.asarray(t, dtype=float)
    if explicit and cd.delta_constant is not None:
        one_minus_cp = 1.0 - np.asarray(cd.tau_prime(t_arr), dtype=float)
    else:
        one_minus_cp = 1.0 - np.asarray(c_prime(cd, t_arr, c), dtype=float)
    out = np.asarray(P(t_arr), dtype=float) - np.asarray(Q(t_arr - c), dtype=float) * one_minus_cp
    return float(out) if np.ndim(out) == 0 else out


def pbar_star_supq(problem: NddeProblem, i: int, t, Delta: float, step: float):
    """Lower bound P_i(t) - (1 - tau_i'(t)) / (1 - Delta_i) * sup_{[t-D, t]} Q_i.

    Raises:
        PreconditionError: Delta >= 1, delta_i' > Delta or tau_i' >= 1 at a queried t.
    """
    P = problem.positive[i].P
    if i >= problem.N_q:
        return P(t)
    if not Delta < 1:
        raise PreconditionError(f"Delta_{i + 1}={Delta} must be < 1")
    t_arr = np.asarray(t, dtype=float)
    delta_p = np.asarray(differentiate(problem.negative[i].delta)(t_arr), dtype=float)
    tau_p = np.asarray(differentiate(problem.positive[i].tau)(t_arr), dtype=float)
    if np.any(delta_p > Delta):
        k = int(np.argmax(np.ravel(delta_p > Delta)))
        raise PreconditionError(f"delta_{i + 1}' exceeds Delta={Delta} at t={np.ravel(t_arr)[k]!r}")
    if np.any(tau_p >= 1):
        k = int(np.argmax(np.ravel(tau_p >= 1)))
        raise PreconditionError(f"tau_{i + 1}' >= 1 at t={np.ravel(t_arr)[k]!r}")
    sup_q = moving_sup(problem.negative[i].Q, t_arr, problem.D, step)
    out = np.asarray(P(t_arr), dtype=float) - (1.0 - tau_p) / (1.0 - Delta) * sup_q
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class TransformedCoefficients:
    """pbar_i, a minorant pbar_star_i, and a majorant c_star_i of c_i (0-based families)."""

    pbar: tuple[Callable, ...]
    pbar_star: tuple[Callable, ...]
    c: tuple[Callable, ...]
    c_star: tuple[Callable, ...]
    source: str

    def check(self, grid: np.ndarray) -> list[Precondition]:
        """0 <= pbar_star <= pbar and c_star >= c on ``grid``.

        The sup-of-Q minorant lies below pbar and c_star = D lies above c by
        construction; for it only strict positivity is checked, so c is never
        evaluated.
        """
        if self.source == "supq":
            out = []
            for i, ps in enumerate(self.pbar_star, 1):
                vs = np.asarray(ps(grid), dtype=float) * np.ones_like(grid)
                k = int(np.argmin(vs))
                out.append(Precondition(f"pbar_star_{i}>0", bool(vs[k] > 0),
                                        f"min {vs[k]:.6g} at t={grid[k]:.6g}; below pbar_{i} by construction"))
            return out
        out = []
        for i, (pb, ps, c, cs) in enumerate(zip(self.pbar, self.pbar_star, self.c, self.c_star), 1):
            vb = np.asarray(pb(grid), dtype=float)
            vs = np.asarray(ps(grid), dtype=float)
            tol = 1e-12 * np.maximum(1.0, np.abs(vb))
            bad = (vs < -tol) | (vs > vb + tol)
            if np.any(bad):
                k = int(np.argmax(bad))
                out.append(Precondition(
                    f"0<=pbar_star_{i}<=pbar_{i}", False,
                    f"pbar_{i}={vb[k]:.6g}, pbar_star_{i}={vs[k]:.6g} at t={grid[k]:.6g}"))
            else:
                out.append(Precondition(f"0<=pbar_star_{i}<=pbar_{i}", True,
                                        f"min pbar_{i}={vb.min():.6g}"))
            dc = np.asarray(cs(grid), dtype=float) - np.asarray(c(grid), dtype=float)
            if np.any(dc < -1e-10):
                k = int(np.argmax(dc < -1e-10))
                out.append(Precondition(f"c_star_{i}>=c_{i}", False, f"at t={grid[k]:.6g}"))
            else:
                out.append(Precondition(f"c_star_{i}>=c_{i}", True))
        return out


def transformed_coefficients(problem: NddeProblem, kernels: Sequence[CompositeDelay],
                             cfg: AnalysisConfig, mode: str = "direct",
                             Delta: Sequence[float] | None = None) -> TransformedCoefficients:
    """Default (``"direct"``): pbar_star = max(pbar, 0), c_star = c.

    ``"supq"`` uses the explicit minorant with sup of Q over [t - D, t] and
    c_star = D, which avoids solving for c at all.
    """
    n = problem.N_p

    def pb(i):
        return lambda t: pbar(problem, kernels, i, t)

    def cc(i):
        return lambda t: solve_c(kernels[i], t)

    pbars = tuple(pb(i) for i in range(n))
    cs = tuple(cc(i) for i in range(n))
    if mode == "direct":
        star = tuple((lambda f: (lambda t: np.maximum(f(t), 0.0)))(f) for f in pbars)
        _, delta_const = is_constant_delay(problem)
        source = "constant-delta" if delta_const else "direct"
        return TransformedCoefficients(pbars, star, cs, cs, source)
    if mode == "supq":
        if Delta is None:
            Delta = default_delta_bounds(problem, cfg)
        Delta = list(Delta) + [0.0] * (n - len(Delta))
        star = tuple(
            (lambda i: (lambda t: pbar_star_supq(problem, i, t, Delta[i], cfg.grid_step)))(i)
            for i in range(n))
        D = problem.D
        cstar = tuple((lambda t: np.full(np.shape(t), D) if np.ndim(t) else D) for _ in range(n))
        return TransformedCoefficients(pbars, star, cs, cstar, "supq")
    raise ValueError(f"unknown pbar_star mode {mode!r}")


def default_delta_bounds(problem: NddeProblem, cfg: AnalysisConfig) -> list[float]:
    """Grid maximum of delta_k' (floored at 0) over [t0, horizon]."""
    grid = validation_grid(problem.t0, cfg.horizon, cfg.grid_step)
    return [max(0.0, float(np.max(differentiate(q.delta)(grid)))) for q in problem.negative]


# ----------------------------------------------------------------------------
# workspace: tail grid plus cached antiderivatives


class Workspace:
    """Caches antiderivative tables and grid samples for one (problem, tc, cfg)."""

    def __init__(self, problem: NddeProblem, tc: TransformedCoefficients, cfg: AnalysisConfig):
        self.problem, self.tc, self.cfg = problem, tc, cfg
        self.grid = tail_grid(cfg)
        all_const, _ = is_constant_delay(problem)
        r0 = min((as_constant(n.r) for n in problem.neutral), default=0.0) if all_const else 0.0
        back = problem.D + cfg.m_max * r0
        self.lo = cfg.tail_start - back - cfg.grid_step
        self.hi = cfg.horizon + max(cfg.slow_shifts, default=0.0) + cfg.grid_step
        self._tables: dict = {}
        self._samples: dict = {}

    def function(self, key) -> Callable:
        kind, i = key
        if kind == "pbar":
            return self.tc.pbar[i]
        if kind == "pbar_star":
            return self.tc.pbar_star[i]
        if kind == "Q":
            return self.problem.negative[i].Q
        raise KeyError(key)

    def window(self, key, lo, hi) -> np.ndarray:
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        f = self.function(key)
        slack = 1e-9 * max(1.0, abs(self.hi))
        if lo.size and lo.min() >= self.lo - slack and hi.max() <= self.hi + slack:
            if key not in self._tables:
                self._tables[key] = CumulativeIntegral(f, self.lo, self.hi, self.cfg.grid_step,
                                                       self.cfg.quad_tol)
            return self._tables[key].window(lo, hi)
        return window_integrals(f, lo, hi, self.cfg.grid_step, self.cfg.quad_tol)

    def on_grid(self, key) -> np.ndarray:
        if key not in self._samples:
            self._samples[key] = np.asarray(self.function(key)(self.grid), dtype=float)
        return self._samples[key]

    def quad_error(self) -> float:
        return float(sum(t.error_estimate for t in self._tables.values()))


def _ws(problem, tc, cfg, ws):
    if ws is None or ws.tc is not tc or ws.cfg is not cfg:
        return Workspace(problem, tc, cfg)
    return ws


# ----------------------------------------------------------------------------
# hypotheses and omega


@dataclass(frozen=True)
class HypothesisCheck:
    h1: bool
    h2: bool
    details: dict

    def preconditions(self) -> list[Precondition]:
        d = self.details
        return [
            Precondition("H1", self.h1, f"sup of sum pbar_star over final tail window = {d['h1_sup']:.6g}"),
            Precondition("H2", self.h2, f"max of sum R + sum int Q = {d['h2_max']:.6g} at t={d['h2_at']:.6g}"),
        ]


def check_H1_H2(problem: NddeProblem, tc: TransformedCoefficients, cfg: AnalysisConfig,
                ws: Workspace | None = None) -> HypothesisCheck:
    """H1 (weak positivity, final tail window) and H2 (unit bound, every tail grid point).

    Also reports the c_star-free sufficient form sum R + sum int_{t-D}^t Q <= 1.
    """
    ws = _ws(problem, tc, cfg, ws)
    grid = ws.grid
    final = grid >= trend_starts(cfg)[-1] - 1e-12
    total_star = sum(ws.on_grid(("pbar_star", i)) for i in range(problem.N_p))
    h1_sup = float(np.max(total_star[final]))
    r_sum = sum((np.asarray(n.R(grid), dtype=float) for n in problem.neutral), np.zeros_like(grid))
    lhs = r_sum.copy()
    suff = r_sum.copy()
    for k in range(problem.N_q):
        cstar = np.asarray(tc.c_star[k](grid), dtype=float)
        lhs = lhs + ws.window(("Q", k), grid - cstar, grid)
        suff = suff + ws.window(("Q", k), grid - problem.D, grid)
    j = int(np.argmax(lhs))
    details = {
        "h1_sup": h1_sup,
        "h2_max": float(lhs[j]),
        "h2_at": float(grid[j]),
        "sufficient_max": float(np.max(suff)),
        "sufficient_pass": bool(np.max(suff) <= 1.0 + cfg.quad_tol),
    }
    return HypothesisCheck(h1_sup > 0, bool(lhs[j] <= 1.0 + cfg.quad_tol), details)


@dataclass(frozen=True)
class OmegaEstimate:
    value: float | None
    per_pair: dict  # (i, j) 1-based -> TailEstimate
    reason: str = ""

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "reason": self.reason,
            "per_pair": [{"i": i, "j": j, **est.to_dict()} for (i, j), est in sorted(self.per_pair.items())],
        }


def omega(problem: NddeProblem, tc: TransformedCoefficients, cfg: AnalysisConfig) -> OmegaEstimate:
    """Lower bound omega of Omega_ij(t) = R_j(t - tau_i) pbar_i(t) / pbar_i(t - r_j).

    omega = min_ij tail_inf(Omega_ij) - margin; ``value`` is None (inapplicable)
    unless 0 < omega < 1/N_r.

    Raises:
        DivZeroError: pbar_i(t - r_j) vanishes at a grid point.
    """
    all_const, _ = is_constant_delay(problem)
    if not all_const:
        return OmegaEstimate(None, {}, "delays are not all constant")
    if problem.N_r == 0:
        return OmegaEstimate(None, {}, "no neutral terms")
    grid = tail_grid(cfg)
    for i in range(problem.N_p):
        vals = np.asarray(tc.pbar[i](grid), dtype=float)
        if vals.min() <= 0:
            k = int(np.argmin(vals))
            return OmegaEstimate(None, {}, f"pbar_{i + 1}={vals[k]:.6g} <= 0 at t={grid[k]:.6g}")
    per = {}
    for i, pos in enumerate(problem.positive):
        tau = as_constant(pos.tau)
        num = np.asarray(tc.pbar[i](grid), dtype=float)
        for j, neu in enumerate(problem.neutral):
            r = as_constant(neu.r)
            den = np.asarray(tc.pbar[i](grid - r), dtype=float)
            if np.any(den == 0):
                k = int(np.argmax(den == 0))
                raise DivZeroError(f"pbar_{i + 1}(t - r_{j + 1}) vanishes at t={grid[k]!r}")
            vals = np.asarray(neu.R(grid - tau), dtype=float) * num / den
            per[(i + 1, j + 1)] = tail_estimate(vals, grid, cfg, "inf")
    inf_min = min(est.value for est in per.values())
    value = inf_min - cfg.margin
    if value <= 0:
        return OmegaEstimate(None, per, f"tail infimum of Omega is {inf_min:.6g}; omega would be <= 0")
    if value >= 1.0 / problem.N_r:
        return OmegaEstimate(None, per, f"omega={value:.6g} is not below 1/N_r")
    return OmegaEstimate(value, per)


# ----------------------------------------------------------------------------
# helpers for the families


def _asserted(asserted: Iterable[str], cid: str, m: int | None) -> bool:
    names = {a.strip() for a in asserted}
    return cid in names or (m is not None and (f"{cid}({m})" in names or f"{cid}(m={m})" in names))


def _estimate(ws: Workspace, stat: Callable, kind: str) -> TailEstimate:
    return tail_estimate(stat(ws.grid), ws.grid, ws.cfg, kind)


def _guarded(preconditions: list[Precondition], name: str, compute: Callable):
    """Run ``compute``; a numerical failure becomes a failed precondition."""
    try:
        return compute()
    except NddeError as exc:
        preconditions.append(Precondition(name, False, f"{type(exc).__name__}: {exc}"))
        return None


def _slow_check(ws: Workspace, stat: Callable, cid: str, m: int | None,
                asserted: Iterable[str]) -> tuple[Precondition, float]:
    score = slow_variation_score(stat, ws.cfg, grid=ws.grid)
    if _asserted(asserted, cid, m):
        return Precondition("slowly varying", True, f"asserted by user (score {score:.3g})"), score
    ok = score <= ws.cfg.margin
    return Precondition("slowly varying", ok, f"score {score:.3g} vs margin {ws.cfg.margin:g}"), score


def _common_reduction(problem, tc, cfg, ws) -> list[Precondition]:
    pre: list[Precondition] = []

    def run():
        pre.extend(tc.check(ws.grid))
        pre.extend(check_H1_H2(problem, tc, cfg, ws).preconditions())

    _guarded(pre, "transformed coefficients", run)
    return pre


def _const_taus(problem) -> list[float] | None:
    taus = [as_constant(p.tau) for p in problem.positive]
    return None if any(v is None for v in taus) else taus


def _tau_values(problem, grid) -> list[np.ndarray]:
    return [np.asarray(p.tau(grid), dtype=float) * np.ones_like(grid) for p in problem.positive]


# ----------------------------------------------------------------------------
# family I


def eval_family_I(problem: NddeProblem, tc: TransformedCoefficients, cfg: AnalysisConfig,
                  ws: Workspace | None = None) -> list[CriterionReport]:
    """A1, B1, C1, D1 for the reduced non-neutral equation with pbar_star."""
    ws = _ws(problem, tc, cfg, ws)
    n = problem.N_p
    base = _common_reduction(problem, tc, cfg, ws)
    taus = _const_taus(problem)
    reports = []

    def window_sum(lo_of, t):
        return sum(ws.window(("pbar_star", i), lo_of(i, t), t) for i in range(n))

    def tau_min(t):
        return np.min([np.asarray(p.tau(t), dtype=float) * np.ones_like(t) for p in problem.positive], axis=0)

    # A1
    pre = list(base)
    est = None
    if taus is None:
        pre.append(Precondition("constant tau", False, "some tau_i is not constant"))
    else:
        pre.append(Precondition("constant tau", min(taus) > 0, f"tau = {taus}"))
        est = _guarded(pre, "statistic", lambda: _estimate(
            ws, lambda t: window_sum(lambda i, s: s - taus[i], t), "inf"))
    reports.append(make_report("A1", "I", None, est, INV_E, cfg, pre))

    # B1
    pre = list(base)
    est = _guarded(pre, "statistic", lambda: _estimate(ws, lambda t: sum(
        np.asarray(tc.pbar_star[i](t), dtype=float) * np.asarray(problem.positive[i].tau(t), dtype=float)
        for i in range(n)), "inf"))
    reports.append(make_report("B1", "I", None, est, INV_E, cfg, pre))

    # C1 and D1 share the window [t - tau_min(t), t]
    def c_stat(t):
        lo = t - tau_min(t)
        return window_sum(lambda i, s: lo, t)

    for cid, kind, thr in (("C1", "inf", INV_E), ("D1", "sup", 1.0)):
        pre = list(base)
        est = _guarded(pre, "statistic", lambda: _estimate(ws, c_stat, kind))
        reports.append(make_report(cid, "I", None, est, thr, cfg, pre))
    return reports


# ----------------------------------------------------------------------------
# slowly varying family


def eval_family_slow(problem: NddeProblem, tc: TransformedCoefficients, cfg: AnalysisConfig,
                     asserted_slow: Iterable[str] = (), tau_hat: Expr | None = None,
                     ws: Workspace | None = None) -> list[CriterionReport]:
    """A2, B2, C2: limsup statistics, valid when the statistic varies slowly.

    ``tau_hat`` is the lower delay of C2; it defaults to min_i tau_i(t).
    """
    ws = _ws(problem, tc, cfg, ws)
    asserted_slow = tuple(asserted_slow)
    n = problem.N_p
    base = _common_reduction(problem, tc, cfg, ws)

    def positivity():
        out = []
        for i, p in enumerate(problem.positive):
            est = _estimate(ws, lambda t, i=i, p=p: ws.window(
                ("pbar_star", i), t - np.asarray(p.tau(t), dtype=float), t), "inf")
            out.append(Precondition(f"liminf int pbar_star_{i + 1} > 0", est.value > 0, f"{est.value:.6g}"))
        return out

    pos = _guarded(base, "liminf positivity", positivity)
    if pos:
        base = base + pos
    notes = {"assumed": "pbar_star_i and tau_i uniformly continuous and bounded"}
    taus = _const_taus(problem)
    reports = []

    def finish(cid, stat_fn, pre):
        est = None
        if stat_fn is not None:
            est = _guarded(pre, "statistic", lambda: _estimate(ws, stat_fn, "sup"))
        diag = dict(notes)
        if est is not None:
            slow = _guarded(pre, "slowly varying", lambda: _slow_check(ws, stat_fn, cid, None, asserted_slow))
            if slow is not None:
                pre.append(slow[0])
                diag["slow_score"] = slow[1]
        reports.append(make_report(cid, "slow", None, est, INV_E, cfg, pre, diag))

    pre = list(base)
    if taus is None:
        pre.append(Precondition("constant tau", False, "some tau_i is not constant"))
        finish("A2", None, pre)
    else:
        pre.append(Precondition("constant tau", min(taus) > 0, f"tau = {taus}"))
        finish("A2", lambda t: sum(ws.window(("pbar_star", i), t - taus[i], t) for i in range(n)), pre)

    finish("B2", lambda t: sum(
        np.asarray(tc.pbar_star[i](t), dtype=float) * np.asarray(problem.positive[i].tau(t), dtype=float)
        for i in range(n)), list(base))

    def hat(t):
        if tau_hat is not None:
            return np.asarray(tau_hat(t), dtype=float) * np.ones_like(t)
        return np.min(_tau_values(problem, t), axis=0)

    pre = list(base)
    th = hat(ws.grid)
    ok = bool(np.all(th >= 0) and all(np.all(th <= tv + 1e-12) for tv in _tau_values(problem, ws.grid)))
    label = to_text(tau_hat) if tau_hat is not None else "min_i tau_i(t)"
    pre.append(Precondition("0<=tau_hat<=tau_i", ok, f"tau_hat = {label}"))
    finish("C2", lambda t: sum(ws.window(("pbar_star", i), t - hat(t), t) for i in range(n)), pre)
    return reports


# ----------------------------------------------------------------------------
# constant-delay families


def _const_gate(problem, tc, cfg, om, ws) -> tuple[list[Precondition], dict]:
    """Shared preconditions of A3/B3/D3 and Am/Bm, plus comparison diagnostics."""
    pre: list[Precondition] = []
    diag: dict = {}
    all_const, _ = is_constant_delay(problem)
    pre.append(Precondition("constant delays", all_const, "" if all_const else "some delay is time-dependent"))
    if not all_const:
        return pre, diag
    taus = _const_taus(problem)
    pre.append(Precondition("tau_i > 0", min(taus) > 0, f"tau = {taus}"))
    pre.append(Precondition("omega", om.value is not None,
                            f"omega = {om.value:.12g}" if om.value is not None else om.reason))

    def run():
        grid = ws.grid
        mins = [float(np.min(ws.on_grid(("pbar", i)))) for i in range(problem.N_p)]
        pre.append(Precondition("pbar_i > 0", min(mins) > 0, f"grid minima {mins}"))
        lhs = sum((np.asarray(nt.R(grid), dtype=float) * np.ones_like(grid) for nt in problem.neutral),
                  np.zeros_like(grid))
        for k, q in enumerate(problem.negative):
            width = taus[k] - as_constant(q.delta)
            lhs = lhs + ws.window(("Q", k), grid - width, grid)
        j = int(np.argmax(lhs))
        pre.append(Precondition("R+Q<=1", bool(lhs[j] <= 1 + cfg.quad_tol),
                                f"max {lhs[j]:.6g} at t={grid[j]:.6g}"))
        r_sum = sum((np.asarray(nt.R(grid), dtype=float) for nt in problem.neutral), np.zeros_like(grid))
        rp = r_sum + sum(ws.on_grid(("pbar", i)) for i in range(problem.N_p))
        pt = sum(ws.window(("pbar", i), grid - taus[i], grid) for i in range(problem.N_p))
        diag["R+P>0"] = {"min": float(np.min(rp)), "holds": bool(np.min(rp) > 0)}
        diag["int P>0 over tau"] = {"min": float(np.min(pt)), "holds": bool(np.min(pt) > 0)}

    _guarded(pre, "constant-delay hypotheses", run)
    return pre, diag


def _m_factor(n_r: int, w: float, m: int) -> float:
    return (n_r * w) ** m / (1.0 - n_r * w)


def eval_family_const(problem: NddeProblem, tc: TransformedCoefficients, om: OmegaEstimate,
                      cfg: AnalysisConfig, ws: Workspace | None = None) -> list[CriterionReport]:
    """A3(m), B3(m), D3(m) for m = 0..m_max."""
    ws = _ws(problem, tc, cfg, ws)
    gate, diag = _const_gate(problem, tc, cfg, om, ws)
    ready = all(p.passed for p in gate)
    reports = []
    taus = _const_taus(problem) if ready else None
    for m in range(cfg.m_max + 1):
        for cid, kind, thr in (("A3", "inf", INV_E), ("B3", "inf", INV_E), ("D3", "sup", 1.0)):
            pre = list(gate)
            est = None
            d = dict(diag)
            if ready:
                stat, factor = _const_statistic(problem, ws, om.value, taus, cid, m)
                d.update(omega=om.value, factor=factor)
                est = _guarded(pre, "statistic", lambda: _estimate(ws, stat, kind))
            reports.append(make_report(cid, "const", m, est, thr, cfg, pre, d))
    return reports


def _const_statistic(problem, ws, w, taus, cid, m):
    n_p = problem.N_p
    r0 = min(as_constant(nt.r) for nt in problem.neutral)
    factor = _m_factor(problem.N_r, w, m)
    if cid in ("A3", "Am"):
        def stat(t):
            return factor * sum(ws.window(("pbar", i), t - m * r0 - taus[i], t) for i in range(n_p))
    elif cid in ("B3", "Bm"):
        def stat(t):
            return factor * sum((m * r0 + taus[i]) * np.asarray(ws.tc.pbar[i](t), dtype=float)
                                for i in range(n_p))
    else:
        tau0 = min(taus)

        def stat(t):
            return factor * sum(ws.window(("pbar", i), t - m * r0 - tau0, t) for i in range(n_p))
    return stat, factor


def eval_family_const_slow(problem: NddeProblem, tc: TransformedCoefficients, om: OmegaEstimate,
                           cfg: AnalysisConfig, asserted_slow: Iterable[str] = (),
                           ws: Workspace | None = None) -> list[CriterionReport]:
    """Am(m), Bm(m): limsup of the A3/B3 statistics when they vary slowly."""
    ws = _ws(problem, tc, cfg, ws)
    asserted_slow = tuple(asserted_slow)
    gate, diag = _const_gate(problem, tc, cfg, om, ws)
    ready = all(p.passed for p in gate)
    taus = _const_taus(problem) if ready else None
    if ready:
        def positivity():
            out = []
            for i in range(problem.N_p):
                vals = ws.window(("pbar", i), ws.grid - taus[i], ws.grid)
                est = tail_estimate(vals, ws.grid, cfg, "inf")
                out.append(Precondition(f"liminf int pbar_{i + 1} > 0", est.value > 0, f"{est.value:.6g}"))
            return out

        extra = _guarded(gate, "liminf positivity", positivity)
        gate = gate + (extra or [])
        ready = all(p.passed for p in gate)
    diag = dict(diag, assumed="pbar_i bounded and uniformly continuous")
    reports = []
    for m in range(cfg.m_max + 1):
        for cid in ("Am", "Bm"):
            pre = list(gate)
            est = None
            d = dict(diag)
            if ready:
                stat, factor = _const_statistic(problem, ws, om.value, taus, cid, m)
                d.update(omega=om.value, factor=factor)
                est = _guarded(pre, "statistic", lambda: _estimate(ws, stat, "sup"))
                if est is not None:
                    slow = _guarded(pre, "slowly varying",
                                    lambda: _slow_check(ws, stat, cid, m, asserted_slow))
                    if slow is not None:
                        pre.append(slow[0])
                        d["slow_score"] = slow[1]
            reports.append(make_report(cid, "const_slow", m, est, INV_E, cfg, pre, d))
    return reports


# ----------------------------------------------------------------------------
# orchestration


@dataclass
class AnalysisReport:
    problem: NddeProblem
    config: AnalysisConfig
    coefficients_source: str
    hypotheses: HypothesisCheck | None
    omega: OmegaEstimate
    reports: list[CriterionReport]
    notes: list[str] = field(default_factory=list)

    @property
    def witnesses(self) -> list[str]:
        return [r.key for r in self.reports if r.verdict is Verdict.OSCILLATORY]

    @property
    def verdict(self) -> Verdict:
        return Verdict.OSCILLATORY if self.witnesses else Verdict.INCONCLUSIVE

    def get(self, cid: str, m: int | None = None) -> CriterionReport:
        for r in self.reports:
            if r.id == cid and r.m == m:
                return r
        raise KeyError((cid, m))

    def to_dict(self) -> dict:
        hyp = None
        if self.hypotheses is not None:
            hyp = {"H1": self.hypotheses.h1, "H2": self.hypotheses.h2, **self.hypotheses.details}
        return {
            "problem": self.problem.to_dict(),
            "analysis": self.config.to_dict(),
            "coefficients_source": self.coefficients_source,
            "hypotheses": hyp,
            "omega": self.omega.to_dict(),
            "criteria": [r.to_dict() for r in self.reports],
            "overall": {"verdict": self.verdict.value, "witnesses": self.witnesses},
            "notes": list(self.notes),
        }


def analyze_all(problem: NddeProblem, cfg: AnalysisConfig, asserted_slow: Iterable[str] = (),
                tau_hat: Expr | None = None, pbar_star: str = "auto",
                Delta: Sequence[float] | None = None) -> AnalysisReport:
    """Run every criterion family; the overall verdict is OSCILLATORY if any criterion is.

    ``pbar_star`` is ``"direct"``, ``"supq"`` or ``"auto"`` (direct, falling
    back to the explicit sup-of-Q minorant when the direct coefficients cannot
    be computed or are not admissible on the tail grid).
    """
    cfg.check_against(problem)
    asserted_slow = tuple(asserted_slow)
    kernels = build_kernels(problem, cfg)
    notes = [
        "liminf/limsup are approximated by extrema over the finite tail grid; "
        "verdicts are numerical evidence, not proofs",
    ]
    mode = "direct" if pbar_star == "auto" else pbar_star
    tc = transformed_coefficients(problem, kernels, cfg, mode, Delta)
    ws = Workspace(problem, tc, cfg)
    hyp = None
    try:
        hyp = check_H1_H2(problem, tc, cfg, ws)
        admissible = all(p.passed for p in tc.check(ws.grid))
        failure = "" if admissible else "direct pbar is negative on the tail grid"
    except NddeError as exc:
        failure = f"direct coefficients failed: {exc}"
    if failure and pbar_star == "auto" and problem.N_q:
        notes.append(failure + "; trying the sup-of-Q minorant")
        try:
            alt = transformed_coefficients(problem, kernels, cfg, "supq", Delta)
            alt_ws = Workspace(problem, alt, cfg)
            alt_hyp = check_H1_H2(problem, alt, cfg, alt_ws)
            if all(p.passed for p in alt.check(alt_ws.grid)):
                tc, ws, hyp = alt, alt_ws, alt_hyp
                notes.append("using the sup-of-Q minorant with c_star = D")
            else:
                notes.append("sup-of-Q minorant is not admissible either")
        except NddeError as exc:
            notes.append(f"sup-of-Q minorant failed: {exc}")

    try:
        om = omega(problem, tc, cfg)
    except NumericalError as exc:
        om = OmegaEstimate(None, {}, f"{type(exc).__name__}: {exc}")

    reports = []
    reports += eval_family_I(problem, tc, cfg, ws)
    reports += eval_family_slow(problem, tc, cfg, asserted_slow, tau_hat, ws)
    reports += eval_family_const(problem, tc, om, cfg, ws)
    reports += eval_family_const_slow(problem, tc, om, cfg, asserted_slow, ws)
    if ws.quad_error() > cfg.quad_tol:
        notes.append(f"cumulative quadrature error estimate {ws.quad_error():.3g} exceeds quad_tol")
    return AnalysisReport(problem, cfg, tc.source, hyp, om, reports, notes)
