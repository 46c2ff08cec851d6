"""Problem data for the neutral equation

    [x(t) - sum R_i(t) x(t - r_i(t))]' + sum P_j(t) x(t - tau_j(t))
                                        - sum Q_k(t) x(t - delta_k(t)) = 0,

and the numerical policy used to analyse it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace
from typing import Any, Mapping

import numpy as np

from .errors import ExprDomainError, ParseError, ValidationError
from .expr import Const, Expr, as_constant, as_expr, differentiate, to_text

ZERO = Const(0.0)
_TOL = 1e-12


@dataclass(frozen=True)
class NeutralTerm:
    R: Expr
    r: Expr


@dataclass(frozen=True)
class PositiveTerm:
    P: Expr
    tau: Expr


@dataclass(frozen=True)
class NegativeTerm:
    Q: Expr
    delta: Expr


@dataclass(frozen=True)
class NddeProblem:
    t0: float
    neutral: tuple[NeutralTerm, ...]
    positive: tuple[PositiveTerm, ...]
    negative: tuple[NegativeTerm, ...]
    D: float

    @property
    def N_r(self) -> int:
        return len(self.neutral)

    @property
    def N_p(self) -> int:
        return len(self.positive)

    @property
    def N_q(self) -> int:
        return len(self.negative)

    @property
    def padded_negative(self) -> tuple[NegativeTerm, ...]:
        """Negative terms extended to length N_p with Q = 0, delta = 0."""
        pad = (NegativeTerm(ZERO, ZERO),) * (self.N_p - self.N_q)
        return self.negative + pad

    def delays(self) -> list[Expr]:
        return ([term.r for term in self.neutral] + [term.tau for term in self.positive]
                + [term.delta for term in self.negative])

    def to_dict(self) -> dict:
        return {
            "t0": self.t0,
            "D": self.D,
            "neutral": [{"R": to_text(n.R), "r": to_text(n.r)} for n in self.neutral],
            "positive": [{"P": to_text(p.P), "tau": to_text(p.tau)} for p in self.positive],
            "negative": [{"Q": to_text(q.Q), "delta": to_text(q.delta)} for q in self.negative],
        }


@dataclass(frozen=True)
class AnalysisConfig:
    """Numerical policy for one analysis run.

    ``tail_start``/``horizon`` bound the tail on which liminf/limsup are
    approximated; ``margin`` is the strictness buffer added to every
    threshold and subtracted from the estimated omega.
    """

    tail_start: float
    horizon: float
    grid_step: float = 0.01
    quad_tol: float = 1e-8
    root_tol: float = 1e-12
    margin: float = 1e-3
    m_max: int = 6
    slow_shifts: tuple[float, ...] = (1.0, 10.0)
    trend_levels: int = 4

    def __post_init__(self):
        object.__setattr__(self, "slow_shifts", tuple(float(h) for h in self.slow_shifts))
        if not self.horizon > self.tail_start:
            raise ValidationError("horizon must exceed tail_start", "analysis")
        for name in ("grid_step", "quad_tol", "root_tol"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name} must be positive", "analysis")
        if self.margin < 0:
            raise ValidationError("margin must be nonnegative", "analysis")
        if self.m_max < 0:
            raise ValidationError("m_max must be nonnegative", "analysis")

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "AnalysisConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValidationError(f"unknown analysis keys {sorted(unknown)}", "analysis")
        kwargs = dict(data)
        if "slow_shifts" in kwargs:
            kwargs["slow_shifts"] = tuple(kwargs["slow_shifts"])
        return cls(**kwargs)

    def with_(self, **changes) -> "AnalysisConfig":
        return replace(self, **changes)

    def check_against(self, problem: NddeProblem) -> None:
        if self.tail_start < problem.t0 + problem.D - _TOL:
            raise ValidationError(
                f"tail_start={self.tail_start} is below t0 + D = {problem.t0 + problem.D}", "analysis")

    def to_dict(self) -> dict:
        return {f.name: (list(v) if isinstance(v := getattr(self, f.name), tuple) else v)
                for f in fields(self)}


def validation_grid(t0: float, horizon: float, step: float) -> np.ndarray:
    n = max(1, int(math.ceil((horizon - t0) / step - 1e-9)))
    return t0 + (horizon - t0) * np.arange(n + 1) / n


def _sample(name: str, e: Expr, grid: np.ndarray) -> np.ndarray:
    try:
        return np.asarray(e(grid), dtype=float)
    except ExprDomainError as exc:
        raise ValidationError(f"cannot evaluate: {exc}", name, exc.t) from None


def _require(name: str, ok: np.ndarray, grid: np.ndarray, message: str) -> None:
    ok = np.asarray(ok)
    if not np.all(ok):
        k = int(np.argmax(~ok))
        raise ValidationError(message, name, float(grid[k]))


def _expr(name: str, value) -> Expr:
    try:
        return as_expr(value)
    except ParseError as exc:
        raise ParseError(f"{name}: {exc.message}", exc.offset, exc.text) from None


def build_problem(spec: Mapping[str, Any], horizon: float, grid_step: float) -> NddeProblem:
    """Parse and validate a raw problem description.

    ``spec`` has keys ``t0``, ``neutral`` (list of ``{"R", "r"}``),
    ``positive`` (list of ``{"P", "tau"}``) and ``negative`` (list of
    ``{"Q", "delta"}``); values are expression strings or numbers. The
    standing hypotheses are checked on a uniform grid over [t0, horizon].

    Raises:
        ParseError: an expression does not parse.
        ValidationError: a hypothesis fails; the message names the term and t.
    """
    t0 = float(spec.get("t0", 0.0))
    unknown = set(spec) - {"t0", "neutral", "positive", "negative", "name", "description"}
    if unknown:
        raise ValidationError(f"unknown problem keys {sorted(unknown)}", "problem")

    def terms(key, a, b):
        out = []
        for k, item in enumerate(spec.get(key, []) or [], start=1):
            missing = {a, b} - set(item)
            if missing:
                raise ValidationError(f"missing {sorted(missing)}", f"{key}[{k}]")
            out.append((_expr(f"{a}_{k}", item[a]), _expr(f"{b}_{k}", item[b])))
        return out

    neutral = tuple(NeutralTerm(*p) for p in terms("neutral", "R", "r"))
    positive = tuple(PositiveTerm(*p) for p in terms("positive", "P", "tau"))
    negative = tuple(NegativeTerm(*p) for p in terms("negative", "Q", "delta"))
    if not positive:
        raise ValidationError("at least one positive term is required", "positive")
    if len(negative) > len(positive):
        raise ValidationError(f"N_q={len(negative)} exceeds N_p={len(positive)}", "negative")
    if not horizon > t0:
        raise ValidationError("horizon must exceed t0", "analysis")

    grid = validation_grid(t0, horizon, grid_step)
    delay_sup = 0.0
    for k, term in enumerate(neutral, 1):
        _require(f"R_{k}", _sample(f"R_{k}", term.R, grid) >= -_TOL, grid, "R must be nonnegative")
        delay_sup = max(delay_sup, _delay_bound(f"r_{k}", term.r, grid, grid_step))
    for k, term in enumerate(positive, 1):
        _require(f"P_{k}", _sample(f"P_{k}", term.P, grid) >= -_TOL, grid, "P must be nonnegative")
        delay_sup = max(delay_sup, _delay_bound(f"tau_{k}", term.tau, grid, grid_step))
    for k, term in enumerate(negative, 1):
        _require(f"Q_{k}", _sample(f"Q_{k}", term.Q, grid) >= -_TOL, grid, "Q must be nonnegative")
        delay_sup = max(delay_sup, _delay_bound(f"delta_{k}", term.delta, grid, grid_step))
        d = _sample(f"delta_{k}", term.delta, grid)
        tau = _sample(f"tau_{k}", positive[k - 1].tau, grid)
        _require(f"delta_{k}", d <= tau + _TOL, grid, "delta <= tau violated")
        dprime = _sample(f"delta_{k}'", differentiate(term.delta), grid)
        _require(f"delta_{k}", dprime < 1.0, grid, "delta' < 1 violated")
    if delay_sup <= 0:
        raise ValidationError("all delays vanish; the delay bound D must be positive", "D")
    return NddeProblem(t0, neutral, positive, negative, float(delay_sup))


def _delay_bound(name: str, e: Expr, grid: np.ndarray, step: float) -> float:
    """Exact value for constant delays, else the grid sup rounded up past a multiple of ``step``."""
    values = _sample(name, e, grid)
    _require(name, values >= -_TOL, grid, "delay must be nonnegative")
    const = as_constant(e)
    if const is not None:
        return max(const, 0.0)
    top = float(values.max())
    return (math.floor(top / step + 1e-9) + 1) * step


def is_constant_delay(problem: NddeProblem) -> tuple[bool, bool]:
    """(every delay constant, every delta_k constant)."""
    all_const = all(as_constant(d) is not None for d in problem.delays())
    delta_const = all(as_constant(q.delta) is not None for q in problem.negative)
    return all_const, delta_const
