"""Shared loaders for the fixture configs."""

from __future__ import annotations

import functools
from pathlib import Path

from nddeosc.cli import RunConfig
from nddeosc.criteria import analyze_all
from nddeosc.model import build_problem

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "fixtures"

# filled by test_acceptance, printed by the terminal summary hook
ACCEPTANCE_LINES: list[str] = []


def load_example(n: int, **overrides):
    cfg = RunConfig.load(FIXTURES / f"example{n}.json")
    analysis = cfg.analysis.with_(**overrides) if overrides else cfg.analysis
    problem = build_problem(cfg.problem, analysis.horizon, analysis.grid_step)
    return problem, analysis


@functools.lru_cache(maxsize=None)
def example_report(n: int):
    return analyze_all(*load_example(n))


def problem_from(spec: dict, horizon: float = 50.0, step: float = 0.01):
    return build_problem(spec, horizon, step)
