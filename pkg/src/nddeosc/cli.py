"""Command line entry point: ``nddeosc {analyze,simulate,all} CONFIG``.

Exit status 0 means the run completed (whatever the verdict), 1 means the
input was rejected, 2 means a numerical routine failed.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .criteria import analyze_all
from .errors import InputError, NumericalError, ValidationError
from .expr import as_expr
from .model import AnalysisConfig, build_problem
from .simulate import History, classify, integrate_ndde, write_trajectory

SCHEMA_VERSION = "1.0"
SIMULATION_NOTE = ("simulation follows one solution from one history; it is evidence only and "
                   "cannot contradict a verdict that quantifies over all solutions")


@dataclass
class SimulateConfig:
    history: str = "1"
    t_end: float = 50.0
    dt: float = 0.01
    r_min: float | None = None
    window: float | None = None

    @classmethod
    def from_dict(cls, data: dict) -> "SimulateConfig":
        unknown = set(data) - {"history", "t_end", "dt", "r_min", "window"}
        if unknown:
            raise ValidationError(f"unknown simulate keys {sorted(unknown)}", "simulate")
        return cls(**{k: (str(v) if k == "history" else v) for k, v in data.items()})


@dataclass
class RunConfig:
    problem: dict
    analysis: AnalysisConfig | None
    simulate: SimulateConfig | None
    output: dict = field(default_factory=dict)

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        try:
            data = json.loads(Path(path).read_text())
        except OSError as exc:
            raise ValidationError(f"cannot read config: {exc.strerror}", str(path)) from None
        except json.JSONDecodeError as exc:
            raise ValidationError(f"malformed JSON: {exc.msg} (line {exc.lineno}, column {exc.colno})",
                                  str(path)) from None
        if not isinstance(data, dict) or "problem" not in data:
            raise ValidationError("config must be an object with a 'problem' section", str(path))
        unknown = set(data) - {"problem", "analysis", "simulate", "output"}
        if unknown:
            raise ValidationError(f"unknown sections {sorted(unknown)}", str(path))
        try:
            analysis = AnalysisConfig.from_dict(data["analysis"]) if "analysis" in data else None
            simulate = SimulateConfig.from_dict(data["simulate"]) if "simulate" in data else None
        except TypeError as exc:
            raise ValidationError(str(exc), str(path)) from None
        return cls(data["problem"], analysis, simulate, dict(data.get("output", {})))


def clean(value: Any) -> Any:
    """Round floats to 12 significant digits and map non-finite floats to null."""
    if isinstance(value, bool) or value is None:
        return value
    if isinstance(value, float) or type(value).__module__ == "numpy":
        if hasattr(value, "item"):
            value = value.item()
        if isinstance(value, bool):
            return value
        if isinstance(value, int):
            return value
        return float(f"{value:.12g}") if math.isfinite(value) else None
    if isinstance(value, dict):
        return {str(k): clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [clean(v) for v in value]
    if hasattr(value, "value") and isinstance(value.value, str):  # enums
        return value.value
    return value


def dumps(report: dict) -> str:
    return json.dumps(clean(report), indent=2, allow_nan=False) + "\n"


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nddeosc", description="Oscillation analysis for neutral delay equations.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (("analyze", "evaluate every oscillation criterion"),
                       ("simulate", "integrate one solution and write the trajectory"),
                       ("all", "analyze and simulate")):
        p = sub.add_parser(name, help=text)
        p.add_argument("config", help="JSON run configuration")
        p.add_argument("--report", help="report path (default: stdout)")
        p.add_argument("--trajectory", help="trajectory path")
        p.add_argument("--margin", type=float, help="override analysis.margin")
        p.add_argument("--m-max", type=int, dest="m_max", help="override analysis.m_max")
        p.add_argument("--assert-slow", default="", dest="assert_slow",
                       help="comma-separated criterion ids whose statistic is known to vary slowly, e.g. B2,Bm(1)")
        p.add_argument("--tau-hat", dest="tau_hat", help="lower delay expression for C2")
        p.add_argument("--pbar-star", dest="pbar_star", choices=("auto", "direct", "supq"), default="auto",
                       help="minorant used for the reduced equation")
    return parser


def _analysis(cfg: RunConfig, args) -> AnalysisConfig:
    if cfg.analysis is None:
        raise ValidationError("the config has no 'analysis' section", "analysis")
    changes = {}
    if args.margin is not None:
        changes["margin"] = args.margin
    if args.m_max is not None:
        changes["m_max"] = args.m_max
    return cfg.analysis.with_(**changes) if changes else cfg.analysis


def run(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _run(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


def _run(args) -> int:
    cfg = RunConfig.load(args.config)
    doing_analysis = args.command in ("analyze", "all")
    doing_sim = args.command in ("simulate", "all")
    analysis = _analysis(cfg, args) if doing_analysis else None
    if doing_sim and cfg.simulate is None:
        raise ValidationError("the config has no 'simulate' section", "simulate")
    horizon = max(x for x in (analysis.horizon if analysis else None,
                              cfg.simulate.t_end if doing_sim else None) if x is not None)
    step = analysis.grid_step if analysis else min(0.01, cfg.simulate.dt * 10)
    problem = build_problem(cfg.problem, horizon, step)

    report: dict = {"schema_version": SCHEMA_VERSION, "config": Path(args.config).name,
                    "command": args.command}
    if doing_analysis:
        asserted = [s for s in args.assert_slow.split(",") if s.strip()]
        tau_hat = as_expr(args.tau_hat) if args.tau_hat else None
        result = analyze_all(problem, analysis, asserted, tau_hat, args.pbar_star)
        report.update(result.to_dict())
        report["asserted_slow"] = asserted
        for r in result.reports:
            if r.verdict.value == "OSCILLATORY":
                print(f"{r.key}: statistic {r.statistic:.6g} > {r.threshold:.6g} + {r.margin_used:g}",
                      file=sys.stderr)
        print(f"overall: {result.verdict.value}", file=sys.stderr)

    if doing_sim:
        sim = cfg.simulate
        history = History.parse(sim.history)
        history.check(problem, min(sim.dt, problem.D / 4))
        traj = integrate_ndde(problem, history, sim.t_end, sim.dt, sim.r_min)
        window = sim.window if sim.window is not None else 0.25 * (sim.t_end - problem.t0)
        evidence = classify(traj, window)
        path = args.trajectory or cfg.output.get("trajectory")
        if path:
            write_trajectory(traj, path)
        report["simulation"] = {
            "history": sim.history,
            "t_end": sim.t_end,
            "dt": sim.dt,
            "trajectory": path,
            "zero_count": len(traj.zeros),
            "last_zeros": list(traj.zeros[-5:]),
            "classification": evidence.to_dict(),
            "note": SIMULATION_NOTE,
        }
        print(f"simulation: {evidence.label.value} ({len(traj.zeros)} zeros)", file=sys.stderr)

    text = dumps(report)
    out = args.report or cfg.output.get("report")
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
