"""Error of the NDDE integrator on closed-form fixtures as dt is halved.

Usage: python3 scripts/convergence_study.py [--t-end 10]
"""

import argparse

import numpy as np

from nddeosc.model import build_problem
from nddeosc.simulate import History, integrate_ndde

FIXTURES = {
    "x' + x(t - pi/2) = 0, x = sin t": (
        {"t0": 0, "positive": [{"P": "1", "tau": "pi/2"}]}, "sin(t)", np.sin),
    "x' + e^(-1/2)/2 x(t - 1) = 0, x = e^(-t/2)": (
        {"t0": 0, "positive": [{"P": "0.5*exp(-0.5)", "tau": "1"}]}, "exp(-t/2)", lambda t: np.exp(-t / 2)),
    "neutral, x = e^(-t)": (
        {"t0": 0, "neutral": [{"R": "0.2", "r": "log(2)"}], "positive": [{"P": "0.4", "tau": "log(2)"}],
         "negative": [{"Q": "0.2", "delta": "0"}]}, "exp(-t)", lambda t: np.exp(-t)),
}
STEPS = [0.08, 0.04, 0.02, 0.01, 0.005, 0.0025, 0.001]


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--t-end", type=float, default=10.0)
    args = parser.parse_args()
    for title, (spec, history, exact) in FIXTURES.items():
        problem = build_problem(spec, args.t_end, 0.01)
        print(title)
        print(f"{'dt':>10} {'max error':>12} {'ratio':>8}")
        prev = prev_dt = None
        for dt in STEPS:
            traj = integrate_ndde(problem, History.parse(history), args.t_end, dt)
            err = float(np.max(np.abs(traj.x - exact(traj.grid))))
            ratio = f"{prev / err:.2f}" if prev_dt is not None and np.isclose(prev_dt, 2 * dt) else ""
            print(f"{dt:>10g} {err:>12.3e} {ratio:>8}")
            prev, prev_dt = err, dt
        print()
    print("Per-halving ratios scatter because the interpolation error depends on where the")
    print("delay lands within a step; compare the geometric mean over several halvings.")


if __name__ == "__main__":
    main()
