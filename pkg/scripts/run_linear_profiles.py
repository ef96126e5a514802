"""Escape path against its infinite-horizon profile for a nonnormal drift.

For linear dynamics the horizon-T minimizer is known in closed form.  As T
grows, the tail of the path (viewed backward from the target displacement)
converges to the fixed profile G exp(Db^T t) G^{-1} r.  This script prints
the sup distance over the last few backward time units for growing T.
"""

import argparse

import numpy as np

from quasipot.linear import (
    LinearModel,
    escape_profile_limit,
    finite_horizon_path,
    lyapunov_gramian,
    quadratic_rate,
)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--horizons", type=float, nargs="+", default=[5.0, 10.0, 20.0, 40.0])
    parser.add_argument("--tail", type=float, default=5.0, help="backward window to compare")
    args = parser.parse_args()

    model = LinearModel(np.array([[-1.0, 1.0], [0.0, -1.0]]), np.eye(2))
    r = np.array([1.0, 0.0])
    print("gramian:\n", lyapunov_gramian(model))
    print("rate at r:", quadratic_rate(model, r))

    for horizon in args.horizons:
        path = finite_horizon_path(model, r, horizon, 400)
        times = path.times
        sup = 0.0
        for k, t in enumerate(times):
            back = horizon - t
            if back <= args.tail:
                phi = escape_profile_limit(model, r, float(back))
                sup = max(sup, float(np.max(np.abs(path.points[k] - phi))))
        print(f"T={horizon:5.1f}: sup tail distance {sup:.3e}")


if __name__ == "__main__":
    main()
