"""Transition costs and stationary rates for the symmetric double well.

The drift is b(x) = x - x^3 with unit diffusion.  Both wells sit at the same
potential depth, so the barrier cost in each direction is twice the barrier
height (0.5) and both attractors end up with stationary rate zero.
"""

import argparse
import time

import numpy as np

from quasipot import (
    LocalModel,
    SearchBox,
    find_equilibria,
    quasipotential,
    stable_attractors,
)
from quasipot.maxplus import CostMatrix, max_balance_residual, shortest_path_closure
from quasipot.trees import stationary_rates


def drift(y):
    y = np.asarray(y, dtype=float)
    return y - y**3


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--points", type=int, default=400, help="path discretization points")
    parser.add_argument("--sweep", type=float, nargs="+", default=[1, 2, 5, 10, 20, 50])
    args = parser.parse_args()

    model = LocalModel(1, drift, np.array([[1.0]]), ())
    box = SearchBox(np.array([-2.0]), np.array([2.0]), 13)
    attractors = stable_attractors(find_equilibria(drift, box, margin=1e-6))
    positions = [eq.position for eq in attractors]
    print("attractors:", [float(p[0]) for p in positions])

    n = len(positions)
    entries = np.zeros((n, n))
    t0 = time.time()
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            res = quasipotential(
                model, positions[i], positions[j],
                sweep=tuple(args.sweep), num_segments=args.points,
            )
            entries[i, j] = res.value
            print(
                f"  cost {positions[i][0]:+.3f} -> {positions[j][0]:+.3f}: "
                f"{res.value:.6f} (converged={res.converged})"
            )
    print(f"minimization time: {time.time() - t0:.1f}s")

    costs = shortest_path_closure(CostMatrix(tuple(f"a{i}" for i in range(n)), entries))
    rates = stationary_rates(costs)
    print("stationary rates:", rates.rates.tolist())
    print("balance residual:", max_balance_residual(rates, costs))


if __name__ == "__main__":
    main()
