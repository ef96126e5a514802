"""Monte Carlo check of the predicted rate function on a shallow double well.

Simulates the jump diffusion at a ladder of noise scales n, turns occupation
histograms into empirical rates -log(p)/n, and compares them with the
variational prediction bin by bin.  The sup-norm gap should shrink as n
grows.  Run time is dominated by the simulations; the defaults finish in a
couple of minutes.
"""

import argparse
import time

import numpy as np

from quasipot import LocalModel, SearchBox, find_equilibria, quasipotential, stable_attractors
from quasipot.maxplus import CostMatrix, evaluate_rate, shortest_path_closure
from quasipot.simulate import SimConfig, empirical_rate, simulate, validation_report
from quasipot.trees import stationary_rates


def drift(y):
    y = np.asarray(y, dtype=float)
    return 0.15 * (y - y**3)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, nargs="+", default=[20, 40, 80])
    parser.add_argument("--horizon", type=float, default=2000.0)
    parser.add_argument("--replicas", type=int, default=128)
    parser.add_argument("--seed", type=int, default=20260825)
    args = parser.parse_args()

    model = LocalModel(1, drift, np.array([[1.0]]), ())
    box = SearchBox(np.array([-2.0]), np.array([2.0]), 13)
    attractors = stable_attractors(find_equilibria(drift, box, margin=1e-6))
    positions = [eq.position for eq in attractors]

    entries = np.zeros((2, 2))
    for i, j in ((0, 1), (1, 0)):
        entries[i, j] = quasipotential(
            model, positions[i], positions[j], sweep=(2.0, 5.0, 10.0, 20.0),
            num_segments=200,
        ).value
    costs = shortest_path_closure(CostMatrix(("a0", "a1"), entries))
    rates = stationary_rates(costs)

    edges = [np.linspace(-2.2, 2.2, 38)]
    centers = 0.5 * (edges[0][:-1] + edges[0][1:])
    print("predicting rate at", centers.size, "bin centers ...")
    t0 = time.time()
    costs_to = np.zeros((centers.size, 2))
    for i, pos in enumerate(positions):
        for k, c in enumerate(centers):
            costs_to[k, i] = quasipotential(
                model, pos, np.array([c]), sweep=(2.0, 5.0, 10.0, 20.0),
                num_segments=160,
            ).value
    predicted = np.array([evaluate_rate(rates, row) for row in costs_to])
    print(f"prediction time: {time.time() - t0:.1f}s")

    def predict(points):
        idx = np.abs(points[:, None, 0] - centers[None, :]).argmin(axis=1)
        return predicted[idx]

    initial = np.array([[-1.0], [1.0]])[np.arange(args.replicas) % 2]
    for n in args.n:
        t0 = time.time()
        cfg = SimConfig(
            n=n, dt=0.01, burn_in=50.0, horizon=args.horizon, seed=args.seed,
            initial=initial, replicas=args.replicas, stride=20,
        )
        samples = simulate(model, cfg)
        emp = empirical_rate(samples, edges, n)
        rep = validation_report(predict, emp)
        print(
            f"n={n:3d}: sup error {rep.sup_error:.4f} over "
            f"{rep.predicted.size} bins, {rep.censored_bins} censored "
            f"({time.time() - t0:.1f}s, {samples.shape[0]} samples)"
        )


if __name__ == "__main__":
    main()
