import numpy as np
import pytest

from quasipot.maxplus import CostMatrix


def make_cost_matrix(rng: np.random.Generator, size: int, inf_prob: float = 0.0) -> CostMatrix:
    """Random nonnegative cost matrix with an optional unreachable pattern.

    Every row keeps at least one finite off-diagonal entry so that states
    can always leave; that makes fully-degenerate instances (every root
    unreachable) vanishingly rare even with aggressive ``inf_prob``.
    """
    entries = rng.uniform(0.05, 3.0, size=(size, size))
    if inf_prob > 0.0:
        mask = rng.random((size, size)) < inf_prob
        entries[mask] = np.inf
    np.fill_diagonal(entries, 0.0)
    for i in range(size):
        off = [j for j in range(size) if j != i]
        if off and not np.isfinite(entries[i, off]).any():
            entries[i, off[int(rng.integers(len(off)))]] = float(rng.uniform(0.05, 3.0))
    return CostMatrix(tuple(f"a{k}" for k in range(size)), entries)


@pytest.fixture
def cost_factory():
    return make_cost_matrix
