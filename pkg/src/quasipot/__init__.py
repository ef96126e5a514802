"""Large-deviation rate functions of invariant measures of small-noise jump diffusions.

The package is organized around the cost-form (min-plus) calculus of escape
costs between attractors of the zero-noise flow:

- :mod:`quasipot.maxplus`: cost matrices, fluxes, the balance equations and
  rate evaluation on a finite attractor set.
- :mod:`quasipot.trees`: in-tree enumeration and the minimum-arborescence
  solver that produces the unique balanced stationary rates.
- :mod:`quasipot.models`: jump-diffusion model containers.
- :mod:`quasipot.action`: the path action functional and its minimization,
  giving inter-attractor quasipotentials.
- :mod:`quasipot.linear`: closed forms for linear drift (Gramian
  quasipotentials, finite-horizon optimal paths, escape profiles).
- :mod:`quasipot.attractors`: equilibrium search and classification.
- :mod:`quasipot.simulate`: direct simulation and empirical rate estimates.
- :mod:`quasipot.pipeline`: end-to-end runs driven by a JSON problem spec.
"""

__version__ = "0.1.0"

from .maxplus import (
    CostMatrix,
    Partition,
    StationaryRates,
    balance_residuals,
    cost_flux,
    evaluate_rate,
    shortest_path_closure,
)
from .trees import (
    InTree,
    TreeCost,
    enumerate_in_trees,
    min_arborescence,
    min_in_tree_cost_bruteforce,
    stationary_rates,
)
from .models import JumpAtom, LocalModel, Path, affine_jump, constant_jump
from .action import ActionValue, local_lagrangian, minimize_action, path_action, quasipotential
from .linear import (
    LinearModel,
    escape_profile_limit,
    finite_horizon_gramian,
    finite_horizon_path,
    lyapunov_gramian,
    quadratic_rate,
)
from .attractors import Equilibrium, SearchBox, find_equilibria, jacobian_fd, stable_attractors
from .simulate import EmpiricalRate, SimConfig, ValidationReport, empirical_rate, simulate, validation_report

__all__ = [
    "ActionValue",
    "CostMatrix",
    "EmpiricalRate",
    "Equilibrium",
    "InTree",
    "JumpAtom",
    "LinearModel",
    "LocalModel",
    "Partition",
    "Path",
    "SearchBox",
    "SimConfig",
    "StationaryRates",
    "TreeCost",
    "ValidationReport",
    "affine_jump",
    "balance_residuals",
    "constant_jump",
    "cost_flux",
    "empirical_rate",
    "enumerate_in_trees",
    "escape_profile_limit",
    "evaluate_rate",
    "find_equilibria",
    "finite_horizon_gramian",
    "finite_horizon_path",
    "jacobian_fd",
    "local_lagrangian",
    "lyapunov_gramian",
    "min_arborescence",
    "min_in_tree_cost_bruteforce",
    "minimize_action",
    "path_action",
    "quadratic_rate",
    "quasipotential",
    "shortest_path_closure",
    "simulate",
    "stable_attractors",
    "stationary_rates",
    "validation_report",
]
