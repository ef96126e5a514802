"""End-to-end runs driven by a JSON problem specification.

A problem spec describes one jump-diffusion model (drift from a small
catalog, constant diffusion matrix, jump channels), a search box for
attractors, solver settings, evaluation points, and optional simulation and
linearization sections.  The runners here turn a spec into structured
reports:

- :func:`run_attractors`: equilibria and their classification.
- :func:`run_rates`: stationary rates on the attractors and the rate
  function on the requested evaluation points.
- :func:`run_validate`: the same predictions compared against direct
  simulation across a ladder of noise scales.
- :func:`run_linear`: closed-form Gramian quasipotentials at one attractor.

All outputs are deterministic: no timestamps, keys sorted, floats printed
with 17 significant digits, and ``Infinity``/``NaN`` written as the literal
tokens Python's ``json`` module reads back.  Threaded execution only
distributes independent tasks whose results are merged in a fixed order, so
the byte content of every artifact is independent of the thread count.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import __version__
from .action import DEFAULT_SWEEP, ActionValue, quasipotential
from .attractors import (
    CLASSIFICATION_MARGIN,
    Equilibrium,
    SearchBox,
    find_equilibria,
    stable_attractors,
)
from .linear import (
    LinearModel,
    escape_profile_limit,
    finite_horizon_gramian,
    finite_horizon_path,
    lyapunov_gramian,
    quadratic_rate,
)
from .maxplus import CostMatrix, StationaryRates, evaluate_rate, max_balance_residual, shortest_path_closure
from .models import JumpAtom, LocalModel, affine_jump, constant_jump
from .simulate import EmpiricalRate, SimConfig, empirical_rate, simulate, validation_report
from .trees import stationary_rates


class SpecError(ValueError):
    """The problem specification is malformed or inconsistent."""


class SolverError(RuntimeError):
    """A numerical stage failed to produce a trustworthy result."""


class BalanceError(RuntimeError):
    """Computed stationary rates violate the flux balance tolerance."""


# ---------------------------------------------------------------------------
# Spec parsing


def _require_mapping(obj, ctx: str) -> dict:
    if not isinstance(obj, dict):
        raise SpecError(f"{ctx} must be an object, got {type(obj).__name__}")
    return obj


def _check_fields(d: dict, ctx: str, required: Sequence[str], optional: Sequence[str] = ()) -> None:
    unknown = set(d) - set(required) - set(optional)
    if unknown:
        raise SpecError(f"unknown fields in {ctx}: {sorted(unknown)}")
    missing = set(required) - set(d)
    if missing:
        raise SpecError(f"missing fields in {ctx}: {sorted(missing)}")


def _as_float(v, ctx: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise SpecError(f"{ctx} must be a number, got {v!r}")
    return float(v)


def _as_positive(v, ctx: str) -> float:
    x = _as_float(v, ctx)
    if not (x > 0) or math.isinf(x):
        raise SpecError(f"{ctx} must be positive and finite, got {x}")
    return x


def _as_int(v, ctx: str) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise SpecError(f"{ctx} must be an integer, got {v!r}")
    return v


def _as_vector(v, dim: int, ctx: str) -> np.ndarray:
    arr = np.asarray(v, dtype=float)
    if arr.shape != (dim,):
        raise SpecError(f"{ctx} must be a vector of length {dim}")
    if not np.isfinite(arr).all():
        raise SpecError(f"{ctx} must be finite")
    return arr


def _as_matrix(v, rows: int, cols: int | None, ctx: str) -> np.ndarray:
    arr = np.asarray(v, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != rows or (cols is not None and arr.shape[1] != cols):
        want = f"{rows}x{cols}" if cols is not None else f"{rows}xM"
        raise SpecError(f"{ctx} must be a {want} matrix, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise SpecError(f"{ctx} must be finite")
    return arr


@dataclass(frozen=True, eq=False)
class Tolerances:
    root: float = 1e-9
    equilibrium: float = 1e-6
    balance: float = 1e-9
    margin: float = CLASSIFICATION_MARGIN
    failure_quota: float = 0.25


@dataclass(frozen=True, eq=False)
class SolverSettings:
    t_sweep: tuple[float, ...] = DEFAULT_SWEEP
    path_points: int = 400
    max_iterations: int = 2000


@dataclass(frozen=True, eq=False)
class SimulationSpec:
    n_values: tuple[int, ...]
    dt: float
    burn_in: float
    horizon: float
    seed: int
    replicas: int
    stride: int
    bin_lower: np.ndarray
    bin_upper: np.ndarray
    bin_count: int
    initial: np.ndarray | None


@dataclass(frozen=True, eq=False)
class LinearSpec:
    attractor_index: int
    displacements: np.ndarray
    horizon: float
    samples: int


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    dimension: int
    drift_kind: str
    drift_params: dict
    diffusion: np.ndarray
    jumps: tuple[tuple[float, np.ndarray, np.ndarray | None], ...]
    box: SearchBox
    tolerances: Tolerances
    solver: SolverSettings
    evaluation_points: np.ndarray
    simulation: SimulationSpec | None
    linear: LinearSpec | None

    def build_model(self) -> LocalModel:
        drift = _drift_field(self.drift_kind, self.drift_params, self.dimension)
        atoms = []
        for rate, vector, matrix in self.jumps:
            jump = constant_jump(vector) if matrix is None else affine_jump(vector, matrix)
            atoms.append(JumpAtom(rate, jump))
        return LocalModel(self.dimension, drift, self.diffusion, tuple(atoms))


def _drift_field(kind: str, params: dict, dim: int) -> Callable[[np.ndarray], np.ndarray]:
    if kind == "linear":
        mat = params["matrix"]

        def linear(y: np.ndarray) -> np.ndarray:
            return np.asarray(y, dtype=float) @ mat.T

        return linear
    if kind == "polynomial":
        coeffs = params["coefficients"]

        def poly(y: np.ndarray) -> np.ndarray:
            y = np.asarray(y, dtype=float)
            return np.polynomial.polynomial.polyval(y[..., 0], coeffs)[..., None]

        return poly
    if kind == "gradient_polynomial":
        # b = -U' for the polynomial potential U given by its coefficients.
        coeffs = params["coefficients"]
        dcoeffs = np.polynomial.polynomial.polyder(coeffs)

        def grad(y: np.ndarray) -> np.ndarray:
            y = np.asarray(y, dtype=float)
            return -np.polynomial.polynomial.polyval(y[..., 0], dcoeffs)[..., None]

        return grad
    raise SpecError(f"unknown drift kind {kind!r}")


def parse_problem_spec(raw: dict) -> ProblemSpec:
    """Validate a decoded JSON object and build a :class:`ProblemSpec`.

    Every unknown field anywhere in the document is an error: silently
    ignored settings are the classic way to run a different experiment than
    the one described.
    """
    top = _require_mapping(raw, "problem spec")
    _check_fields(
        top,
        "problem spec",
        required=["dimension", "drift", "diffusion", "box"],
        optional=[
            "jumps",
            "tolerances",
            "solver",
            "evaluation_points",
            "simulation",
            "linear",
        ],
    )
    dim = _as_int(top["dimension"], "dimension")
    if dim < 1:
        raise SpecError(f"dimension must be positive, got {dim}")

    drift = _require_mapping(top["drift"], "drift")
    kind = drift.get("kind")
    if kind == "linear":
        _check_fields(drift, "drift", required=["kind", "matrix"])
        params = {"matrix": _as_matrix(drift["matrix"], dim, dim, "drift.matrix")}
    elif kind in ("polynomial", "gradient_polynomial"):
        _check_fields(drift, "drift", required=["kind", "coefficients"])
        if dim != 1:
            raise SpecError(f"drift kind {kind!r} requires dimension 1, got {dim}")
        coeffs = np.asarray(drift["coefficients"], dtype=float)
        if coeffs.ndim != 1 or coeffs.size < 2 or not np.isfinite(coeffs).all():
            raise SpecError("drift.coefficients must be a finite vector with at least 2 entries")
        params = {"coefficients": coeffs}
    else:
        raise SpecError(f"unknown drift kind {kind!r}")

    diffusion = _as_matrix(top["diffusion"], dim, None, "diffusion")

    jumps = []
    for i, item in enumerate(top.get("jumps", [])):
        j = _require_mapping(item, f"jumps[{i}]")
        _check_fields(j, f"jumps[{i}]", required=["rate", "vector"], optional=["matrix"])
        rate = _as_positive(j["rate"], f"jumps[{i}].rate")
        vector = _as_vector(j["vector"], dim, f"jumps[{i}].vector")
        matrix = None
        if "matrix" in j:
            matrix = _as_matrix(j["matrix"], dim, dim, f"jumps[{i}].matrix")
        jumps.append((rate, vector, matrix))

    box_raw = _require_mapping(top["box"], "box")
    _check_fields(box_raw, "box", required=["lower", "upper", "resolution"])
    try:
        box = SearchBox(
            _as_vector(box_raw["lower"], dim, "box.lower"),
            _as_vector(box_raw["upper"], dim, "box.upper"),
            _as_int(box_raw["resolution"], "box.resolution"),
        )
    except ValueError as exc:
        raise SpecError(f"invalid box: {exc}") from None

    tol_raw = _require_mapping(top.get("tolerances", {}), "tolerances")
    _check_fields(
        tol_raw,
        "tolerances",
        required=[],
        optional=["root", "equilibrium", "balance", "margin", "failure_quota"],
    )
    tol_kwargs = {}
    for name in ("root", "equilibrium", "balance", "margin"):
        if name in tol_raw:
            tol_kwargs[name] = _as_positive(tol_raw[name], f"tolerances.{name}")
    if "failure_quota" in tol_raw:
        q = _as_float(tol_raw["failure_quota"], "tolerances.failure_quota")
        if not (0.0 <= q <= 1.0):
            raise SpecError(f"tolerances.failure_quota must lie in [0, 1], got {q}")
        tol_kwargs["failure_quota"] = q
    tolerances = Tolerances(**tol_kwargs)

    sol_raw = _require_mapping(top.get("solver", {}), "solver")
    _check_fields(sol_raw, "solver", required=[], optional=["t_sweep", "path_points", "max_iterations"])
    sol_kwargs = {}
    if "t_sweep" in sol_raw:
        sweep = tuple(_as_positive(t, "solver.t_sweep entry") for t in sol_raw["t_sweep"])
        if not sweep:
            raise SpecError("solver.t_sweep must be nonempty")
        sol_kwargs["t_sweep"] = sweep
    if "path_points" in sol_raw:
        npts = _as_int(sol_raw["path_points"], "solver.path_points")
        if npts < 8:
            raise SpecError(f"solver.path_points must be at least 8, got {npts}")
        sol_kwargs["path_points"] = npts
    if "max_iterations" in sol_raw:
        mi = _as_int(sol_raw["max_iterations"], "solver.max_iterations")
        if mi < 1:
            raise SpecError("solver.max_iterations must be positive")
        sol_kwargs["max_iterations"] = mi
    solver = SolverSettings(**sol_kwargs)

    eval_raw = top.get("evaluation_points", [])
    if eval_raw:
        evaluation = np.stack(
            [_as_vector(p, dim, f"evaluation_points[{i}]") for i, p in enumerate(eval_raw)]
        )
    else:
        evaluation = np.zeros((0, dim))

    simulation = None
    if "simulation" in top:
        s = _require_mapping(top["simulation"], "simulation")
        _check_fields(
            s,
            "simulation",
            required=["n_values", "dt", "burn_in", "horizon", "seed", "bins"],
            optional=["replicas", "stride", "initial"],
        )
        n_values = tuple(_as_int(n, "simulation.n_values entry") for n in s["n_values"])
        if not n_values or any(n < 1 for n in n_values):
            raise SpecError("simulation.n_values must be positive integers")
        if any(b <= a for a, b in zip(n_values, n_values[1:])):
            raise SpecError("simulation.n_values must be strictly increasing")
        bins = _require_mapping(s["bins"], "simulation.bins")
        _check_fields(bins, "simulation.bins", required=["lower", "upper", "count"])
        bin_lower = _as_vector(bins["lower"], dim, "simulation.bins.lower")
        bin_upper = _as_vector(bins["upper"], dim, "simulation.bins.upper")
        if not (bin_lower < bin_upper).all():
            raise SpecError("simulation.bins must have lower < upper on every axis")
        bin_count = _as_int(bins["count"], "simulation.bins.count")
        if bin_count < 2:
            raise SpecError("simulation.bins.count must be at least 2")
        initial = None
        if "initial" in s:
            states = s["initial"]
            if not isinstance(states, list) or not states:
                raise SpecError("simulation.initial must be a nonempty list of states")
            initial = np.stack(
                [_as_vector(p, dim, f"simulation.initial[{i}]") for i, p in enumerate(states)]
            )
        replicas = _as_int(s.get("replicas", 1), "simulation.replicas")
        stride = _as_int(s.get("stride", 1), "simulation.stride")
        if replicas < 1 or stride < 1:
            raise SpecError("simulation.replicas and simulation.stride must be positive")
        simulation = SimulationSpec(
            n_values=n_values,
            dt=_as_positive(s["dt"], "simulation.dt"),
            burn_in=_as_float(s["burn_in"], "simulation.burn_in"),
            horizon=_as_positive(s["horizon"], "simulation.horizon"),
            seed=_as_int(s["seed"], "simulation.seed"),
            replicas=replicas,
            stride=stride,
            bin_lower=bin_lower,
            bin_upper=bin_upper,
            bin_count=bin_count,
            initial=initial,
        )
        if simulation.burn_in < 0 or simulation.burn_in >= simulation.horizon:
            raise SpecError("simulation needs 0 <= burn_in < horizon")

    linear = None
    if "linear" in top:
        ls = _require_mapping(top["linear"], "linear")
        _check_fields(
            ls,
            "linear",
            required=["attractor_index", "displacements", "horizon", "samples"],
        )
        displacements = np.stack(
            [
                _as_vector(r, dim, f"linear.displacements[{i}]")
                for i, r in enumerate(ls["displacements"])
            ]
        )
        samples = _as_int(ls["samples"], "linear.samples")
        if samples < 2:
            raise SpecError("linear.samples must be at least 2")
        linear = LinearSpec(
            attractor_index=_as_int(ls["attractor_index"], "linear.attractor_index"),
            displacements=displacements,
            horizon=_as_positive(ls["horizon"], "linear.horizon"),
            samples=samples,
        )

    return ProblemSpec(
        dimension=dim,
        drift_kind=kind,
        drift_params=params,
        diffusion=diffusion,
        jumps=tuple(jumps),
        box=box,
        tolerances=tolerances,
        solver=solver,
        evaluation_points=evaluation,
        simulation=simulation,
        linear=linear,
    )


# ---------------------------------------------------------------------------
# Deterministic serialization


def format_float(x: float) -> str:
    """17-significant-digit decimal, with json-module-compatible non-finites."""
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    return format(float(x), ".17g")


def _to_json(obj, out: list[str]) -> None:
    if obj is None:
        out.append("null")
    elif obj is True:
        out.append("true")
    elif obj is False:
        out.append("false")
    elif isinstance(obj, str):
        out.append('"' + obj.replace("\\", "\\\\").replace('"', '\\"') + '"')
    elif isinstance(obj, int):
        out.append(str(obj))
    elif isinstance(obj, float):
        out.append(format_float(obj))
    elif isinstance(obj, dict):
        out.append("{")
        for i, key in enumerate(sorted(obj)):
            if i:
                out.append(", ")
            _to_json(str(key), out)
            out.append(": ")
            _to_json(obj[key], out)
        out.append("}")
    elif isinstance(obj, (list, tuple)):
        out.append("[")
        for i, item in enumerate(obj):
            if i:
                out.append(", ")
            _to_json(item, out)
        out.append("]")
    elif isinstance(obj, np.ndarray):
        _to_json(obj.tolist(), out)
    elif isinstance(obj, (np.integer,)):
        out.append(str(int(obj)))
    elif isinstance(obj, (np.floating,)):
        out.append(format_float(float(obj)))
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def dump_json(obj) -> str:
    """Deterministic JSON text: sorted keys, 17-digit floats, LF newline."""
    out: list[str] = []
    _to_json(obj, out)
    return "".join(out) + "\n"


def write_csv(path: str, header: Sequence[str], rows: Sequence[Sequence[object]]) -> None:
    """CSV with LF line endings and 17-significant-digit floats."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(
            [format_float(v) if isinstance(v, (float, np.floating)) else v for v in row]
        )
    with open(path, "w", encoding="utf-8", newline="") as handle:
        handle.write(buf.getvalue())


# ---------------------------------------------------------------------------
# Runners


def _equilibrium_dict(eq: Equilibrium) -> dict:
    return {
        "position": eq.position,
        "classification": eq.classification,
        "jacobian": eq.jacobian,
        "eigenvalues_real": eq.eigenvalues.real,
        "eigenvalues_imag": eq.eigenvalues.imag,
    }


def _provenance(spec: ProblemSpec) -> dict:
    return {
        "package_version": __version__,
        "drift_kind": spec.drift_kind,
        "dimension": spec.dimension,
        "t_sweep": list(spec.solver.t_sweep),
        "path_points": spec.solver.path_points,
        "max_iterations": spec.solver.max_iterations,
        "tolerances": {
            "root": spec.tolerances.root,
            "equilibrium": spec.tolerances.equilibrium,
            "balance": spec.tolerances.balance,
            "margin": spec.tolerances.margin,
            "failure_quota": spec.tolerances.failure_quota,
        },
    }


def _find_attractors(spec: ProblemSpec, model: LocalModel) -> tuple[list[Equilibrium], list[Equilibrium]]:
    equilibria = find_equilibria(
        model.drift_at,
        spec.box,
        root_tol=spec.tolerances.root,
        margin=spec.tolerances.margin,
    )
    if not equilibria:
        raise SolverError("no equilibria found in the search box")
    try:
        stable = stable_attractors(equilibria)
    except ValueError as exc:
        raise SolverError(str(exc)) from None
    return equilibria, stable


def run_attractors(spec: ProblemSpec) -> dict:
    """Equilibrium search only; the report carries every equilibrium found."""
    model = spec.build_model()
    equilibria, stable = _find_attractors(spec, model)
    labels = [f"a{i}" for i in range(len(stable))]
    return {
        "equilibria": [_equilibrium_dict(e) for e in equilibria],
        "attractors": [
            {"label": lab, **_equilibrium_dict(eq)} for lab, eq in zip(labels, stable)
        ],
        "provenance": _provenance(spec),
    }


def _map_ordered(tasks: list, worker: Callable, threads: int) -> list:
    """Run tasks preserving order; results identical for any thread count."""
    if threads <= 1 or len(tasks) <= 1:
        return [worker(t) for t in tasks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(worker, tasks))


@dataclass(frozen=True, eq=False)
class RateReport:
    """Everything `rates` computes, ready for serialization."""

    labels: tuple[str, ...]
    attractors: list[Equilibrium]
    equilibria: list[Equilibrium]
    costs_raw: CostMatrix
    costs_closed: CostMatrix
    rates: StationaryRates
    balance_residual: float
    evaluation_points: np.ndarray
    evaluation_costs: np.ndarray
    evaluation_rates: np.ndarray
    unconverged: int
    total_runs: int
    provenance: dict

    def to_dict(self) -> dict:
        return {
            "attractors": [
                {
                    "label": lab,
                    "rate": float(self.rates.rates[i]),
                    **_equilibrium_dict(eq),
                }
                for i, (lab, eq) in enumerate(zip(self.labels, self.attractors))
            ],
            "equilibria": [_equilibrium_dict(e) for e in self.equilibria],
            "cost_matrix": {
                "labels": list(self.labels),
                "raw": self.costs_raw.entries,
                "closed": self.costs_closed.entries,
            },
            "balance_residual_max": self.balance_residual,
            "evaluation": [
                {
                    "point": self.evaluation_points[i],
                    "rate": float(self.evaluation_rates[i]),
                    "costs_from_attractors": self.evaluation_costs[i],
                }
                for i in range(self.evaluation_points.shape[0])
            ],
            "solver_runs": {"total": self.total_runs, "unconverged": self.unconverged},
            "provenance": self.provenance,
        }


def run_rates(spec: ProblemSpec, threads: int = 1) -> RateReport:
    """Stationary rates and the rate function at the evaluation points.

    Raises :class:`SolverError` when attractor search fails or too many
    action minimizations do not converge, and :class:`BalanceError` when the
    computed rates do not satisfy flux balance at the spec tolerance.
    """
    model = spec.build_model()
    equilibria, stable = _find_attractors(spec, model)
    labels = tuple(f"a{i}" for i in range(len(stable)))
    positions = [eq.position for eq in stable]
    n_att = len(stable)

    pair_tasks = [(i, j) for i in range(n_att) for j in range(n_att) if i != j]

    def pair_worker(pair: tuple[int, int]) -> ActionValue:
        i, j = pair
        return quasipotential(
            model,
            positions[i],
            positions[j],
            sweep=spec.solver.t_sweep,
            num_segments=spec.solver.path_points,
            equilibrium_tol=spec.tolerances.equilibrium,
            max_iterations=spec.solver.max_iterations,
        )

    pair_results = _map_ordered(pair_tasks, pair_worker, threads)

    entries = np.zeros((n_att, n_att))
    unconverged = 0
    for (i, j), res in zip(pair_tasks, pair_results):
        entries[i, j] = res.value
        unconverged += 0 if res.converged else 1

    point_tasks = [(i, k) for i in range(n_att) for k in range(spec.evaluation_points.shape[0])]

    def point_worker(task: tuple[int, int]) -> ActionValue:
        i, k = task
        return quasipotential(
            model,
            positions[i],
            spec.evaluation_points[k],
            sweep=spec.solver.t_sweep,
            num_segments=spec.solver.path_points,
            equilibrium_tol=spec.tolerances.equilibrium,
            max_iterations=spec.solver.max_iterations,
        )

    point_results = _map_ordered(point_tasks, point_worker, threads)
    eval_costs = np.zeros((spec.evaluation_points.shape[0], n_att))
    for (i, k), res in zip(point_tasks, point_results):
        eval_costs[k, i] = res.value
        unconverged += 0 if res.converged else 1

    total_runs = len(pair_tasks) + len(point_tasks)
    if total_runs and unconverged / total_runs > spec.tolerances.failure_quota:
        raise SolverError(
            f"{unconverged} of {total_runs} action minimizations failed to "
            f"converge, above the failure quota {spec.tolerances.failure_quota:g}"
        )

    costs_raw = CostMatrix(labels, entries)
    costs_closed = shortest_path_closure(costs_raw)
    try:
        rates = stationary_rates(costs_closed)
        residual = max_balance_residual(rates, costs_closed)
    except ValueError as exc:
        raise SolverError(str(exc)) from None
    if residual > spec.tolerances.balance:
        raise BalanceError(
            f"max flux balance residual {residual:.3g} exceeds tolerance "
            f"{spec.tolerances.balance:g}"
        )

    eval_rates = np.array(
        [evaluate_rate(rates, eval_costs[k]) for k in range(eval_costs.shape[0])]
    )
    return RateReport(
        labels=labels,
        attractors=stable,
        equilibria=equilibria,
        costs_raw=costs_raw,
        costs_closed=costs_closed,
        rates=rates,
        balance_residual=float(residual),
        evaluation_points=spec.evaluation_points,
        evaluation_costs=eval_costs,
        evaluation_rates=eval_rates,
        unconverged=unconverged,
        total_runs=total_runs,
        provenance=_provenance(spec),
    )


def rates_csv_rows(report: RateReport) -> tuple[list[str], list[list[object]]]:
    d = report.evaluation_points.shape[1] if report.evaluation_points.size else 0
    header = [f"x{i}" for i in range(d)] + ["rate"]
    rows = []
    for k in range(report.evaluation_points.shape[0]):
        rows.append(
            [float(v) for v in report.evaluation_points[k]]
            + [float(report.evaluation_rates[k])]
        )
    return header, rows


def _bin_edges(sim: SimulationSpec) -> list[np.ndarray]:
    return [
        np.linspace(lo, hi, sim.bin_count + 1)
        for lo, hi in zip(sim.bin_lower, sim.bin_upper)
    ]


def _rate_predictor(
    spec: ProblemSpec, model: LocalModel, positions: list[np.ndarray], rates: StationaryRates, threads: int
) -> Callable[[np.ndarray], np.ndarray]:
    """Rate-function evaluator over arbitrary point batches."""

    def predict(points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        tasks = [(i, k) for i in range(len(positions)) for k in range(pts.shape[0])]

        def worker(task: tuple[int, int]) -> float:
            i, k = task
            return quasipotential(
                model,
                positions[i],
                pts[k],
                sweep=spec.solver.t_sweep,
                num_segments=spec.solver.path_points,
                equilibrium_tol=spec.tolerances.equilibrium,
                max_iterations=spec.solver.max_iterations,
            ).value

        values = _map_ordered(tasks, worker, threads)
        costs = np.zeros((pts.shape[0], len(positions)))
        for (i, k), v in zip(tasks, values):
            costs[k, i] = v
        return np.array([evaluate_rate(rates, costs[k]) for k in range(pts.shape[0])])

    return predict


def run_validate(
    spec: ProblemSpec, threads: int = 1, seed: int | None = None
) -> tuple[RateReport, list[ValidationRunResult]]:
    """Predictions from :func:`run_rates` against a simulation ladder.

    Each entry of ``simulation.n_values`` produces one simulated sample
    cloud, an empirical rate estimate on the spec bins, and a comparison
    against the predicted rate at the populated bin centers.
    """
    if spec.simulation is None:
        raise SpecError("validate requires a 'simulation' section in the problem spec")
    sim = spec.simulation
    report = run_rates(spec, threads=threads)
    model = spec.build_model()
    positions = [eq.position for eq in report.attractors]
    predict = _rate_predictor(spec, model, positions, report.rates, threads)

    edges = _bin_edges(sim)
    centers_axes = [0.5 * (e[:-1] + e[1:]) for e in edges]
    mesh = np.meshgrid(*centers_axes, indexing="ij")
    centers = np.stack([m.ravel() for m in mesh], axis=-1)
    predicted_on_centers = predict(centers)

    if sim.initial is not None:
        initial = sim.initial
    else:
        initial = np.stack(positions)
    reps = sim.replicas
    if initial.shape[0] != reps:
        initial = initial[np.arange(reps) % initial.shape[0]]

    use_seed = sim.seed if seed is None else seed
    results: list[ValidationRunResult] = []
    for n in sim.n_values:
        config = SimConfig(
            n=n,
            dt=sim.dt,
            burn_in=sim.burn_in,
            horizon=sim.horizon,
            seed=use_seed,
            initial=initial,
            replicas=reps,
            stride=sim.stride,
        )
        try:
            samples = simulate(model, config)
        except Exception as exc:
            raise SolverError(f"simulation at n={n} failed: {exc}") from exc
        try:
            emp = empirical_rate(samples, edges, n)
        except ValueError as exc:
            # too few samples is a sizing problem in the simulation section
            raise SpecError(str(exc)) from None
        rep = validation_report(lambda pts, _p=predicted_on_centers, _c=centers: _lookup(pts, _c, _p), emp)
        results.append(ValidationRunResult(n=n, empirical=emp, report=rep))
    return report, results


def _lookup(points: np.ndarray, centers: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Match rows of ``points`` to precomputed ``centers`` values."""
    out = np.empty(points.shape[0])
    for idx, p in enumerate(points):
        hits = np.where(np.all(np.isclose(centers, p, rtol=0.0, atol=1e-9), axis=1))[0]
        if hits.size != 1:
            raise RuntimeError("bin center lookup failed; edges changed between calls")
        out[idx] = values[hits[0]]
    return out


@dataclass(frozen=True, eq=False)
class ValidationRunResult:
    n: int
    empirical: EmpiricalRate
    report: object  # ValidationReport

    def summary(self) -> dict:
        return {
            "n": self.n,
            "sup_error": self.report.sup_error,
            "bins_compared": int(self.report.predicted.shape[0]),
            "censored_bins": self.report.censored_bins,
            "degenerate": self.empirical.degenerate,
        }


def validation_dict(report: RateReport, results: list[ValidationRunResult]) -> dict:
    sups = [r.report.sup_error for r in results]
    out = report.to_dict()
    out["validation"] = {
        "runs": [r.summary() for r in results],
        "sup_errors": sups,
        "monotone_trend": all(b <= a for a, b in zip(sups, sups[1:])),
    }
    return out


def empirical_csv_rows(results: list[ValidationRunResult]) -> tuple[list[str], list[list[object]]]:
    if not results:
        return ["n", "count", "rate"], []
    d = results[0].empirical.centers.shape[1]
    header = ["n"] + [f"c{i}" for i in range(d)] + ["count", "rate"]
    rows: list[list[object]] = []
    for res in results:
        emp = res.empirical
        for k in range(emp.centers.shape[0]):
            rows.append(
                [res.n]
                + [float(v) for v in emp.centers[k]]
                + [int(emp.counts[k]), float(emp.rates[k])]
            )
    return header, rows


def run_linear(spec: ProblemSpec, attractor_index: int | None = None) -> dict:
    """Closed-form Gramian quasipotential report at one stable attractor.

    The chosen equilibrium must be classified stable; marginal ones are
    refused because the Gramian does not exist at a neutral linearization.
    """
    if spec.linear is None:
        raise SpecError("linear requires a 'linear' section in the problem spec")
    ls = spec.linear
    idx = ls.attractor_index if attractor_index is None else attractor_index
    model = spec.build_model()
    equilibria, _stable = _find_attractors(spec, model)
    if not (0 <= idx < len(equilibria)):
        raise SpecError(
            f"attractor index {idx} out of range; found {len(equilibria)} equilibria"
        )
    eq = equilibria[idx]
    if eq.classification != "stable":
        raise SolverError(
            f"equilibrium {idx} is {eq.classification}; the Gramian quasipotential "
            "needs a strictly stable linearization"
        )
    cov = model.local_covariance(eq.position)
    try:
        lin = LinearModel(eq.jacobian, cov)
    except ValueError as exc:
        raise SolverError(str(exc)) from None
    gram = lyapunov_gramian(lin)
    gram_t = finite_horizon_gramian(lin, ls.horizon)
    entries = []
    paths = []
    for r_idx in range(ls.displacements.shape[0]):
        r = ls.displacements[r_idx]
        rate = quadratic_rate(lin, r)
        path = finite_horizon_path(lin, r, ls.horizon, ls.samples)
        t_grid = path.times
        limit = np.stack(
            [escape_profile_limit(lin, r, float(t)) for t in t_grid]
        )
        entries.append(
            {
                "displacement": r,
                "rate": rate,
                "finite_horizon_rate": 0.5 * float(r @ np.linalg.solve(gram_t, r)),
                "limit_profile_backward_times": t_grid,
                "limit_profile": limit + eq.position,
            }
        )
        paths.append(path)
    report = {
        "attractor": {"index": idx, **_equilibrium_dict(eq)},
        "drift_matrix": eq.jacobian,
        "covariance": cov,
        "gramian": gram,
        "finite_horizon_gramian": gram_t,
        "horizon": ls.horizon,
        "displacements": entries,
        "provenance": _provenance(spec),
    }
    return {"report": report, "paths": paths, "origin": eq.position}


def linear_paths_csv_rows(result: dict) -> tuple[list[str], list[list[object]]]:
    paths = result["paths"]
    origin = result["origin"]
    d = origin.shape[0]
    header = ["r_index", "t"] + [f"x{i}" for i in range(d)]
    rows: list[list[object]] = []
    for r_idx, path in enumerate(paths):
        times = path.times
        for k in range(path.points.shape[0]):
            rows.append(
                [r_idx, float(times[k])] + [float(v) for v in (path.points[k] + origin)]
            )
    return header, rows
