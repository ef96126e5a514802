"""Direct simulation of the jump diffusion and empirical rate estimates.

The scheme is Euler-Maruyama with compound-Poisson jump channels: per step
of size ``dt`` the state gains ``b(X) dt``, a Gaussian kick
``n^{-1/2} sigma(X) sqrt(dt) xi``, and for every jump channel ``j`` an
increment ``(K_j / n - nu_j dt) f_j(X)`` where ``K_j ~ Poisson(n nu_j dt)``;
the subtracted compensator keeps the drift of the jump noise at zero so all
three noise sources vanish together as ``n`` grows.

Replicas evolve in lockstep as one vectorized batch, but each replica draws
from its own random stream keyed by ``(seed, replica index)``, so results
are reproducible and independent of the number of replicas run together.
Occupation statistics turn into empirical rates via
``-(1/n) log(relative frequency)``, shifted so the most occupied bin sits
at rate 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .models import LocalModel

#: States beyond this magnitude abort the simulation as diverged.
BLOWUP_LIMIT = 1e6

#: Fixed per-replica draw block (steps per RNG call); part of the
#: reproducibility contract, since changing it would reorder draws.
_BLOCK = 16384

#: Minimum number of samples required to form an empirical rate.
MIN_SAMPLES = 10_000


class SimulationBlowup(RuntimeError):
    """A trajectory left the admissible region; the drift is not confining."""


@dataclass(frozen=True, eq=False)
class SimConfig:
    """Parameters of one simulation run.

    ``n`` is the large-deviation scale: noise variance shrinks like ``1/n``.
    Samples are recorded every ``stride`` steps after ``burn_in`` time has
    elapsed.  ``initial`` is one state for all replicas or one per replica.
    """

    n: int
    dt: float
    burn_in: float
    horizon: float
    seed: int
    initial: np.ndarray
    replicas: int = 1
    stride: int = 1

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError("scale n must be a positive integer")
        if not (self.dt > 0) or not math.isfinite(self.dt):
            raise ValueError("dt must be positive and finite")
        if self.burn_in < 0 or self.horizon <= self.burn_in:
            raise ValueError("need 0 <= burn_in < horizon")
        if self.replicas < 1 or self.stride < 1:
            raise ValueError("replicas and stride must be positive integers")
        init = np.atleast_1d(np.asarray(self.initial, dtype=float))
        if init.ndim == 1:
            init = np.broadcast_to(init, (self.replicas, init.shape[0])).copy()
        if init.ndim != 2 or init.shape[0] != self.replicas:
            raise ValueError(
                f"initial must be (d,) or (replicas, d), got shape {init.shape}"
            )
        if not np.isfinite(init).all():
            raise ValueError("initial states must be finite")
        init.flags.writeable = False
        object.__setattr__(self, "initial", init)

    @property
    def num_steps(self) -> int:
        return int(round(self.horizon / self.dt))

    @property
    def burn_steps(self) -> int:
        return int(round(self.burn_in / self.dt))


def _replica_rngs(seed: int, replicas: int) -> list[np.random.Generator]:
    return [np.random.default_rng(np.random.SeedSequence((seed, r))) for r in range(replicas)]


def simulate(model: LocalModel, config: SimConfig) -> np.ndarray:
    """Sampled states of all replicas, shape ``(num_samples, d)``.

    Samples are ordered replica-major (all samples of replica 0, then
    replica 1, ...).  Identical configurations produce identical arrays;
    the per-replica streams also make each replica's trajectory independent
    of how many other replicas run alongside it.
    """
    if config.initial.shape[1] != model.dim:
        raise ValueError(
            f"initial states have dimension {config.initial.shape[1]}, model has {model.dim}"
        )
    n = config.n
    dt = config.dt
    reps = config.replicas
    rngs = _replica_rngs(config.seed, reps)
    x = config.initial.copy()
    sqrt_dt_over_n = math.sqrt(dt / n)
    nu = model.jump_rates
    j = len(nu)
    lam = n * nu * dt if j else None
    m = model.noise_width

    total_steps = config.num_steps
    burn = config.burn_steps
    collected: list[np.ndarray] = []
    step = 0
    while step < total_steps:
        block = min(_BLOCK, total_steps - step)
        normals = np.stack([rng.standard_normal((block, m)) for rng in rngs])
        if j:
            counts = np.stack(
                [rng.poisson(lam, (block, j)) for rng in rngs]
            ).astype(float)
        for k in range(block):
            drift = model.drift_at(x)
            sig = model.diffusion_at(x)
            incr = drift * dt + sqrt_dt_over_n * np.einsum("rdm,rm->rd", sig, normals[:, k])
            if j:
                weights = counts[:, k] / n - nu * dt
                incr = incr + np.einsum("rj,rjd->rd", weights, model.jump_values(x))
            x = x + incr
            step += 1
            if np.abs(x).max() > BLOWUP_LIMIT:
                raise SimulationBlowup(
                    f"state magnitude exceeded {BLOWUP_LIMIT:g} at step {step} "
                    f"(time {step * dt:.6g}); the drift does not appear to "
                    "confine the dynamics on this domain"
                )
            if step > burn and (step - burn) % config.stride == 0:
                collected.append(x.copy())
    if not collected:
        raise ValueError("no samples collected; lengthen the horizon or shrink the stride")
    stacked = np.stack(collected)  # (snapshots, replicas, d)
    return np.ascontiguousarray(stacked.transpose(1, 0, 2)).reshape(-1, model.dim)


@dataclass(frozen=True, eq=False)
class EmpiricalRate:
    """Histogram-based rate estimate on a fixed grid of bins.

    ``rates`` holds ``-(1/n) log(frequency)`` shifted so the minimum over
    populated bins is exactly 0; unpopulated bins carry NaN (censored: the
    data says at least ``(1/n) log(total)``, not infinity).  ``degenerate``
    flags estimates where all mass fell into a single bin.
    """

    centers: np.ndarray
    counts: np.ndarray
    rates: np.ndarray
    n: int
    degenerate: bool

    def __post_init__(self) -> None:
        centers = np.atleast_2d(np.asarray(self.centers, dtype=float))
        counts = np.asarray(self.counts)
        rates = np.asarray(self.rates, dtype=float)
        if centers.shape[0] != counts.shape[0] or counts.shape != rates.shape:
            raise ValueError("centers, counts and rates must agree in length")
        pop = counts > 0
        if not pop.any():
            raise ValueError("at least one bin must be populated")
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "rates", rates)

    @property
    def populated(self) -> np.ndarray:
        return self.counts > 0


def empirical_rate(samples: np.ndarray, edges: Sequence[np.ndarray] | np.ndarray, n: int) -> EmpiricalRate:
    """Empirical rate function of a sample cloud on a rectangular grid.

    ``edges`` is one monotone edge array per dimension (a single array is
    accepted for one-dimensional data).  Requires at least ``MIN_SAMPLES``
    samples: rates are log-frequencies, so sparse histograms produce more
    censoring than signal.
    """
    pts = np.asarray(samples, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.shape[0] < MIN_SAMPLES:
        raise ValueError(
            f"need at least {MIN_SAMPLES} samples for a rate estimate, got {pts.shape[0]}"
        )
    if n < 1:
        raise ValueError("scale n must be a positive integer")
    d = pts.shape[1]
    if isinstance(edges, np.ndarray) and edges.ndim == 1:
        edge_list = [np.asarray(edges, dtype=float)]
    else:
        edge_list = [np.asarray(e, dtype=float) for e in edges]
    if len(edge_list) != d:
        raise ValueError(f"got {len(edge_list)} edge arrays for {d}-dimensional data")
    for e in edge_list:
        if e.ndim != 1 or e.shape[0] < 2 or not (np.diff(e) > 0).all():
            raise ValueError("each edge array must be monotone with at least two entries")
    counts, _ = np.histogramdd(pts, bins=edge_list)
    counts = counts.reshape(-1)
    centers_axes = [0.5 * (e[:-1] + e[1:]) for e in edge_list]
    mesh = np.meshgrid(*centers_axes, indexing="ij")
    centers = np.stack([m.ravel() for m in mesh], axis=-1)
    pop = counts > 0
    total = counts.sum()
    rates = np.full(counts.shape, np.nan)
    with np.errstate(divide="ignore"):
        raw = -np.log(counts[pop] / total) / n
    rates[pop] = raw - raw.min()
    return EmpiricalRate(centers, counts.astype(int), rates, n, degenerate=bool(pop.sum() == 1))


@dataclass(frozen=True, eq=False)
class ValidationReport:
    """Point-by-point comparison of predicted and empirical rates.

    Both curves are shifted to minimum 0 over the common populated support
    before differencing; the large-deviation prediction is only defined up
    to that normalization, and so is the histogram estimate.  Censored bins
    (no samples) are excluded from the error norms rather than treated as
    disagreement at infinity.
    """

    n: int
    centers: np.ndarray
    predicted: np.ndarray
    empirical: np.ndarray
    abs_errors: np.ndarray
    sup_error: float
    censored_bins: int

    def __post_init__(self) -> None:
        for name in ("centers", "predicted", "empirical", "abs_errors"):
            arr = np.asarray(getattr(self, name), dtype=float)
            object.__setattr__(self, name, arr)
        if not (self.predicted.shape == self.empirical.shape == self.abs_errors.shape):
            raise ValueError("prediction/empirical/error arrays must align")


def validation_report(predicted: Callable[[np.ndarray], np.ndarray], empirical: EmpiricalRate) -> ValidationReport:
    """Compare a rate prediction against an empirical estimate.

    ``predicted`` maps an ``(M, d)`` array of bin centers to ``M`` rate
    values.  Infinite predictions on populated bins count as infinite
    error; censored bins are dropped from the comparison and only counted.
    """
    pop = empirical.populated
    centers = empirical.centers[pop]
    pred = np.asarray(predicted(centers), dtype=float)
    if pred.shape != (centers.shape[0],):
        raise ValueError(f"prediction returned shape {pred.shape}, expected ({centers.shape[0]},)")
    if np.isnan(pred).any():
        raise ValueError("prediction must not contain NaN on populated bins")
    if not np.isfinite(pred).any():
        raise ValueError("prediction is infinite on every populated bin")
    emp = empirical.rates[pop]
    pred_shift = pred - pred.min()
    emp_shift = emp - emp.min()
    err = np.abs(pred_shift - emp_shift)
    return ValidationReport(
        n=empirical.n,
        centers=centers,
        predicted=pred_shift,
        empirical=emp_shift,
        abs_errors=err,
        sup_error=float(err.max()),
        censored_bins=int((~pop).sum()),
    )
