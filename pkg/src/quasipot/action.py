"""Path action functional for jump diffusions and its minimization.

The running cost of moving at velocity ``v`` through state ``y`` is the
Legendre-type dual

``L(y, v) = sup_l [ l . (v - b(y)) - 0.5 |sigma(y)^T l|^2
                    - sum_j nu_j (e^{l . f_j(y)} - 1 - l . f_j(y)) ]``

which is finite, convex in ``v``, and zero exactly when ``v = b(y)``.  The
action of a path is the time integral of ``L`` along it, discretized here
with the midpoint rule on uniform grids.  Quasipotentials between states are
infima of the action over paths and over growing horizons.

The inner sup is a smooth strictly concave maximization solved by damped
Newton iterations started from the Gaussian maximizer; with no jump
channels that start is already exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.optimize

from .models import LocalModel, Path

#: Default horizon sweep for quasipotential computations.
DEFAULT_SWEEP = (1.0, 2.0, 5.0, 10.0, 20.0, 50.0)

#: Action values at or above this are reported as unreachable (infinite).
COST_CAP = 1e6


@dataclass(frozen=True)
class ActionValue:
    """Outcome of an action or Lagrangian evaluation.

    ``value`` is the cost; ``dual_iterations`` the largest inner Newton
    iteration count encountered; ``converged`` whether every inner problem
    (and, for minimization, the outer descent) met its tolerance;
    ``failed_segments`` the indices of path segments whose inner solve did
    not converge.
    """

    value: float
    dual_iterations: int
    converged: bool
    failed_segments: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if math.isnan(self.value):
            raise ValueError("action value must not be NaN")
        if self.value < 0 and self.value > -1e-12:
            # Tiny negative values are roundoff from the dual; clamp them.
            object.__setattr__(self, "value", 0.0)
        if self.value < 0:
            raise ValueError(f"action value must be nonnegative, got {self.value}")


def _dual_batch(
    w: np.ndarray,
    cov: np.ndarray,
    nu: np.ndarray,
    f: np.ndarray,
    max_iter: int = 50,
    grad_tol: float = 1e-10,
) -> tuple[np.ndarray, np.ndarray, int, np.ndarray]:
    """Maximize the dual for a batch of (state, velocity) pairs.

    ``w``: (M, d) velocity minus drift; ``cov``: (M, d, d) diffusion
    covariance; ``nu``: (J,) jump rates; ``f``: (M, J, d) jump sizes.
    Returns (values, maximizers, iterations used, per-row convergence).
    """
    M, d = w.shape
    J = len(nu)

    def objective(lam: np.ndarray, rows: np.ndarray | None = None) -> np.ndarray:
        if rows is None:
            ww, cc, ff = w, cov, f
        else:
            ww, cc, ff = w[rows], cov[rows], f[rows]
        val = np.einsum("md,md->m", lam, ww) - 0.5 * np.einsum(
            "md,mde,me->m", lam, cc, lam
        )
        if J:
            z = np.einsum("mjd,md->mj", ff, lam)
            with np.errstate(over="ignore"):
                val = val - (nu * (np.expm1(z) - z)).sum(axis=1)
        return val

    # Gaussian maximizer as the starting point.  If the diffusion block is
    # singular the full local covariance (guaranteed invertible by the
    # nondegeneracy precondition) is used instead.
    try:
        lam = np.linalg.solve(cov, w[..., None])[..., 0]
    except np.linalg.LinAlgError:
        full = cov + np.einsum("j,mjd,mje->mde", nu, f, f)
        lam = np.linalg.solve(full, w[..., None])[..., 0]
    val = objective(lam)
    # The dual is 0 at lam = 0, so the sup is never negative.  Rows where the
    # Gaussian start lands below that (strong jump terms) or overflows restart
    # from 0; Newton then climbs monotonically, keeping every value >= 0.
    bad = ~np.isfinite(val) | (val < 0.0)
    if bad.any():
        lam[bad] = 0.0
        val[bad] = 0.0
    stalled = np.zeros(M, dtype=bool)
    iters = 0

    def gradient(lam: np.ndarray) -> np.ndarray:
        g = w - np.einsum("mde,me->md", cov, lam)
        if J:
            z = np.einsum("mjd,md->mj", f, lam)
            with np.errstate(over="ignore"):
                ez = np.expm1(z)
            g = g - np.einsum("j,mj,mjd->md", nu, ez, f)
        return g

    for _ in range(max_iter):
        grad = gradient(lam)
        gnorm = np.abs(grad).max(axis=1)
        active = (gnorm > grad_tol) & ~stalled & np.isfinite(gnorm)
        if not active.any():
            break
        iters += 1
        hess = cov.copy()
        if J:
            z = np.einsum("mjd,md->mj", f, lam)
            expz = np.exp(np.minimum(z, 700.0))
            hess = hess + np.einsum("j,mj,mjd,mje->mde", nu, expz, f, f)
        delta = np.zeros_like(lam)
        rows = np.where(active)[0]
        try:
            delta[rows] = np.linalg.solve(hess[rows], grad[rows][..., None])[..., 0]
        except np.linalg.LinAlgError:
            for r in rows:
                try:
                    delta[r] = np.linalg.solve(hess[r], grad[r])
                except np.linalg.LinAlgError:
                    stalled[r] = True
            rows = np.where(active & ~stalled)[0]
            if rows.size == 0:
                continue
        # Damped step: halve until the concave objective strictly improves.
        step = np.ones(rows.size)
        pending = np.ones(rows.size, dtype=bool)
        for _halve in range(40):
            sub = rows[pending]
            if sub.size == 0:
                break
            trial = lam[sub] + step[pending, None] * delta[sub]
            tval = objective(trial, sub)
            good = np.isfinite(tval) & (tval > val[sub])
            take = sub[good]
            lam[take] = trial[good]
            val[take] = tval[good]
            upd = pending.copy()
            upd[np.where(pending)[0][good]] = False
            pending = upd
            step[pending] *= 0.5
        stalled[rows[pending]] = True

    grad = gradient(lam)
    converged = np.abs(grad).max(axis=1) <= grad_tol
    return val, lam, iters, converged


def _dual_inputs(model: LocalModel, y: np.ndarray, v: np.ndarray):
    w = v - model.drift_at(y)
    cov = model.noise_covariance(y)
    f = model.jump_values(y)
    nu = model.jump_rates
    return w, cov, nu, f


def local_lagrangian(model: LocalModel, y: Sequence[float], v: Sequence[float]) -> ActionValue:
    """The running cost ``L(y, v)``.

    Requires the local covariance at ``y`` to be positive definite.
    """
    y = np.asarray(y, dtype=float).reshape(1, -1)
    v = np.asarray(v, dtype=float).reshape(1, -1)
    if y.shape[1] != model.dim or v.shape != y.shape:
        raise ValueError(f"state and velocity must have dimension {model.dim}")
    model.assert_nondegenerate(y)
    val, _, iters, conv = _dual_batch(*_dual_inputs(model, y, v))
    return ActionValue(float(val[0]), iters, bool(conv[0]), () if conv[0] else (0,))


def _segment_values(
    model: LocalModel, left: np.ndarray, right: np.ndarray, dt: float
) -> np.ndarray:
    """Midpoint-rule contribution ``dt * L(midpoint, chord velocity)`` per segment."""
    y = 0.5 * (left + right)
    v = (right - left) / dt
    val, _, _, _ = _dual_batch(*_dual_inputs(model, y, v))
    return dt * val


def _segment_values_full(model: LocalModel, points: np.ndarray, dt: float):
    y = 0.5 * (points[:-1] + points[1:])
    v = (points[1:] - points[:-1]) / dt
    val, _, iters, conv = _dual_batch(*_dual_inputs(model, y, v))
    return dt * val, iters, conv


def path_action(model: LocalModel, path: Path) -> ActionValue:
    """Midpoint-rule action of a discrete path.

    Each segment contributes ``dt * L(midpoint, chord velocity)``.  Requires
    nondegenerate local covariance at every segment midpoint.
    """
    if path.dim != model.dim:
        raise ValueError(f"path dimension {path.dim} does not match model {model.dim}")
    mid = 0.5 * (path.points[:-1] + path.points[1:])
    model.assert_nondegenerate(mid)
    terms, iters, conv = _segment_values_full(model, path.points, path.dt)
    failed = tuple(int(k) for k in np.where(~conv)[0])
    return ActionValue(float(terms.sum()), iters, not failed, failed)


def _value_and_gradient(
    model: LocalModel, points: np.ndarray, dt: float, h: float
) -> tuple[float, np.ndarray]:
    """Discrete action and its gradient with respect to interior nodes.

    One inner dual solve per call: at the maximizer ``l*`` the dual is
    stationary in ``l``, so derivatives pass through it (envelope argument).
    ``dL/dv = l*`` exactly, and ``dL/dy`` needs only finite differences of
    the model fields with ``l*`` held fixed.  Interior node ``k`` enters
    segment ``k - 1`` through its right endpoint and segment ``k`` through
    its left one, each contributing half the midpoint sensitivity plus the
    chord-velocity term.
    """
    n_seg, d = points.shape[0] - 1, points.shape[1]
    y = 0.5 * (points[:-1] + points[1:])
    v = (points[1:] - points[:-1]) / dt
    w, cov, nu, f = _dual_inputs(model, y, v)
    val, lam, _, _ = _dual_batch(w, cov, nu, f)
    j = len(nu)

    def dual_at(yy: np.ndarray) -> np.ndarray:
        """Dual objective at fixed maximizers ``lam`` but shifted states."""
        ww = v - model.drift_at(yy)
        cc = model.noise_covariance(yy)
        out = np.einsum("md,md->m", lam, ww) - 0.5 * np.einsum(
            "md,mde,me->m", lam, cc, lam
        )
        if j:
            z = np.einsum("mjd,md->mj", model.jump_values(yy), lam)
            with np.errstate(over="ignore"):
                out = out - (nu * (np.expm1(z) - z)).sum(axis=1)
        return out

    dldy = np.empty((n_seg, d))
    for i in range(d):
        e = np.zeros(d)
        e[i] = h
        dldy[:, i] = (dual_at(y + e) - dual_at(y - e)) / (2.0 * h)

    grad = np.zeros_like(points)
    grad[1:-1] = 0.5 * dt * (dldy[:-1] + dldy[1:]) + (lam[:-1] - lam[1:])
    return float(dt * val.sum()), grad


def minimize_action(
    model: LocalModel,
    x0: Sequence[float],
    x1: Sequence[float],
    horizon: float,
    num_segments: int,
    init: Path | None = None,
    *,
    max_iterations: int = 2000,
    grad_tol: float = 1e-6,
    fd_step: float = 1e-6,
    stagnation_tol: float = 1e-8,
    stagnation_window: int = 100,
) -> tuple[Path, ActionValue]:
    """Minimize the discrete action over paths from ``x0`` to ``x1``.

    Starts from the better of the straight line and the optional warm start
    (resampled onto the requested grid with endpoints forced), then runs
    L-BFGS-B over the interior nodes with the envelope gradient of
    :func:`_value_and_gradient`.  The output is the best path seen, so the
    value never exceeds the straight-line action.

    Convergence means any of: the max-norm gradient fell below
    ``grad_tol``; the optimizer's own relative-reduction test fired; or the
    mean per-iteration improvement over the last ``stagnation_window``
    iterations dropped below ``stagnation_tol`` relative to the value.  The
    last case matters on long horizons, where near-translation-invariance
    of the transition layer makes the valley floor extremely flat.
    """
    x0 = np.asarray(x0, dtype=float)
    x1 = np.asarray(x1, dtype=float)
    if x0.shape != (model.dim,) or x1.shape != (model.dim,):
        raise ValueError(f"endpoints must be vectors of dimension {model.dim}")
    if not (horizon > 0) or not np.isfinite(horizon):
        raise ValueError(f"horizon must be positive and finite, got {horizon}")
    if num_segments < 4:
        raise ValueError("need at least 4 segments to have interior nodes to move")
    dt = horizon / num_segments
    d = model.dim

    straight = np.linspace(0.0, 1.0, num_segments + 1)[:, None] * (x1 - x0) + x0
    candidates = [straight]
    if init is not None:
        if init.num_segments != num_segments or init.horizon != horizon:
            warm = Path(horizon, init.points).resampled(num_segments).points.copy()
        else:
            warm = init.points.copy()
        warm[0] = x0
        warm[-1] = x1
        candidates.append(warm)

    model.assert_nondegenerate(0.5 * (straight[:-1] + straight[1:]))

    def assemble(z: np.ndarray) -> np.ndarray:
        pts = np.empty((num_segments + 1, d))
        pts[0] = x0
        pts[-1] = x1
        pts[1:-1] = z.reshape(num_segments - 1, d)
        return pts

    latest = {"value": np.inf}
    history: list[float] = []

    def fun(z: np.ndarray) -> tuple[float, np.ndarray]:
        value, grad = _value_and_gradient(model, assemble(z), dt, fd_step)
        latest["value"] = value
        return value, grad[1:-1].ravel()

    def record(_zk: np.ndarray) -> None:
        history.append(latest["value"])

    start_vals = [fun(c[1:-1].ravel())[0] for c in candidates]
    pick = int(np.argmin(start_vals))
    z0 = candidates[pick][1:-1].ravel()

    result = scipy.optimize.minimize(
        fun,
        z0,
        jac=True,
        method="L-BFGS-B",
        callback=record,
        options={
            "maxiter": max_iterations,
            "maxfun": 10 * max_iterations,
            "gtol": grad_tol,
            "ftol": 1e-14,
            "maxcor": 30,
        },
    )
    if np.isfinite(result.fun) and result.fun <= start_vals[pick]:
        best = assemble(result.x)
    else:
        best = candidates[pick]
    stagnated = len(history) > stagnation_window and (
        history[-stagnation_window - 1] - history[-1]
        <= stagnation_window * stagnation_tol * max(1.0, abs(history[-1]))
    )
    converged = (
        bool(result.success)
        or float(np.abs(result.jac).max()) <= grad_tol
        or stagnated
    )

    terms, dual_iters, conv = _segment_values_full(model, best, dt)
    failed = tuple(int(k) for k in np.where(~conv)[0])
    info = ActionValue(float(terms.sum()), dual_iters, converged and not failed, failed)
    return Path(horizon, best), info


def quasipotential(
    model: LocalModel,
    attractor: Sequence[float],
    target: Sequence[float],
    sweep: Sequence[float] = DEFAULT_SWEEP,
    num_segments: int = 400,
    *,
    equilibrium_tol: float = 1e-6,
    cost_cap: float = COST_CAP,
    **minimize_options,
) -> ActionValue:
    """Escape cost from an attractor to a target state.

    Minimizes the action over each horizon in ``sweep`` (sorted ascending),
    warm starting every horizon from the previous optimum extended by an
    initial hold at the attractor, which costs nothing because the attractor
    is an equilibrium.  The reported value is the smallest over the sweep;
    extending the sweep can therefore never increase it.  Values reaching
    ``cost_cap`` are reported as infinite.

    The starting point must actually be an equilibrium of the drift; this is
    checked against ``equilibrium_tol``.
    """
    a = np.asarray(attractor, dtype=float)
    x = np.asarray(target, dtype=float)
    if a.shape != (model.dim,) or x.shape != (model.dim,):
        raise ValueError(f"attractor and target must be vectors of dimension {model.dim}")
    sweep = sorted(float(t) for t in sweep)
    if not sweep:
        raise ValueError("horizon sweep must be nonempty")
    if sweep[0] <= 0:
        raise ValueError("horizons must be positive")
    speed = float(np.linalg.norm(model.drift_at(a[None, :])[0]))
    if speed > equilibrium_tol:
        raise ValueError(
            f"|b(attractor)| = {speed:.3g} exceeds equilibrium tolerance {equilibrium_tol:.3g}"
        )

    best: ActionValue | None = None
    prev: Path | None = None
    for horizon in sweep:
        init = None
        if prev is not None:
            init = _hold_then_follow(prev, a, horizon, num_segments)
        path, info = minimize_action(
            model, a, x, horizon, num_segments, init=init, **minimize_options
        )
        if best is None or info.value < best.value:
            best = info
        prev = path
    assert best is not None
    if best.value >= cost_cap:
        return ActionValue(math.inf, best.dual_iterations, best.converged, best.failed_segments)
    return best


def _hold_then_follow(path: Path, a: np.ndarray, horizon: float, num_segments: int) -> Path:
    """Warm start on a longer horizon: wait at ``a``, then run the old path."""
    extra = horizon - path.horizon
    if extra <= 0:
        return path.resampled(num_segments)
    t = np.concatenate([[0.0], path.times + extra])
    pts = np.vstack([a[None, :], path.points])
    t_new = np.linspace(0.0, horizon, num_segments + 1)
    out = np.column_stack([np.interp(t_new, t, pts[:, i]) for i in range(path.dim)])
    return Path(horizon, out)
