"""Closed forms for linear drift: Gramian quasipotentials and escape paths.

For a stable linear drift ``b(x) = Db x`` with constant local covariance
``c`` (diffusion plus jump second moments), the quasipotential from the
origin is the explicit quadratic ``I(r) = 0.5 r^T G^{-1} r`` where ``G``
solves the continuous Lyapunov equation ``Db G + G Db^T + c = 0``,
equivalently ``G = int_0^inf e^{Db t} c e^{Db^T t} dt``.  Finite-horizon
versions replace ``G`` by the truncated integral ``G_T``, and the optimal
path reaching ``r`` at time ``T`` is ``X_s = G_s e^{Db^T (T - s)} G_T^{-1} r``.

This parametrization only involves decaying matrix exponentials, so it is
numerically stable for large horizons, unlike the equivalent form that
propagates ``e^{-Db t}`` forward.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.integrate
import scipy.linalg

from .models import Path

#: Largest state dimension for the dense Kronecker Lyapunov solve.
MAX_LYAPUNOV_DIM = 20

#: Relative Frobenius residual allowed for the Lyapunov solution.
LYAPUNOV_RESIDUAL_TOL = 1e-10

#: Matrix exponents beyond this would overflow double precision.
MAX_EXPONENT = 700.0


@dataclass(frozen=True, eq=False)
class LinearModel:
    """Linearized dynamics at an attractor: stable ``Db`` and covariance ``c``.

    ``Db`` must be Hurwitz (all eigenvalue real parts strictly negative) and
    ``c`` symmetric positive definite; both are validated on construction.
    """

    drift_matrix: np.ndarray
    covariance: np.ndarray

    def __post_init__(self) -> None:
        db = np.asarray(self.drift_matrix, dtype=float)
        c = np.asarray(self.covariance, dtype=float)
        if db.ndim != 2 or db.shape[0] != db.shape[1]:
            raise ValueError(f"drift matrix must be square, got shape {db.shape}")
        d = db.shape[0]
        if c.shape != (d, d):
            raise ValueError(f"covariance must be {d}x{d}, got shape {c.shape}")
        if not (np.isfinite(db).all() and np.isfinite(c).all()):
            raise ValueError("matrices must be finite")
        if not np.allclose(c, c.T, rtol=0.0, atol=1e-12 * max(1.0, np.abs(c).max())):
            raise ValueError("covariance must be symmetric")
        c = 0.5 * (c + c.T)
        try:
            np.linalg.cholesky(c)
        except np.linalg.LinAlgError:
            raise ValueError("covariance must be positive definite") from None
        alpha = np.linalg.eigvals(db).real.max()
        if not alpha < 0:
            raise ValueError(
                f"drift matrix must be Hurwitz; largest eigenvalue real part is {alpha:.3g}"
            )
        db = db.copy()
        db.flags.writeable = False
        c = c.copy()
        c.flags.writeable = False
        object.__setattr__(self, "drift_matrix", db)
        object.__setattr__(self, "covariance", c)

    @property
    def dim(self) -> int:
        return self.drift_matrix.shape[0]

    @property
    def decay_rate(self) -> float:
        """Slowest decay rate ``min |Re eigenvalue|`` of the drift."""
        return float(-np.linalg.eigvals(self.drift_matrix).real.max())


def lyapunov_gramian(model: LinearModel) -> np.ndarray:
    """Controllability Gramian ``G`` with ``Db G + G Db^T + c = 0``.

    Solved densely through the Kronecker lift (a ``d^2 x d^2`` linear
    system), which is exact up to roundoff for the moderate dimensions this
    package targets; larger systems are refused.  The residual is verified
    against ``LYAPUNOV_RESIDUAL_TOL`` relative to ``|c|_F``.
    """
    d = model.dim
    if d > MAX_LYAPUNOV_DIM:
        raise ValueError(
            f"dense Lyapunov solve limited to dimension {MAX_LYAPUNOV_DIM}, got {d}"
        )
    db = model.drift_matrix
    c = model.covariance
    eye = np.eye(d)
    lift = np.kron(db, eye) + np.kron(eye, db)
    g = np.linalg.solve(lift, -c.reshape(-1)).reshape(d, d)
    g = 0.5 * (g + g.T)
    residual = np.linalg.norm(db @ g + g @ db.T + c, "fro")
    scale = np.linalg.norm(c, "fro")
    if residual > LYAPUNOV_RESIDUAL_TOL * scale:
        raise ArithmeticError(
            f"Lyapunov residual {residual:.3g} exceeds {LYAPUNOV_RESIDUAL_TOL:.0e} * |c|_F"
        )
    return g


def quadratic_rate(model: LinearModel, displacement) -> float:
    """Quasipotential ``0.5 r^T G^{-1} r`` of a displacement from the attractor."""
    r = np.asarray(displacement, dtype=float)
    if r.shape != (model.dim,):
        raise ValueError(f"displacement must be a vector of dimension {model.dim}")
    g = lyapunov_gramian(model)
    return 0.5 * float(r @ np.linalg.solve(g, r))


def finite_horizon_gramian(model: LinearModel, horizon: float) -> np.ndarray:
    """Truncated Gramian ``G_T = int_0^T e^{Db s} c e^{Db^T s} ds``.

    Computed by adaptive quadrature with absolute and relative tolerance
    1e-10; the integrand decays, so no overflow protection is needed.
    """
    if not (horizon > 0) or not math.isfinite(horizon):
        raise ValueError(f"horizon must be positive and finite, got {horizon}")
    db = model.drift_matrix
    c = model.covariance

    def integrand(s: float) -> np.ndarray:
        e = scipy.linalg.expm(db * s)
        return e @ c @ e.T

    out, _err = scipy.integrate.quad_vec(
        integrand, 0.0, horizon, epsabs=1e-10, epsrel=1e-10
    )
    return 0.5 * (out + out.T)


def _gramian_interval(model: LinearModel, gram: np.ndarray, s: float) -> np.ndarray:
    """``G_s`` from the exact identity ``G_s = G - e^{Db s} G e^{Db^T s}``."""
    e = scipy.linalg.expm(model.drift_matrix * s)
    return gram - e @ gram @ e.T


def finite_horizon_path(
    model: LinearModel, displacement, horizon: float, num_segments: int
) -> Path:
    """Action-minimizing path from the attractor to ``r`` in time ``T``.

    Sampled at ``num_segments + 1`` uniform times as
    ``X_s = G_s e^{Db^T (T - s)} G_T^{-1} r``; the endpoint equals ``r`` up
    to a single linear solve.  Horizons with ``decay_rate * T`` beyond the
    double-precision exponent range are refused with a suggested maximum,
    since results there could not be validated against the unstable
    propagated form.
    """
    r = np.asarray(displacement, dtype=float)
    if r.shape != (model.dim,):
        raise ValueError(f"displacement must be a vector of dimension {model.dim}")
    if not (horizon > 0) or not math.isfinite(horizon):
        raise ValueError(f"horizon must be positive and finite, got {horizon}")
    if num_segments < 2:
        raise ValueError("need at least two segments")
    rho = float(np.abs(np.linalg.eigvals(model.drift_matrix).real).max())
    if rho * horizon > MAX_EXPONENT:
        raise ValueError(
            f"horizon {horizon:g} exceeds the overflow-safe maximum "
            f"{MAX_EXPONENT / rho:.6g} for this drift"
        )
    gram = lyapunov_gramian(model)
    g_t = _gramian_interval(model, gram, horizon)
    coeff = np.linalg.solve(g_t, r)
    times = np.linspace(0.0, horizon, num_segments + 1)
    pts = np.empty((num_segments + 1, model.dim))
    dbt = model.drift_matrix.T
    for k, s in enumerate(times):
        g_s = _gramian_interval(model, gram, s)
        pts[k] = g_s @ scipy.linalg.expm(dbt * (horizon - s)) @ coeff
    return Path(horizon, pts)


def escape_profile_limit(model: LinearModel, displacement, backward_time: float) -> np.ndarray:
    """Infinite-horizon escape profile ``t`` time units before arrival at ``r``.

    The finite-horizon optimizers, reindexed by time before arrival,
    converge to ``phi(t) = G e^{Db^T t} G^{-1} r`` as the horizon grows.
    ``phi(0) = r`` and the profile decays to the attractor as ``t`` grows.
    """
    r = np.asarray(displacement, dtype=float)
    if r.shape != (model.dim,):
        raise ValueError(f"displacement must be a vector of dimension {model.dim}")
    if backward_time < 0 or not math.isfinite(backward_time):
        raise ValueError(f"backward time must be nonnegative and finite, got {backward_time}")
    gram = lyapunov_gramian(model)
    return gram @ scipy.linalg.expm(model.drift_matrix.T * backward_time) @ np.linalg.solve(gram, r)
