"""Zero-future-input state prediction for input-delayed plants.

The predictor maps the current state x and the trailing input segment phi to
the state the plant would reach after one delay interval if the input were
switched off now.  It is computed by integrating the auxiliary initial-value
problem

    xi'(s) = f(xi) + B1(xi) phi(s - h)
             + int_{-h}^{-s} Bint(theta, xi) phi(s + theta) dtheta,
    xi(0) = x,        s in [0, h],

on the history grid, and reading off Y = xi(h).  Note the shrinking upper
limit -s of the window: as the prediction time advances, less of the stored
input still lies ahead of the predicted state.

Within one integration step the input terms are frozen at the step's left
grid cell.  For the piecewise-constant history this freezing is exact for the
point term, and exact for the window term as well when the kernel does not
depend on theta (the window integral is then linear in s inside the step).
Only a theta-varying kernel leaves an O(step) remainder, matching the window
quadrature's own order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NonFiniteError
from .systems import DelaySystem, InputHistory

__all__ = ["PredictorResult", "PredictorCertificate", "predict", "rho", "check_bounds"]


@dataclass(frozen=True)
class PredictorResult:
    """Prediction trajectory xi(s_k) on the grid s_k = k*step, k = 0..N."""

    xi: np.ndarray            # (N+1, n)
    phi: InputHistory
    left_ball: bool           # some xi(s_k) left the validity ball (warning)
    method: str

    @property
    def y(self):
        """Predicted state xi(h)."""
        return self.xi[-1]

    @property
    def n_steps(self):
        return self.xi.shape[0] - 1


@dataclass(frozen=True)
class PredictorCertificate:
    """Existence constant and the radius it certifies.

    ``rho`` is sqrt(2) * exp(M_f h) * max(1, h*sup|Bint| + sup|B1|).  The
    prediction exists for every (x, phi) whose product-space norm is below
    ``valid_radius`` = R / rho.  When the norm bounds were estimated by
    sampling rather than supplied, ``certified`` is False.
    """

    rho: float
    valid_radius: float
    sup_b1: float
    sup_bint: float
    certified: bool


def predict(sys: DelaySystem, x, phi: InputHistory, method="euler") -> PredictorResult:
    """Integrate the prediction trajectory and return it with its endpoint.

    Raises NonFiniteError if the trajectory overflows.  Leaving the validity
    ball only sets the ``left_ball`` flag: the existence bound is sufficient,
    not necessary.
    """
    x = np.asarray(x, dtype=float)
    sys.check_dims(x=x, phi=phi)
    if method not in ("euler", "rk4"):
        raise ValueError(f"unknown integration method {method!r}")
    n = sys.n
    N = phi.n_samples
    dt = phi.step
    h = sys.h
    samples = phi.samples
    f = sys.f
    B1 = sys.B1
    bint = sys.bint
    has_bint = sys.bint is not None
    theta_const = sys.bint_theta_const
    R2 = sys.R * sys.R

    if has_bint and theta_const:
        # tails[k] = exact integral of phi over [s_k - h, 0)
        tails = np.zeros((N + 1, sys.m))
        tails[:N] = np.cumsum(samples[::-1], axis=0)[::-1] * dt
    thetas = -h + dt * np.arange(N)

    def rhs(k, tau, z):
        dz = np.asarray(f(z), dtype=float) + B1(z) @ samples[k]
        if has_bint:
            if theta_const:
                dz = dz + bint(-h, z) @ (tails[k] - tau * samples[k])
            else:
                acc = np.zeros(n)
                for j in range(N - k):
                    acc += np.asarray(bint(thetas[j], z), dtype=float) @ samples[k + j]
                dz = dz + dt * acc
        return dz

    xi = np.empty((N + 1, n))
    xi[0] = x
    left_ball = bool(np.isfinite(R2) and x @ x > R2)
    half = 0.5 * dt
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(N):
            z = xi[k]
            if method == "euler":
                xi[k + 1] = z + dt * rhs(k, 0.0, z)
            else:
                k1 = rhs(k, 0.0, z)
                k2 = rhs(k, half, z + half * k1)
                k3 = rhs(k, half, z + half * k2)
                k4 = rhs(k, dt, z + dt * k3)
                xi[k + 1] = z + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if not np.isfinite(xi[k + 1]).all():
                raise NonFiniteError(
                    f"prediction overflowed at s={(k + 1) * dt:.6g} (step {k + 1}/{N})")
            if np.isfinite(R2) and xi[k + 1] @ xi[k + 1] > R2:
                left_ball = True
    return PredictorResult(xi=xi, phi=phi, left_ball=left_ball, method=method)


def _spectral_norm(mat):
    return float(np.linalg.norm(np.asarray(mat, dtype=float), 2))


def rho(sys: DelaySystem, sample_radius=2.0, n_x=128, n_theta=17,
        seed=0) -> PredictorCertificate:
    """Existence constant for the prediction map.

    Uses the norm bounds stored on the system when present; otherwise
    estimates them by sampling states in the validity ball (capped at
    ``sample_radius`` when the ball is unbounded), which yields an estimate,
    not a certificate.
    """
    certified = True
    if sys.sup_b1 is not None:
        sup_b1 = sys.sup_b1
    else:
        certified = False
        rng = np.random.default_rng(seed)
        radius = sys.R if np.isfinite(sys.R) else sample_radius
        pts = _ball_points(rng, sys.n, radius, n_x)
        sup_b1 = max(_spectral_norm(sys.B1(p)) for p in pts)
    if not sys.has_bint:
        sup_bint = 0.0
    elif sys.sup_bint is not None:
        sup_bint = sys.sup_bint
    else:
        certified = False
        rng = np.random.default_rng(seed + 1)
        radius = sys.R if np.isfinite(sys.R) else sample_radius
        pts = _ball_points(rng, sys.n, radius, n_x)
        grid = np.linspace(-sys.h, 0.0, n_theta)
        sup_bint = max(_spectral_norm(sys.bint(th, p)) for th in grid for p in pts)
    val = math.sqrt(2.0) * math.exp(sys.M_f * sys.h) \
        * max(1.0, sys.h * sup_bint + sup_b1)
    valid = sys.R / val if np.isfinite(sys.R) else np.inf
    return PredictorCertificate(rho=val, valid_radius=valid, sup_b1=sup_b1,
                                sup_bint=sup_bint, certified=certified)


def _ball_points(rng, n, radius, count):
    v = rng.standard_normal((count, n))
    v /= np.maximum(np.linalg.norm(v, axis=1, keepdims=True), 1e-300)
    r = radius * rng.random((count, 1)) ** (1.0 / n)
    return v * r


def check_bounds(sys: DelaySystem, x, phi: InputHistory, result: PredictorResult,
                 rho_val: float) -> bool:
    """Both two-sided norm estimates between (x, phi) and the prediction.

    True iff |x|^2 <= rho^2 (|Y|^2 + |phi|^2) and
    |Y|^2 <= rho^2 (|x|^2 + |phi|^2), up to float rounding slack.
    """
    x = np.asarray(x, dtype=float)
    nx = float(x @ x)
    ny = float(result.y @ result.y)
    np2 = phi.sq_l2_norm()
    r2 = rho_val * rho_val
    slack = 1.0 + 1e-12
    return nx <= r2 * (ny + np2) * slack and ny <= r2 * (nx + np2) * slack
