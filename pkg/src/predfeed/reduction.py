"""Reduction of the delayed plant to a form affine in the undelayed input.

Along the prediction trajectory xi(s) the change of variable y = Y(x, phi)
turns the plant into  dy/dt = f(y) + B(y, phi) u(t),  where the effective
input matrix is assembled from a linear matrix integration:

    B(y, phi) = B1(xi(h)) + beta(h),
    beta'(s)  = Atil(s, xi(s), phi) beta(s) + Bint(-s, xi(s)),
    beta(0)   = B0(xi(0)),

with Atil collecting the drift Jacobian plus the input-weighted Jacobians of
the input matrices over the remaining window.  The integration reuses the
stored prediction trajectory on the same grid and scheme; interior RK4 stages
keep Atil and the forcing frozen at the step's left endpoint, which costs
O(step) only when those coefficients actually vary along the step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NonFiniteError
from .predictor import PredictorResult
from .systems import DelaySystem, InputHistory, _GRID_RTOL

__all__ = ["ReductionResult", "tilde_A", "compute_B", "transformed_rhs"]


@dataclass(frozen=True)
class ReductionResult:
    """Matrix trajectory beta(s_k) and the transformed input matrix."""

    beta: np.ndarray          # (N+1, n, m)
    B: np.ndarray             # (n, m) = B1(xi(h)) + beta(h)
    y: np.ndarray             # predicted state the matrix belongs to


def _window_jacobian(sys, idx0, width, frac, z, samples, thetas, dt):
    """Sum of input-weighted kernel Jacobians over the trailing window.

    Cell j of the window pairs kernel offset thetas[j] with history sample
    idx0 + j; a trailing fraction of a cell uses its left-endpoint values.
    """
    n_samp = samples.shape[0]
    out = np.zeros((sys.n, sys.n))
    for j in range(width):
        stack = np.asarray(sys.dbint(thetas[j], z), dtype=float)
        idx = min(max(idx0 + j, 0), n_samp - 1)
        out += dt * np.tensordot(samples[idx], stack, axes=(0, 0))
    if frac > 0.0 and width < n_samp:
        stack = np.asarray(sys.dbint(thetas[width], z), dtype=float)
        idx = min(max(idx0 + width, 0), n_samp - 1)
        out += frac * dt * np.tensordot(samples[idx], stack, axes=(0, 0))
    return out


def _tilde_A_grid(sys, k, z, samples, thetas, dt):
    """Atil at the grid time s_k = k*dt, window frozen on whole cells."""
    out = np.array(sys.A(z), dtype=float)
    if sys.dB1 is not None:
        stack = np.asarray(sys.dB1(z), dtype=float)
        out = out + np.tensordot(samples[k], stack, axes=(0, 0))
    if sys.dbint is not None:
        n_samp = samples.shape[0]
        out = out + _window_jacobian(sys, k, n_samp - k, 0.0, z, samples,
                                     thetas, dt)
    return out


def tilde_A(sys: DelaySystem, s, xi, phi: InputHistory) -> np.ndarray:
    """State matrix of the beta integration at window position s in [0, h].

    A(xi) plus the lagged-input-weighted Jacobian of B1 plus the window
    integral of the input-weighted kernel Jacobians over [-h, -s).
    """
    tol = _GRID_RTOL * max(sys.h, 1.0)
    if s < -tol or s > sys.h + tol:
        raise ValueError(f"window position {s} outside [0, {sys.h}]")
    z = np.asarray(xi, dtype=float)
    sys.check_dims(x=z, phi=phi)
    dt = phi.step
    n_samp = phi.n_samples
    samples = phi.samples
    thetas = -sys.h + dt * np.arange(n_samp)
    out = np.array(sys.A(z), dtype=float)
    if sys.dB1 is not None:
        idx = min(phi._index(s - sys.h), n_samp - 1)
        stack = np.asarray(sys.dB1(z), dtype=float)
        out = out + np.tensordot(samples[idx], stack, axes=(0, 0))
    if sys.dbint is not None:
        cover = (sys.h - s) / dt
        width = min(int(math.floor(cover + _GRID_RTOL)), n_samp)
        frac = max(cover - width, 0.0)
        if frac < _GRID_RTOL:
            frac = 0.0
        idx0 = int(math.floor(s / dt + _GRID_RTOL))
        out = out + _window_jacobian(sys, idx0, width, frac, z, samples,
                                     thetas, dt)
    return out


def compute_B(sys: DelaySystem, pred: PredictorResult, method=None) -> ReductionResult:
    """Integrate the matrix trajectory along a stored prediction.

    Uses the prediction's own grid, and its scheme unless overridden.
    """
    phi = pred.phi
    N = pred.n_steps
    dt = phi.step
    samples = phi.samples
    thetas = -sys.h + dt * np.arange(N)
    if method is None:
        method = pred.method
    if method not in ("euler", "rk4"):
        raise ValueError(f"unknown integration method {method!r}")
    xi = pred.xi
    beta = np.empty((N + 1, sys.n, sys.m))
    beta[0] = np.asarray(sys.B0(xi[0]), dtype=float).reshape(sys.n, sys.m)
    half = 0.5 * dt
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(N):
            z = xi[k]
            A_k = _tilde_A_grid(sys, k, z, samples, thetas, dt)
            if sys.has_bint:
                C_k = np.asarray(sys.bint(-k * dt, z), dtype=float)
            else:
                C_k = 0.0
            b = beta[k]
            if method == "euler":
                beta[k + 1] = b + dt * (A_k @ b + C_k)
            else:
                k1 = A_k @ b + C_k
                k2 = A_k @ (b + half * k1) + C_k
                k3 = A_k @ (b + half * k2) + C_k
                k4 = A_k @ (b + dt * k3) + C_k
                beta[k + 1] = b + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if not np.isfinite(beta[k + 1]).all():
                raise NonFiniteError(
                    f"input-matrix integration overflowed at s={(k + 1) * dt:.6g}")
    B = np.asarray(sys.B1(xi[N]), dtype=float).reshape(sys.n, sys.m) + beta[N]
    return ReductionResult(beta=beta, B=B, y=xi[N].copy())


def transformed_rhs(sys: DelaySystem, y, u_now, reduction: ReductionResult) -> np.ndarray:
    """Right-hand side f(y) + B(y, phi) u of the input-delay-free form.

    ``reduction`` must come from the (x, phi) pair that generated y.
    """
    y = np.asarray(y, dtype=float)
    u_now = np.atleast_1d(np.asarray(u_now, dtype=float))
    sys.check_dims(x=y, u=u_now)
    return np.asarray(sys.f(y), dtype=float) + reduction.B @ u_now
