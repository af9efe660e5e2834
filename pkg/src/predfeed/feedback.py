"""Stabilizing feedback laws and Lyapunov-Krasovskii certificate algebra.

Given a control-Lyapunov function v0 with quadratic bounds and a feedback
with a linear gain bound, the closed loop of the original delayed plant is
exponentially stable, with explicit constants.  This module holds the
constant algebra, the functional

    v(x, phi) = v0(Y(x, phi)) + gamma * int_{-h}^{0} e^{sigma theta}
                                        |phi(theta)|^2 dtheta,

and the two concrete feedback constructions used by the built-in scenarios:
the gradient law  kappa = -k B^T grad_v0(y)  and the exact-cancellation law
for scalar plants.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .predictor import PredictorResult
from .systems import InputHistory

__all__ = [
    "LyapunovSpec",
    "LKCertificate",
    "kappa_gradient",
    "m_kappa_bound",
    "certificate",
    "lk_functional",
    "kappa_scalar",
]


@dataclass(frozen=True)
class LyapunovSpec:
    """Control-Lyapunov data for the transformed (input-delay-free) system.

    v0 is sandwiched by m_v0 |y|^2 <= v0(y) <= M_v0 |y|^2, its gradient obeys
    |grad_v0(y)| <= M_grad_v0 |y|, and the closed-loop dissipation rate w0
    obeys w0(y) >= m_w0 |y|^2.  ``k`` is the gain of the gradient feedback;
    it is ignored by feedback laws that do not use the gradient form.
    """

    v0: Callable[[np.ndarray], float]
    grad_v0: Callable[[np.ndarray], np.ndarray]
    m_v0: float
    M_v0: float
    m_w0: float
    M_grad_v0: float
    k: float = 1.0
    w0: Optional[Callable[[np.ndarray], float]] = None


@dataclass(frozen=True)
class LKCertificate:
    """Exponential-stability constants of the delayed closed loop.

    m_v and M_v sandwich the functional in the product-space norm, sigma is
    the decay rate, and the region of attraction contains the ball of radius
    ``attraction_radius`` (infinite when the growth assumptions are global).
    """

    gamma: float
    sigma: float
    m_v: float
    M_v: float
    rho: float
    M_kappa: float
    h: float
    attraction_radius: float


def kappa_gradient(spec: LyapunovSpec, B, y) -> np.ndarray:
    """Gradient feedback -k B^T grad_v0(y)."""
    B = np.asarray(B, dtype=float)
    y = np.asarray(y, dtype=float)
    return -spec.k * (B.T @ np.asarray(spec.grad_v0(y), dtype=float))


def m_kappa_bound(spec: LyapunovSpec, sup_B: float) -> float:
    """Gain bound |k| sup|B| M_grad_v0 of the gradient feedback."""
    if sup_B < 0.0:
        raise ValueError("sup_B must be nonnegative")
    return abs(spec.k) * sup_B * spec.M_grad_v0


def certificate(spec: LyapunovSpec, rho: float, M_kappa: float, h: float,
                R: float = np.inf) -> LKCertificate:
    """Assemble the closed-loop decay constants from the Lyapunov data.

    gamma = m_w0 / (2 M_kappa^2),  sigma = m_w0 / (2 M_v0),
    m_v = min(m_v0, gamma e^{-sigma h}, rho^2 gamma e^{-sigma h}) / (2 rho^2),
    M_v = gamma + rho^2 M_v0,  radius = sqrt(m_v / M_v) R / rho.
    """
    if spec.m_w0 <= 0.0:
        raise ValueError("dissipation bound m_w0 must be positive")
    if M_kappa <= 0.0:
        raise ValueError("feedback gain bound M_kappa must be positive")
    if not 0.0 < spec.m_v0 <= spec.M_v0:
        raise ValueError("need 0 < m_v0 <= M_v0")
    gamma = spec.m_w0 / (2.0 * M_kappa * M_kappa)
    sigma = spec.m_w0 / (2.0 * spec.M_v0)
    decayed = gamma * math.exp(-sigma * h)
    m_v = min(spec.m_v0, decayed, rho * rho * decayed) / (2.0 * rho * rho)
    M_v = gamma + rho * rho * spec.M_v0
    radius = math.sqrt(m_v / M_v) * R / rho if np.isfinite(R) else np.inf
    return LKCertificate(gamma=gamma, sigma=sigma, m_v=m_v, M_v=M_v, rho=rho,
                         M_kappa=M_kappa, h=h, attraction_radius=radius)


def lk_functional(spec: LyapunovSpec, cert: LKCertificate,
                  pred: PredictorResult, phi: InputHistory) -> float:
    """Functional value v0(Y) + gamma * sum e^{sigma theta_k} |phi_k|^2 dt.

    ``pred`` must be the prediction computed from the (x, phi) pair being
    evaluated; the weight is sampled at the left endpoint of each grid cell.
    """
    dt = phi.step
    thetas = -phi.h + dt * np.arange(phi.n_samples)
    weights = np.exp(cert.sigma * thetas)
    sq = np.sum(phi.samples * phi.samples, axis=1)
    return float(spec.v0(pred.y)) + cert.gamma * float(weights @ sq) * dt


def kappa_scalar(f_val: float, y: float, B_val: float) -> float:
    """Exact-cancellation feedback (-f(y) - y) / B for scalar plants.

    The transformed closed loop becomes dy/dt = -y.  A vanishing input gain
    means the construction loses its stabilizability evidence, so it is
    rejected rather than regularized.
    """
    if abs(B_val) < 1e-12:
        raise ZeroDivisionError(
            "transformed input gain is numerically zero; scalar feedback undefined")
    return (-f_val - y) / B_val
