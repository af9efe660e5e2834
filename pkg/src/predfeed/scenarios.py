"""Built-in plants with their feedback designs and analytic cross-checks.

Four named scenarios are registered:

``scalar``    one-dimensional plant with same-sign input coefficients and the
              exact-cancellation feedback; every certificate constant has a
              closed-form interval bound.
``cascade``   planar plant whose prediction map is available in closed form
              and whose state-plus-history transformation to a stabilizable
              cascade happens to be linear; ships both the cascade controller
              and a gradient controller for comparison.
``pendulum``  inverted pendulum driven by the sum of the current and lagged
              torque; feedback u = -B^T y with the gain certified through a
              ring-sector bound on the input-matrix trajectory.
``linear``    constant-coefficient plant with a distributed channel and a
              pole-placing gain on the predicted state; exercises the
              closed-form path end to end.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .feedback import LKCertificate, LyapunovSpec, certificate, m_kappa_bound
from .linref import LinearDelaySystem, linear_transformed_input
from .predictor import rho
from .simulate import (GradientController, LinearGainController,
                       ScalarPredictorController)
from .systems import DelaySystem, InputHistory

__all__ = [
    "Scenario",
    "get_scenario",
    "list_scenarios",
    "ex2_explicit_predictor",
    "ex2_z_transform",
    "ex2_y_to_z",
    "ex2_V",
    "ex2_dV_dz2",
    "ex2_u_tilde",
    "ex2_feedback",
    "ex2_cascade_rhs",
    "ex2_transformed_input",
    "pendulum_alpha",
    "pendulum_sector",
    "pendulum_b_samples",
    "pendulum_negativity",
    "CascadeController",
]


@dataclass
class Scenario:
    """A registered plant with its controller and optional certificate data."""

    name: str
    system: DelaySystem
    controller: object
    lyapunov: Optional[LyapunovSpec] = None
    lk_certificate: Optional[LKCertificate] = None
    linear: Optional[LinearDelaySystem] = None
    V: Optional[np.ndarray] = None
    oracles: dict = field(default_factory=dict)
    description: str = ""
    certified_constants: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# closed-form oracles for the cascade scenario
# ---------------------------------------------------------------------------

def ex2_explicit_predictor(x, phi: InputHistory, h) -> np.ndarray:
    """Closed-form prediction for the plant x1' = x2^2 + u(t-h), x2' = x2 + u."""
    x = np.asarray(x, dtype=float)
    return np.array([
        x[0] + 0.5 * (math.exp(2.0 * h) - 1.0) * x[1] ** 2 + phi.integral()[0],
        math.exp(h) * x[1],
    ])


def ex2_z_transform(x, phi: InputHistory) -> np.ndarray:
    """Direct state-plus-history change of coordinates; linear despite the plant."""
    x = np.asarray(x, dtype=float)
    return np.array([x[0] - x[1] + phi.integral()[0], x[1]])


def ex2_y_to_z(y, h) -> np.ndarray:
    """Second leg of the transformation, from predicted state to cascade state."""
    y = np.asarray(y, dtype=float)
    return np.array([
        y[0] - math.exp(-h) * y[1] + 0.5 * (math.exp(-2.0 * h) - 1.0) * y[1] ** 2,
        math.exp(-h) * y[1],
    ])


def ex2_V(z) -> float:
    """Positive definite function (z1 + z2 (z2 - 2) / 2)^2 + z2^2."""
    z = np.asarray(z, dtype=float)
    return float((z[0] + 0.5 * z[1] * (z[1] - 2.0)) ** 2 + z[1] ** 2)


def ex2_dV_dz2(z) -> float:
    z = np.asarray(z, dtype=float)
    return float(2.0 * (z[0] + 0.5 * z[1] * (z[1] - 2.0)) * (z[1] - 1.0) + 2.0 * z[1])


def ex2_u_tilde(z) -> float:
    """Damping input of the cascade form."""
    return -ex2_dV_dz2(z)


def ex2_feedback(z) -> float:
    """Input of the original plant: u = -2 z2 + u_tilde."""
    z = np.asarray(z, dtype=float)
    return -2.0 * z[1] + ex2_u_tilde(z)


def ex2_cascade_rhs(z, u_tilde=None) -> np.ndarray:
    """Cascade dynamics z1' = z2^2 - z2, z2' = -z2 + u_tilde."""
    z = np.asarray(z, dtype=float)
    if u_tilde is None:
        u_tilde = ex2_u_tilde(z)
    return np.array([z[1] ** 2 - z[1], -z[1] + float(u_tilde)])


def ex2_transformed_input(y, h) -> np.ndarray:
    """Input matrix of the transformed cascade plant, (1 + (e^h - e^-h) y2, e^h)."""
    y = np.asarray(y, dtype=float)
    return np.array([[1.0 + (math.exp(h) - math.exp(-h)) * y[1]], [math.exp(h)]])


class CascadeController:
    """Feedback of the original plant through the linear z-coordinates."""

    needs_prediction = False
    needs_reduction = False

    def __call__(self, x, phi, pred, red):
        return np.array([ex2_feedback(ex2_z_transform(x, phi))])


# ---------------------------------------------------------------------------
# pendulum sector analysis
# ---------------------------------------------------------------------------

def pendulum_alpha(y1) -> float:
    """sin(y1)/y1 with the removable singularity filled in at zero."""
    return float(np.sinc(np.asarray(y1, dtype=float) / np.pi))


def pendulum_sector(h):
    """Ring-and-sector bounds on the input-matrix trajectory endpoint.

    For any state trajectory the squared radius beta1^2 + beta2^2 stays in
    [1, e^{2h}] and the ratio beta1/beta2 in [tanh h, tan h]; requires
    h < pi/2 for the upper ratio to stay finite.
    """
    if h < 0.0 or h >= math.pi / 2.0:
        raise ValueError("sector bound requires 0 <= h < pi/2")
    return {
        "r2_min": 1.0,
        "r2_max": math.exp(2.0 * h),
        "ratio_min": math.tanh(h),
        "ratio_max": math.tan(h),
    }


def pendulum_b_samples(h, n_radius=33, n_ratio=33) -> np.ndarray:
    """Deterministic mesh of transformed input vectors over the shifted sector.

    beta is swept over the ring sector (radius and slope bounds inclusive, so
    the corners are covered) and shifted by the lagged-input gain (0, 1).
    Returns an (n_radius * n_ratio, 2) array.
    """
    sec = pendulum_sector(h)
    r = np.sqrt(np.linspace(sec["r2_min"], sec["r2_max"], n_radius))
    q = np.linspace(sec["ratio_min"], sec["ratio_max"], n_ratio)
    rr, qq = np.meshgrid(r, q, indexing="ij")
    b2 = rr / np.sqrt(1.0 + qq * qq)
    b1 = qq * b2
    out = np.stack([b1.ravel(), 1.0 + b2.ravel()], axis=1)
    return out


def pendulum_negativity(V, k, h, alpha_grid=None, b_samples=None):
    """Worst eigenvalue of V^-1 F^T + F V^-1 - 4k B B^T over the design grid.

    F is the sector form [[0, 1], [alpha, 0]] with alpha swept over the
    drift's sector range, B over the shifted ring sector.  Returns
    (all_negative, worst_eigenvalue).
    """
    V = np.asarray(V, dtype=float)
    Vinv = np.linalg.inv(V)
    if alpha_grid is None:
        alpha_grid = np.arange(-0.22, 1.0 + 1e-12, 0.01)
    if b_samples is None:
        b_samples = pendulum_b_samples(h)
    alpha_grid = np.asarray(alpha_grid, dtype=float)
    b_samples = np.asarray(b_samples, dtype=float)
    n_a = alpha_grid.shape[0]
    n_b = b_samples.shape[0]
    F = np.zeros((n_a, 2, 2))
    F[:, 0, 1] = 1.0
    F[:, 1, 0] = alpha_grid
    sym = Vinv @ F.transpose(0, 2, 1) + F @ Vinv   # (n_a, 2, 2)
    bbt = b_samples[:, :, None] * b_samples[:, None, :]        # (n_b, 2, 2)
    mats = sym[:, None, :, :] - 4.0 * float(k) * bbt[None, :, :, :]
    eigs = np.linalg.eigvalsh(mats.reshape(n_a * n_b, 2, 2))
    worst = float(eigs[:, -1].max())
    return worst < 0.0, worst


# ---------------------------------------------------------------------------
# scenario construction
# ---------------------------------------------------------------------------

def _build_scalar() -> Scenario:
    # drift -x + 0.25 sin x: |f| <= 1.25 |x| everywhere, f(0) = 0
    f = lambda x: np.array([-x[0] + 0.25 * math.sin(x[0])])
    A = lambda x: np.array([[-1.0 + 0.25 * math.cos(x[0])]])
    b0, b1, bint = 1.0, 0.5, 0.5
    h = 1.0
    sys = DelaySystem(
        n=1, m=1, h=h, f=f, A=A,
        B0=np.array([[b0]]), B1=np.array([[b1]]),
        bint=lambda _th, _x: np.array([[bint]]), bint_theta_const=True,
        R=np.inf, M_f=1.25, sup_b1=b1, sup_bint=bint, name="scalar")
    # The matrix trajectory obeys beta' = a(xi) beta + bint with
    # a in [-1.25, -0.75], beta(0) = b0, so comparison solutions pin
    # beta(h) between the two constant-coefficient extremes.
    lo = bint / 1.25 + (b0 - bint / 1.25) * math.exp(-1.25 * h)
    hi = bint / 0.75 + (b0 - bint / 0.75) * math.exp(-0.75 * h)
    b_lo, b_hi = b1 + lo, b1 + hi
    # cancellation feedback: |u| = |f(y) + y| / B <= 2.25 |y| / B_min,
    # and the transformed closed loop is y' = -y, so w0 = 2 y^2 exactly
    m_kappa = (sys.M_f + 1.0) / b_lo
    lyap = LyapunovSpec(
        v0=lambda y: float(y @ y), grad_v0=lambda y: 2.0 * np.asarray(y),
        m_v0=1.0, M_v0=1.0, m_w0=2.0, M_grad_v0=2.0, k=1.0,
        w0=lambda y: 2.0 * float(np.asarray(y) @ np.asarray(y)))
    pc = rho(sys)
    cert = certificate(lyap, pc.rho, m_kappa, h, R=sys.R)
    return Scenario(
        name="scalar", system=sys, controller=ScalarPredictorController(sys),
        lyapunov=lyap, lk_certificate=cert,
        oracles={"b_range": (b_lo, b_hi)},
        description="scalar plant, same-sign input coefficients, "
                    "exact-cancellation feedback",
        certified_constants={"rho": "analytic", "M_kappa": "analytic",
                             "m_w0": "analytic"})


def _build_cascade() -> Scenario:
    h = 1.0
    R = 3.0
    f = lambda x: np.array([x[1] * x[1], x[1]])
    A = lambda x: np.array([[0.0, 2.0 * x[1]], [0.0, 1.0]])
    sys = DelaySystem(
        n=2, m=1, h=h, f=f, A=A,
        B0=np.array([[0.0], [1.0]]), B1=np.array([[1.0], [0.0]]),
        R=R, M_f=math.sqrt(R * R + 1.0), sup_b1=1.0, name="cascade")

    def grad_v0_y(y):
        z = ex2_y_to_z(y, h)
        dv1 = 2.0 * (z[0] + 0.5 * z[1] * (z[1] - 2.0))
        dv2 = ex2_dV_dz2(z)
        dz1_dy = np.array([1.0, -math.exp(-h) + (math.exp(-2.0 * h) - 1.0) * y[1]])
        dz2_dy = np.array([0.0, math.exp(-h)])
        return dv1 * dz1_dy + dv2 * dz2_dy

    return Scenario(
        name="cascade", system=sys, controller=CascadeController(),
        oracles={
            "explicit_predictor": ex2_explicit_predictor,
            "z_transform": ex2_z_transform,
            "transformed_input": ex2_transformed_input,
            "gradient_controller": GradientController(k=0.5, grad_v0=grad_v0_y),
        },
        description="planar plant with closed-form prediction and a linear "
                    "overall transformation to a stabilizable cascade")


def _build_pendulum() -> Scenario:
    h = math.pi / 4.0
    f = lambda x: np.array([x[1], math.sin(x[0])])
    A = lambda x: np.array([[0.0, 1.0], [math.cos(x[0]), 0.0]])
    column = np.array([[0.0], [1.0]])
    sys = DelaySystem(
        n=2, m=1, h=h, f=f, A=A, B0=column, B1=column,
        R=np.inf, M_f=1.0, sup_b1=1.0, name="pendulum")
    b_samples = pendulum_b_samples(h)
    # dissipation rate of u = -B^T y, written as the gradient law with
    # gain 1/2 on v0 = |y|^2; the bound is the sampled minimum over the
    # sector estimate of the input-matrix range (not a certificate)
    _, worst = pendulum_negativity(np.eye(2), 0.5, h, b_samples=b_samples)
    m_w0 = -worst
    if m_w0 <= 0.0:
        raise RuntimeError("pendulum dissipation estimate lost definiteness")

    def w0(y):
        y = np.asarray(y, dtype=float)
        by = b_samples @ y
        f_term = 2.0 * y[1] * (y[0] + math.sin(y[0]))
        return float(np.min(2.0 * by * by) - f_term)

    lyap = LyapunovSpec(
        v0=lambda y: float(np.asarray(y) @ np.asarray(y)),
        grad_v0=lambda y: 2.0 * np.asarray(y, dtype=float),
        m_v0=1.0, M_v0=1.0, m_w0=m_w0, M_grad_v0=2.0, k=0.5, w0=w0)
    sup_B = 1.0 + math.exp(h)      # ring radius shifted by the lagged gain
    m_kappa = m_kappa_bound(lyap, sup_B)
    pc = rho(sys)
    cert = certificate(lyap, pc.rho, m_kappa, h, R=sys.R)
    return Scenario(
        name="pendulum", system=sys,
        controller=GradientController(k=lyap.k, grad_v0=lyap.grad_v0),
        lyapunov=lyap, lk_certificate=cert,
        oracles={"b_samples": b_samples, "sector": pendulum_sector(h)},
        description="inverted pendulum with current plus lagged torque, "
                    "gradient feedback u = -B^T y",
        certified_constants={"rho": "analytic", "M_kappa": "analytic",
                             "m_w0": "sampled estimate"})


def _build_linear() -> Scenario:
    import scipy.linalg

    lin = LinearDelaySystem(
        A=np.array([[0.0, 1.0], [1.0, 0.0]]),
        B0=np.array([[0.0], [1.0]]),
        B1=np.array([[0.0], [1.0]]),
        bint=np.array([[0.0], [0.5]]),
        h=0.5, name="linear")
    sys = lin.to_delay_system(name="linear")
    b_eff = linear_transformed_input(lin)
    # place the transformed closed-loop poles at -1 and -2: for this
    # off-diagonal A the trace and determinant targets are linear in K
    b1, b2 = float(b_eff[0, 0]), float(b_eff[1, 0])
    k_vec = np.linalg.solve(np.array([[b1, b2], [b2, b1]]),
                            np.array([-3.0, -3.0]))
    K = k_vec[None, :]
    a_cl = lin.A + b_eff @ K
    V = scipy.linalg.solve_continuous_lyapunov(a_cl.T, -np.eye(2))
    eigV = np.linalg.eigvalsh(V)
    lyap = LyapunovSpec(
        v0=lambda y, _V=V: float(np.asarray(y) @ _V @ np.asarray(y)),
        grad_v0=lambda y, _V=V: 2.0 * (_V @ np.asarray(y, dtype=float)),
        m_v0=float(eigV[0]), M_v0=float(eigV[-1]),
        m_w0=1.0, M_grad_v0=2.0 * float(eigV[-1]), k=1.0,
        w0=lambda y: float(np.asarray(y) @ np.asarray(y)))
    pc = rho(sys)
    cert = certificate(lyap, pc.rho, float(np.linalg.norm(K, 2)), lin.h, R=sys.R)
    return Scenario(
        name="linear", system=sys, controller=LinearGainController(K),
        lyapunov=lyap, lk_certificate=cert, linear=lin, V=V,
        oracles={"K": K, "b_eff": b_eff},
        description="constant-coefficient plant with distributed channel, "
                    "pole-placing gain on the predicted state",
        certified_constants={"rho": "analytic", "M_kappa": "analytic",
                             "m_w0": "analytic"})


_FACTORIES = {
    "scalar": _build_scalar,
    "cascade": _build_cascade,
    "pendulum": _build_pendulum,
    "linear": _build_linear,
}
_CACHE: dict = {}


def list_scenarios():
    """Names of the registered scenarios, sorted."""
    return sorted(_FACTORIES)


def get_scenario(name: str) -> Scenario:
    """Look up a scenario by name, building it on first use."""
    if name not in _FACTORIES:
        known = ", ".join(list_scenarios())
        raise KeyError(f"unknown scenario {name!r} (known: {known})")
    if name not in _CACHE:
        _CACHE[name] = _FACTORIES[name]()
    return _CACHE[name]
