"""Fixed-step closed-loop and open-loop simulation with a delayed-input buffer.

Each step runs the control pipeline on the pre-update state (predict the
delay-compensated state, integrate the input-matrix trajectory, evaluate the
feedback), advances the plant one step with the control held constant, and
pushes the applied value into the input history.  The step is snapped to an
exact divisor of the delay so the ring buffer always covers the window with
an integer number of cells.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import NonFiniteError
from .feedback import LKCertificate, LyapunovSpec, lk_functional
from .predictor import predict
from .reduction import compute_B
from .systems import DelaySystem, InputHistory, plant_rhs

__all__ = [
    "SimConfig",
    "SimTrace",
    "ZeroController",
    "GradientController",
    "ScalarPredictorController",
    "LinearGainController",
    "control_step",
    "simulate",
    "decay_check",
    "DecayReport",
    "snap_step",
    "write_trace_csv",
    "summary_line",
]

FLAG_LEFT_BALL = 1          # prediction trajectory left the validity ball
FLAG_PREDICTOR_WARN = 2     # reserved for predictor-level warnings


def snap_step(h, dt):
    """Largest-N exact divisor of h closest to the requested step.

    Returns (n_cells, effective_dt).  The effective step differs from the
    request only when the request does not divide the delay.
    """
    if not dt > 0.0:
        raise ValueError("step must be positive")
    if dt > h:
        raise ValueError("step must not exceed the delay")
    n = max(1, int(round(h / dt)))
    return n, h / n


@dataclass
class SimConfig:
    """Run description: step, horizon, initial data, scheme, and recordings."""

    dt: float
    duration: float
    x0: np.ndarray
    u0: object = 0.0                 # constant input value or (N, m) samples
    integrator: str = "euler"
    record_y: bool = False
    record_v: bool = False
    record_b: bool = False
    record_envelope: bool = False

    def __post_init__(self):
        self.x0 = np.atleast_1d(np.asarray(self.x0, dtype=float))
        if self.integrator not in ("euler", "rk4"):
            raise ValueError(f"unknown integrator {self.integrator!r}")
        if not self.duration > 0.0:
            raise ValueError("duration must be positive")


@dataclass
class SimTrace:
    """Per-step records of a run.  Arrays are truncated on numerical abort."""

    t: np.ndarray                    # (K+1,)
    x: np.ndarray                    # (K+1, n)
    u: np.ndarray                    # (K+1, m), control computed at each state
    hist_sq: np.ndarray              # (K+1,), squared L2 norm of the window
    flags: np.ndarray                # (K+1,) int
    dt: float
    y: Optional[np.ndarray] = None   # (K+1, n)
    v: Optional[np.ndarray] = None   # (K+1,)
    b: Optional[np.ndarray] = None   # (K+1, n, m)
    envelope: Optional[np.ndarray] = None
    aborted: bool = False
    abort_reason: str = ""
    name: str = ""

    @property
    def n_records(self):
        return self.t.shape[0]

    def final_state_norm(self):
        return float(np.linalg.norm(self.x[-1]))

    def pair_sq_norm(self):
        """|x|^2 + |u_t|^2 at every record."""
        return np.sum(self.x * self.x, axis=1) + self.hist_sq


class ZeroController:
    """Open loop: always applies zero input."""

    needs_prediction = False
    needs_reduction = False

    def __init__(self, m):
        self._u = np.zeros(int(m))

    def __call__(self, x, phi, pred, red):
        return self._u


class GradientController:
    """u = -k B^T grad_v0(y) evaluated at the delay-compensated state."""

    needs_prediction = True
    needs_reduction = True

    def __init__(self, k, grad_v0):
        self.k = float(k)
        self.grad_v0 = grad_v0

    def __call__(self, x, phi, pred, red):
        return -self.k * (red.B.T @ np.asarray(self.grad_v0(pred.y), dtype=float))


class ScalarPredictorController:
    """Exact cancellation (-f(y) - y) / B for scalar plants."""

    needs_prediction = True
    needs_reduction = True

    def __init__(self, sys):
        self.sys = sys

    def __call__(self, x, phi, pred, red):
        from .feedback import kappa_scalar
        y = float(pred.y[0])
        f_val = float(np.asarray(self.sys.f(pred.y), dtype=float)[0])
        return np.array([kappa_scalar(f_val, y, float(red.B[0, 0]))])


class LinearGainController:
    """u = K y on the delay-compensated state."""

    needs_prediction = True
    needs_reduction = False

    def __init__(self, K):
        self.K = np.atleast_2d(np.asarray(K, dtype=float))

    def __call__(self, x, phi, pred, red):
        return self.K @ pred.y


def control_step(sys: DelaySystem, controller, x, phi: InputHistory,
                 method="euler"):
    """One pass of the control pipeline at the current (x, phi).

    Returns (u, prediction, reduction); the latter two are None when the
    controller does not need them.
    """
    pred = None
    red = None
    if controller.needs_prediction or controller.needs_reduction:
        pred = predict(sys, x, phi, method=method)
    if controller.needs_reduction:
        red = compute_B(sys, pred)
    u = np.atleast_1d(np.asarray(controller(x, phi, pred, red), dtype=float))
    if u.shape != (sys.m,):
        raise ValueError(f"controller returned shape {u.shape}, expected ({sys.m},)")
    return u, pred, red


def _history_from_config(sys, cfg, n_cells):
    u0 = cfg.u0
    if np.isscalar(u0) or (isinstance(u0, np.ndarray) and u0.ndim == 0):
        return InputHistory.constant(np.full(sys.m, float(u0)), sys.h, n_cells)
    arr = np.asarray(u0, dtype=float)
    if arr.ndim == 1 and arr.size == sys.m:
        return InputHistory.constant(arr, sys.h, n_cells)
    hist = InputHistory(arr, sys.h)
    if hist.n_samples != n_cells:
        if n_cells % hist.n_samples == 0:
            hist = hist.refine(n_cells // hist.n_samples)
        else:
            raise ValueError("initial history sample count does not divide the grid")
    if hist.m != sys.m:
        raise ValueError("initial history input dimension mismatch")
    return hist


def simulate(sys: DelaySystem, controller, cfg: SimConfig,
             lyap: Optional[LyapunovSpec] = None,
             cert: Optional[LKCertificate] = None) -> SimTrace:
    """Run the closed loop (or open loop with ZeroController) for cfg.duration.

    The control is computed from the pre-update state and held constant over
    the step (zero-order hold).  A numerical overflow aborts the run and
    returns the partial trace with ``aborted`` set.
    """
    n_cells, dt = snap_step(sys.h, cfg.dt)
    steps = max(1, int(round(cfg.duration / dt)))
    phi = _history_from_config(sys, cfg, n_cells)
    x = np.array(cfg.x0, dtype=float)
    sys.check_dims(x=x, phi=phi)
    want_pipeline = cfg.record_y or cfg.record_v or cfg.record_b
    if (cfg.record_v or cfg.record_envelope) and cert is None:
        raise ValueError("recording v or envelope requires a certificate")
    if cfg.record_v and lyap is None:
        raise ValueError("recording v requires the Lyapunov data")

    K = steps
    t = np.arange(K + 1) * dt
    xs = np.empty((K + 1, sys.n))
    us = np.empty((K + 1, sys.m))
    hist_sq = np.empty(K + 1)
    flags = np.zeros(K + 1, dtype=int)
    ys = np.empty((K + 1, sys.n)) if cfg.record_y else None
    vs = np.empty(K + 1) if cfg.record_v else None
    bs = np.empty((K + 1, sys.n, sys.m)) if cfg.record_b else None

    aborted = False
    reason = ""
    hist_energy = phi.sq_l2_norm()
    k = 0
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(K + 1):
            xs[k] = x
            hist_sq[k] = hist_energy
            try:
                u, pred, red = control_step(sys, controller, x, phi,
                                            method=cfg.integrator)
                if pred is None and want_pipeline:
                    pred = predict(sys, x, phi, method=cfg.integrator)
                if red is None and cfg.record_b:
                    red = compute_B(sys, pred)
            except NonFiniteError as exc:
                aborted = True
                reason = str(exc)
                us[k] = np.nan
                break
            us[k] = u
            if pred is not None and pred.left_ball:
                flags[k] |= FLAG_LEFT_BALL
            if cfg.record_y:
                ys[k] = pred.y
            if cfg.record_v:
                vs[k] = lk_functional(lyap, cert, pred, phi)
            if cfg.record_b:
                bs[k] = red.B
            if k == K:
                break
            # advance the plant with zero-order-hold control
            if cfg.integrator == "euler":
                x = x + dt * plant_rhs(sys, x, phi, u)
            else:
                k1 = plant_rhs(sys, x, phi, u)
                k2 = plant_rhs(sys, x + 0.5 * dt * k1, phi, u)
                k3 = plant_rhs(sys, x + 0.5 * dt * k2, phi, u)
                k4 = plant_rhs(sys, x + dt * k3, phi, u)
                x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if not np.isfinite(x).all():
                aborted = True
                reason = f"state overflowed at t={t[k + 1]:.6g}"
                break
            oldest = phi.samples[0]
            hist_energy += (float(u @ u) - float(oldest @ oldest)) * phi.step
            phi = phi.push(u)

    end = k + 1
    envelope = None
    if cfg.record_envelope:
        lhs0 = float(xs[0] @ xs[0]) + hist_sq[0]
        envelope = (cert.M_v / cert.m_v) * np.exp(-cert.sigma * t[:end]) * lhs0
    return SimTrace(
        t=t[:end], x=xs[:end], u=us[:end], hist_sq=hist_sq[:end],
        flags=flags[:end], dt=dt,
        y=ys[:end] if ys is not None else None,
        v=vs[:end] if vs is not None else None,
        b=bs[:end] if bs is not None else None,
        envelope=envelope, aborted=aborted, abort_reason=reason,
        name=sys.name)


@dataclass(frozen=True)
class DecayReport:
    """Outcome of the exponential-envelope check along a trace."""

    passed: bool
    max_margin: float       # worst (lhs - envelope) / initial pair norm
    worst_time: float
    tol: float


def decay_check(trace: SimTrace, cert: LKCertificate, tol=1e-6) -> DecayReport:
    """Verify |x(t)|^2 + |u_t|^2 <= (M_v/m_v) e^{-sigma t} (initial) along a trace.

    The margin is normalized by the initial pair norm; the check passes when
    the worst margin stays below ``tol``.
    """
    lhs = trace.pair_sq_norm()
    lhs0 = lhs[0]
    if lhs0 == 0.0:
        return DecayReport(passed=True, max_margin=0.0, worst_time=0.0, tol=tol)
    env = (cert.M_v / cert.m_v) * np.exp(-cert.sigma * trace.t) * lhs0
    margins = (lhs - env) / lhs0
    worst = int(np.argmax(margins))
    return DecayReport(passed=bool(margins[worst] <= tol),
                       max_margin=float(margins[worst]),
                       worst_time=float(trace.t[worst]), tol=tol)


def _fmt(value):
    return format(float(value), ".17g")


def summary_line(trace: SimTrace, report: Optional[DecayReport] = None) -> str:
    """Machine-readable one-line run summary."""
    parts = [
        f"final_state_norm={_fmt(trace.final_state_norm())}",
        f"steps={trace.n_records - 1}",
        f"dt={_fmt(trace.dt)}",
        f"aborted={int(trace.aborted)}",
    ]
    if report is not None:
        parts.append(f"decay={'PASS' if report.passed else 'FAIL'}")
        parts.append(f"decay_margin={_fmt(report.max_margin)}")
    return "# summary: " + " ".join(parts)


def write_trace_csv(trace: SimTrace, path, report: Optional[DecayReport] = None):
    """Write one row per step: t, states, inputs, then optional records.

    The column layout is t, x1..xn, u1..um, then y1..yn, v, envelope when
    recorded, and a flags column last.  Full decimal precision; a final
    ``# summary:`` comment line duplicates the run verdicts.
    """
    n = trace.x.shape[1]
    m = trace.u.shape[1]
    cols = ["t"] + [f"x{i + 1}" for i in range(n)] + [f"u{j + 1}" for j in range(m)]
    blocks = [trace.t[:, None], trace.x, trace.u]
    if trace.y is not None:
        cols += [f"y{i + 1}" for i in range(n)]
        blocks.append(trace.y)
    if trace.v is not None:
        cols.append("v")
        blocks.append(trace.v[:, None])
    if trace.envelope is not None:
        cols.append("envelope")
        blocks.append(trace.envelope[:, None])
    cols.append("flags")
    data = np.hstack(blocks)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(cols) + "\n")
        for row, flag in zip(data, trace.flags):
            fh.write(",".join(_fmt(v) for v in row) + f",{int(flag)}\n")
        fh.write(summary_line(trace, report) + "\n")
