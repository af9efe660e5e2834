"""Plant definitions for control-affine systems fed through delayed input channels.

The plant family handled by this package is

    dx/dt = f(x) + B0(x) u(t) + B1(x) u(t - h)
            + int_{-h}^{0} Bint(theta, x) u(t + theta) dtheta

with a drift f vanishing at the origin and growing at most linearly inside a
validity ball of radius R (possibly infinite).  The trailing input segment on
[t - h, t) is carried by :class:`InputHistory`, a uniform-grid
piecewise-constant buffer with ring-push semantics.  All types here are value
semantic: operations never mutate their arguments, so instances can be shared
freely across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

__all__ = [
    "InputHistory",
    "DelaySystem",
    "StateHistoryPair",
    "l2_norm",
    "plant_rhs",
    "distributed_term",
]

# Slack for float comparisons on grid arithmetic (index snapping, h = N * dt).
_GRID_RTOL = 1e-9


def _as_state_fn(value, name):
    """Accept either a callable of the state or a constant array."""
    if callable(value):
        return value
    arr = np.array(value, dtype=float)
    arr.setflags(write=False)
    return lambda _x, _arr=arr: _arr


class InputHistory:
    """Piecewise-constant input segment on [-h, 0) sampled on a uniform grid.

    ``samples[k]`` is the input value on the subinterval
    ``[-h + k*step, -h + (k+1)*step)`` (left-endpoint convention).  The buffer
    length times the step always equals the covered window h exactly; pushing
    a new sample drops the oldest one and slides the window by one step.
    """

    __slots__ = ("_samples", "_h")

    def __init__(self, samples, h):
        arr = np.array(samples, dtype=float)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.ndim != 2 or arr.shape[0] == 0:
            raise ValueError("samples must be a nonempty (N, m) array")
        if not np.isfinite(arr).all():
            raise ValueError("history samples must be finite")
        h = float(h)
        if not h > 0.0:
            raise ValueError("window length h must be positive")
        arr.setflags(write=False)
        self._samples = arr
        self._h = h

    @classmethod
    def constant(cls, value, h, n_samples):
        """History equal to a fixed input value on the whole window."""
        row = np.atleast_1d(np.asarray(value, dtype=float))
        return cls(np.tile(row, (int(n_samples), 1)), h)

    @classmethod
    def zeros(cls, m, h, n_samples):
        return cls(np.zeros((int(n_samples), int(m))), h)

    @classmethod
    def from_function(cls, fn, h, n_samples, m=None):
        """Sample ``fn(theta)`` at the left endpoint of each grid cell."""
        n_samples = int(n_samples)
        step = float(h) / n_samples
        rows = [np.atleast_1d(np.asarray(fn(-h + k * step), dtype=float))
                for k in range(n_samples)]
        return cls(np.array(rows), h)

    @property
    def samples(self):
        return self._samples

    @property
    def h(self):
        return self._h

    @property
    def n_samples(self):
        return self._samples.shape[0]

    @property
    def m(self):
        return self._samples.shape[1]

    @property
    def step(self):
        return self._h / self._samples.shape[0]

    def _index(self, theta):
        pos = (theta + self._h) / self.step
        idx = int(math.floor(pos + _GRID_RTOL))
        return min(max(idx, 0), self.n_samples - 1)

    def value(self, theta):
        """Input value at offset theta in [-h, 0)."""
        if theta < -self._h * (1.0 + _GRID_RTOL) or theta >= 0.0:
            raise ValueError(f"offset {theta} outside [-h, 0)")
        return self._samples[self._index(theta)]

    def push(self, u):
        """Return a new history with ``u`` appended and the oldest sample dropped."""
        u = np.atleast_1d(np.asarray(u, dtype=float))
        if u.shape != (self.m,):
            raise ValueError(f"pushed sample must have shape ({self.m},)")
        new = np.empty_like(self._samples)
        new[:-1] = self._samples[1:]
        new[-1] = u
        return InputHistory(new, self._h)

    def sq_l2_norm(self):
        return float(np.sum(self._samples * self._samples) * self.step)

    def l2_norm(self):
        return math.sqrt(self.sq_l2_norm())

    def integral(self):
        """Exact integral of the piecewise-constant segment over [-h, 0)."""
        return self._samples.sum(axis=0) * self.step

    def refine(self, factor):
        """Same function on a grid ``factor`` times finer (exact resampling)."""
        factor = int(factor)
        if factor < 1:
            raise ValueError("refinement factor must be >= 1")
        return InputHistory(np.repeat(self._samples, factor, axis=0), self._h)

    def __repr__(self):
        return (f"InputHistory(n_samples={self.n_samples}, m={self.m}, "
                f"h={self._h:g})")


def l2_norm(phi: InputHistory) -> float:
    """L2 norm of the piecewise-constant input segment: sqrt(sum |u_k|^2 dt)."""
    return phi.l2_norm()


class DelaySystem:
    """Plant data: drift, input matrices, their Jacobians, and growth bounds.

    Parameters
    ----------
    n, m : state and input dimensions.
    h : input delay (window length), > 0.
    f : state -> state derivative contribution of the drift; f(0) = 0.
    A : state -> (n, n) Jacobian of f.
    B0, B1 : state -> (n, m) gain of the current / lagged input (constant
        arrays are accepted and wrapped).
    dB1 : optional state -> (m, n, n) stack of per-input-column Jacobians of
        B1; None means B1 is constant.
    bint : optional (theta, state) -> (n, m) distributed kernel; None means
        the integral channel is absent.
    dbint : optional (theta, state) -> (m, n, n) per-column Jacobians of bint.
    bint_theta_const : set True when bint does not depend on theta; enables
        an exact fast path for the window quadrature.
    R : validity radius of the growth assumptions (np.inf allowed).
    M_f : growth constant, |f(x)| <= M_f |x| on the validity ball.
    sup_b1, sup_bint : optional spectral-norm bounds of B1 and bint over the
        validity ball; used for the existence constant instead of sampling.
    """

    def __init__(self, n, m, h, f, A, B0, B1, dB1=None, bint=None, dbint=None,
                 bint_theta_const=False, R=np.inf, M_f=None, sup_b1=None,
                 sup_bint=None, name=""):
        if M_f is None:
            raise ValueError("growth constant M_f is required")
        self.n = int(n)
        self.m = int(m)
        self.h = float(h)
        if not self.h > 0.0:
            raise ValueError("delay h must be positive")
        self.f = f
        self.A = _as_state_fn(A, "A")
        self.B0 = _as_state_fn(B0, "B0")
        self.B1 = _as_state_fn(B1, "B1")
        self.dB1 = dB1
        self.bint = bint
        self.dbint = dbint
        self.bint_theta_const = bool(bint_theta_const)
        self.R = float(R)
        self.M_f = float(M_f)
        self.sup_b1 = None if sup_b1 is None else float(sup_b1)
        self.sup_bint = None if sup_bint is None else float(sup_bint)
        self.name = name

    @property
    def has_bint(self):
        return self.bint is not None

    def check_dims(self, x=None, phi=None, u=None):
        if x is not None and np.shape(x) != (self.n,):
            raise ValueError(f"state must have shape ({self.n},)")
        if u is not None and np.shape(u) != (self.m,):
            raise ValueError(f"input must have shape ({self.m},)")
        if phi is not None:
            if phi.m != self.m:
                raise ValueError(f"history input dimension {phi.m} != {self.m}")
            if abs(phi.h - self.h) > _GRID_RTOL * max(self.h, 1.0):
                raise ValueError(f"history window {phi.h} != system delay {self.h}")

    def __repr__(self):
        return f"DelaySystem(name={self.name!r}, n={self.n}, m={self.m}, h={self.h:g})"


@dataclass(frozen=True)
class StateHistoryPair:
    """State plus trailing input segment, with the product-space norm."""

    x: np.ndarray
    phi: InputHistory

    def sq_norm(self):
        return float(np.dot(self.x, self.x)) + self.phi.sq_l2_norm()

    def in_ball(self, radius):
        if np.isinf(radius):
            return True
        return self.sq_norm() <= radius * radius


def distributed_term(sys: DelaySystem, x, phi: InputHistory, upper) -> np.ndarray:
    """Window quadrature int_{-h}^{upper} Bint(theta, x) phi(theta - upper) dtheta.

    The history argument is shifted so the newest covered sample sits at the
    window's upper edge; with upper = 0 this is the plant's distributed term,
    with upper = -s it is the shrinking-window term used by the predictor.
    Left-endpoint composite quadrature on the history grid; a trailing
    fraction of a cell is integrated with its left-endpoint value.
    """
    x = np.asarray(x, dtype=float)
    sys.check_dims(x=x, phi=phi)
    h = sys.h
    tol = _GRID_RTOL * max(h, 1.0)
    if upper < -h - tol or upper > tol:
        raise ValueError(f"upper limit {upper} outside [-h, 0]")
    if not sys.has_bint:
        return np.zeros(sys.n)
    n_samp = phi.n_samples
    step = phi.step
    pos = (upper + h) / step
    full = int(math.floor(pos + _GRID_RTOL))
    frac = pos - full
    if frac < _GRID_RTOL:
        frac = 0.0
    full = min(full, n_samp)
    out = np.zeros(sys.n)
    if full == 0 and frac == 0.0:
        return out
    samples = phi.samples
    if sys.bint_theta_const and frac == 0.0:
        kern = np.asarray(sys.bint(-h, x), dtype=float)
        return kern @ (samples[n_samp - full:].sum(axis=0) * step)
    shift = n_samp - full - (1 if frac > 0.0 else 0)
    for j in range(full):
        theta = -h + j * step
        idx = min(max(shift + j, 0), n_samp - 1)
        out += np.asarray(sys.bint(theta, x), dtype=float) @ samples[idx] * step
    if frac > 0.0:
        theta = -h + full * step
        out += np.asarray(sys.bint(theta, x), dtype=float) @ samples[n_samp - 1] * (frac * step)
    return out


def plant_rhs(sys: DelaySystem, x, phi: InputHistory, u_now) -> np.ndarray:
    """Right-hand side of the plant at the current state, history, and input."""
    x = np.asarray(x, dtype=float)
    u_now = np.atleast_1d(np.asarray(u_now, dtype=float))
    sys.check_dims(x=x, phi=phi, u=u_now)
    out = np.asarray(sys.f(x), dtype=float) + sys.B0(x) @ u_now \
        + sys.B1(x) @ phi.value(-phi.h)
    if sys.has_bint:
        out = out + distributed_term(sys, x, phi, 0.0)
    return out
