"""Lure systems: a linear block in feedback with a static nonlinearity.

Channel convention for the linear block: input 0 is the exogenous input
``u``, input 1 the feedback input ``w``; output 0 is ``y``, output 1 is ``z``.
The loop is closed by ``w = -phi(z)``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.typing import NDArray

from .errors import Divergence, StepTooLarge, StructureMismatch, TooShort
from .statespace import StateSpace, eigenvalues

KINDS = ("scaled_tanh", "linear", "shifted")


@dataclass(frozen=True)
class StaticNonlinearity:
    """Built-in scalar nonlinearity with ``phi(0) = 0``.

    kinds
        ``scaled_tanh``: ``tanh(gain * z)``; ``linear``: ``gain * z``;
        ``shifted``: ``base(z) - offset * z``.
    """

    kind: str
    gain: float = 0.0
    base: StaticNonlinearity | None = None
    offset: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown nonlinearity kind {self.kind!r}")
        if self.kind == "shifted" and self.base is None:
            raise ValueError("shifted nonlinearity needs a base")

    @classmethod
    def scaled_tanh(cls, gain: float) -> StaticNonlinearity:
        return cls("scaled_tanh", gain=float(gain))

    @classmethod
    def linear(cls, gain: float) -> StaticNonlinearity:
        return cls("linear", gain=float(gain))

    @classmethod
    def shifted(cls, base: StaticNonlinearity, offset: float) -> StaticNonlinearity:
        if base.kind == "shifted":
            return cls("shifted", base=base.base, offset=base.offset + float(offset))
        return cls("shifted", base=base, offset=float(offset))

    def __call__(self, z):
        return self.eval(z)

    def eval(self, z):
        if self.kind == "scaled_tanh":
            return np.tanh(self.gain * z)
        if self.kind == "linear":
            return self.gain * z
        return self.base.eval(z) - self.offset * z

    def deriv(self, z):
        if self.kind == "scaled_tanh":
            return self.gain / np.cosh(self.gain * z) ** 2
        if self.kind == "linear":
            return self.gain * np.ones_like(np.asarray(z, dtype=float))
        return self.base.deriv(z) - self.offset

    @property
    def sector(self) -> tuple[float, float]:
        """Exact range ``[alpha, beta]`` of the derivative over the real line."""
        if self.kind == "scaled_tanh":
            return (min(0.0, self.gain), max(0.0, self.gain))
        if self.kind == "linear":
            return (self.gain, self.gain)
        a, b = self.base.sector
        return (a - self.offset, b - self.offset)

    def to_dict(self) -> dict:
        if self.kind == "shifted":
            return {"kind": "shifted", "base": self.base.to_dict(), "offset": self.offset}
        return {"kind": self.kind, "gain": self.gain}


@dataclass(frozen=True, eq=False)
class LureModel:
    linear: StateSpace
    phi: StaticNonlinearity

    def __post_init__(self):
        if self.linear.m != 2 or self.linear.l != 2:
            raise StructureMismatch(
                f"Lure linear block must have 2 inputs (u, w) and 2 outputs (y, z), "
                f"got m={self.linear.m}, l={self.linear.l}")

    @property
    def n(self) -> int:
        return self.linear.n

    @property
    def Bu(self):
        return self.linear.B[:, 0]

    @property
    def Bw(self):
        return self.linear.B[:, 1]

    @property
    def Cy(self):
        return self.linear.C[0]

    @property
    def Cz(self):
        return self.linear.C[1]

    @property
    def zw(self) -> StateSpace:
        """The SISO channel from ``w`` to ``z``."""
        return self.linear.channel(1, 1)

    def vector_field(self, x, u=0.0):
        x = np.asarray(x, dtype=float)
        return self.linear.A @ x + self.Bu * u - self.Bw * self.phi.eval(self.Cz @ x)


def loop_transform(model: LureModel, c: float) -> LureModel:
    """Move the linear gain ``c`` from the nonlinearity into the linear block.

    ``phi -> phi - c z`` and ``A -> A - c Bw Cz``; the closed loop is unchanged
    and the ``zw`` channel becomes ``Gzw / (1 + c Gzw)``.
    """
    if c == 0:
        return model
    lin = model.linear
    A = lin.A - c * np.outer(model.Bw, model.Cz)
    return LureModel(StateSpace(A, lin.B, lin.C), StaticNonlinearity.shifted(model.phi, c))


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: NDArray[np.float64]
    states: NDArray[np.float64]
    y: NDArray[np.float64]
    z: NDArray[np.float64]
    dt: float
    method: str = "rk4"
    meta: dict = field(default_factory=dict)

    def to_csv(self, path, include_states: bool = False):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            header = ["t", "y", "z"]
            if include_states:
                header += [f"x{i + 1}" for i in range(self.states.shape[1])]
            w.writerow(header)
            for k, t in enumerate(self.times):
                row = [repr(float(t)), repr(float(self.y[k])), repr(float(self.z[k]))]
                if include_states:
                    row += [repr(float(v)) for v in self.states[k]]
                w.writerow(row)


def _input_fn(u) -> Callable[[float], float]:
    if u is None:
        return lambda t: 0.0
    if callable(u):
        return u
    value = float(u)
    return lambda t: value


def max_stable_step(model: LureModel) -> float:
    rho = float(np.max(np.abs(eigenvalues(model.linear.A)))) if model.n else 0.0
    return np.inf if rho == 0 else 0.5 / rho


def simulate(model: LureModel, x0, u=None, t_end: float = 5.0, dt: float = 1e-4,
             blowup: float = 1e12) -> Trajectory:
    """Integrate the closed loop with classical fourth-order Runge-Kutta.

    Parameters
    ----------
    model : LureModel
    x0 : array_like
        Initial state.
    u : float or callable or None
        Exogenous input, constant or a function of time.
    t_end, dt : float
        Horizon and fixed step. ``dt`` must not exceed ``0.5 / rho(A)``.

    Raises
    ------
    StepTooLarge
    Divergence
        Carries the trajectory computed up to the failure.
    """
    limit = max_stable_step(model)
    if dt <= 0 or dt > limit * (1 + 1e-12):
        raise StepTooLarge(f"dt={dt:g} exceeds the explicit stability bound {limit:.4g}")
    steps = int(round(t_end / dt))
    A = model.linear.A
    Bu, Bw, Cz, Cy = model.Bu, model.Bw, model.Cz, model.Cy
    phi = model.phi.eval
    uf = _input_fn(u)

    def f(t, x):
        return A @ x + Bu * uf(t) - Bw * phi(Cz @ x)

    x = np.array(x0, dtype=float)
    if x.shape != (model.n,):
        raise ValueError(f"x0 must have shape ({model.n},), got {x.shape}")
    X = np.empty((steps + 1, model.n))
    X[0] = x
    times = np.arange(steps + 1) * dt
    h2 = dt / 2
    for k in range(steps):
        t = times[k]
        k1 = f(t, x)
        k2 = f(t + h2, x + h2 * k1)
        k3 = f(t + h2, x + h2 * k2)
        k4 = f(t + dt, x + dt * k3)
        x = x + (dt / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(x)) or np.linalg.norm(x) > blowup:
            part = _trajectory(times[:k + 1], X[:k + 1], Cy, Cz, dt)
            raise Divergence(f"state norm exceeded {blowup:g} at t={times[k + 1]:g}", part)
        X[k + 1] = x
    return _trajectory(times, X, Cy, Cz, dt)


def _trajectory(times, X, Cy, Cz, dt):
    return Trajectory(times=times, states=X, y=X @ Cy, z=X @ Cz, dt=dt)


@dataclass(frozen=True)
class LimitCycle:
    periodic: bool
    period: float
    amplitude: float
    crossings: int


def detect_limit_cycle(traj: Trajectory, transient_fraction: float = 0.5,
                       signal: str = "y", rtol: float = 0.02,
                       min_amplitude: float = 1e-6) -> LimitCycle:
    """Zero-crossing test for sustained oscillation of an output signal.

    After discarding the first ``transient_fraction`` of the samples, upward
    crossings of the de-meaned signal are located by linear interpolation.
    The signal is called periodic when at least four consecutive crossing
    intervals agree within ``rtol`` and the half peak-to-peak amplitude over
    the last period exceeds ``min_amplitude``.
    """
    if not 0 <= transient_fraction < 1:
        raise ValueError("transient_fraction must lie in [0, 1)")
    t = np.asarray(traj.times)
    v = np.asarray(getattr(traj, signal))
    start = int(np.floor(transient_fraction * t.size))
    t, v = t[start:], v[start:]
    if t.size < 16:
        raise TooShort(f"only {t.size} samples after the transient")
    v = v - v.mean()
    if np.ptp(v) == 0:
        return LimitCycle(False, float("nan"), 0.0, 0)
    idx = np.nonzero((v[:-1] < 0) & (v[1:] >= 0))[0]
    tc = t[idx] + (t[idx + 1] - t[idx]) * (-v[idx]) / (v[idx + 1] - v[idx])
    if 2 <= tc.size < 5:
        raise TooShort(f"only {tc.size - 1} oscillation periods after the transient")
    if tc.size < 5:
        return LimitCycle(False, float("nan"), 0.0, int(tc.size))
    intervals = np.diff(tc)
    periodic = False
    for k in range(intervals.size - 3):
        win = intervals[k:k + 4]
        if np.ptp(win) <= rtol * np.mean(win):
            periodic = True
            break
    period = float(np.mean(intervals))
    last = (t >= tc[-1] - intervals[-1]) & (t <= tc[-1])
    amplitude = float(np.ptp(v[last]) / 2) if np.any(last) else 0.0
    periodic = periodic and amplitude > min_amplitude
    return LimitCycle(bool(periodic), period, amplitude, int(tc.size))


@dataclass(frozen=True)
class SectorCheck:
    passed: bool
    worst_z: float
    min_slope: float
    max_slope: float
    analytic: bool


def sector_bounds_check(phi: StaticNonlinearity, alpha: float, beta: float,
                        grid=(-1.0, 1.0, 10001)) -> SectorCheck:
    """Check ``alpha <= phi'(z) <= beta`` on a sampling grid.

    For the built-in kinds the exact derivative range is also known and must
    agree; ``worst_z`` is the sampled point with the least (or most negative)
    slack.
    """
    if not alpha < beta:
        raise ValueError("need alpha < beta")
    lo, hi, num = grid
    if num < 1000:
        raise ValueError("sector check needs at least 1000 grid points")
    z = np.linspace(lo, hi, int(num))
    d = phi.deriv(z)
    slack = np.minimum(d - alpha, beta - d)
    k = int(np.argmin(slack))
    tol = 1e-12 * max(1.0, abs(alpha), abs(beta))
    sampled_ok = bool(slack[k] >= -tol)
    a_lo, a_hi = phi.sector
    analytic_ok = a_lo >= alpha - tol and a_hi <= beta + tol
    return SectorCheck(passed=sampled_ok and analytic_ok, worst_z=float(z[k]),
                       min_slope=float(d.min()), max_slope=float(d.max()), analytic=True)
