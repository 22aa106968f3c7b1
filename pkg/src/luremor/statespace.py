"""Linear time-invariant systems ``x' = Ax + Bu, y = Cx``.

The :class:`StateSpace` value type is immutable; all operations in this module
are pure functions returning new objects.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
from numpy.typing import NDArray

from .errors import DimensionMismatch, EigenFailure, SingularResolvent

_EPS = np.finfo(float).eps


def _frozen(a, name: str) -> NDArray[np.float64]:
    arr = np.array(a, dtype=np.float64, copy=True)
    if arr.ndim == 1 and arr.size == 0:
        arr = arr.reshape(0, 0)
    if arr.ndim != 2:
        raise DimensionMismatch(f"{name} must be a 2-D matrix, got ndim={arr.ndim}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class StateSpace:
    """Real state-space realization ``(A, B, C)`` without feedthrough.

    Parameters
    ----------
    A : (n, n) array_like
    B : (n, m) array_like
    C : (l, n) array_like
    """

    A: NDArray[np.float64]
    B: NDArray[np.float64]
    C: NDArray[np.float64]

    def __post_init__(self):
        A = _frozen(self.A, "A")
        B = _frozen(self.B, "B")
        C = _frozen(self.C, "C")
        if A.shape[0] != A.shape[1]:
            raise DimensionMismatch(f"A must be square, got shape {A.shape}")
        n = A.shape[0]
        if B.shape[0] != n:
            raise DimensionMismatch(f"B must have {n} rows, got shape {B.shape}")
        if C.shape[1] != n:
            raise DimensionMismatch(f"C must have {n} columns, got shape {C.shape}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def l(self) -> int:  # noqa: E743
        return self.C.shape[0]

    def poles(self) -> NDArray[np.complex128]:
        return eigenvalues(self.A)

    def channel(self, output: int, input: int) -> StateSpace:
        """SISO subsystem from input ``input`` to output ``output``."""
        return StateSpace(self.A, self.B[:, [input]], self.C[[output], :])

    def similarity(self, T) -> StateSpace:
        """Realization in coordinates ``x = T xbar``."""
        T = np.asarray(T, dtype=float)
        return StateSpace(la.solve(T, self.A @ T), la.solve(T, self.B), self.C @ T)

    def to_dict(self) -> dict:
        return {"A": self.A.tolist(), "B": self.B.tolist(), "C": self.C.tolist()}

    def __repr__(self):
        return f"StateSpace(n={self.n}, m={self.m}, l={self.l})"


@dataclass(frozen=True)
class ModeClassification:
    """Partition of the spectrum of ``A`` relative to the line ``Re(s) = -rate``."""

    eigenvalues: tuple
    rate: float
    p_dominant: int
    n_nondominant: int
    boundary_count: int

    @property
    def inertia(self) -> tuple[int, int, int]:
        """Inertia ``(n-, n0, n+)`` of ``A + rate*I``."""
        return (self.n_nondominant, self.boundary_count, self.p_dominant)


def eigenvalues(A) -> NDArray[np.complex128]:
    A = np.asarray(A, dtype=float)
    if A.size == 0:
        return np.zeros(0, dtype=complex)
    try:
        return la.eigvals(A)
    except la.LinAlgError as exc:
        raise EigenFailure(str(exc)) from exc


def default_tol(A) -> float:
    """Scale-aware tolerance for locating eigenvalues on ``Re(s) = -rate``."""
    ev = eigenvalues(A)
    rho = float(np.max(np.abs(ev))) if ev.size else 0.0
    return 1e-9 * (1.0 + rho)


def eval_transfer(sys: StateSpace, s: complex) -> NDArray[np.complex128]:
    """Evaluate ``C (sI - A)^{-1} B`` by a single LU solve.

    Raises
    ------
    SingularResolvent
        If the reciprocal condition estimate of ``sI - A`` is below machine
        precision.
    """
    n = sys.n
    if n == 0:
        return np.zeros((sys.l, sys.m), dtype=complex)
    M = s * np.eye(n) - sys.A
    anorm = np.linalg.norm(M, 1)
    lu, piv, info = la.lapack.zgetrf(M)
    if info > 0:
        raise SingularResolvent(f"sI - A is singular at s={s!r}")
    gecon = la.get_lapack_funcs("gecon", (lu,))
    rcond, _ = gecon(lu, anorm, norm="1")
    if rcond < _EPS:
        raise SingularResolvent(f"sI - A is numerically singular at s={s!r} (rcond={rcond:.2e})")
    X = la.lu_solve((lu, piv), sys.B.astype(complex))
    return sys.C @ X


def freqresp(sys: StateSpace, omega, rate: float = 0.0, chunk: int = 20000):
    """Values ``G(i w - rate)`` on an array of frequencies, shape ``(N, l, m)``.

    Batched dense solves; intended for plotting grids and oracles, not for the
    singular-point checks done by :func:`eval_transfer`.
    """
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    out = np.empty((omega.size, sys.l, sys.m), dtype=complex)
    if sys.n == 0:
        out[:] = 0
        return out
    # Hessenberg form keeps each solve well conditioned and cheap
    H, Q = la.hessenberg(sys.A, calc_q=True)
    Bh = Q.T @ sys.B
    Ch = sys.C @ Q
    eye = np.eye(sys.n)
    for start in range(0, omega.size, chunk):
        s = 1j * omega[start:start + chunk] - rate
        M = s[:, None, None] * eye - H
        X = np.linalg.solve(M, np.broadcast_to(Bh, (s.size,) + Bh.shape))
        out[start:start + chunk] = Ch @ X
    return out


def shift(sys: StateSpace, rate: float) -> StateSpace:
    """Realization of the shifted transfer function ``G(s - rate)``."""
    if rate == 0:
        return sys
    return StateSpace(sys.A + rate * np.eye(sys.n), sys.B, sys.C)


def classify_modes(sys: StateSpace, rate: float, tol: float | None = None) -> ModeClassification:
    """Count eigenvalues right of, left of, and on the line ``Re(s) = -rate``."""
    if tol is None:
        tol = default_tol(sys.A)
    if tol <= 0:
        raise ValueError("tol must be positive")
    ev = eigenvalues(sys.A)
    re = ev.real + rate
    on = np.abs(re) <= tol
    return ModeClassification(
        eigenvalues=tuple(complex(e) for e in ev),
        rate=float(rate),
        p_dominant=int(np.sum((re > 0) & ~on)),
        n_nondominant=int(np.sum((re < 0) & ~on)),
        boundary_count=int(np.sum(on)),
    )


def parallel(sys1: StateSpace, sys2: StateSpace, sign: float = 1.0) -> StateSpace:
    """Realization of ``G1 + sign * G2`` with block-diagonal state map."""
    if (sys1.m, sys1.l) != (sys2.m, sys2.l):
        raise DimensionMismatch(
            f"input/output dimensions differ: {(sys1.m, sys1.l)} vs {(sys2.m, sys2.l)}")
    return StateSpace(
        la.block_diag(sys1.A, sys2.A),
        np.vstack([sys1.B, sys2.B]),
        np.hstack([sys1.C, sign * sys2.C]),
    )


def compose_error(full: StateSpace, reduced: StateSpace) -> StateSpace:
    """Realization of the error system ``G - Ghat`` of order ``n + nu``."""
    return parallel(full, reduced, sign=-1.0)
