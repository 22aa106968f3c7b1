"""Shifted balanced truncation and dominance-preserving reduction.

The non-dominant part of a split system is reduced by square-root balanced
truncation using the Gramians of the *shifted* realization ``A- + lambda I``.
The dominant part is carried over untouched.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg as la
from numpy.typing import NDArray

from .errors import NearSingularSpectrum, OrderTooSmall, RankDeficient, UnstableA
from .lure import LureModel
from .spectral_split import split
from .statespace import StateSpace, eigenvalues

RANK_RTOL = 1e-13


@dataclass(frozen=True, eq=False)
class GramianPair:
    P: NDArray[np.float64]
    Q: NDArray[np.float64]
    rate: float

    def is_positive_definite(self) -> bool:
        """True if both Gramians admit a double-precision Cholesky factor."""
        try:
            np.linalg.cholesky(self.P)
            np.linalg.cholesky(self.Q)
        except np.linalg.LinAlgError:
            return False
        return True


@dataclass(frozen=True, eq=False)
class ReductionResult:
    """Outcome of a balanced truncation.

    ``projection`` maps states of the system that was reduced to reduced
    states, ``lift`` maps back; ``projection @ lift`` is the identity.
    """

    reduced: StateSpace
    hsv: NDArray[np.float64]
    error_bound: float
    balancing_T: NDArray[np.float64]
    rate: float
    dominant_order: int
    truncated_order: int
    projection: NDArray[np.float64]
    lift: NDArray[np.float64]

    @property
    def order(self) -> int:
        return self.reduced.n


def solve_lyapunov(A, M) -> NDArray[np.float64]:
    """Solve ``A X + X A^T + M = 0`` for stable ``A`` (Bartels-Stewart).

    ``A`` is reduced to real Schur form ``U T U^T``; the transformed equation
    ``T Y + Y T^T = -U^T M U`` is solved by triangular back-substitution.

    Raises
    ------
    UnstableA
        If some eigenvalue of ``A`` has non-negative real part.
    NearSingularSpectrum
        If some pair of eigenvalues nearly sums to zero.
    """
    A = np.asarray(A, dtype=float)
    M = np.asarray(M, dtype=float)
    n = A.shape[0]
    if n == 0:
        return np.zeros((0, 0))
    T, U = la.schur(A, output="real")
    ev = eigenvalues(T)
    if np.max(ev.real) >= 0:
        raise UnstableA(f"A is not Hurwitz (spectral abscissa {np.max(ev.real):.3e})")
    if 2 * np.min(-ev.real) <= 1e3 * np.finfo(float).eps * max(1.0, la.norm(A, 1)):
        raise NearSingularSpectrum("eigenvalues of A nearly sum to zero")
    F = U.T @ M @ U
    trsyl = la.get_lapack_funcs("trsyl", (T,))
    Y, scale, info = trsyl(T, T, -F, trana="N", tranb="T", isgn=1)
    if info < 0 or scale == 0:
        raise NearSingularSpectrum(f"triangular Lyapunov solve failed (info={info})")
    X = U @ (Y / scale) @ U.T
    return (X + X.T) / 2


def shifted_gramians(nondominant: StateSpace, rate: float) -> GramianPair:
    """Reachability and observability Gramians of ``(A + rate I, B, C)``."""
    As = nondominant.A + rate * np.eye(nondominant.n)
    P = solve_lyapunov(As, nondominant.B @ nondominant.B.T)
    Q = solve_lyapunov(As.T, nondominant.C.T @ nondominant.C)
    return GramianPair(P=P, Q=Q, rate=float(rate))


def psd_factor(X) -> NDArray[np.float64]:
    """Square factor ``L`` with ``X = L L^T`` for symmetric PSD ``X``.

    Cholesky when it succeeds; otherwise a symmetric eigendecomposition with
    the round-off negative eigenvalues clipped to zero.
    """
    try:
        return np.linalg.cholesky(X)
    except np.linalg.LinAlgError:
        w, V = la.eigh(X)
        return V * np.sqrt(np.clip(w, 0.0, None))


def hankel_singular_values(sys: StateSpace, rate: float = 0.0) -> NDArray[np.float64]:
    g = shifted_gramians(sys, rate)
    s = la.svdvals(psd_factor(g.Q).T @ psd_factor(g.P))
    return s


def balance_and_truncate(nondominant: StateSpace, rate: float, order: int) -> ReductionResult:
    """Square-root balanced truncation of a shifted-stable system.

    Parameters
    ----------
    nondominant : StateSpace
        System with ``A + rate I`` Hurwitz.
    rate : float
    order : int
        Target order ``0 <= order <= n``.

    Returns
    -------
    ReductionResult
        ``error_bound`` is twice the sum of the discarded Hankel singular
        values; it bounds the shifted H-infinity norm of the error.
    """
    n = nondominant.n
    if not 0 <= order <= n:
        raise ValueError(f"order must lie in [0, {n}], got {order}")
    g = shifted_gramians(nondominant, rate)
    Lp = psd_factor(g.P)
    Lq = psd_factor(g.Q)
    U, s, Vt = la.svd(Lq.T @ Lp)

    if order == n:
        # nothing to discard: keep the given coordinates
        eye = np.eye(n)
        return ReductionResult(reduced=nondominant, hsv=s, error_bound=0.0, balancing_T=eye,
                               rate=float(rate), dominant_order=0, truncated_order=n,
                               projection=eye, lift=eye)

    rank = int(np.sum(s > RANK_RTOL * s[0])) if n and s[0] > 0 else 0
    r = order
    if order > rank:
        warnings.warn(f"requested order {order} exceeds numerical rank {rank}; "
                      f"truncating at {rank}", RankDeficient, stacklevel=2)
        r = rank
    sr = s[:r]
    scale = 1.0 / np.sqrt(sr)
    V = Lp @ Vt[:r].T * scale       # lift: n x r
    W = Lq @ U[:, :r] * scale       # projection^T: n x r
    reduced = StateSpace(W.T @ nondominant.A @ V, W.T @ nondominant.B, nondominant.C @ V)
    bound = float(2.0 * np.sum(s[r:]))

    # full balancing transformation, kept for inspection when it is well defined
    if rank == n:
        balancing_T = Lp @ Vt.T / np.sqrt(s)
    else:
        balancing_T = V
    return ReductionResult(reduced=reduced, hsv=s, error_bound=bound, balancing_T=balancing_T,
                           rate=float(rate), dominant_order=0, truncated_order=r,
                           projection=W.T, lift=V)


def reduce_dominant(sys: StateSpace, rate: float, order: int,
                    tol: float | None = None) -> tuple[StateSpace, ReductionResult]:
    """Split, truncate the non-dominant part to ``order - p``, reassemble.

    The dominant block ``A+`` is copied verbatim into the reduced model.
    """
    parts = split(sys, rate, tol)
    p = parts.p
    if order < p:
        raise OrderTooSmall(f"order {order} is below the dominance degree p={p}")
    if order > sys.n:
        raise ValueError(f"order {order} exceeds system order {sys.n}")
    res = balance_and_truncate(parts.nondominant, rate, order - p)
    d, red = parts.dominant, res.reduced
    reduced = StateSpace(
        la.block_diag(d.A, red.A),
        np.vstack([d.B, red.B]),
        np.hstack([d.C, red.C]),
    )
    nr = red.n
    projection = np.zeros((p + nr, sys.n))
    projection[:p, :] = parts.T_inv[:p]
    projection[p:, :] = res.projection @ parts.T_inv[p:]
    lift = np.hstack([parts.T[:, :p], parts.T[:, p:] @ res.lift])
    result = replace(res, reduced=reduced, dominant_order=p, projection=projection, lift=lift)
    return reduced, result


def reduce_dominant_lure(model, rate: float, order: int, tol: float | None = None):
    """Reduce the linear block of a Lure model, keeping the nonlinearity.

    Returns
    -------
    (LureModel, ReductionResult)
    """
    reduced, result = reduce_dominant(model.linear, rate, order, tol)
    return LureModel(reduced, model.phi), result

