"""Block-diagonal splitting of a linear system into dominant and
non-dominant parts with respect to a rate ``lambda``.

The state map is brought to real Schur form, reordered so the eigenvalues
with ``Re > -lambda`` come first, and the coupling block of the quasi-upper
triangular form is removed with one Sylvester solve on the triangular
blocks.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
from numpy.typing import NDArray

from .errors import BoundaryEigenvalue, IllConditionedSplit, SylvesterFailure
from .statespace import StateSpace, classify_modes

WARN_COND = 1e8
MAX_COND = 1e13


@dataclass(frozen=True, eq=False)
class SpectralSplit:
    """Result of :func:`split`.

    ``T`` maps split coordinates to original ones, ``x = T @ xbar``, with
    ``xbar = [x_dominant; x_nondominant]``.
    """

    dominant: StateSpace
    nondominant: StateSpace
    T: NDArray[np.float64]
    T_inv: NDArray[np.float64]
    rate: float
    p: int
    cond_T: float

    def recombined(self) -> StateSpace:
        """Block-diagonal realization ``(A+ (+) A-, [B+; B-], [C+ C-])``."""
        d, nd = self.dominant, self.nondominant
        return StateSpace(la.block_diag(d.A, nd.A), np.vstack([d.B, nd.B]),
                          np.hstack([d.C, nd.C]))


def solve_sylvester_triangular(T11, T22, C):
    """Solve ``T11 X - X T22 = C`` for quasi-triangular ``T11``, ``T22``.

    Back-substitution only (LAPACK ``trsyl``); no further factorizations.
    """
    if T11.size == 0 or T22.size == 0:
        return np.zeros((T11.shape[0], T22.shape[0]))
    trsyl = la.get_lapack_funcs("trsyl", (T11, T22, C))
    X, scale, info = trsyl(T11, T22, C, isgn=-1)
    if info < 0:
        raise SylvesterFailure(f"trsyl rejected argument {-info}")
    if scale == 0 or not np.all(np.isfinite(X)):
        raise SylvesterFailure("Sylvester solve overflowed; spectra nearly overlap")
    # info == 1 flags perturbed close eigenvalues; the conditioning test below covers it
    return X / scale


def split(sys: StateSpace, rate: float, tol: float | None = None) -> SpectralSplit:
    """Split ``sys`` into dominant (``Re > -rate``) and non-dominant parts.

    Parameters
    ----------
    sys : StateSpace
    rate : float
        Splitting line is ``Re(s) = -rate``.
    tol : float, optional
        Boundary tolerance passed to :func:`classify_modes`.

    Raises
    ------
    BoundaryEigenvalue
        If an eigenvalue lies within ``tol`` of the splitting line.
    SylvesterFailure
        If the decoupling transformation is too ill-conditioned to trust.
    """
    modes = classify_modes(sys, rate, tol)
    if modes.boundary_count:
        raise BoundaryEigenvalue(
            f"{modes.boundary_count} eigenvalue(s) on the line Re(s) = {-rate:g}")
    n, p = sys.n, modes.p_dominant

    if n == 0:
        S, Z = np.zeros((0, 0)), np.eye(0)
        sdim = 0
    else:
        S, Z, sdim = la.schur(sys.A, output="real", sort=lambda re, im: re + rate > 0)
    if sdim != p:
        raise SylvesterFailure(
            f"Schur reordering placed {sdim} eigenvalues first, expected {p}")

    X = solve_sylvester_triangular(S[:p, :p], S[p:, p:], -S[:p, p:])
    W = np.eye(n)
    W[:p, p:] = X
    W_inv = np.eye(n)
    W_inv[:p, p:] = -X
    T = Z @ W
    T_inv = W_inv @ Z.T
    cond_T = float(np.linalg.cond(T)) if n else 1.0
    if cond_T > MAX_COND:
        raise SylvesterFailure(f"splitting transformation has condition {cond_T:.3e}")
    if cond_T > WARN_COND:
        warnings.warn(f"splitting transformation has condition {cond_T:.3e}",
                      IllConditionedSplit, stacklevel=2)

    Abar = la.block_diag(S[:p, :p], S[p:, p:])
    Bbar = T_inv @ sys.B
    Cbar = sys.C @ T
    dominant = StateSpace(Abar[:p, :p], Bbar[:p], Cbar[:, :p])
    nondominant = StateSpace(Abar[p:, p:], Bbar[p:], Cbar[:, p:])
    return SpectralSplit(dominant=dominant, nondominant=nondominant, T=T, T_inv=T_inv,
                         rate=float(rate), p=p, cond_T=cond_T)
