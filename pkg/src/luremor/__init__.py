"""Dominance-preserving model reduction for Lure systems.

The linear block of a Lure system is split at a rate ``lambda`` into its
dominant and non-dominant parts; only the latter is reduced, by shifted
balanced truncation. Frequency-domain tools (shifted H-infinity norms, the
circle criterion, small-gain bounds) then certify that the reduced and the
full closed loops share the same dominance degree.
"""

from .balanced_truncation import (GramianPair, ReductionResult, balance_and_truncate,
                                   hankel_singular_values, reduce_dominant, reduce_dominant_lure,
                                   shifted_gramians, solve_lyapunov)
from .dominance import (CircleReport, DominanceCertificate, HinfResult, SmallGainClaim,
                        Theorem1Report, circle_criterion, dominance_certificate, hinf_p_norm,
                        small_gain, unstable_pole_count, verify_corollary1, verify_theorem1)
from .errors import *  # noqa: F401,F403
from .heatflow import (BenchmarkReport, HeatflowSpec, build_heatflow, closed_form_transfer,
                       reproduce_paper)
from .lure import (LimitCycle, LureModel, StaticNonlinearity, Trajectory, detect_limit_cycle,
                   loop_transform, sector_bounds_check, simulate)
from .spectral_split import SpectralSplit, split
from .statespace import (ModeClassification, StateSpace, classify_modes, compose_error,
                         eval_transfer, freqresp, shift)

__version__ = "0.1.0"
