"""Numerical thresholds used across the package.

Every routine that compares against a threshold takes its default from
``DEFAULT`` and accepts an override, so a caller can tighten or relax one
check without touching global state.
"""
from dataclasses import dataclass, replace


@dataclass(frozen=True)
class Tolerances:
    symmetry: float = 1e-10          # relative, max-norm
    rank: float = 1e-10              # sigma_min / sigma_max below this is singular
    case_split: float = 1e-10        # pseudo-inverse update case dispatch
    moment_rank: float = 1e-6        # relative eigenvalue cut for moment-matrix rank
    sdp_gap: float = 1e-9
    sdp_feas: float = 1e-9
    sdp_accept_gap: float = 1e-8    # best iterate accepted after a stall
    sdp_accept_feas: float = 1e-7
    sdp_max_iter: int = 200
    ao_tol: float = 1e-9
    ao_max_iter: int = 10_000
    budget_slack: float = 1e-9       # ||[x0, y0]|| <= eta * (1 + slack)

    def with_(self, **changes):
        return replace(self, **changes)


DEFAULT = Tolerances()
