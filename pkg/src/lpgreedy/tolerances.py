"""Centralized numerical tolerances.

One record shared by all modules: algebraic identities are held to a much
tighter tolerance than quantities that come out of iterative optimizers.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerances:
    algebraic: float = 1e-10   # closed-form identities (norms, functionals)
    optimizer: float = 1e-6    # values produced by line searches / descent
    structural: float = 1e-12  # greedy-selection threshold slack
    zero_residual: float = 1e-12  # below this a remainder counts as exactly 0


DEFAULT_TOLS = Tolerances()
