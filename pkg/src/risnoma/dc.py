"""Shared record type for difference-of-convex inner loops."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass
class DcTrace:
    """Per-iteration history of one DC inner loop.

    ``objectives[i]`` is the DC objective at the i-th accepted iterate,
    ``penalties[i]`` the rank-one penalty there, and ``step_sq_norms[i]``
    the squared Frobenius distance from iterate i to iterate i+1 (so it has
    one fewer entry than the other two).  Accepted objectives are
    non-increasing by construction: an iterate whose objective rises above
    the previous one (solver noise at the fixed point) ends the loop.
    """

    objectives: list = field(default_factory=list)
    penalties: list = field(default_factory=list)
    step_sq_norms: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
