"""Decode-order schemes: direct-link, closed-form eigen, SDR, exhaustive.

Position 0 of a permutation is decoded first by everyone and receives the
highest allocated power, so power-based schemes sort their per-user
required-power criterion in descending order.  Ties break by user index.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import permutations

import numpy as np

from . import conic
from .channel import ChannelSet, ScenarioConfig
from .numerics import hermitian_eig, validate_hermitian


@dataclass(frozen=True)
class OrderingResult:
    permutation: tuple  # decode order, position -> user index
    criterion: tuple | None  # per-user criterion values (user-indexed)
    scheme: str

    def __post_init__(self):
        if sorted(self.permutation) != list(range(len(self.permutation))):
            raise ValueError("permutation must be a bijection on range(K)")


def _argsort_with_index_ties(values: np.ndarray, descending: bool) -> tuple:
    keys = -np.asarray(values) if descending else np.asarray(values)
    return tuple(int(i) for i in np.argsort(keys, kind="stable"))


def order_direct_link(ch: ChannelSet) -> OrderingResult:
    """Ascending direct-link norm: the weakest BS-user link decodes first."""
    norms = np.linalg.norm(ch.h_d, axis=1)
    return OrderingResult(
        permutation=_argsort_with_index_ties(norms, descending=False),
        criterion=tuple(float(x) for x in norms),
        scheme="direct",
    )


def combined_gain_matrix(ch: ChannelSet, k: int) -> np.ndarray:
    """Hermitian PSD form Q whose quadratic form in (v; 1) equals the
    combined channel power gain of user k at phase vector v."""
    top = ch.h_r[k].conj()[:, None] * ch.G  # diag(h_r^H) G
    n = ch.h_r.shape[1]
    q = np.zeros((n + 1, n + 1), dtype=complex)
    q[:n, :n] = top @ top.conj().T
    q[:n, n] = top @ ch.h_d[k]
    q[n, :n] = q[:n, n].conj()
    q[n, n] = float(np.linalg.norm(ch.h_d[k]) ** 2)
    return validate_hermitian(q, "combined gain matrix")


def order_eigen(ch: ChannelSet, config: ScenarioConfig) -> OrderingResult:
    """Closed-form ordering by approximate minimum required power.

    The single-user power need is approximated through the leading
    eigenvalue of the combined gain form (norm-ball relaxation of the unit
    modulus constraints); users needing more power decode earlier.
    """
    targets = config.sinr_targets()
    sigma2 = config.sigma2_mw
    n1 = ch.h_r.shape[1] + 1
    p_hat = np.empty(config.K)
    for k in range(config.K):
        sigma1 = float(hermitian_eig(combined_gain_matrix(ch, k)).eigenvalues[0])
        p_hat[k] = targets[k] * sigma2 / (sigma1 * n1)
    return OrderingResult(
        permutation=_argsort_with_index_ties(p_hat, descending=True),
        criterion=tuple(float(x) for x in p_hat),
        scheme="eigen",
    )


def order_sdr(ch: ChannelSet, config: ScenarioConfig) -> OrderingResult:
    """Ordering by required power with the per-user gain maximized by SDR."""
    targets = config.sinr_targets()
    sigma2 = config.sigma2_mw
    n1 = ch.h_r.shape[1] + 1
    p_tilde = np.empty(config.K)
    for k in range(config.K):
        q = combined_gain_matrix(ch, k)
        # channel-power entries sit far below solver tolerances; scaling by
        # the spectral norm makes the maximization exact and is undone below
        scale = float(hermitian_eig(q).eigenvalues[0])
        problem = conic.ConicProblem(
            block_dims=(n1,),
            objective={0: -q / scale},  # maximize tr(Q V)
            constraints=[],
            diag_fixed={0: [(i, 1.0) for i in range(n1)]},
        )
        sol = conic.solve(problem)
        if not sol.optimal:
            raise RuntimeError(f"SDR ordering solve failed for user {k}: {sol.status}")
        p_tilde[k] = targets[k] * sigma2 / (-sol.objective * scale)
    return OrderingResult(
        permutation=_argsort_with_index_ties(p_tilde, descending=True),
        criterion=tuple(float(x) for x in p_tilde),
        scheme="sdr",
    )


MAX_EXHAUSTIVE_USERS = 6


def order_exhaustive(ch: ChannelSet, config: ScenarioConfig, pipeline):
    """Run `pipeline(permutation) -> total power or None` for every decode
    order and keep the cheapest feasible one.

    Guarded to K <= 6 (K! full pipeline runs).  Returns the winning
    :class:`OrderingResult` together with the per-permutation powers.
    """
    if config.K > MAX_EXHAUSTIVE_USERS:
        raise ValueError(f"exhaustive ordering is capped at K <= {MAX_EXHAUSTIVE_USERS}")
    powers = {}
    best_perm, best_power = None, np.inf
    for perm in permutations(range(config.K)):
        power = pipeline(perm)
        powers[perm] = power
        if power is not None and power < best_power:
            best_perm, best_power = perm, power
    if best_perm is None:
        raise RuntimeError("every decode order was infeasible")
    return OrderingResult(permutation=best_perm, criterion=None, scheme="exhaustive"), powers
