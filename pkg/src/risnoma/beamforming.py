"""Beamformer subproblem for fixed phase shifts.

Two solvers share the same lifted constraint set (one PSD matrix per user,
decode-order SINR rows in trace form): a DC penalty method that drives the
lifted matrices to rank one by linearizing the spectral norm, and the
classic SDR baseline with Gaussian randomization.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import conic
from .channel import BeamformerSet, ScenarioConfig
from .dc import DcTrace
from .numerics import (
    RankToleranceExceeded,
    extract_rank_one,
    hermitian_eig,
    nuclear_minus_spectral,
)


@dataclass(frozen=True)
class LiftedBeamformers:
    """PSD lifts W_k of the per-user beamformers plus penalty accounting."""

    W: tuple  # K Hermitian (M, M) matrices, user-indexed
    penalty: float  # sum_k (nuclear - spectral)(W_k)
    total_power: float  # sum_k tr W_k, mW

    @classmethod
    def from_matrices(cls, mats) -> "LiftedBeamformers":
        mats = tuple(np.asarray(m) for m in mats)
        pen = sum(nuclear_minus_spectral(m) for m in mats)
        power = sum(float(np.real(np.trace(m))) for m in mats)
        return cls(W=mats, penalty=float(pen), total_power=power)

    @classmethod
    def from_vectors(cls, vectors) -> "LiftedBeamformers":
        return cls.from_matrices([np.outer(w, w.conj()) for w in vectors])


class BeamformingStatus(Enum):
    SUCCESS = "success"
    INFEASIBLE = "infeasible"
    RANK_NOT_ACHIEVED = "rank_not_achieved"
    EXACT = "exact"  # SDR solution was rank one
    RANDOMIZED = "randomized"  # SDR needed Gaussian randomization
    RANDOMIZATION_FAILED = "randomization_failed"


@dataclass
class BeamformingResult:
    status: BeamformingStatus
    beamformers: BeamformerSet | None = None
    lifted: LiftedBeamformers | None = None
    trace: DcTrace | None = None

    @property
    def ok(self) -> bool:
        return self.status in (
            BeamformingStatus.SUCCESS,
            BeamformingStatus.EXACT,
            BeamformingStatus.RANDOMIZED,
        )

    @property
    def total_power(self) -> float:
        return self.beamformers.total_power if self.beamformers else np.nan


def build_beamformer_subproblem(
    ch_eff: np.ndarray,
    ordering,
    subgrads,
    config: ScenarioConfig,
    rho: float | None = None,
    eta: float | None = None,
) -> conic.ConicProblem:
    """Lifted convexified subproblem for one DC iteration.

    Objective: (1 + rho) sum_k tr(W_k) - sum_k <W_k, subgrad_k> plus
    eta/2 ||W_k||_F^2 (the nuclear norm of a PSD variable is its trace).
    Constraints: for decode positions k and every l >= k,
    target_k * (sum_{j>k} tr(H_l W_j) + sigma^2) <= tr(H_l W_k), with
    H_l the lifted combined channel of the position-l user.  Rows are
    divided by sigma^2 so coefficients sit near unit scale.

    `subgrads` carries the full concave-part subgradients (spectral and
    proximal terms already weighted); pass zeros with rho = eta = 0 to get
    the plain SDR objective sum_k tr(W_k).
    """
    rho = config.rho if rho is None else rho
    eta = config.eta if eta is None else eta
    users = tuple(ordering)
    kk = len(users)
    m = ch_eff.shape[1]
    subgrads = [np.asarray(s) for s in subgrads]
    if len(subgrads) != kk or any(s.shape != (m, m) for s in subgrads):
        raise ValueError("need one (M, M) subgradient per user")

    sigma2 = config.sigma2_mw
    targets = config.sinr_targets()
    lifted_h = [np.outer(h, h.conj()) / sigma2 for h in ch_eff]  # rows scaled by noise

    constraints = []
    for k_pos in range(kk):
        u_k = users[k_pos]
        target = targets[u_k]
        if target <= 0:
            continue  # a zero-rate user imposes no SINR rows
        for l_pos in range(k_pos, kk):
            h_l = lifted_h[users[l_pos]]
            coeffs = {u_k: h_l}
            for j_pos in range(k_pos + 1, kk):
                coeffs[users[j_pos]] = -target * h_l
            constraints.append(conic.TraceConstraint(coeffs=coeffs, sense=">=", rhs=target))

    eye = np.eye(m)
    objective = {u: (1.0 + rho) * eye - subgrads[u] for u in users}
    quad = {u: eta for u in users} if eta else {}
    return conic.ConicProblem(
        block_dims=(m,) * kk,
        objective=objective,
        quad_weights=quad,
        constraints=constraints,
    )


def spectral_subgradient(w: np.ndarray) -> np.ndarray:
    """Subgradient u1 u1^H of the spectral norm at a PSD matrix.

    Eigenvalue ties resolve to the eigensolver's first returned vector, so
    repeated calls on identical input agree.
    """
    eig = hermitian_eig(w)
    u1 = eig.eigenvectors[:, 0]
    return np.outer(u1, u1.conj())


def _dc_objective(mats, rho: float):
    power = sum(float(np.real(np.trace(m))) for m in mats)
    pen = sum(nuclear_minus_spectral(m) for m in mats)
    return power + rho * pen, power, pen


def _extract_all(mats, total_power: float, rank_tol: float):
    vectors = []
    for m in mats:
        sigma1 = float(hermitian_eig(m).eigenvalues[0])
        # per-block ratio implied by the aggregate penalty criterion
        tol = max(rank_tol, rank_tol * max(1.0, total_power) / max(sigma1, np.finfo(float).tiny))
        vectors.append(extract_rank_one(m, tol))
    return vectors


def solve_beamformers_dc(
    ch_eff: np.ndarray,
    ordering,
    config: ScenarioConfig,
    init: LiftedBeamformers | None = None,
    solve_opts: conic.SolveOptions | None = None,
):
    """DC inner loop for the beamformer subproblem.

    Without an explicit `init`, the loop warm-starts from the SDR solution
    of the same constraint set (zero subgradients if that solve fails
    numerically).  Iterates until the aggregate rank-one penalty falls
    below ``rank_tol * max(1, total power)`` or the iteration cap; each
    accepted iterate has a DC objective no larger than its predecessor.

    Returns (BeamformerSet, LiftedBeamformers, DcTrace) inside a
    :class:`BeamformingResult`; infeasibility of the constraint set is
    reported, never raised.
    """
    users = tuple(ordering)
    rho, eta, rank_tol = config.rho, config.eta, config.rank_tol

    current = init
    if current is None:
        sdr_problem = build_beamformer_subproblem(
            ch_eff, users, [np.zeros((config.M, config.M))] * config.K, config, rho=0.0, eta=0.0
        )
        sdr_sol = conic.solve(sdr_problem, solve_opts)
        if sdr_sol.status is conic.ConicStatus.INFEASIBLE:
            return BeamformingResult(BeamformingStatus.INFEASIBLE)
        if sdr_sol.optimal or sdr_sol.usable():
            current = LiftedBeamformers.from_matrices(sdr_sol.blocks)

    trace = DcTrace()
    zero = np.zeros((config.M, config.M))
    for _ in range(config.max_inner_iters):
        if current is None:
            subgrads = [zero] * config.K
        else:
            subgrads = [rho * spectral_subgradient(w) + eta * np.asarray(w) for w in current.W]
        problem = build_beamformer_subproblem(ch_eff, users, subgrads, config)
        sol = conic.solve(problem, solve_opts)
        if sol.status is conic.ConicStatus.INFEASIBLE:
            return BeamformingResult(BeamformingStatus.INFEASIBLE)
        if not (sol.optimal or sol.usable()):
            break  # numerical stall; keep the last accepted iterate
        f_new, power, pen = _dc_objective(sol.blocks, rho)
        if trace.objectives and f_new > trace.objectives[-1]:
            break  # descent exhausted at solver precision
        if current is not None and trace.objectives:
            step = sum(
                float(np.linalg.norm(np.asarray(a) - np.asarray(b), "fro") ** 2)
                for a, b in zip(sol.blocks, current.W)
            )
            trace.step_sq_norms.append(step)
        current = LiftedBeamformers(tuple(sol.blocks), float(pen), float(power))
        trace.objectives.append(f_new)
        trace.penalties.append(float(pen))
        trace.iterations += 1
        if pen <= rank_tol * max(1.0, power):
            trace.converged = True
            break

    if current is None or not trace.converged:
        return BeamformingResult(BeamformingStatus.RANK_NOT_ACHIEVED, lifted=current, trace=trace)
    try:
        vectors = _extract_all(current.W, current.total_power, rank_tol)
    except RankToleranceExceeded:
        return BeamformingResult(BeamformingStatus.RANK_NOT_ACHIEVED, lifted=current, trace=trace)
    bf = BeamformerSet(w=tuple(vectors), ordering=users)
    return BeamformingResult(BeamformingStatus.SUCCESS, bf, current, trace)


def _min_common_scale(ch_eff, users, candidates, targets, sigma2):
    """Smallest c > 0 such that sqrt(c) * candidates meet every SINR row,
    or None when no scaling can (interference-limited violation)."""
    kk = len(users)
    c_req = 0.0
    for k_pos in range(kk):
        target = targets[users[k_pos]]
        if target <= 0:
            continue
        for l_pos in range(k_pos, kk):
            h_l = ch_eff[users[l_pos]]
            sig = abs(np.vdot(h_l, candidates[users[k_pos]])) ** 2
            intf = sum(
                abs(np.vdot(h_l, candidates[users[p]])) ** 2
                for p in range(k_pos + 1, kk)
            )
            denom = sig - target * intf
            if denom <= 0:
                return None
            c_req = max(c_req, target * sigma2 / denom)
    return c_req


def solve_beamformers_sdr(
    ch_eff: np.ndarray,
    ordering,
    config: ScenarioConfig,
    rng: np.random.Generator,
    n_randomizations: int = 200,
    solve_opts: conic.SolveOptions | None = None,
) -> BeamformingResult:
    """SDR baseline: rank constraints dropped, Gaussian randomization fallback.

    Each randomization draws one candidate per user from CN(0, W_k), scales
    the whole set by the minimal common power factor restoring feasibility,
    and the cheapest feasible set wins.
    """
    users = tuple(ordering)
    zero = [np.zeros((config.M, config.M))] * config.K
    problem = build_beamformer_subproblem(ch_eff, users, zero, config, rho=0.0, eta=0.0)
    sol = conic.solve(problem, solve_opts)
    if sol.status is conic.ConicStatus.INFEASIBLE:
        return BeamformingResult(BeamformingStatus.INFEASIBLE)
    if not (sol.optimal or sol.usable()):
        return BeamformingResult(BeamformingStatus.RANDOMIZATION_FAILED)
    lifted = LiftedBeamformers.from_matrices(sol.blocks)

    try:
        vectors = _extract_all(lifted.W, lifted.total_power, config.rank_tol)
        bf = BeamformerSet(w=tuple(vectors), ordering=users)
        return BeamformingResult(BeamformingStatus.EXACT, bf, lifted)
    except RankToleranceExceeded:
        pass

    targets = config.sinr_targets()
    sigma2 = config.sigma2_mw
    factors = []
    for w in lifted.W:
        eig = hermitian_eig(np.asarray(w))
        factors.append(eig.eigenvectors @ np.diag(np.sqrt(np.clip(eig.eigenvalues, 0.0, None))))
    best_power, best = np.inf, None
    for _ in range(n_randomizations):
        cand = [
            f @ ((rng.standard_normal(f.shape[1]) + 1j * rng.standard_normal(f.shape[1])) / np.sqrt(2.0))
            for f in factors
        ]
        c = _min_common_scale(ch_eff, users, cand, targets, sigma2)
        if c is None:
            continue
        scaled = [np.sqrt(c) * w for w in cand]
        power = sum(float(np.linalg.norm(w) ** 2) for w in scaled)
        if power < best_power:
            best_power, best = power, scaled
    if best is None:
        return BeamformingResult(BeamformingStatus.RANDOMIZATION_FAILED, lifted=lifted)
    bf = BeamformerSet(w=tuple(best), ordering=users)
    return BeamformingResult(BeamformingStatus.RANDOMIZED, bf, lifted)
