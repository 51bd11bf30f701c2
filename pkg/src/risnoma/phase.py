"""Phase-shift subproblem for fixed beamformers.

For fixed beamformers the SINR constraints become quadratic forms in the
unit-modulus phase vector; an auxiliary entry homogenizes them so the
lifted matrix V has an all-ones diagonal.  Includes the DC feasibility
solver, the SDR baseline, random phases, and discrete quantization.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import conic
from .channel import BeamformerSet, ChannelSet, ScenarioConfig
from .dc import DcTrace
from .numerics import (
    RankToleranceExceeded,
    extract_rank_one,
    hermitian_eig,
    nuclear_minus_spectral,
)


@dataclass(frozen=True)
class PhaseProblemData:
    """Quadratic-form data of the phase feasibility problem.

    For users l, k: ``a[l, k] = diag(h_r,l^H) G w_k`` and
    ``b[l, k] = h_d,l^H w_k``; ``R[l, k]`` is the homogenized (N+1) block
    matrix [[a a^H, a b*], [b a^H, 0]] satisfying
    ``vt^H R vt + |b|^2 == |v^H a + b|^2`` for vt = (v; 1).
    """

    a: np.ndarray  # (K, K, N)
    b: np.ndarray  # (K, K)
    R: np.ndarray  # (K, K, N+1, N+1)
    ordering: tuple

    @property
    def n_elements(self) -> int:
        return self.a.shape[2]


@dataclass(frozen=True)
class LiftedPhase:
    """Lifted phase matrix V (dim N+1, unit diagonal) plus its penalty."""

    V: np.ndarray
    penalty: float

    @classmethod
    def from_matrix(cls, v_mat: np.ndarray) -> "LiftedPhase":
        return cls(np.asarray(v_mat), float(nuclear_minus_spectral(v_mat)))

    @classmethod
    def from_phase_vector(cls, v: np.ndarray) -> "LiftedPhase":
        vt = np.concatenate([np.asarray(v, dtype=complex), [1.0 + 0.0j]])
        return cls.from_matrix(np.outer(vt, vt.conj()))


class PhaseStatus(Enum):
    SUCCESS = "success"
    INFEASIBLE = "infeasible"
    RANK_NOT_ACHIEVED = "rank_not_achieved"
    EXTRACTION_INFEASIBLE = "extraction_infeasible"
    EXACT = "exact"
    RANDOMIZED = "randomized"
    RANDOMIZATION_FAILED = "randomization_failed"


@dataclass
class PhaseResult:
    status: PhaseStatus
    v: np.ndarray | None = None
    trace: DcTrace | None = None
    lifted: LiftedPhase | None = None

    @property
    def ok(self) -> bool:
        return self.status in (PhaseStatus.SUCCESS, PhaseStatus.EXACT, PhaseStatus.RANDOMIZED)


def build_phase_data(ch: ChannelSet, bf: BeamformerSet) -> PhaseProblemData:
    kk, n = ch.h_r.shape
    a = np.empty((kk, kk, n), dtype=complex)
    b = np.empty((kk, kk), dtype=complex)
    r = np.zeros((kk, kk, n + 1, n + 1), dtype=complex)
    for l in range(kk):
        d_l = ch.h_r[l].conj()  # diag(h_r,l^H)
        for k in range(kk):
            a_lk = d_l * (ch.G @ bf.w[k])
            b_lk = complex(np.vdot(ch.h_d[l], bf.w[k]))
            a[l, k] = a_lk
            b[l, k] = b_lk
            r[l, k, :n, :n] = np.outer(a_lk, a_lk.conj())
            r[l, k, :n, n] = a_lk * np.conj(b_lk)
            r[l, k, n, :n] = b_lk * a_lk.conj()
    return PhaseProblemData(a=a, b=b, R=r, ordering=bf.ordering)


def phase_constraints_satisfied(
    data: PhaseProblemData,
    v: np.ndarray,
    config: ScenarioConfig,
    slack_tol: float = 1e-5,
) -> bool:
    """SINR feasibility of a unit-modulus v, evaluated on the (a, b) forms.

    Identical to the channel-level check because
    ``(h_r^H diag(v*) G + h_d^H) w == v^H a + b``.
    """
    v = np.asarray(v, dtype=complex)
    targets = config.sinr_targets()
    sigma2 = config.sigma2_mw
    users = data.ordering
    kk = len(users)
    gains = np.abs(np.conj(v) @ data.a.transpose(0, 2, 1) + data.b) ** 2  # (l, k) received powers
    for k_pos in range(kk):
        target = targets[users[k_pos]]
        if target <= 0:
            continue
        for l_pos in range(k_pos, kk):
            u_l = users[l_pos]
            intf = sum(gains[u_l, users[j]] for j in range(k_pos + 1, kk))
            if gains[u_l, users[k_pos]] < target * (intf + sigma2) * (1.0 - slack_tol):
                return False
    return True


def build_phase_subproblem(
    data: PhaseProblemData,
    config: ScenarioConfig,
    subgrad: np.ndarray | None,
    eta: float | None = None,
) -> conic.ConicProblem:
    """Lifted phase problem over one (N+1)-dim block with unit diagonal.

    With a subgradient the objective is the DC convexification
    tr(V) - <V, subgrad> + eta/2 ||V||_F^2; with ``subgrad=None`` the
    objective is zero (plain feasibility / SDR).  Constraint rows are
    divided by sigma^2 for conditioning.
    """
    eta = config.eta if eta is None else eta
    n1 = data.n_elements + 1
    users = data.ordering
    kk = len(users)
    sigma2 = config.sigma2_mw
    targets = config.sinr_targets()

    constraints = []
    for k_pos in range(kk):
        u_k = users[k_pos]
        target = targets[u_k]
        if target <= 0:
            continue
        for l_pos in range(k_pos, kk):
            u_l = users[l_pos]
            coeff = data.R[u_l, u_k].copy()
            rhs = target * sigma2 - abs(data.b[u_l, u_k]) ** 2
            for j_pos in range(k_pos + 1, kk):
                u_j = users[j_pos]
                coeff -= target * data.R[u_l, u_j]
                rhs += target * abs(data.b[u_l, u_j]) ** 2
            constraints.append(
                conic.TraceConstraint(coeffs={0: coeff / sigma2}, sense=">=", rhs=rhs / sigma2)
            )

    if subgrad is None:
        objective, quad = {}, {}
    else:
        objective = {0: np.eye(n1) - np.asarray(subgrad)}
        quad = {0: eta} if eta else {}
    return conic.ConicProblem(
        block_dims=(n1,),
        objective=objective,
        quad_weights=quad,
        constraints=constraints,
        diag_fixed={0: [(i, 1.0) for i in range(n1)]},
    )


def _project_unit_modulus(v: np.ndarray) -> np.ndarray:
    mags = np.abs(v)
    safe = np.where(mags > 0, mags, 1.0)
    return np.where(mags > 0, v / safe, 1.0 + 0.0j)


def _interior_init(data: PhaseProblemData, config: ScenarioConfig,
                   solve_opts: conic.SolveOptions | None):
    """Relaxed starting point for the DC loop: maximize a common slack in
    every SINR row (deep-interior lifted matrix).

    Starting the DC iterations from the most-interior relaxed point makes
    them converge to rank-one phases that leave the beamformer step real
    room to cut power; a rank-one feasible start would be a fixed point of
    the iteration and the plain relaxed solution hugs the active
    constraints of the incumbent phases.  Falls back to the zero-objective
    relaxed solution, then to the all-zero-phase lift.
    """
    base = build_phase_subproblem(data, config, subgrad=None)
    n1 = data.n_elements + 1
    cons = []
    for c in base.constraints:
        coeffs = dict(c.coeffs)
        coeffs[1] = np.array([[-max(1.0, abs(c.rhs))]])  # row-scaled common slack
        cons.append(conic.TraceConstraint(coeffs=coeffs, sense=">=", rhs=c.rhs))
    slack_problem = conic.ConicProblem(
        block_dims=(n1, 1),
        objective={1: np.array([[-1.0]])},
        constraints=cons,
        diag_fixed=base.diag_fixed,
    )
    sol = conic.solve(slack_problem, solve_opts)
    if sol.optimal or sol.usable():
        return sol.blocks[0], False
    relaxed = conic.solve(base, solve_opts)
    if relaxed.status is conic.ConicStatus.INFEASIBLE:
        return None, True
    if relaxed.optimal or relaxed.usable():
        return relaxed.blocks[0], False
    return LiftedPhase.from_phase_vector(np.ones(n1 - 1, dtype=complex)).V, False


def _extract_phase_vector(v_mat: np.ndarray, rank_tol: float) -> np.ndarray:
    """Rank-one extraction, dehomogenization, unit-modulus repair."""
    n1 = v_mat.shape[0]
    sigma1 = float(hermitian_eig(v_mat).eigenvalues[0])
    tol = max(rank_tol, rank_tol * n1 / max(sigma1, np.finfo(float).tiny))
    vt = extract_rank_one(v_mat, tol)
    pivot = vt[-1]
    if abs(pivot) < 1e-6:  # homogenizing entry must stay unit modulus
        raise RankToleranceExceeded(1.0, tol)
    return _project_unit_modulus(vt[:-1] / pivot)


def solve_phase_dc(
    data: PhaseProblemData,
    config: ScenarioConfig,
    init: LiftedPhase | None = None,
    solve_opts: conic.SolveOptions | None = None,
) -> PhaseResult:
    """DC loop for the lifted phase feasibility problem.

    Without an explicit ``init`` the loop starts from the max-slack
    relaxed solution (see :func:`_interior_init`), which lets the
    iterations move to a genuinely new rank-one point; a rank-one feasible
    ``init`` is a fixed point of the iteration and converges immediately.
    Success requires the penalty to reach ``rank_tol * (N + 1)`` and the
    extracted, re-normalized phase vector to pass the SINR check.
    """
    n = data.n_elements
    rank_tol, eta = config.rank_tol, config.eta

    if init is None:
        current, infeasible = _interior_init(data, config, solve_opts)
        if infeasible:
            return PhaseResult(PhaseStatus.INFEASIBLE)
    else:
        current = init.V
    trace = DcTrace()
    for _ in range(config.max_inner_iters):
        subgrad = spectral_subgradient_phase(current, eta)
        problem = build_phase_subproblem(data, config, subgrad)
        sol = conic.solve(problem, solve_opts)
        if sol.status is conic.ConicStatus.INFEASIBLE:
            return PhaseResult(PhaseStatus.INFEASIBLE)
        if not (sol.optimal or sol.usable()):
            break
        v_new = sol.blocks[0]
        # with a unit diagonal the nuclear norm is fixed, so the DC
        # objective reduces to the rank-one penalty itself
        pen = nuclear_minus_spectral(v_new)
        f_new = float(pen)
        if trace.objectives and f_new > trace.objectives[-1]:
            break
        if trace.objectives:
            trace.step_sq_norms.append(float(np.linalg.norm(v_new - current, "fro") ** 2))
        current = v_new
        trace.objectives.append(f_new)
        trace.penalties.append(float(pen))
        trace.iterations += 1
        if pen <= rank_tol * (n + 1):
            trace.converged = True
            break

    lifted = LiftedPhase.from_matrix(current)
    if not trace.converged:
        return PhaseResult(PhaseStatus.RANK_NOT_ACHIEVED, trace=trace, lifted=lifted)
    try:
        v = _extract_phase_vector(current, rank_tol)
    except RankToleranceExceeded:
        return PhaseResult(PhaseStatus.RANK_NOT_ACHIEVED, trace=trace, lifted=lifted)
    if not phase_constraints_satisfied(data, v, config):
        return PhaseResult(PhaseStatus.EXTRACTION_INFEASIBLE, trace=trace, lifted=lifted)
    return PhaseResult(PhaseStatus.SUCCESS, v=v, trace=trace, lifted=lifted)


def spectral_subgradient_phase(v_mat: np.ndarray, eta: float) -> np.ndarray:
    eig = hermitian_eig(v_mat)
    u1 = eig.eigenvectors[:, 0]
    return np.outer(u1, u1.conj()) + eta * np.asarray(v_mat)


def solve_phase_sdr(
    data: PhaseProblemData,
    config: ScenarioConfig,
    rng: np.random.Generator,
    n_randomizations: int = 200,
    solve_opts: conic.SolveOptions | None = None,
) -> PhaseResult:
    """SDR baseline: feasibility with the rank constraint dropped.

    A rank-one relaxation solution is exact; otherwise Gaussian candidates
    drawn from the solution covariance are projected entrywise to unit
    modulus and the first one passing the SINR check wins.
    """
    problem = build_phase_subproblem(data, config, subgrad=None)
    sol = conic.solve(problem, solve_opts)
    if sol.status is conic.ConicStatus.INFEASIBLE:
        return PhaseResult(PhaseStatus.INFEASIBLE)
    if not (sol.optimal or sol.usable()):
        return PhaseResult(PhaseStatus.RANDOMIZATION_FAILED)
    v_mat = sol.blocks[0]
    lifted = LiftedPhase.from_matrix(v_mat)

    try:
        v = _extract_phase_vector(v_mat, config.rank_tol)
        if phase_constraints_satisfied(data, v, config):
            return PhaseResult(PhaseStatus.EXACT, v=v, lifted=lifted)
    except RankToleranceExceeded:
        pass

    eig = hermitian_eig(v_mat)
    factor = eig.eigenvectors @ np.diag(np.sqrt(np.clip(eig.eigenvalues, 0.0, None)))
    n1 = v_mat.shape[0]
    for _ in range(n_randomizations):
        vt = factor @ ((rng.standard_normal(n1) + 1j * rng.standard_normal(n1)) / np.sqrt(2.0))
        if abs(vt[-1]) == 0.0:
            continue
        v = _project_unit_modulus(vt[:-1] / vt[-1])
        if phase_constraints_satisfied(data, v, config):
            return PhaseResult(PhaseStatus.RANDOMIZED, v=v, lifted=lifted)
    return PhaseResult(PhaseStatus.RANDOMIZATION_FAILED, lifted=lifted)


def random_phase(n: int, rng: np.random.Generator) -> np.ndarray:
    """Unit-modulus vector with phases i.i.d. uniform on [0, 2pi)."""
    return np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, n))


def quantize_phases(v: np.ndarray, bits: int) -> np.ndarray:
    """Snap each phase to the nearest point of the 2^bits uniform lattice.

    Distance is circular (so angles near 2pi may snap to 0) and exact ties
    resolve toward the smaller lattice angle.
    """
    if bits < 1:
        raise ValueError("need at least one quantization bit")
    v = np.asarray(v, dtype=complex)
    levels = 1 << bits
    lattice = 2.0 * np.pi * np.arange(levels) / levels
    theta = np.mod(np.angle(v), 2.0 * np.pi)
    out = np.empty_like(v)
    for i, t in enumerate(theta):
        dist = np.abs(lattice - t)
        dist = np.minimum(dist, 2.0 * np.pi - dist)
        best = np.min(dist)
        # ties toward the smaller angle: argmin over equal distances
        candidates = np.flatnonzero(dist <= best + 1e-12)
        out[i] = np.exp(1j * lattice[candidates[0]])
    return out
