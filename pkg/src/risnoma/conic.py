"""Declarative conic subproblems over complex Hermitian PSD blocks.

A :class:`ConicProblem` collects Hermitian variable blocks, a linear (plus
optional quadratic Frobenius) objective, trace-linear constraints, and
diagonal pins.  :func:`solve` lowers the problem to a real symmetric cone
program via the standard embedding ``[[Re, -Im], [Im, Re]]`` and hands it
to Clarabel; a cvxpy backend with native complex Hermitian variables is
kept for cross-checking and as a fallback.

Returned solutions carry certified residuals recomputed from the primal
matrices, not just solver-reported figures.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .numerics import validate_hermitian

_SQRT2 = np.sqrt(2.0)


class ConicStatus(Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    MAX_ITERS = "max_iters"
    NUMERICAL_FAILURE = "numerical_failure"


@dataclass(frozen=True)
class TraceConstraint:
    """sum_b Re tr(A_b^H X_b)  {<=, ==, >=}  rhs."""

    coeffs: dict  # block index -> Hermitian ndarray
    sense: str
    rhs: float


@dataclass
class ConicProblem:
    block_dims: tuple
    objective: dict = field(default_factory=dict)  # block -> C_b, min sum Re tr(C^H X)
    quad_weights: dict = field(default_factory=dict)  # block -> q_b, adds q/2 ||X||_F^2
    constraints: list = field(default_factory=list)
    diag_fixed: dict = field(default_factory=dict)  # block -> [(index, value)]

    def validate(self) -> None:
        nb = len(self.block_dims)
        if nb == 0 or any(int(d) < 1 for d in self.block_dims):
            raise ValueError("block dims must be positive")
        for b, c in self.objective.items():
            self._check_block_matrix(b, c, "objective coefficient")
        for b, q in self.quad_weights.items():
            if not (0 <= b < nb) or not np.isfinite(q) or q < 0:
                raise ValueError(f"bad quadratic weight for block {b}: {q}")
        for i, con in enumerate(self.constraints):
            if con.sense not in ("<=", "==", ">="):
                raise ValueError(f"constraint {i}: unknown sense {con.sense!r}")
            if not np.isfinite(con.rhs):
                raise ValueError(f"constraint {i}: non-finite rhs")
            if not con.coeffs:
                raise ValueError(f"constraint {i}: empty coefficient set")
            for b, a in con.coeffs.items():
                self._check_block_matrix(b, a, f"constraint {i} coefficient")
        for b, pins in self.diag_fixed.items():
            dim = self.block_dims[b]
            for idx, val in pins:
                if not (0 <= idx < dim):
                    raise ValueError(f"diagonal pin index {idx} out of range for block {b}")
                if not np.isfinite(val):
                    raise ValueError("diagonal pin value must be finite")

    def _check_block_matrix(self, b: int, a: np.ndarray, what: str) -> None:
        if not (0 <= b < len(self.block_dims)):
            raise ValueError(f"{what} refers to unknown block {b}")
        a = np.asarray(a)
        dim = self.block_dims[b]
        if a.shape != (dim, dim):
            raise ValueError(f"{what} for block {b} has shape {a.shape}, expected {(dim, dim)}")
        validate_hermitian(a, what)


@dataclass
class ConicSolution:
    """Solver outcome with residuals recomputed from the returned blocks.

    ``status = OPTIMAL`` certifies primal residual <= 1e-7 * (1 + ||rhs||),
    block eigenvalues >= -1e-7 and duality gap <= 1e-6 * (1 + |objective|).
    Non-optimal statuses still carry the last iterate (when one exists)
    plus its residuals so iterative callers can decide whether to use it.
    """

    blocks: list
    status: ConicStatus
    objective: float
    primal_residual: float
    dual_residual: float
    psd_violation: float
    duality_gap: float
    rhs_norm: float = 0.0
    solver: str = ""
    iterations: int = 0

    @property
    def optimal(self) -> bool:
        return self.status is ConicStatus.OPTIMAL

    @property
    def has_solution(self) -> bool:
        return len(self.blocks) > 0

    def usable(self, primal_tol: float = 1e-6, gap_tol: float = 1e-4) -> bool:
        """Good enough to keep an outer iteration moving (looser than the
        optimality certificate; callers re-verify all final claims)."""
        if not self.has_solution:
            return False
        return (
            self.primal_residual <= primal_tol * (1.0 + self.rhs_norm)
            and self.duality_gap <= gap_tol * (1.0 + abs(self.objective))
        )


# Optimality certificate thresholds.
CERT_PRIMAL = 1e-7
CERT_PSD = 1e-7
CERT_GAP = 1e-6


@dataclass(frozen=True)
class SolveOptions:
    backend: str = "clarabel"  # "clarabel" | "cvxpy" | "cvxpy_real"
    tol: float = 1e-9
    max_iter: int = 200
    verbose: bool = False


DEFAULT_OPTIONS = SolveOptions()


# ---------------------------------------------------------------------------
# Hermitian parameterization: x = [diag | (Re, Im) per upper off-diagonal].


@lru_cache(maxsize=None)
def _offdiag_index(n: int) -> tuple:
    pairs = []
    for i in range(n):
        for j in range(i + 1, n):
            pairs.append((i, j))
    return tuple(pairs)


def _herm_nvar(n: int) -> int:
    return n * n


def _herm_to_vec(a: np.ndarray) -> np.ndarray:
    """Coefficient vector c such that c . x == Re tr(A^H X)."""
    n = a.shape[0]
    c = np.empty(n * n)
    c[:n] = np.real(np.diag(a))
    k = n
    for i, j in _offdiag_index(n):
        c[k] = 2.0 * np.real(a[i, j])
        c[k + 1] = 2.0 * np.imag(a[i, j])
        k += 2
    return c


def _vec_to_herm(x: np.ndarray, n: int) -> np.ndarray:
    a = np.zeros((n, n), dtype=complex)
    a[np.diag_indices(n)] = x[:n]
    k = n
    for i, j in _offdiag_index(n):
        a[i, j] = x[k] + 1j * x[k + 1]
        a[j, i] = x[k] - 1j * x[k + 1]
        k += 2
    return a


@lru_cache(maxsize=None)
def _embed_svec_map(n: int) -> tuple:
    """Triplets of the map x -> svec([[Re X, -Im X], [Im X, Re X]]).

    svec packs the upper triangle column-major with sqrt(2)-scaled
    off-diagonal entries (the Clarabel PSD-triangle convention).
    """
    pairs = {p: n + 2 * k for k, p in enumerate(_offdiag_index(n))}
    d = 2 * n
    rows, cols, vals = [], [], []
    row = 0
    for c in range(d):
        for r in range(c + 1):
            scale = 1.0 if r == c else _SQRT2
            i, j = r % n, c % n
            if (r < n) == (c < n):  # Re-quadrants (upper-left, lower-right)
                if i == j:
                    rows.append(row)
                    cols.append(i)
                    vals.append(scale)
                else:
                    rows.append(row)
                    cols.append(pairs[(min(i, j), max(i, j))])
                    vals.append(scale)
            else:  # upper-right quadrant = -Im X; Im X_ii = 0
                if i != j:
                    sgn = -1.0 if i < j else 1.0
                    rows.append(row)
                    cols.append(pairs[(min(i, j), max(i, j))] + 1)
                    vals.append(scale * sgn)
            row += 1
    return tuple(rows), tuple(cols), tuple(vals), row


def _unsvec(s: np.ndarray, d: int) -> np.ndarray:
    m = np.zeros((d, d))
    k = 0
    for c in range(d):
        for r in range(c + 1):
            v = s[k] if r == c else s[k] / _SQRT2
            m[r, c] = v
            m[c, r] = v
            k += 1
    return m


def _complex_from_embedding(e: np.ndarray) -> np.ndarray:
    """Compress a 2n x 2n symmetric PSD matrix back to complex Hermitian.

    For an exact embedding this inverts :func:`risnoma.numerics.real_embed`;
    for a general PSD matrix it is the PSD-preserving congruence average.
    """
    n = e.shape[0] // 2
    re = (e[:n, :n] + e[n:, n:]) / 2.0
    im = (e[n:, :n] - e[:n, n:]) / 2.0
    x = re + 1j * im
    return (x + x.conj().T) / 2.0


# ---------------------------------------------------------------------------
# Clarabel backend.


def _assemble_clarabel(problem: ConicProblem):
    import clarabel

    dims = problem.block_dims
    offsets = np.cumsum([0] + [_herm_nvar(n) for n in dims])
    nvar = int(offsets[-1])

    def scatter(coeffs: dict) -> np.ndarray:
        row = np.zeros(nvar)
        for b, a in coeffs.items():
            row[offsets[b] : offsets[b + 1]] = _herm_to_vec(np.asarray(a))
        return row

    q = scatter(problem.objective)
    pdiag = np.zeros(nvar)
    for b, w in problem.quad_weights.items():
        if w == 0.0:
            continue
        n = dims[b]
        pdiag[offsets[b] : offsets[b] + n] = w
        pdiag[offsets[b] + n : offsets[b + 1]] = 2.0 * w
    P = sp.diags(pdiag, format="csc") if pdiag.any() else sp.csc_matrix((nvar, nvar))

    eq_rows, eq_rhs = [], []
    for b, pins in problem.diag_fixed.items():
        for idx, val in pins:
            row = np.zeros(nvar)
            row[offsets[b] + idx] = 1.0
            eq_rows.append(row)
            eq_rhs.append(float(val))
    ineq_rows, ineq_rhs = [], []
    for con in problem.constraints:
        row = scatter(con.coeffs)
        if con.sense == "==":
            eq_rows.append(row)
            eq_rhs.append(float(con.rhs))
        elif con.sense == "<=":
            ineq_rows.append(row)
            ineq_rhs.append(float(con.rhs))
        else:  # ">=" lowered to "-row <= -rhs"
            ineq_rows.append(-row)
            ineq_rhs.append(-float(con.rhs))

    cones = []
    a_parts, b_parts = [], []
    if eq_rows:
        a_parts.append(sp.csc_matrix(np.asarray(eq_rows)))
        b_parts.append(np.asarray(eq_rhs))
        cones.append(clarabel.ZeroConeT(len(eq_rows)))
    if ineq_rows:
        a_parts.append(sp.csc_matrix(np.asarray(ineq_rows)))
        b_parts.append(np.asarray(ineq_rhs))
        cones.append(clarabel.NonnegativeConeT(len(ineq_rows)))

    psd_slices = []
    row0 = 0
    tri_r, tri_c, tri_v = [], [], []
    for b, n in enumerate(dims):
        rows, cols, vals, nrows = _embed_svec_map(n)
        tri_r.extend(row0 + r for r in rows)
        tri_c.extend(offsets[b] + c for c in cols)
        tri_v.extend(-v for v in vals)  # A x + s = 0  =>  s = svec(embed(X))
        psd_slices.append((row0, row0 + nrows, n))
        row0 += nrows
        cones.append(clarabel.PSDTriangleConeT(2 * n))
    a_parts.append(sp.csc_matrix((tri_v, (tri_r, tri_c)), shape=(row0, nvar)))
    b_parts.append(np.zeros(row0))

    A = sp.vstack(a_parts, format="csc")
    b = np.concatenate(b_parts)
    n_linear = len(b) - row0
    return P, q, A, b, cones, psd_slices, offsets, n_linear


def _solve_clarabel(problem: ConicProblem, opts: SolveOptions) -> ConicSolution:
    import clarabel

    P, q, A, b, cones, psd_slices, offsets, n_linear = _assemble_clarabel(problem)
    settings = clarabel.DefaultSettings()
    settings.verbose = opts.verbose
    settings.max_iter = opts.max_iter
    settings.tol_gap_abs = opts.tol
    settings.tol_gap_rel = opts.tol
    settings.tol_feas = opts.tol
    solver = clarabel.DefaultSolver(P, q, A, b, cones, settings)
    sol = solver.solve()
    status_name = str(sol.status).split(".")[-1]

    if status_name == "PrimalInfeasible":
        return ConicSolution([], ConicStatus.INFEASIBLE, np.nan, np.nan, np.nan, np.nan,
                             np.nan, 0.0, "clarabel", int(sol.iterations))
    iterate_statuses = {
        "Solved": ConicStatus.OPTIMAL,
        "AlmostSolved": ConicStatus.NUMERICAL_FAILURE,
        "InsufficientProgress": ConicStatus.NUMERICAL_FAILURE,
        "MaxIterations": ConicStatus.MAX_ITERS,
    }
    if status_name not in iterate_statuses:
        return ConicSolution([], ConicStatus.NUMERICAL_FAILURE, np.nan, np.nan, np.nan,
                             np.nan, np.nan, 0.0, "clarabel", int(sol.iterations))

    # Reconstruct each block from the PSD cone slack: cone membership is then
    # exact (up to round-off) and the equality mismatch shows up in the
    # primal residual.
    s = np.asarray(sol.s)
    if not np.all(np.isfinite(s)):
        return ConicSolution([], ConicStatus.NUMERICAL_FAILURE, np.nan, np.nan, np.nan,
                             np.nan, np.nan, 0.0, "clarabel", int(sol.iterations))
    blocks = []
    for lo, hi, n in psd_slices:
        e = _unsvec(s[n_linear + lo : n_linear + hi], 2 * n)
        blocks.append(_complex_from_embedding(e))

    objective = _evaluate_objective(problem, blocks)
    primal, psd_viol = _certify_primal(problem, blocks)
    gap = abs(float(sol.obj_val) - float(sol.obj_val_dual))
    rhs_norm = _rhs_norm(problem)
    # the recomputed certificate decides optimality, not the solver label:
    # conservative AlmostSolved iterates that certify are upgraded, Solved
    # claims that fail certification are downgraded
    certified = (
        primal <= CERT_PRIMAL * (1.0 + rhs_norm)
        and psd_viol <= CERT_PSD
        and gap <= CERT_GAP * (1.0 + abs(objective))
    )
    if certified:
        status = ConicStatus.OPTIMAL
    else:
        status = iterate_statuses[status_name]
        if status is ConicStatus.OPTIMAL:
            status = ConicStatus.NUMERICAL_FAILURE
    return ConicSolution(blocks, status, objective, primal, float(sol.r_dual),
                         psd_viol, gap, rhs_norm, "clarabel", int(sol.iterations))


# ---------------------------------------------------------------------------
# cvxpy backend (cross-check / fallback).


def _solve_cvxpy(problem: ConicProblem, opts: SolveOptions,
                 lower_to_real: bool = False) -> ConicSolution:
    import cvxpy as cp

    from .numerics import real_embed

    dims = problem.block_dims
    if lower_to_real:
        xs = [cp.Variable((2 * n, 2 * n), symmetric=True) for n in dims]

        def tr(a, b):
            # Re tr(A^H X) lifts to tr(embed(A)^T Y) / 2
            return cp.trace(real_embed(np.asarray(a)) @ xs[b]) / 2.0

        def fro2(b):
            return cp.sum_squares(xs[b]) / 2.0
    else:
        xs = [cp.Variable((n, n), hermitian=True) for n in dims]

        def tr(a, b):
            return cp.real(cp.trace(np.asarray(a).conj().T @ xs[b]))

        def fro2(b):
            return cp.sum_squares(cp.real(xs[b])) + cp.sum_squares(cp.imag(xs[b]))

    obj = 0
    for b, c in problem.objective.items():
        obj = obj + tr(c, b)
    for b, w in problem.quad_weights.items():
        if w:
            obj = obj + w / 2.0 * fro2(b)

    cons = [x >> 0 for x in xs]
    for con in problem.constraints:
        expr = sum(tr(a, b) for b, a in con.coeffs.items())
        if con.sense == "<=":
            cons.append(expr <= con.rhs)
        elif con.sense == ">=":
            cons.append(expr >= con.rhs)
        else:
            cons.append(expr == con.rhs)
    for b, pins in problem.diag_fixed.items():
        for idx, val in pins:
            if lower_to_real:
                n = dims[b]
                cons.append(xs[b][idx, idx] == val)
                cons.append(xs[b][n + idx, n + idx] == val)
            else:
                cons.append(cp.real(xs[b][idx, idx]) == val)

    prob = cp.Problem(cp.Minimize(obj), cons)
    try:
        import warnings

        with warnings.catch_warnings():
            warnings.simplefilter("ignore")  # inaccurate-solution warnings are handled below
            prob.solve(solver=cp.CLARABEL, max_iter=opts.max_iter)
    except cp.error.SolverError:
        return ConicSolution([], ConicStatus.NUMERICAL_FAILURE, np.nan, np.nan, np.nan,
                             np.nan, np.nan, 0.0, "cvxpy", 0)

    if prob.status in (cp.INFEASIBLE, cp.INFEASIBLE_INACCURATE):
        return ConicSolution([], ConicStatus.INFEASIBLE, np.nan, np.nan, np.nan, np.nan,
                             np.nan, 0.0, "cvxpy", 0)
    if prob.status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE):
        return ConicSolution([], ConicStatus.NUMERICAL_FAILURE, np.nan, np.nan, np.nan,
                             np.nan, np.nan, 0.0, "cvxpy", 0)

    blocks, psd_viol = [], 0.0
    for x in xs:
        v = np.asarray(x.value)
        mat = _complex_from_embedding(v) if lower_to_real else (v + v.conj().T) / 2.0
        # project onto the cone so downstream penalty evaluations see PSD
        # matrices; the clipped deficit is reported, not hidden
        vals, vecs = np.linalg.eigh(mat)
        psd_viol = max(psd_viol, max(0.0, -float(vals[0])))
        if vals[0] < 0:
            mat = (vecs * np.clip(vals, 0.0, None)) @ vecs.conj().T
            mat = (mat + mat.conj().T) / 2.0
        blocks.append(mat)
    objective = _evaluate_objective(problem, blocks)
    primal, _ = _certify_primal(problem, blocks)
    gap = abs(objective - float(prob.value))
    rhs_norm = _rhs_norm(problem)
    certified = (
        primal <= CERT_PRIMAL * (1.0 + rhs_norm)
        and psd_viol <= CERT_PSD
        and gap <= CERT_GAP * (1.0 + abs(objective))
    )
    status = ConicStatus.OPTIMAL if certified else ConicStatus.NUMERICAL_FAILURE
    return ConicSolution(blocks, status, objective, primal, np.nan, psd_viol, gap,
                         rhs_norm, "cvxpy", 0)


# ---------------------------------------------------------------------------
# Certification helpers.


def _evaluate_objective(problem: ConicProblem, blocks: list) -> float:
    total = 0.0
    for b, c in problem.objective.items():
        total += float(np.real(np.trace(np.asarray(c).conj().T @ blocks[b])))
    for b, w in problem.quad_weights.items():
        if w:
            total += w / 2.0 * float(np.linalg.norm(blocks[b], "fro") ** 2)
    return total


def _certify_primal(problem: ConicProblem, blocks: list):
    # row violations are scaled by the row's coefficient norm so the
    # certificate is invariant under rescaling a constraint
    worst = 0.0
    for con in problem.constraints:
        val = sum(
            float(np.real(np.trace(np.asarray(a).conj().T @ blocks[b])))
            for b, a in con.coeffs.items()
        )
        scale = max(1.0, float(np.sqrt(sum(np.linalg.norm(a) ** 2 for a in con.coeffs.values()))))
        if con.sense == "<=":
            viol = val - con.rhs
        elif con.sense == ">=":
            viol = con.rhs - val
        else:
            viol = abs(val - con.rhs)
        worst = max(worst, viol / scale)
    for b, pins in problem.diag_fixed.items():
        for idx, val in pins:
            worst = max(worst, abs(float(np.real(blocks[b][idx, idx])) - val))
    psd_viol = 0.0
    for x in blocks:
        lam_min = float(np.linalg.eigvalsh(x)[0])
        psd_viol = max(psd_viol, max(0.0, -lam_min))
    return worst, psd_viol


def _rhs_norm(problem: ConicProblem) -> float:
    vals = [con.rhs for con in problem.constraints]
    for pins in problem.diag_fixed.values():
        vals.extend(v for _, v in pins)
    return float(np.linalg.norm(vals)) if vals else 0.0


# ---------------------------------------------------------------------------
# Public entry points.


def solve(problem: ConicProblem, opts: SolveOptions | None = None) -> ConicSolution:
    """Solve a conic problem, retrying with relaxed settings before failing.

    The attempt chain (tight Clarabel, relaxed Clarabel, cvxpy) is fixed, so
    results are deterministic for identical inputs.
    """
    opts = opts or DEFAULT_OPTIONS
    problem.validate()
    if opts.backend == "cvxpy":
        return _solve_cvxpy(problem, opts)
    if opts.backend == "cvxpy_real":
        return _solve_cvxpy(problem, opts, lower_to_real=True)
    if opts.backend != "clarabel":
        raise ValueError(f"unknown backend {opts.backend!r}")

    sol = _solve_clarabel(problem, opts)
    if sol.status in (ConicStatus.OPTIMAL, ConicStatus.INFEASIBLE) or sol.usable():
        return sol
    retry = replace(opts, tol=max(opts.tol, 1e-8), max_iter=2 * opts.max_iter)
    sol2 = _solve_clarabel(problem, retry)
    if sol2.status in (ConicStatus.OPTIMAL, ConicStatus.INFEASIBLE) or sol2.usable():
        return sol2
    sol3 = _solve_cvxpy(problem, opts)
    if sol3.status in (ConicStatus.OPTIMAL, ConicStatus.INFEASIBLE) or sol3.usable():
        return sol3
    return sol


def feasibility_probe(problem: ConicProblem, opts: SolveOptions | None = None) -> bool:
    """True iff the constraint set is feasible (solved with a zero objective)."""
    stripped = ConicProblem(
        block_dims=problem.block_dims,
        objective={},
        quad_weights={},
        constraints=problem.constraints,
        diag_fixed=problem.diag_fixed,
    )
    return solve(stripped, opts).optimal


def dump_problem(problem: ConicProblem) -> str:
    """Self-describing text rendering for offline inspection."""
    lines = [f"conic problem: {len(problem.block_dims)} block(s), "
             f"{len(problem.constraints)} constraint(s)"]
    for b, n in enumerate(problem.block_dims):
        parts = [f"block {b}: dim {n}"]
        if b in problem.quad_weights and problem.quad_weights[b]:
            parts.append(f"quad weight {problem.quad_weights[b]:g}")
        if b in problem.diag_fixed:
            parts.append(f"{len(problem.diag_fixed[b])} diagonal pin(s)")
        lines.append("  " + ", ".join(parts))
        if b in problem.objective:
            lines.append(f"    objective C = {np.array2string(np.asarray(problem.objective[b]), precision=6)}")
    for i, con in enumerate(problem.constraints):
        terms = " + ".join(f"tr(A{b}^H X{b})" for b in sorted(con.coeffs))
        lines.append(f"  c{i}: {terms} {con.sense} {con.rhs:.9g}")
        for b in sorted(con.coeffs):
            lines.append(f"    A{b} = {np.array2string(np.asarray(con.coeffs[b]), precision=6)}")
    return "\n".join(lines)
