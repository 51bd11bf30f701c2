"""Geometric path-loss Rayleigh channels, SINR evaluation, rate feasibility.

All powers are handled in mW internally (noise at -80 dBm is 1e-8 mW);
dBm appears only at configuration and reporting boundaries.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np


def mw_from_dbm(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0)


def dbm_from_mw(mw: float) -> float:
    return 10.0 * np.log10(mw)


def path_loss(d: float, alpha: float, t0_db: float) -> float:
    """Linear power gain ``10^(T0/10) * d^-alpha`` at distance d meters."""
    if d <= 0:
        raise ValueError(f"distance must be positive, got {d}")
    return 10.0 ** (t0_db / 10.0) * float(d) ** (-alpha)


@dataclass(frozen=True)
class ScenarioConfig:
    """All scalar parameters of one simulated scenario.

    Geometry defaults follow the standard drop: BS at (0, 0, 10) m, RIS at
    (50, 50, 15) m, users uniform in x in [-50, 50], y in [60, 160], z = 0.
    The overloaded regime K > M is permitted and typical.
    """

    M: int = 3
    N: int = 8
    K: int = 4
    bs_pos: tuple = (0.0, 0.0, 10.0)
    ris_pos: tuple = (50.0, 50.0, 15.0)
    user_region: tuple = ((-50.0, 50.0), (60.0, 160.0))
    user_positions: tuple | None = None  # explicit (x, y, z) triples override the region
    t0_db: float = -30.0
    alpha_bu: float = 3.5
    alpha_bi: float = 2.0
    alpha_iu: float = 2.2
    ris_element_gain_db: float = 3.0
    noise_power_dbm: float = -80.0
    rate_min: float | tuple = 1.5  # bits per channel use, scalar or per user
    rho: float = 10.0
    eta: float = 1e-4
    epsilon: float = 1e-4
    rank_tol: float = 1e-6
    max_outer_iters: int = 30
    max_inner_iters: int = 50
    seed: int = 0

    def __post_init__(self):
        if self.M < 1 or self.K < 1 or self.N < 0:
            raise ValueError("need M >= 1, K >= 1, N >= 0")
        for name in ("alpha_bu", "alpha_bi", "alpha_iu"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.rho <= 0:
            raise ValueError("rho must be positive")
        if self.eta < 0:
            raise ValueError("eta must be nonnegative")
        if self.epsilon <= 0 or self.rank_tol <= 0:
            raise ValueError("epsilon and rank_tol must be positive")
        if self.max_outer_iters < 1 or self.max_inner_iters < 1:
            raise ValueError("iteration caps must be >= 1")
        rates = np.atleast_1d(np.asarray(self.rate_min, dtype=float))
        if rates.size not in (1, self.K) or np.any(rates < 0):
            raise ValueError("rate_min must be a nonnegative scalar or length-K sequence")
        if self.user_positions is not None and len(self.user_positions) != self.K:
            raise ValueError("user_positions must list one position per user")

    @property
    def sigma2_mw(self) -> float:
        return mw_from_dbm(self.noise_power_dbm)

    @property
    def ris_gain_linear(self) -> float:
        return 10.0 ** (self.ris_element_gain_db / 10.0)

    def rates(self) -> np.ndarray:
        r = np.atleast_1d(np.asarray(self.rate_min, dtype=float))
        return np.full(self.K, r[0]) if r.size == 1 else r.copy()

    def sinr_targets(self) -> np.ndarray:
        """Per-user minimum SINR 2^rate - 1."""
        return 2.0 ** self.rates() - 1.0


@dataclass(frozen=True)
class ChannelSet:
    """One realization of the channel triple (direct, RIS-user, BS-RIS)."""

    h_d: np.ndarray  # (K, M) BS -> user direct links
    h_r: np.ndarray  # (K, N) RIS -> user links
    G: np.ndarray  # (N, M) BS -> RIS link
    user_positions: np.ndarray | None = None  # (K, 3), kept for diagnostics

    def without_ris(self) -> "ChannelSet":
        return replace(self, h_r=np.zeros_like(self.h_r), G=np.zeros_like(self.G))


@dataclass(frozen=True)
class BeamformerSet:
    """Per-user beamformers plus the decode order in force.

    ``ordering[p]`` is the user decoded at position p; position 0 is decoded
    first by every user and carries the highest allocated power.
    """

    w: tuple  # K arrays of shape (M,), indexed by user
    ordering: tuple  # permutation of range(K)

    def __post_init__(self):
        if sorted(self.ordering) != list(range(len(self.w))):
            raise ValueError("ordering must be a permutation of range(K)")

    @property
    def total_power(self) -> float:
        return float(sum(np.linalg.norm(wk) ** 2 for wk in self.w))


def validate_phase_vector(v: np.ndarray, atol: float = 1e-8) -> np.ndarray:
    v = np.asarray(v, dtype=complex)
    if v.ndim != 1:
        raise ValueError("phase-shift vector must be one-dimensional")
    if v.size and np.max(np.abs(np.abs(v) - 1.0)) > atol:
        raise ValueError("phase-shift entries must be unit modulus")
    return v


def _standard_complex(rng: np.random.Generator, shape) -> np.ndarray:
    # circular complex Gaussian with E|x|^2 = 1
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def generate_channels(config: ScenarioConfig, rng: np.random.Generator) -> ChannelSet:
    """Draw one Rayleigh channel realization.

    User positions come first in the draw order (uniform in the configured
    region unless pinned), then the direct links, then the RIS-side links,
    so realizations with equal (config, seed) are bitwise identical and the
    direct links are shared across runs that differ only in N.

    The per-element RIS gain is applied once per reflected path, entirely on
    the RIS-user link.
    """
    k, m, n = config.K, config.M, config.N
    if config.user_positions is not None:
        pos = np.asarray(config.user_positions, dtype=float).reshape(k, 3)
    else:
        (x0, x1), (y0, y1) = config.user_region
        xy = rng.uniform([x0, y0], [x1, y1], size=(k, 2))
        pos = np.column_stack([xy, np.zeros(k)])

    bs = np.asarray(config.bs_pos, dtype=float)
    ris = np.asarray(config.ris_pos, dtype=float)
    d_bu = np.linalg.norm(pos - bs, axis=1)
    d_iu = np.linalg.norm(pos - ris, axis=1)
    d_ib = float(np.linalg.norm(ris - bs))
    if np.any(d_bu <= 0) or np.any(d_iu <= 0) or d_ib <= 0:
        raise ValueError("degenerate geometry: zero link distance")

    h_d = np.empty((k, m), dtype=complex)
    for i in range(k):
        h_d[i] = np.sqrt(path_loss(d_bu[i], config.alpha_bu, config.t0_db)) * _standard_complex(rng, m)
    h_r = np.empty((k, n), dtype=complex)
    for i in range(k):
        gain = path_loss(d_iu[i], config.alpha_iu, config.t0_db) * config.ris_gain_linear
        h_r[i] = np.sqrt(gain) * _standard_complex(rng, n)
    G = np.sqrt(path_loss(d_ib, config.alpha_bi, config.t0_db)) * _standard_complex(rng, (n, m))
    return ChannelSet(h_d=h_d, h_r=h_r, G=G, user_positions=pos)


def combined_channel(ch: ChannelSet, v: np.ndarray, k: int) -> np.ndarray:
    """Effective channel h_k with row form h_k^H = h_r^H diag(v*) G + h_d^H.

    The reflection matrix realized by a phase vector v is diag(v*), so the
    lifted quadratic forms built elsewhere read v^H a + b with
    a = diag(h_r^H) G w.
    """
    v = np.asarray(v, dtype=complex)
    return ch.G.conj().T @ (v * ch.h_r[k]) + ch.h_d[k]


def effective_channels(ch: ChannelSet, v: np.ndarray) -> np.ndarray:
    """Stack of combined channels, shape (K, M)."""
    return np.stack([combined_channel(ch, v, k) for k in range(ch.h_d.shape[0])])


def sinr(ch_eff: np.ndarray, bf: BeamformerSet, k_pos: int, l_pos: int, sigma2: float) -> float:
    """SINR at the user in decode position ``l_pos`` for the signal of
    position ``k_pos``; requires ``l_pos >= k_pos``.
    """
    if l_pos < k_pos:
        raise ValueError("SINR is defined only for decoders at or after the signal's position")
    order = bf.ordering
    h_l = ch_eff[order[l_pos]]
    signal = abs(np.vdot(h_l, bf.w[order[k_pos]])) ** 2
    interference = sum(
        abs(np.vdot(h_l, bf.w[order[j]])) ** 2 for j in range(k_pos + 1, len(order))
    )
    return signal / (interference + sigma2)


@dataclass(frozen=True)
class FeasibilityReport:
    feasible: bool
    worst_margin: float  # min over constraints of SINR/target - (1 - slack)
    worst_pair: tuple | None  # (k_pos, l_pos) of the tightest constraint

    def __bool__(self) -> bool:
        return self.feasible


def check_feasible(
    ch: ChannelSet,
    v: np.ndarray,
    bf: BeamformerSet,
    config: ScenarioConfig,
    slack_tol: float = 1e-5,
) -> FeasibilityReport:
    """Check every decode-order SINR constraint with relative slack.

    Feasible iff SINR_l^k >= target_k * (1 - slack_tol) for all positions
    k and all l >= k.  Positions with a zero SINR target are skipped.
    """
    ch_eff = effective_channels(ch, v)
    targets = config.sinr_targets()
    sigma2 = config.sigma2_mw
    kk = len(bf.ordering)
    worst = np.inf
    worst_pair = None
    for k_pos in range(kk):
        target = targets[bf.ordering[k_pos]]
        if target <= 0:
            continue
        for l_pos in range(k_pos, kk):
            margin = sinr(ch_eff, bf, k_pos, l_pos, sigma2) / target - (1.0 - slack_tol)
            if margin < worst:
                worst, worst_pair = margin, (k_pos, l_pos)
    if worst_pair is None:
        return FeasibilityReport(True, np.inf, None)
    return FeasibilityReport(bool(worst >= 0.0), float(worst), worst_pair)


def sic_power_ordering(ch: ChannelSet, v: np.ndarray, bf: BeamformerSet) -> bool:
    """Post-hoc diagnostic: do received powers decrease along the decode
    order at every user?  Never enforced by the optimizers; the rate
    constraints already guarantee decodability.
    """
    ch_eff = effective_channels(ch, v)
    order = bf.ordering
    for user in range(len(order)):
        p = [abs(np.vdot(ch_eff[user], bf.w[order[j]])) ** 2 for j in range(len(order))]
        if any(p[j] < p[j + 1] for j in range(len(p) - 1)):
            return False
    return True
