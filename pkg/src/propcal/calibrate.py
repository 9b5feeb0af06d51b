"""Sequential Monte-Carlo calibration of the selection thresholds.

Under the pure-noise null every family member estimates the same value, so
any early stop is a false alarm.  The thresholds z_1..z_{K-1} are fixed one
after another: z_m is the smallest value such that, padding the remaining
thresholds with +inf, the expected false-alarm loss at every later step k
stays below the budget m/(K-1) * alpha * c_r.  All steps share one null
sample (common random numbers), which makes the sequential definition
well-posed and the output a deterministic function of the seed.

The per-step loss at k is |v_k^{-1}(theta_hat_k - theta_tilde_k)^2|^r, i.e.
zero when the procedure has not stopped before k and the standardized
squared gap to the stop index otherwise.
"""

from __future__ import annotations

import hashlib
import math
import os
from dataclasses import dataclass

import numpy as np

from .errors import BracketError, DomainError, InvariantError
from .family import FamilyDesign, null_draws
from .select import CriticalValues

# Mean-risk monotonicity in z holds exactly at the level of per-replication
# stopping indices; the averaged loss can still tick up by O(1/N) when a
# replication's stop moves to a later index with a larger realized gap.  The
# slack (relative to the step budget) absorbs that discreteness.
_MONOTONE_SLACK = 0.05

_BRACKET_CEILING = 1e9


@dataclass(frozen=True)
class CalibrationConfig:
    """Parameters of the Monte-Carlo calibration.

    ``r`` is the loss power, ``alpha`` the budget level; ``precompute_tables``
    trades ~2*N*K^2 doubles of memory for fewer flops per bisection probe
    (results are bit-identical either way).  ``workers`` parallelizes sample
    generation only; None defers to the PROPCAL_WORKERS environment variable.
    """

    r: float = 0.5
    alpha: float = 1.0
    n_replications: int = 50_000
    seed: int = 20240101
    bisection_tol: float = 1e-3
    max_bracket: float | None = None
    precompute_tables: bool = True
    workers: int | None = None

    def __post_init__(self):
        if self.r <= 0 or self.alpha <= 0:
            raise DomainError("r and alpha must be positive")
        if self.n_replications < 1000:
            raise DomainError("n_replications must be >= 1000")
        if self.bisection_tol <= 0:
            raise DomainError("bisection_tol must be positive")

    def resolved_workers(self) -> int:
        if self.workers is not None:
            return max(1, int(self.workers))
        return max(1, int(os.environ.get("PROPCAL_WORKERS", "1")))


@dataclass
class NullSample:
    """Precomputed null replications and their pairwise statistics.

    ``xi`` holds the draws on the scale the statistics are computed at: for
    sequence designs the unit noise scale (standardized statistics do not
    depend on it, which keeps calibration bitwise invariant under the scale),
    otherwise the design scale.  ``v`` matches that scale.  The tables, when
    present, hold t[i, l, k] = (xi_l - xi_k)^2 / (2 v_l) and
    d[i, m, k] = (xi_m - xi_k)^2 / v_k for the replication i.
    """

    xi: np.ndarray
    v: np.ndarray
    seed: int
    label: str
    t_table: np.ndarray | None = None
    d_table: np.ndarray | None = None

    @property
    def n_replications(self) -> int:
        return int(self.xi.shape[0])

    @property
    def K(self) -> int:
        return int(self.xi.shape[1])

    def t_row(self, l: int) -> np.ndarray:
        """Statistics against estimate l: (N, K) slice t[:, l, :]."""
        if self.t_table is not None:
            return self.t_table[:, l, :]
        return (self.xi[:, l : l + 1] - self.xi) ** 2 / (2.0 * self.v[l])

    def loss_gather(self, jhat: np.ndarray, ks: np.ndarray) -> np.ndarray:
        """d[i, jhat[i, c], ks[c]] for every replication i and column c."""
        rows = np.arange(self.n_replications)[:, None]
        if self.d_table is not None:
            return self.d_table[rows, jhat, ks[None, :]].copy()
        xg = self.xi[rows, jhat]
        return (xg - self.xi[:, ks]) ** 2 / self.v[ks]


def gaussian_moment(r: float) -> float:
    """c_r = E|xi|^(2r) for standard normal xi: 2^r Gamma(r+1/2)/Gamma(1/2)."""
    if r <= 0:
        raise DomainError("r must be positive")
    return 2.0**r * math.gamma(r + 0.5) / math.gamma(0.5)


def design_hash(design: FamilyDesign) -> str:
    h = hashlib.sha256()
    h.update(design.v.tobytes())
    h.update(design.B.tobytes())
    return h.hexdigest()[:12]


def build_null_sample(design: FamilyDesign, config: CalibrationConfig) -> NullSample:
    """Draw the shared null sample and (optionally) its statistic tables."""
    N = config.n_replications
    xi = null_draws(design, N, config.seed, workers=config.resolved_workers(), unit_scale=True)
    if design.sequence is not None:
        sd2 = design.sequence.sd**2
        v = np.cumsum(sd2)[design.sequence.cutoffs - 1]
    else:
        v = design.v
    t_table = d_table = None
    if config.precompute_tables:
        K = design.K
        t_table = np.empty((N, K, K))
        d_table = np.empty((N, K, K))
        step = 4096
        for lo in range(0, N, step):
            hi = min(lo + step, N)
            diff2 = (xi[lo:hi, :, None] - xi[lo:hi, None, :]) ** 2
            t_table[lo:hi] = diff2 / (2.0 * v[:, None])
            d_table[lo:hi] = diff2 / v[None, :]
    return NullSample(
        xi=xi, v=v, seed=config.seed, label=design.label, t_table=t_table, d_table=d_table
    )


def _first_fail(sample: NullSample, z_prefix: np.ndarray) -> np.ndarray:
    """First rejected step per replication (0-based), K when none rejects."""
    N, K = sample.xi.shape
    fail = np.zeros((N, K), dtype=bool)
    for l, zl in enumerate(z_prefix):
        if math.isinf(zl):
            continue
        fail[:, l + 1 :] |= sample.t_row(l)[:, l + 1 :] > zl
    anyf = fail.any(axis=1)
    return np.where(anyf, fail.argmax(axis=1), K)


def _mean_risks(
    sample: NullSample,
    first_fail: np.ndarray,
    ks: np.ndarray,
    r: float,
    with_caps: bool = False,
):
    """Mean |loss|^r at each 0-based target index in ``ks``; optionally also
    the largest single-replication contribution (the discreteness scale of
    the empirical mean)."""
    khat = first_fail - 1
    jhat = np.minimum(khat[:, None], ks[None, :])
    loss = sample.loss_gather(jhat, ks)
    loss[jhat == ks[None, :]] = 0.0
    powered = loss**r
    risks = powered.mean(axis=0)
    if not with_caps:
        return risks
    return risks, powered.max(axis=0) / sample.n_replications


def propagation_risk(sample: NullSample, z_prefix, k: int, r: float) -> float:
    """Empirical false-alarm risk at (1-based) step k when only the first
    len(z_prefix) thresholds are finite and the rest are +inf."""
    z_prefix = np.asarray(z_prefix, dtype=float)
    m = z_prefix.shape[0]
    if not (m < k <= sample.K):
        raise DomainError(f"need len(z_prefix) < k <= K, got m={m}, k={k}, K={sample.K}")
    ff = _first_fail(sample, z_prefix)
    return float(_mean_risks(sample, ff, np.array([k - 1]), r)[0])


def _bracket_gamma(design: FamilyDesign, sample: NullSample) -> float:
    """Worst relative pair variance, computed at the sample's scale so the
    bisection path (and hence the output) is bit-identical across noise
    scales of the same sequence design."""
    if design.sequence is not None:
        v = sample.v
        iu = np.triu_indices(v.shape[0], k=1)
        return float(np.max(1.0 - v[iu[1]] / v[iu[0]]))
    pv = design.pair_variances()
    iu = np.triu_indices(design.K, k=1)
    return float(np.max(pv[iu] / design.v[iu[0]]))


def _assert_step_monotone(lo_state, hi_state, bound: float) -> None:
    (z_lo, ff_lo, risks_lo, caps_lo) = lo_state
    (z_hi, ff_hi, risks_hi, caps_hi) = hi_state
    # Exact: raising a threshold never creates a false alarm, so first-failure
    # indices are nondecreasing in z replication by replication.
    if np.any(ff_hi < ff_lo):
        raise InvariantError(
            f"first-failure index decreased when raising z from {z_lo} to {z_hi}"
        )
    # The mean loss is monotone up to re-tiering discreteness: a replication
    # whose stop moves later can contribute a larger realized gap, so allow a
    # few single-replication contributions on top of a small budget fraction.
    slack = _MONOTONE_SLACK * bound + 4.0 * np.maximum(caps_lo, caps_hi)
    worst = float(np.max(risks_hi - risks_lo - slack)) if risks_lo.size else 0.0
    if worst > 0.0:
        raise InvariantError(
            f"risk increased beyond the discreteness allowance (by {worst:.3e}) "
            f"when raising z from {z_lo} to {z_hi}"
        )


def calibrate_from_sample(
    design: FamilyDesign, sample: NullSample, config: CalibrationConfig
) -> CriticalValues:
    """Sequential minimal thresholds computed on an existing null sample."""
    K = design.K
    if K < 2:
        raise DomainError("calibration needs K >= 2")
    if sample.K != K:
        raise DomainError("sample does not match design")
    c_r = gaussian_moment(config.r)
    gamma = _bracket_gamma(design, sample)
    ceiling = config.max_bracket if config.max_bracket is not None else _BRACKET_CEILING
    N, r, alpha = sample.n_replications, config.r, config.alpha

    z = np.empty(K - 1)
    achieved_final = np.empty(K - 1)
    targets = np.empty(K - 1)
    fail = np.zeros((N, K), dtype=bool)

    for m in range(K - 1):  # 0-based threshold index
        bound = (m + 1) / (K - 1) * alpha * c_r
        targets[m] = bound
        t_m = sample.t_row(m)
        ks = np.arange(m + 1, K)

        def evaluate(zm: float):
            f = fail.copy()
            f[:, m + 1 :] |= t_m[:, m + 1 :] > zm
            anyf = f.any(axis=1)
            ff = np.where(anyf, f.argmax(axis=1), K)
            risks, caps = _mean_risks(sample, ff, ks, r, with_caps=True)
            return zm, ff, risks, caps

        def feasible(state) -> bool:
            return bool(np.all(state[2] <= bound))

        lo_state = evaluate(0.0)
        if feasible(lo_state):
            z[m] = 0.0
            achieved_final[m] = lo_state[2][-1]
        else:
            hi = max(
                1.0,
                2.0 * gamma * (math.log(1.0 / alpha) + r * math.log(sample.v[m] / sample.v[-1]))
                + 4.0 * math.log(K),
            )
            hi_state = evaluate(hi)
            _assert_step_monotone(lo_state, hi_state, bound)
            while not feasible(hi_state):
                if hi > ceiling:
                    raise BracketError(
                        f"no feasible threshold below {ceiling} at step {m + 1}; "
                        "the null sample looks corrupt"
                    )
                lo_state, hi = hi_state, 2.0 * hi
                hi_state = evaluate(hi)
                _assert_step_monotone(lo_state, hi_state, bound)
            while hi_state[0] - lo_state[0] > config.bisection_tol:
                mid_state = evaluate(0.5 * (lo_state[0] + hi_state[0]))
                _assert_step_monotone(lo_state, mid_state, bound)
                _assert_step_monotone(mid_state, hi_state, bound)
                if feasible(mid_state):
                    hi_state = mid_state
                else:
                    lo_state = mid_state
            z[m] = hi_state[0]  # feasible upper endpoint: holds on the sample
            achieved_final[m] = hi_state[2][-1]
        fail[:, m + 1 :] |= t_m[:, m + 1 :] > z[m]

    meta = {
        "r": r,
        "alpha": alpha,
        "n_replications": N,
        "seed": sample.seed,
        "design_label": design.label,
        "design_hash": design_hash(design),
        "bisection_tol": config.bisection_tol,
        "achieved_risk_at_final": tuple(float(x) for x in achieved_final),
        "target": tuple(float(x) for x in targets),
    }
    return CriticalValues(z=z, meta=meta)


def calibrate(design: FamilyDesign, config: CalibrationConfig) -> CriticalValues:
    """Full calibration: draw the null sample, then fix z_1..z_{K-1} in order."""
    sample = build_null_sample(design, config)
    return calibrate_from_sample(design, sample, config)


@dataclass(frozen=True)
class PropagationCheck:
    """Out-of-sample propagation report: per-step risks against alpha*c_r."""

    steps: np.ndarray  # 1-based step indices 2..K
    risks: np.ndarray
    bound: float
    slack: float
    failed_steps: tuple[int, ...]

    @property
    def passed(self) -> bool:
        return not self.failed_steps


def verify_propagation(
    design: FamilyDesign,
    z: CriticalValues | np.ndarray,
    config: CalibrationConfig,
    slack: float = 0.1,
) -> PropagationCheck:
    """Evaluate the full threshold vector on an independent sample (fresh
    seed in ``config``) and flag steps whose risk exceeds alpha*c_r*(1+slack)."""
    zz = z.z if isinstance(z, CriticalValues) else np.asarray(z, dtype=float)
    if zz.shape[0] != design.K - 1:
        raise DomainError(f"expected {design.K - 1} thresholds")
    sample = build_null_sample(design, config)
    ff = _first_fail(sample, zz)
    ks = np.arange(1, design.K)
    risks = _mean_risks(sample, ff, ks, config.r)
    bound = config.alpha * gaussian_moment(config.r)
    failed = tuple(int(k + 1) for k, risk in zip(ks, risks) if risk > bound * (1.0 + slack))
    return PropagationCheck(
        steps=ks + 1, risks=risks, bound=bound, slack=slack, failed_steps=failed
    )


@dataclass(frozen=True)
class MinimalityStep:
    """Constraint status at one step after shrinking its threshold."""

    m: int  # 1-based threshold index
    shrunk_z: float
    violated_steps: tuple[int, ...]


def minimality_check(
    sample: NullSample,
    z: CriticalValues | np.ndarray,
    config: CalibrationConfig,
    shrink: float = 0.9,
) -> list[MinimalityStep]:
    """Shrink each threshold in turn (keeping the earlier ones fixed and the
    later ones +inf) and report which step budgets break on the calibration
    sample.  For thresholds found by bisection, any shrink beyond the
    tolerance must violate at least one constraint."""
    zz = z.z if isinstance(z, CriticalValues) else np.asarray(z, dtype=float)
    K = sample.K
    c_r = gaussian_moment(config.r)
    out = []
    for m in range(K - 1):
        prefix = zz[: m + 1].copy()
        prefix[m] *= shrink
        bound = (m + 1) / (K - 1) * config.alpha * c_r
        ff = _first_fail(sample, prefix)
        risks = _mean_risks(sample, ff, np.arange(m + 1, K), config.r)
        violated = tuple(int(k + 1) for k, risk in zip(range(m + 1, K), risks) if risk > bound)
        out.append(MinimalityStep(m=m + 1, shrunk_z=float(prefix[m]), violated_steps=violated))
    return out
