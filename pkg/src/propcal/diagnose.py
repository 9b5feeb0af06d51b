"""Structural condition checks on a design.

Quantifies how regular a family is: the geometric decay of the variances
(u0, u), the worst relative pair variance (gamma), and how far the full
covariance is from its diagonal (the norm of the inverse correlation
blocks).  The selection and calibration machinery works without any of
these; they feed the theoretical bound formulas only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh

from .errors import DomainError, NotPositiveDefiniteError
from .family import FamilyDesign, TruthProfile, truth_deltas

_EIG_TOL = 1e-10


@dataclass(frozen=True)
class ConditionReport:
    """Regularity constants of a design.

    u0/u: min/max of consecutive variance ratios v_{k-1}/v_k;
    decay_ok: u0 > 1 (geometric decrease);
    gamma: max over l < k of Var(est_l - est_k)/v_l;
    inv_corr_norm: max_k sqrt(lambda_max(M_k^{-1})) over leading correlation
        blocks M_k;
    chain_bound: (1 - 1/u0)^{-3/2}, the bound the chained-difference argument
        gives for inv_corr_norm on sequence designs;
    decay_sum: (1 - 1/u0)^{-1}, the geometric-sum constant.
    """

    u0: float
    u: float
    decay_ok: bool
    gamma: float
    inv_corr_norm: float
    chain_bound: float
    decay_sum: float


def decay_constants(v: np.ndarray) -> tuple[float, float, bool]:
    """(u0, u, ok): extreme consecutive variance ratios; ok iff u0 > 1."""
    v = np.asarray(v, dtype=float)
    if v.shape[0] < 2:
        raise DomainError("need at least two variances")
    if np.any(v <= 0):
        raise DomainError("variances must be positive")
    ratios = v[:-1] / v[1:]
    u0, u = float(ratios.min()), float(ratios.max())
    return u0, u, u0 > 1.0 + 1e-12


def max_pair_variance_ratio(design: FamilyDesign) -> float:
    """gamma = max over l < k of (v_l + v_k - 2 B[l,k]) / v_l."""
    pv = design.pair_variances()
    iu = np.triu_indices(design.K, k=1)
    return float(np.max(pv[iu] / design.v[iu[0]]))


def inverse_correlation_norms(design: FamilyDesign) -> tuple[float, np.ndarray]:
    """Per-block largest eigenvalue of M_k^{-1} and its square-rooted maximum.

    M_k is the leading k x k block of the correlation matrix
    B[j,l]/sqrt(v_j v_l); the returned scalar bounds how much the full
    quadratic form b^T B_k^{-1} b can exceed the diagonal one.
    """
    s = np.sqrt(design.v)
    M = design.B / np.outer(s, s)
    lam_max_inv = np.empty(design.K)
    for k in range(1, design.K + 1):
        w = eigh(M[:k, :k], eigvals_only=True)
        if w[0] <= _EIG_TOL:
            raise NotPositiveDefiniteError(
                f"leading correlation block {k} is numerically singular"
            )
        lam_max_inv[k - 1] = 1.0 / w[0]
    return float(np.sqrt(lam_max_inv.max())), lam_max_inv


def condition_report(design: FamilyDesign) -> ConditionReport:
    """All regularity constants of a design in one pass."""
    u0, u, ok = decay_constants(design.v)
    gamma = max_pair_variance_ratio(design)
    s_norm, _ = inverse_correlation_norms(design)
    chain = (1.0 - 1.0 / u0) ** -1.5 if ok else float("inf")
    dsum = (1.0 - 1.0 / u0) ** -1.0 if ok else float("inf")
    return ConditionReport(
        u0=u0,
        u=u,
        decay_ok=ok,
        gamma=gamma,
        inv_corr_norm=s_norm,
        chain_bound=chain,
        decay_sum=dsum,
    )


@dataclass(frozen=True)
class DiagonalBiasCheck:
    """Comparison of the exact modeling bias with its diagonal surrogate."""

    diag_sums: np.ndarray  # sum_{l<=k} b_l^2 / v_l
    threshold: float  # budget / inv_corr_norm^2
    deltas: np.ndarray  # exact modeling bias per k
    dominated: np.ndarray  # delta_k <= inv_corr_norm^2 * diag_sum_k (with tol)


def diagonal_bias_check(
    design: FamilyDesign, truth: TruthProfile, budget: float
) -> DiagonalBiasCheck:
    """Check the diagonal rewriting of the small-bias condition: the running
    sums of b_l^2/v_l against budget/s^2, and that the exact bias is dominated
    by s^2 times the diagonal sum."""
    s_norm, _ = inverse_correlation_norms(design)
    diag_sums = np.cumsum(truth.b**2 / design.v)
    deltas = truth_deltas(design, truth)
    dominated = deltas <= s_norm**2 * diag_sums + 1e-9 * (1.0 + deltas)
    return DiagonalBiasCheck(
        diag_sums=diag_sums,
        threshold=budget / s_norm**2,
        deltas=deltas,
        dominated=dominated,
    )
