"""Estimate-family designs and their exact Gaussian structure.

An estimate family is an ordered collection of K Gaussian estimates of a
scalar target, with strictly decreasing variances v_1 > ... > v_K and a
known K x K covariance matrix B.  Three generators are provided:

* sequence designs  - partial sums of a heteroscedastic Gaussian sequence,
  cut off at decreasing indices m_1 > ... > m_K;
* kernel designs    - local weighted averages at a point, one bandwidth per
  family member;
* functional designs - inner products <phi_k, Y> with diagonal noise.

Alongside the distributional side (``FamilyDesign``) each generator returns
the simulation-side truth (``TruthProfile``): the target, the per-estimate
means and biases.  ``sample_null`` draws centred family vectors with the
exact covariance, reproducibly for any worker count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import LinAlgError, cholesky, solve_triangular

from .errors import (
    DomainError,
    EmptyWindowError,
    NotPositiveDefiniteError,
    OrderingError,
)

# Relative tolerance for "strictly decreasing" variance validation.  Equal
# variances are rejected, not merged: the theory needs min(v_{k-1}/v_k) > 1.
_DECREASE_RTOL = 1e-12

# Replications per RNG substream.  Fixed: it is part of the determinism
# contract (replication i always lands in chunk i // _CHUNK, row i % _CHUNK).
_CHUNK = 8192

_KERNELS: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "rectangular": lambda t: (t <= 1.0).astype(float),
    "triangular": lambda t: np.clip(1.0 - t, 0.0, None),
    "epanechnikov": lambda t: np.clip(1.0 - t * t, 0.0, None),
    "gaussian": lambda t: np.exp(-0.5 * t * t),
}


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(np.asarray(a, dtype=float))
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SequenceStructure:
    """Generating structure of a sequence design, kept for structural sampling.

    ``sd`` are the per-coordinate standard deviations *without* the global
    noise scale; all standardized statistics are invariant under the scale,
    so calibration works on the unit-scale draws bit-for-bit identically for
    any ``noise_scale``.
    """

    sd: np.ndarray
    cutoffs: np.ndarray
    noise_scale: float


@dataclass(frozen=True)
class FamilyDesign:
    """Known distributional structure of an estimate family.

    Attributes:
        v: variances, strictly decreasing, equals diag(B).
        B: covariance matrix of the estimate vector, symmetric positive
           definite.
        label: free-text description of the generating model.
        sequence: generating structure when the design is of sequence type
           (enables the structural sampling path), else None.
    """

    v: np.ndarray
    B: np.ndarray
    label: str = ""
    sequence: SequenceStructure | None = None
    _chol: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        v = _readonly(self.v)
        B = _readonly(self.B)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "B", B)
        if B.ndim != 2 or B.shape[0] != B.shape[1] or B.shape[0] != v.shape[0]:
            raise DomainError(f"covariance shape {B.shape} does not match K={v.shape[0]}")
        if not np.array_equal(B, B.T):
            raise DomainError("covariance matrix is not symmetric")
        if not np.array_equal(np.diag(B), v):
            raise DomainError("diag(B) must equal v")
        _check_strictly_decreasing(v, "variances")
        try:
            L = cholesky(B, lower=True)
        except LinAlgError as exc:
            raise NotPositiveDefiniteError(f"covariance factorization failed: {exc}") from None
        object.__setattr__(self, "_chol", _readonly(L))
        pv = self.pair_variances()
        if np.any(pv < -1e-10 * v[0]):
            raise NotPositiveDefiniteError("negative pairwise difference variance")

    @property
    def K(self) -> int:
        return int(self.v.shape[0])

    def pair_variances(self) -> np.ndarray:
        """Matrix of Var(estimate_l - estimate_k) = v_l + v_k - 2 B[l,k]."""
        return self.v[:, None] + self.v[None, :] - 2.0 * self.B

    def chol_lower(self) -> np.ndarray:
        """Lower-triangular factor L with L L^T = B (computed at validation)."""
        return self._chol


@dataclass(frozen=True)
class TruthProfile:
    """Simulation-side truth for a family: target, means, biases."""

    theta: float
    theta_k: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        theta_k = _readonly(self.theta_k)
        b = _readonly(self.b)
        object.__setattr__(self, "theta_k", theta_k)
        object.__setattr__(self, "b", b)
        if not np.array_equal(b, theta_k - self.theta):
            raise DomainError("bias vector must equal theta_k - theta exactly")

    @property
    def K(self) -> int:
        return int(self.b.shape[0])


@dataclass(frozen=True)
class SequenceModelSpec:
    """Sequence-space model: y_i = mu_i + delta * sigma_i * eps_i, i = 1..n.

    The family member k sums the first ``cutoffs[k]`` observations; cutoffs
    must decrease strictly.  The target is sum(mu).
    """

    sigma: np.ndarray
    mu: np.ndarray
    delta: float
    cutoffs: np.ndarray
    label: str = "sequence"

    def __post_init__(self):
        object.__setattr__(self, "sigma", _readonly(self.sigma))
        object.__setattr__(self, "mu", _readonly(self.mu))
        cut = np.ascontiguousarray(np.asarray(self.cutoffs, dtype=int))
        cut.setflags(write=False)
        object.__setattr__(self, "cutoffs", cut)

    @property
    def n(self) -> int:
        return int(self.sigma.shape[0])


@dataclass(frozen=True)
class KernelModelSpec:
    """Local-average family at a point, one member per bandwidth.

    ``kernel`` is a nonnegative function on [0, inf) or one of the named
    kernels ("rectangular", "triangular", "epanechnikov", "gaussian").
    ``target`` is f at the evaluation point; if omitted it is taken from
    ``f_values`` at an exactly matching design point (never interpolated).
    """

    design_points: np.ndarray
    point: float
    bandwidths: np.ndarray
    kernel: Callable[[np.ndarray], np.ndarray] | str
    noise_sd: float
    f_values: np.ndarray
    target: float | None = None
    label: str = "kernel"


@dataclass(frozen=True)
class FunctionalModelSpec:
    """Linear-functional family: estimate k is <phi_k, Y> with Y having
    independent coordinates, Var(Y_i) = noise_cov_diag[i] and mean
    target_coeffs.  The target value is sum(target_coeffs) (the sum
    functional, of which the sequence family is the prefix-indicator case).
    """

    phi: np.ndarray
    noise_cov_diag: np.ndarray
    target_coeffs: np.ndarray
    label: str = "functional"


def _check_strictly_decreasing(v: np.ndarray, what: str) -> None:
    if v.shape[0] < 1 or np.any(v <= 0):
        raise DomainError(f"{what} must be strictly positive")
    if np.any(v[1:] >= v[:-1] * (1.0 - _DECREASE_RTOL)):
        raise OrderingError(f"{what} must be strictly decreasing (rel. tol {_DECREASE_RTOL})")


def _assemble_functional(phi: np.ndarray, noise_diag: np.ndarray, coeffs: np.ndarray):
    """Shared covariance/mean assembly for functional-type families.

    Every sum uses the same np.sum over same-length arrays so that the
    sequence builder (which routes through prefix indicators) agrees
    bit-for-bit with an equivalent functional spec.
    """
    K = phi.shape[0]
    B = np.empty((K, K))
    for l in range(K):
        for k in range(l, K):
            B[l, k] = B[k, l] = float(np.sum(phi[l] * phi[k] * noise_diag))
    v = np.diag(B).copy()
    theta_k = np.array([float(np.sum(phi[k] * coeffs)) for k in range(K)])
    return v, B, theta_k


def design_sequence(spec: SequenceModelSpec) -> tuple[FamilyDesign, TruthProfile]:
    """Build the spectral cut-off family of a sequence model.

    v_k = delta^2 * sum_{i<=m_k} sigma_i^2, B[l,k] = v_max(l,k),
    theta = sum(mu), theta_k = sum_{i<=m_k} mu_i.
    """
    n = spec.n
    if spec.mu.shape[0] != n:
        raise DomainError("mu and sigma must have the same length")
    if np.any(spec.sigma <= 0):
        raise DomainError("sigma must be strictly positive")
    if not (spec.delta > 0):
        raise DomainError("noise scale delta must be positive")
    m = spec.cutoffs
    if m.shape[0] < 1 or m[0] > n or m[-1] < 1:
        raise DomainError(f"cutoffs must lie in [1, n={n}]")
    if np.any(np.diff(m) >= 0):
        raise OrderingError("cutoffs must be strictly decreasing")
    K = m.shape[0]
    phi = np.zeros((K, n))
    for k in range(K):
        phi[k, : m[k]] = 1.0
    noise_diag = (spec.delta * spec.sigma) ** 2
    v, B, theta_k = _assemble_functional(phi, noise_diag, spec.mu)
    theta = float(np.sum(spec.mu))
    structure = SequenceStructure(
        sd=_readonly(spec.sigma), cutoffs=m, noise_scale=float(spec.delta)
    )
    design = FamilyDesign(v=v, B=B, label=spec.label, sequence=structure)
    truth = TruthProfile(theta=theta, theta_k=theta_k, b=theta_k - theta)
    return design, truth


def design_kernel(spec: KernelModelSpec) -> tuple[FamilyDesign, TruthProfile]:
    """Build a kernel-weights family: member k averages observations with
    weights psi(|X_i - x| / h_k).

    Bandwidths are given smallest first; the implied variances must come out
    strictly decreasing, otherwise the ladder is rejected (never reordered
    silently - the index order is meaningful to the selection rule).
    """
    x = np.asarray(spec.design_points, dtype=float)
    h = np.asarray(spec.bandwidths, dtype=float)
    f = np.asarray(spec.f_values, dtype=float)
    if np.any(h <= 0):
        raise DomainError("bandwidths must be positive")
    if np.any(np.diff(h) <= 0):
        raise OrderingError("bandwidths must be strictly increasing (smallest first)")
    if not (spec.noise_sd > 0):
        raise DomainError("noise_sd must be positive")
    if isinstance(spec.kernel, str):
        try:
            psi = _KERNELS[spec.kernel.lower()]
        except KeyError:
            raise DomainError(
                f"unknown kernel {spec.kernel!r}; known: {sorted(_KERNELS)}"
            ) from None
    else:
        psi = spec.kernel
    K = h.shape[0]
    dist = np.abs(x - spec.point)
    w = np.stack([psi(dist / h[k]) for k in range(K)])
    if np.any(w < 0):
        raise DomainError("kernel must be nonnegative")
    N = w.sum(axis=1)
    if np.any(N <= 0):
        bad = int(np.flatnonzero(N <= 0)[0])
        raise EmptyWindowError(f"bandwidth {h[bad]} yields an empty window (all weights zero)")
    B = spec.noise_sd**2 * (w @ w.T) / np.outer(N, N)
    v = np.diag(B).copy()
    _check_strictly_decreasing(v, "implied kernel variances")
    theta_k = (w @ f) / N
    if spec.target is not None:
        theta = float(spec.target)
    else:
        hit = np.flatnonzero(x == spec.point)
        if hit.size == 0:
            raise DomainError(
                "target must be supplied explicitly when the evaluation point "
                "is not a design point (no interpolation)"
            )
        theta = float(f[hit[0]])
    design = FamilyDesign(v=v, B=B, label=spec.label)
    truth = TruthProfile(theta=theta, theta_k=theta_k, b=theta_k - theta)
    return design, truth


def design_functional(spec: FunctionalModelSpec) -> tuple[FamilyDesign, TruthProfile]:
    """Build a family of linear functionals with diagonal noise covariance."""
    phi = np.asarray(spec.phi, dtype=float)
    diag = np.asarray(spec.noise_cov_diag, dtype=float)
    coeffs = np.asarray(spec.target_coeffs, dtype=float)
    if phi.ndim != 2 or phi.shape[1] != diag.shape[0] or coeffs.shape[0] != diag.shape[0]:
        raise DomainError("phi must be (K, n) matching noise_cov_diag and target_coeffs")
    if np.any(diag <= 0):
        raise DomainError("noise covariance diagonal must be strictly positive")
    v, B, theta_k = _assemble_functional(phi, diag, coeffs)
    _check_strictly_decreasing(v, "implied functional variances")
    theta = float(np.sum(coeffs))
    design = FamilyDesign(v=v, B=B, label=spec.label)
    truth = TruthProfile(theta=theta, theta_k=theta_k, b=theta_k - theta)
    return design, truth


def _chunk_rng(seed: int, chunk: int) -> np.random.Generator:
    # Counter-based generator per chunk; draws depend only on (seed, chunk).
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(chunk,))))


def null_draws(
    design: FamilyDesign,
    count: int,
    seed: int,
    workers: int | None = None,
    unit_scale: bool = False,
) -> np.ndarray:
    """Draw ``count`` centred family vectors with covariance B.

    Sequence designs use the structural path (cumulative sd-weighted sums of
    the raw noise); other designs multiply standard normals by a triangular
    factor of B.  Replication i is deterministic given (seed, i) regardless
    of ``workers``.  With ``unit_scale`` the sequence noise scale is not
    applied (standardized statistics are identical either way).
    """
    K = design.K
    out = np.empty((count, K))
    seq = design.sequence

    def fill(chunk: int) -> None:
        lo = chunk * _CHUNK
        hi = min(lo + _CHUNK, count)
        rng = _chunk_rng(seed, chunk)
        if seq is not None:
            eps = rng.standard_normal((hi - lo, seq.sd.shape[0]))
            xi = np.cumsum(seq.sd * eps, axis=1)[:, seq.cutoffs - 1]
            out[lo:hi] = xi if unit_scale else seq.noise_scale * xi
        else:
            z = rng.standard_normal((hi - lo, K))
            out[lo:hi] = z @ design.chol_lower().T

    chunks = range((count + _CHUNK - 1) // _CHUNK)
    if workers is not None and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(fill, chunks))
    else:
        for c in chunks:
            fill(c)
    return out


def sample_null(
    design: FamilyDesign, count: int, seed: int, workers: int | None = None
) -> np.ndarray:
    """Draw ``count`` independent N(0, B) vectors, reproducibly (see null_draws)."""
    if count < 1:
        raise DomainError("count must be >= 1")
    return null_draws(design, count, seed, workers=workers, unit_scale=False)


def truth_deltas(design: FamilyDesign, truth: TruthProfile) -> np.ndarray:
    """Modeling-bias sequence: delta_k = b(k)^T B_k^{-1} b(k) for k = 1..K.

    Computed through the triangular factor: with L L^T = B and y = L^{-1} b,
    the leading-block quadratic forms are the partial sums of y^2, which also
    makes the sequence nondecreasing by construction.
    """
    if truth.K != design.K:
        raise DomainError("truth profile length does not match design")
    y = solve_triangular(design.chol_lower(), truth.b, lower=True)
    return np.cumsum(y * y)


def bias_envelope(b: np.ndarray) -> np.ndarray:
    """Nondecreasing envelope of absolute biases: max_{l<=k} |b_l|."""
    return np.maximum.accumulate(np.abs(np.asarray(b, dtype=float)))
