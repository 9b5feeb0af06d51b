"""Benchmark harness: model generation, calibration, repeated-run evaluation.

Two built-in sequence-model benchmarks are provided: a severely ill-posed
family (geometric noise growth, K = 20) and a regularly ill-posed one
(polynomial noise growth, K = 15).  Per model the target coefficients are
drawn once from centred Gaussians with variance i^-3 and held fixed across
runs and noise scales; risks average over the observation noise only.
Thresholds are calibrated once per design shape - the standardized
statistics, and hence the calibrated thresholds, do not depend on the noise
scale.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace

import numpy as np

from .calibrate import CalibrationConfig, calibrate
from .errors import DomainError, InvariantError
from .family import (
    FamilyDesign,
    SequenceModelSpec,
    TruthProfile,
    design_sequence,
    null_draws,
    truth_deltas,
)
from .oracle import oracle_index, oracle_rhs
from .report import svg_bar_chart, svg_index_boxplot, write_csv
from .select import CriticalValues


def example1_model(n: int = 50, num_estimates: int = 20) -> tuple[np.ndarray, np.ndarray]:
    """Severely ill-posed benchmark: sd_i = a^i with a = n^(2/n), cutoffs
    n - 2(k-1).  Returns (sigma, cutoffs)."""
    a = n ** (2.0 / n)
    sigma = a ** np.arange(1, n + 1, dtype=float)
    cutoffs = np.array([n - 2 * (k - 1) for k in range(1, num_estimates + 1)])
    if cutoffs[-1] < 1:
        raise DomainError("too many estimates for this n")
    return sigma, cutoffs


def example2_model(n: int = 50, num_estimates: int = 15) -> tuple[np.ndarray, np.ndarray]:
    """Regularly ill-posed benchmark: sd_i = i^2, cutoffs floor(n / 2^((k-1)/5)).

    The floor is evaluated in floating point on purpose: 2^(1/5)**5 is
    slightly above 2, so e.g. n=50 gives 24 at k=6 (not 25), matching the
    published cutoff ladder endpoint.
    """
    sigma = np.arange(1, n + 1, dtype=float) ** 2
    cutoffs = np.array(
        [int(np.floor(n / (2.0 ** (1.0 / 5.0)) ** (k - 1))) for k in range(1, num_estimates + 1)]
    )
    if cutoffs[-1] < 1:
        raise DomainError("too many estimates for this n")
    return sigma, cutoffs


@dataclass(frozen=True)
class ExperimentSpec:
    """Full configuration of a benchmark experiment."""

    model_family: str = "example1"  # example1 | example2 | custom
    n: int = 50
    num_models: int = 10
    num_runs: int = 500
    deltas: tuple[float, ...] = (1e-4, 1e-5, 1e-6)
    calib: CalibrationConfig = field(default_factory=CalibrationConfig)
    oracle_budget: float = 1.0
    oracle_strict: bool = True  # ideal index via delta_k < budget (<= for theory checks)
    model_seed: int = 101
    run_seed: int = 202
    custom: SequenceModelSpec | None = None

    def __post_init__(self):
        if self.num_models < 1 or self.num_runs < 1 or self.n < 1:
            raise DomainError("counts must be positive")
        if any(d <= 0 for d in self.deltas):
            raise DomainError("noise scales must be positive")
        if self.model_family not in ("example1", "example2", "custom"):
            raise DomainError(f"unknown model family {self.model_family!r}")
        if self.model_family == "custom" and self.custom is None:
            raise DomainError("model_family='custom' needs a base sequence spec")


def _family_shape(spec: ExperimentSpec) -> tuple[np.ndarray, np.ndarray]:
    if spec.model_family == "example1":
        return example1_model(spec.n)
    if spec.model_family == "example2":
        return example2_model(spec.n)
    return np.asarray(spec.custom.sigma), np.asarray(spec.custom.cutoffs)


def make_models(spec: ExperimentSpec) -> list[SequenceModelSpec]:
    """Draw ``num_models`` fixed targets: mu_i ~ N(0, i^-3), independent per
    model, shared sigma/cutoffs; the noise scale is applied later per run."""
    sigma, cutoffs = _family_shape(spec)
    n = sigma.shape[0]
    sd = np.arange(1, n + 1, dtype=float) ** -1.5
    models = []
    for i in range(spec.num_models):
        rng = np.random.Generator(
            np.random.Philox(np.random.SeedSequence(spec.model_seed, spawn_key=(i,)))
        )
        mu = rng.standard_normal(n) * sd
        models.append(
            SequenceModelSpec(
                sigma=sigma,
                mu=mu,
                delta=1.0,
                cutoffs=cutoffs,
                label=f"{spec.model_family}/model{i}",
            )
        )
    return models


@dataclass(frozen=True)
class ModelMetrics:
    """Per (model, noise scale) evaluation over the simulated runs."""

    model: int
    noise_scale: float
    k_star: int
    k_star_leq: int
    adaptive_risk: float
    oracle_risk: float
    risk_ratio: float
    false_alarm: float
    khat_min: int
    khat_q1: float
    khat_median: float
    khat_q3: float
    khat_max: int
    oracle_lhs: float
    oracle_rhs: float
    oracle_ok: bool
    khat: np.ndarray = field(repr=False, compare=False)


@dataclass(frozen=True)
class ExperimentReport:
    spec: ExperimentSpec
    z: CriticalValues
    K: int
    models: tuple[ModelMetrics, ...]


def _select_runs(est: np.ndarray, v: np.ndarray, zz: np.ndarray) -> np.ndarray:
    """Vectorized selection over runs; returns 0-based selected indices."""
    R, K = est.shape
    t = (est[:, :, None] - est[:, None, :]) ** 2 / (2.0 * v[:, None])
    fail = np.zeros((R, K), dtype=bool)
    for j in range(1, K):
        fail[:, j] = (t[:, :j, j] > zz[:j]).any(axis=1)
    anyf = fail.any(axis=1)
    ff = np.where(anyf, fail.argmax(axis=1), K)
    khat = ff - 1
    # Stability: the selected index was accepted, so every guarded comparison
    # against it must sit at or below its threshold.
    rows = np.arange(R)
    t_sel = t[rows, :, khat]
    zpad = np.append(zz, np.inf)
    mask = np.arange(K)[None, :] < khat[:, None]
    if np.any((t_sel > zpad[None, :K]) & mask):
        raise InvariantError("accepted index violates a guarded comparison")
    return khat


def _simulate_model(
    model_index: int,
    design: FamilyDesign,
    truth: TruthProfile,
    z: CriticalValues,
    spec: ExperimentSpec,
    seed: int,
) -> ModelMetrics:
    K = design.K
    r, alpha = spec.calib.r, spec.calib.alpha
    xi = null_draws(design, spec.num_runs, seed)
    est = truth.theta_k + xi
    khat = _select_runs(est, design.v, z.z)
    rows = np.arange(spec.num_runs)
    theta_hat = est[rows, khat]

    deltas = truth_deltas(design, truth)
    k_star = oracle_index(deltas, spec.oracle_budget, strict=spec.oracle_strict)
    k_star_leq = oracle_index(deltas, spec.oracle_budget, strict=False)

    adaptive = float(np.abs(theta_hat - truth.theta).mean())
    oracle = float(np.abs(est[:, k_star - 1] - truth.theta).mean())
    false_alarm = float((khat + 1 < k_star).mean())

    lhs = float(
        (np.abs(est[:, k_star_leq - 1] - theta_hat) ** r / design.v[k_star_leq - 1] ** (r / 2)).mean()
    )
    z_at = float(z.z[k_star_leq - 1]) if k_star_leq <= K - 1 else 0.0
    rhs, _ = oracle_rhs(r, alpha, spec.oracle_budget, z_at)

    q1, med, q3 = np.percentile(khat + 1, [25, 50, 75])
    return ModelMetrics(
        model=model_index,
        noise_scale=float(design.sequence.noise_scale),
        k_star=k_star,
        k_star_leq=k_star_leq,
        adaptive_risk=adaptive,
        oracle_risk=oracle,
        risk_ratio=adaptive / oracle,
        false_alarm=false_alarm,
        khat_min=int(khat.min()) + 1,
        khat_q1=float(q1),
        khat_median=float(med),
        khat_q3=float(q3),
        khat_max=int(khat.max()) + 1,
        oracle_lhs=lhs,
        oracle_rhs=float(rhs),
        oracle_ok=lhs <= rhs,
        khat=khat + 1,
    )


def run_experiment(spec: ExperimentSpec, z: CriticalValues | None = None) -> ExperimentReport:
    """Calibrate once (unless precalibrated thresholds are supplied), then
    evaluate every (model, noise scale) pair."""
    models = make_models(spec)
    null_spec = replace(models[0], mu=np.zeros(models[0].n), delta=1.0)
    unit_design, _ = design_sequence(null_spec)
    if z is None:
        z = calibrate(unit_design, spec.calib)
    elif len(z) != unit_design.K - 1:
        raise DomainError("supplied thresholds do not match the design size")
    metrics = []
    for mi, model in enumerate(models):
        for di, delta in enumerate(spec.deltas):
            design, truth = design_sequence(replace(model, delta=delta))
            seed = int(
                np.random.SeedSequence(spec.run_seed, spawn_key=(mi, di)).generate_state(1)[0]
            )
            metrics.append(_simulate_model(mi, design, truth, z, spec, seed))
    return ExperimentReport(spec=spec, z=z, K=unit_design.K, models=tuple(metrics))


def threshold_rows(z: CriticalValues):
    """(k, z_k, achieved_risk_at_final, target) rows for the thresholds CSV."""
    meta = z.meta if isinstance(z.meta, dict) else {}
    achieved = meta.get("achieved_risk_at_final", (float("nan"),) * len(z))
    target = meta.get("target", (float("nan"),) * len(z))
    return [(k + 1, z.z[k], achieved[k], target[k]) for k in range(len(z))]


def emit_report(report: ExperimentReport, out_dir: str, svg: bool = True) -> list[str]:
    """Write the canonical CSVs (thresholds, per-model metrics, per-run
    selected indices) and optional SVG figures; returns written paths."""
    spec = report.spec
    meta = report.z.meta if isinstance(report.z.meta, dict) else {}
    prov = {
        "model_family": spec.model_family,
        "r": spec.calib.r,
        "alpha": spec.calib.alpha,
        "n_replications": spec.calib.n_replications,
        "calibration_seed": spec.calib.seed,
        "model_seed": spec.model_seed,
        "run_seed": spec.run_seed,
        "num_runs": spec.num_runs,
        "oracle_budget": spec.oracle_budget,
        "oracle_strict": spec.oracle_strict,
        "design_hash": meta.get("design_hash", ""),
    }
    paths = [
        write_csv(
            os.path.join(out_dir, "thresholds.csv"),
            ["k", "z_k", "achieved_risk_at_K", "target"],
            threshold_rows(report.z),
            header_comments=prov,
        ),
        write_csv(
            os.path.join(out_dir, "models.csv"),
            [
                "model",
                "noise_scale",
                "k_star",
                "k_star_leq",
                "adaptive_risk",
                "oracle_risk",
                "risk_ratio",
                "false_alarm",
                "khat_min",
                "khat_q1",
                "khat_median",
                "khat_q3",
                "khat_max",
                "oracle_lhs",
                "oracle_rhs",
                "oracle_ok",
            ],
            [
                (
                    m.model,
                    m.noise_scale,
                    m.k_star,
                    m.k_star_leq,
                    m.adaptive_risk,
                    m.oracle_risk,
                    m.risk_ratio,
                    m.false_alarm,
                    m.khat_min,
                    m.khat_q1,
                    m.khat_median,
                    m.khat_q3,
                    m.khat_max,
                    m.oracle_lhs,
                    m.oracle_rhs,
                    m.oracle_ok,
                )
                for m in report.models
            ],
            header_comments=prov,
        ),
        write_csv(
            os.path.join(out_dir, "khat_samples.csv"),
            ["model", "noise_scale", "run", "khat"],
            (
                (m.model, m.noise_scale, run, int(k))
                for m in report.models
                for run, k in enumerate(m.khat)
            ),
            header_comments=prov,
        ),
    ]
    if svg:
        for delta in spec.deltas:
            group = [m for m in report.models if m.noise_scale == delta]
            if not group:
                continue
            tag = f"{delta:.0e}"
            paths.append(
                svg_index_boxplot(
                    os.path.join(out_dir, f"khat_boxplot_{tag}.svg"),
                    [m.khat for m in group],
                    [m.k_star for m in group],
                    y_max=report.K + 1,
                    title=f"selected index by model (noise {tag}); triangles: ideal index",
                )
            )
            paths.append(
                svg_bar_chart(
                    os.path.join(out_dir, f"risk_ratio_{tag}.svg"),
                    [m.risk_ratio for m in group],
                    title=f"adaptive / ideal risk (noise {tag})",
                    hline=1.0,
                )
            )
    return paths
