import filecmp
import os

import numpy as np
import pytest

from propcal import (
    CalibrationConfig,
    CriticalValues,
    DomainError,
    ExperimentReport,
    ExperimentSpec,
    calibrate,
    design_sequence,
    emit_report,
    make_models,
    run_experiment,
)
from propcal.bench import example1_model, example2_model
from util import sequence_design


def quick_spec(**kw):
    base = dict(
        model_family="example1",
        num_models=2,
        num_runs=40,
        deltas=(1e-4,),
        calib=CalibrationConfig(n_replications=2000, seed=5),
        model_seed=7,
        run_seed=8,
    )
    base.update(kw)
    return ExperimentSpec(**base)


def test_example1_shape():
    sigma, cutoffs = example1_model()
    assert sigma[0] == pytest.approx(50.0 ** (2.0 / 50.0))
    assert sigma[0] == pytest.approx(1.1694, abs=1e-4)
    np.testing.assert_array_equal(cutoffs[:3], [50, 48, 46])
    assert cutoffs[-1] == 12 and len(cutoffs) == 20


def test_example2_shape():
    sigma, cutoffs = example2_model()
    np.testing.assert_array_equal(
        cutoffs, [50, 43, 37, 32, 28, 24, 21, 18, 16, 14, 12, 10, 9, 8, 7]
    )
    assert sigma[2] == 9.0


def test_make_models_law_and_determinism():
    spec = quick_spec(num_models=3000)
    models = make_models(spec)
    mu = np.stack([m.mu for m in models])
    # coefficient variances follow the i^-3 law
    assert mu[:, 0].var() == pytest.approx(1.0, rel=0.1)
    assert mu[:, 49].var() == pytest.approx(50.0**-3, rel=0.1)
    again = make_models(spec)
    np.testing.assert_array_equal(mu[17], again[17].mu)
    assert models[0].cutoffs[-1] == 12


def test_run_experiment_smoke_and_determinism(tmp_path):
    spec = quick_spec()
    report = run_experiment(spec)
    assert len(report.models) == 2
    for m in report.models:
        assert m.adaptive_risk > 0 and m.oracle_risk > 0
        assert 1 <= m.k_star <= report.K
        assert m.k_star <= m.k_star_leq
        assert 0.0 <= m.false_alarm <= 1.0
        assert m.khat.shape == (40,)
        assert m.khat_min <= m.khat_median <= m.khat_max
    d1, d2 = tmp_path / "a", tmp_path / "b"
    emit_report(report, str(d1))
    emit_report(run_experiment(spec), str(d2))
    for name in ("thresholds.csv", "models.csv", "khat_samples.csv", "khat_boxplot_1e-04.svg"):
        assert filecmp.cmp(d1 / name, d2 / name, shallow=False), name


def test_run_experiment_accepts_precalibrated_thresholds():
    spec = quick_spec()
    sigma, cutoffs = example1_model()
    from propcal import SequenceModelSpec

    design, _ = design_sequence(
        SequenceModelSpec(sigma=sigma, mu=np.zeros(50), delta=1.0, cutoffs=cutoffs)
    )
    z = calibrate(design, spec.calib)
    supplied = run_experiment(spec, z=z)
    recalibrated = run_experiment(spec)
    np.testing.assert_array_equal(supplied.z.z, recalibrated.z.z)
    assert supplied.models == recalibrated.models
    with pytest.raises(DomainError):
        run_experiment(spec, z=CriticalValues(z=np.zeros(3)))


def test_threshold_noise_scale_invariance_bitwise():
    config = CalibrationConfig(n_replications=2000, seed=44)
    sigma = 1.6 ** np.arange(1, 7)
    za = calibrate(
        sequence_design(sigma, np.zeros(6), 1e-4, np.arange(6, 0, -1))[0], config
    )
    zb = calibrate(
        sequence_design(sigma, np.zeros(6), 1e-6, np.arange(6, 0, -1))[0], config
    )
    np.testing.assert_array_equal(za.z, zb.z)


def test_emit_report_empty(tmp_path):
    spec = quick_spec()
    report = ExperimentReport(
        spec=spec, z=CriticalValues(z=np.zeros(19)), K=20, models=()
    )
    paths = emit_report(report, str(tmp_path))
    models_csv = tmp_path / "models.csv"
    lines = [l for l in models_csv.read_text().splitlines() if not l.startswith("#")]
    assert lines == [
        "model,noise_scale,k_star,k_star_leq,adaptive_risk,oracle_risk,risk_ratio,"
        "false_alarm,khat_min,khat_q1,khat_median,khat_q3,khat_max,"
        "oracle_lhs,oracle_rhs,oracle_ok"
    ]
    assert all(os.path.exists(p) for p in paths)


def test_emit_report_svg_structure(tmp_path):
    report = run_experiment(quick_spec())
    emit_report(report, str(tmp_path))
    svg = (tmp_path / "khat_boxplot_1e-04.svg").read_text()
    assert svg.count("<polygon") == 2  # one ideal-index triangle per model
    assert svg.count('fill="#dce6f2"') == 2  # one interquartile box per model
    bars = (tmp_path / "risk_ratio_1e-04.svg").read_text()
    assert bars.count('fill="#9dc3e6"') == 2


def test_emit_report_full_model_count(tmp_path):
    report = run_experiment(quick_spec(num_models=10, num_runs=20))
    emit_report(report, str(tmp_path))
    svg = (tmp_path / "khat_boxplot_1e-04.svg").read_text()
    assert svg.count("<polygon") == 10
    assert svg.count('fill="#dce6f2"') == 10


def test_smaller_noise_admits_more_coefficients():
    # shrinking the noise scale inflates every modeling-bias value, so the
    # ideal index (and with it the typical selected index) moves toward the
    # wide-window end of the ladder
    spec = quick_spec(num_models=4, num_runs=60, deltas=(1e-4, 1e-6))
    report = run_experiment(spec)
    by_model = {}
    for m in report.models:
        by_model.setdefault(m.model, {})[m.noise_scale] = m
    for pair in by_model.values():
        assert pair[1e-6].k_star <= pair[1e-4].k_star
        assert pair[1e-6].khat_median <= pair[1e-4].khat_median + 1.0


def test_experiment_spec_validation():
    with pytest.raises(DomainError):
        quick_spec(num_models=0)
    with pytest.raises(DomainError):
        quick_spec(deltas=(0.0,))
    with pytest.raises(DomainError):
        quick_spec(model_family="bogus")
    with pytest.raises(DomainError):
        quick_spec(model_family="custom")
