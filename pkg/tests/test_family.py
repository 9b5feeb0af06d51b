import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from propcal import (
    DomainError,
    EmptyWindowError,
    FamilyDesign,
    FunctionalModelSpec,
    KernelModelSpec,
    OrderingError,
    SequenceModelSpec,
    design_functional,
    design_kernel,
    design_sequence,
    sample_null,
    truth_deltas,
)
from util import random_sequence_model, sequence_design, simple_family


def test_sequence_worked_example():
    design, truth = simple_family()
    np.testing.assert_array_equal(design.v, [3.0, 2.0, 1.0])
    np.testing.assert_array_equal(design.B, [[3, 2, 1], [2, 2, 1], [1, 1, 1]])
    assert truth.theta == 7.0
    np.testing.assert_array_equal(truth.theta_k, [7.0, 3.0, 1.0])
    np.testing.assert_array_equal(truth.b, [0.0, -4.0, -6.0])


def test_sequence_zero_mean_gives_zero_bias():
    design, truth = sequence_design([1.0, 2.0], [0.0, 0.0], 0.5, [2, 1])
    assert np.all(truth.b == 0.0)
    np.testing.assert_array_equal(truth_deltas(design, truth), [0.0, 0.0])


def test_sequence_delta_scaling():
    _, truth1 = simple_family(delta=1.0)
    design1, _ = simple_family(delta=1.0)
    design2, truth2 = simple_family(delta=2.0)
    # power-of-two scale: exact in floating point
    np.testing.assert_array_equal(design2.v, 4.0 * design1.v)
    np.testing.assert_array_equal(design2.B, 4.0 * design1.B)
    np.testing.assert_array_equal(truth2.theta_k, truth1.theta_k)


def test_published_cutoff_ladder_endpoint():
    # polynomial noise growth, n=50, geometric cutoff shrinking: last cutoff 7
    n, K = 50, 15
    cutoffs = np.array([int(np.floor(n / (2 ** (1 / 5)) ** (k - 1))) for k in range(1, K + 1)])
    assert cutoffs[-1] == 7
    sigma = np.arange(1, n + 1, dtype=float) ** 2
    design, _ = sequence_design(sigma, np.zeros(n), 1.0, cutoffs)
    assert design.K == 15


def test_kernel_worked_example():
    spec = KernelModelSpec(
        design_points=np.array([-1.0, 0.0, 1.0]),
        point=0.0,
        bandwidths=np.array([0.5, 1.0]),
        kernel="rectangular",
        noise_sd=1.0,
        f_values=np.zeros(3),
    )
    design, truth = design_kernel(spec)
    np.testing.assert_allclose(design.v, [1.0, 1.0 / 3.0])
    np.testing.assert_allclose(design.B[0, 1], 1.0 / 3.0)
    np.testing.assert_array_equal(truth.theta_k, [0.0, 0.0])
    assert truth.theta == 0.0


def test_kernel_constant_function_unbiased():
    spec = KernelModelSpec(
        design_points=np.array([-1.0, 0.0, 1.0]),
        point=0.0,
        bandwidths=np.array([0.5, 1.0]),
        kernel="rectangular",
        noise_sd=1.0,
        f_values=np.full(3, 2.5),
    )
    _, truth = design_kernel(spec)
    assert np.all(truth.theta_k == 2.5)
    assert np.all(truth.b == 0.0)


def test_kernel_means_match_direct_weighted_average():
    f = np.array([1.0, 0.0, 1.0])
    x = np.array([-1.0, 0.0, 1.0])
    spec = KernelModelSpec(
        design_points=x,
        point=0.0,
        bandwidths=np.array([0.5, 1.0]),
        kernel="rectangular",
        noise_sd=1.0,
        f_values=f,
    )
    _, truth = design_kernel(spec)
    # independent oracle: plain python evaluation of the weighted averages
    for k, h in enumerate([0.5, 1.0]):
        w = [1.0 if abs(xi) / h <= 1 else 0.0 for xi in x]
        expect = sum(wi * fi for wi, fi in zip(w, f)) / sum(w)
        assert truth.theta_k[k] == pytest.approx(expect)
    assert truth.theta_k[0] == 0.0
    assert truth.theta_k[1] == pytest.approx(2.0 / 3.0)
    np.testing.assert_allclose(truth.b, [0.0, 2.0 / 3.0])


@pytest.mark.parametrize("kernel", ["triangular", "epanechnikov", "gaussian"])
def test_kernel_named_smooth_ladders(kernel):
    x = np.linspace(-2.0, 2.0, 17)
    spec = KernelModelSpec(
        design_points=x,
        point=0.0,
        bandwidths=np.array([0.4, 0.9, 1.7, 3.0]),
        kernel=kernel,
        noise_sd=0.7,
        f_values=x**2,
    )
    design, truth = design_kernel(spec)
    assert np.all(np.diff(design.v) < 0)
    assert truth.theta == 0.0
    assert np.all(np.diff(np.abs(truth.b)) >= -1e-12)  # wider windows, more bias here


def test_kernel_unknown_name():
    spec = KernelModelSpec(
        design_points=np.array([0.0]),
        point=0.0,
        bandwidths=np.array([1.0]),
        kernel="boxcar",
        noise_sd=1.0,
        f_values=np.zeros(1),
    )
    with pytest.raises(DomainError):
        design_kernel(spec)


def test_kernel_empty_window():
    spec = KernelModelSpec(
        design_points=np.array([5.0, 6.0]),
        point=0.0,
        bandwidths=np.array([0.5, 10.0]),
        kernel="rectangular",
        noise_sd=1.0,
        f_values=np.zeros(2),
        target=0.0,
    )
    with pytest.raises(EmptyWindowError):
        design_kernel(spec)


def test_kernel_requires_explicit_target_off_grid():
    spec = KernelModelSpec(
        design_points=np.array([-1.0, 1.0]),
        point=0.5,
        bandwidths=np.array([2.0, 4.0]),
        kernel="rectangular",
        noise_sd=1.0,
        f_values=np.zeros(2),
    )
    with pytest.raises((DomainError, OrderingError)):
        design_kernel(spec)


def test_kernel_flat_ladder_rejected():
    # both bandwidths capture every point: equal variances
    spec = KernelModelSpec(
        design_points=np.array([-1.0, 0.0, 1.0]),
        point=0.0,
        bandwidths=np.array([10.0, 20.0]),
        kernel="rectangular",
        noise_sd=1.0,
        f_values=np.zeros(3),
    )
    with pytest.raises(OrderingError):
        design_kernel(spec)


def test_functional_dot_products():
    spec = FunctionalModelSpec(
        phi=np.array([[1.0, 1.0], [1.0, 0.0]]),
        noise_cov_diag=np.ones(2),
        target_coeffs=np.zeros(2),
    )
    design, _ = design_functional(spec)
    np.testing.assert_array_equal(design.v, [2.0, 1.0])
    assert design.B[0, 1] == 1.0


def test_functional_prefix_indicators_match_sequence_bitwise():
    sigma = np.array([1.3, 0.7, 2.1, 0.9])
    mu = np.array([0.4, -1.2, 0.3, 2.0])
    delta = 1e-3
    cutoffs = np.array([4, 2, 1])
    seq_design, seq_truth = sequence_design(sigma, mu, delta, cutoffs)
    phi = np.zeros((3, 4))
    for k, m in enumerate(cutoffs):
        phi[k, :m] = 1.0
    fun_design, fun_truth = design_functional(
        FunctionalModelSpec(
            phi=phi, noise_cov_diag=(delta * sigma) ** 2, target_coeffs=mu
        )
    )
    np.testing.assert_array_equal(seq_design.v, fun_design.v)
    np.testing.assert_array_equal(seq_design.B, fun_design.B)
    np.testing.assert_array_equal(seq_truth.theta_k, fun_truth.theta_k)
    assert seq_truth.theta == fun_truth.theta


def test_functional_nonmonotone_variances_rejected():
    spec = FunctionalModelSpec(
        phi=np.array([[1.0, 0.0], [1.0, 1.0]]),
        noise_cov_diag=np.ones(2),
        target_coeffs=np.zeros(2),
    )
    with pytest.raises(OrderingError):
        design_functional(spec)


def test_sequence_validation_errors():
    with pytest.raises(OrderingError):
        sequence_design([1.0, 1.0], [0.0, 0.0], 1.0, [1, 2])
    with pytest.raises(DomainError):
        sequence_design([1.0, -1.0], [0.0, 0.0], 1.0, [2, 1])
    with pytest.raises(DomainError):
        sequence_design([1.0, 1.0], [0.0, 0.0], -1.0, [2, 1])
    with pytest.raises(DomainError):
        sequence_design([1.0, 1.0], [0.0, 0.0], 1.0, [3, 1])


def test_equal_variances_rejected():
    v = np.array([1.0, 1.0])
    with pytest.raises(OrderingError):
        FamilyDesign(v=v, B=np.diag(v))


def test_design_not_positive_definite():
    from propcal import NotPositiveDefiniteError

    v = np.array([2.0, 1.0])
    B = np.array([[2.0, 1.9], [1.9, 1.0]])  # |corr| > 1
    with pytest.raises(NotPositiveDefiniteError):
        FamilyDesign(v=v, B=B)


def test_truth_deltas_worked_examples():
    design, truth = simple_family()
    deltas = truth_deltas(design, truth)
    # oracle for k=2: brute-force 2x2 inverse of [[3,2],[2,2]] is [[1,-1],[-1,1.5]]
    b2 = truth.b[:2]
    binv = np.array([[1.0, -1.0], [-1.0, 1.5]])
    assert deltas[1] == pytest.approx(b2 @ binv @ b2)
    assert deltas[1] == pytest.approx(24.0)
    assert deltas[0] == 0.0

    ident = FamilyDesign(v=np.array([2.0, 1.0]), B=np.diag([2.0, 1.0]))
    from propcal import TruthProfile

    truth2 = TruthProfile(theta=0.0, theta_k=np.array([1.0, 1.0]), b=np.array([1.0, 1.0]))
    np.testing.assert_allclose(truth_deltas(ident, truth2), [0.5, 1.5])


def test_sample_null_moments_generic_path(diagonal_design):
    n = 100_000
    draws = sample_null(diagonal_design, n, seed=7)
    v = diagonal_design.v
    assert np.all(np.abs(draws.mean(axis=0)) <= 4.0 * np.sqrt(v / n))
    assert np.all(np.abs(draws.var(axis=0) / v - 1.0) <= 0.05)


def test_sample_null_generic_covariance():
    v = np.array([3.0, 2.0, 1.0])
    B = np.array([[3.0, 1.2, 0.4], [1.2, 2.0, 0.9], [0.4, 0.9, 1.0]])
    design = FamilyDesign(v=v, B=B)
    n = 100_000
    draws = sample_null(design, n, seed=21)
    emp = np.cov(draws.T, bias=True)
    tol = 5.0 * np.sqrt(np.outer(v, v) / n)
    assert np.all(np.abs(emp - B) <= tol)


def test_design_arrays_immutable():
    design, truth = simple_family()
    with pytest.raises(ValueError):
        design.v[0] = 99.0
    with pytest.raises(ValueError):
        design.B[0, 0] = 99.0
    with pytest.raises(ValueError):
        truth.b[0] = 99.0


def test_sample_null_sequence_covariance():
    design, _ = simple_family()
    n = 100_000
    draws = sample_null(design, n, seed=11)
    emp = np.cov(draws.T, bias=True)
    tol = 5.0 * np.sqrt(np.outer(design.v, design.v) / n)
    assert np.all(np.abs(emp - design.B) <= tol)


def test_sample_null_worker_determinism():
    design, _ = simple_family()
    a = sample_null(design, 20_000, seed=3, workers=1)
    b = sample_null(design, 20_000, seed=3, workers=8)
    np.testing.assert_array_equal(a, b)
    np.testing.assert_array_equal(a[12_345], b[12_345])


def test_sample_null_statistics_scale_invariant():
    from propcal import EstimateVector, pair_stats

    d1, _ = simple_family(delta=1.0)
    d2, _ = simple_family(delta=2.0)
    x1 = sample_null(d1, 500, seed=5)
    x2 = sample_null(d2, 500, seed=5)
    np.testing.assert_array_equal(2.0 * x1, x2)
    t1 = pair_stats(EstimateVector(values=x1[0], v=d1.v))
    t2 = pair_stats(EstimateVector(values=x2[0], v=d2.v))
    np.testing.assert_array_equal(t1.t, t2.t)


@settings(max_examples=100)
@given(seed=st.integers(0, 2**32 - 1))
def test_modeling_bias_nondecreasing(seed):
    rng = np.random.default_rng(seed)
    design, truth = random_sequence_model(rng)
    deltas = truth_deltas(design, truth)
    assert np.all(np.diff(deltas) >= 0.0)


@settings(max_examples=50)
@given(seed=st.integers(0, 2**32 - 1))
def test_sequence_structure_properties(seed):
    rng = np.random.default_rng(seed)
    design, _ = random_sequence_model(rng)
    K = design.K
    # covariance of nested sums: B[l,k] equals the smaller-cutoff variance
    for l in range(K):
        for k in range(l + 1, K):
            assert design.B[l, k] == design.v[k]
    pv = design.pair_variances()
    iu = np.triu_indices(K, k=1)
    assert np.max(pv[iu] / design.v[iu[0]]) <= 1.0 + 1e-12
