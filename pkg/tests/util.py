"""Shared helpers for the test suite."""

import numpy as np

from propcal import SequenceModelSpec, design_sequence


def sequence_design(sigma, mu, delta, cutoffs, label="test"):
    spec = SequenceModelSpec(
        sigma=np.asarray(sigma, dtype=float),
        mu=np.asarray(mu, dtype=float),
        delta=float(delta),
        cutoffs=np.asarray(cutoffs, dtype=int),
        label=label,
    )
    return design_sequence(spec)


def simple_family(mu=(1.0, 2.0, 4.0), delta=1.0):
    """sigma = (1,1,1), cutoffs (3,2,1): v = (3,2,1), B[l,k] = v_max(l,k)."""
    return sequence_design(np.ones(3), mu, delta, [3, 2, 1])


def random_sequence_model(rng, max_members=8, ratio_range=(1.3, 2.4)):
    """Random sequence design whose consecutive variance ratios lie in the
    given range (the regime the benchmark families inhabit); cutoffs are
    (K, K-1, ..., 1) and the coordinate variances are backed out from the
    target variance ladder."""
    k_count = int(rng.integers(2, max_members + 1))
    ratios = rng.uniform(*ratio_range, size=k_count - 1)
    v = np.empty(k_count)
    v[-1] = rng.uniform(0.5, 2.0)
    for i in range(k_count - 2, -1, -1):
        v[i] = v[i + 1] * ratios[i]
    sigma = np.sqrt(np.diff(np.concatenate([[0.0], v[::-1]])))
    cutoffs = np.arange(k_count, 0, -1)
    mu = rng.normal(0.0, 1.0, size=k_count)
    return sequence_design(sigma, mu, 1.0, cutoffs)
