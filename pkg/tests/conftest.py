"""Shared fixtures: canonical scenarios and dataset builders."""

import numpy as np
import pytest

from frailplp.data import (
    ObservationDesign,
    FailureRecord,
    FailureDataset,
    CountSummary,
)
from frailplp.plp import PlpParams
from frailplp.simulate import SimScenario


@pytest.fixture
def two_cause_params():
    return PlpParams(beta=np.array([1.2, 0.7]), alpha=np.array([5.0, 13.33]))


@pytest.fixture
def fleet_scenario(two_cause_params):
    """Mid-sized fleet with gamma frailties, the workhorse synthetic setting."""
    return SimScenario(
        design=ObservationDesign(T=20.0, m=50, K=2),
        true_params=two_cause_params,
        eta=1.0,
        seed=3,
        normalize_frailties=True,
    )


@pytest.fixture
def warranty_summary():
    """Count summary shaped like a large warranty-claims fleet.

    439 systems, three causes with totals (76, 87, 111).  Only the counts
    drive the alpha marginals, so the per-cause log-ratio sums are arbitrary
    fixed positives.
    """
    m, counts = 439, (76, 87, 111)
    n_jq = np.zeros((m, 3), dtype=int)
    rng = np.random.default_rng(0)
    for q, n in enumerate(counts):
        systems = rng.choice(m, size=n, replace=True)
        for j in systems:
            n_jq[j, q] += 1
    return CountSummary(
        n_jq=n_jq,
        n_j=n_jq.sum(axis=1),
        n_q=n_jq.sum(axis=0),
        log_ratio_sums=np.array([150.0, 160.0, 200.0]),
        design=ObservationDesign(T=3000.0, m=m, K=3),
    )


def make_dataset(T=20.0, m=2, K=1, events=()):
    """Small literal dataset: events are (system_id, cause, time) triples."""
    design = ObservationDesign(T=T, m=m, K=K)
    records = [FailureRecord(system_id=j, time=t, cause=q) for j, q, t in events]
    return FailureDataset(design, records)
