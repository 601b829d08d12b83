"""Reliability inference for multiple repairable systems under dependent
competing risks: closed-form power-law-process estimation plus a
nonparametric shared-frailty posterior sampler."""

from .data import (
    ObservationDesign,
    FailureRecord,
    FailureDataset,
    CountSummary,
    DatasetError,
    ingest,
    summarize,
    write_dataset,
)
from .plp import (
    PlpParams,
    PriorConfig,
    PlpPosterior,
    intensity,
    mean_function,
    log_likelihood,
    mle,
    posterior,
    bayes_estimates,
    duane_points,
)
from .simulate import SimScenario, FrailtyMixture, draw_frailties, simulate
from .dpm import DpmHyperparams, McmcTrace, run_chain, density_estimate, frailty_variance
from .hmc import HmcConfig, transform, inverse_transform
from .diagnostics import geweke, autocorrelation, ess, run_harness

__version__ = "0.1.0"
