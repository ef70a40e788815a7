"""Minibatch Metropolis-Hastings with a corrected Barker acceptance test."""
from .acceptance import (
    AustereTest,
    BarkerTestConfig,
    FullBarkerTest,
    FullMetropolisTest,
    MinibatchBarkerTest,
    SubLhdTest,
    TestDecision,
    austere_step,
    full_barker_step,
    full_metropolis_step,
    mh_minibatch_step,
    mhsublhd_step,
)
from .chain import ChainConfig, ChainResult, ScheduleEntry, run_chain, summarize
from .correction import (
    CorrectionTable,
    default_table,
    load_table,
    make_correction,
    sample_correction,
    save_table,
)
from .data import Dataset, generate_gaussian_data, generate_mixture_data, make_rng
from .models import (
    GaussianMeanModel,
    LogisticRegressionModel,
    MixtureModel,
    RandomWalkProposal,
)
from .stats import MomentAccumulator, barker, clt_error_bound, ks_distance, sample_logistic

__version__ = "0.1.0"
