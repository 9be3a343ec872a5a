"""Time estimation under neighbour-dependent (CpG) nucleotide substitution."""

from .estimators import (
    InvalidLetter,
    ObservedStats,
    ObsOutOfRange,
    TimeEstimate,
    estimate_time,
    kappa_nu,
    kappa_rn,
    observe,
)
from .kernels import ANCESTOR, DIVERGENCE, aa_closed_form, cc_closed_form, spectral_constants
from .model import InvalidParams, SubstitutionParams, jc_cpg_params, read_params
from .simulator import BACKEND, AlignedPair, ExperimentSpec, run_experiment

__version__ = "0.1.0"

__all__ = [
    "ANCESTOR",
    "BACKEND",
    "DIVERGENCE",
    "AlignedPair",
    "ExperimentSpec",
    "InvalidLetter",
    "InvalidParams",
    "ObsOutOfRange",
    "ObservedStats",
    "SubstitutionParams",
    "TimeEstimate",
    "aa_closed_form",
    "cc_closed_form",
    "estimate_time",
    "jc_cpg_params",
    "kappa_nu",
    "kappa_rn",
    "observe",
    "read_params",
    "run_experiment",
    "spectral_constants",
]
