"""Homogeneity tests for combined unilateral and bilateral binary data.

Likelihood-based LR, Wald-type and score tests under two intra-subject
correlation models, a GEE generalized score test on subject clusters,
and a reproducible Monte Carlo harness for type I error and power.
"""

from ._accel import backend
from .counts import CombinedCounts, GroupCounts, JointProbs, ModelKind, ModelParams
from .errors import (BoundaryError, DataError, InvalidParameterError,
                     NonConvergenceError, PairtestError, ParseError,
                     SingularInformationError)
from .gee import (Cluster, CorrelationStructure, GeeClusterSet, GeeFit,
                  WorkingCorrelation, gee_fit, gee_score_test, stack)
from .homogeneity import (AicComparison, TestKind, TestResult, aic_compare,
                          adjacent_contrasts, chi_sq_critical, chi_sq_sf, lr_test,
                          score_test, wald_test)
from .io import (collapse_rows, parse_frequency, parse_frequency_wide,
                 render_frequency, stack_rows)
from .mle import FitResult, fisher_information, fit_constrained, fit_unconstrained
from .model import (corr_convert, joint_probs, log_likelihood,
                    log_likelihood_constant, score_vector, valid_region)
from .report import AnalysisReport, analyze, render_report, report_json
from .simulate import (SimConfig, SimSummary, TestSummary, alternative_presets,
                       design_presets, run_experiment, sample_group)

__version__ = "0.1.0"

__all__ = [
    "__version__", "backend",
    # types
    "CombinedCounts", "GroupCounts", "JointProbs", "ModelKind", "ModelParams",
    "FitResult", "TestKind", "TestResult", "AicComparison",
    "Cluster", "GeeClusterSet", "GeeFit", "WorkingCorrelation", "CorrelationStructure",
    "SimConfig", "SimSummary", "TestSummary", "AnalysisReport",
    # errors
    "PairtestError", "InvalidParameterError", "DataError", "ParseError",
    "BoundaryError", "NonConvergenceError", "SingularInformationError",
    # model core
    "joint_probs", "valid_region", "corr_convert", "log_likelihood",
    "log_likelihood_constant", "score_vector",
    # estimation and tests
    "fisher_information", "fit_unconstrained", "fit_constrained",
    "lr_test", "wald_test", "score_test", "chi_sq_sf", "chi_sq_critical",
    "adjacent_contrasts", "aic_compare",
    # gee
    "stack", "gee_fit", "gee_score_test",
    # simulation
    "design_presets", "alternative_presets", "sample_group", "run_experiment",
    # io and reporting
    "parse_frequency", "parse_frequency_wide", "render_frequency",
    "stack_rows", "collapse_rows", "analyze", "render_report", "report_json",
]
