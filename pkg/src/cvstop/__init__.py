"""Optimal stopping by continuation-value iteration.

The continuation value of a stopping problem lives on fewer state
coordinates than the value function whenever some coordinates only affect
the stopping payoff. Iterating on it is then much cheaper than value
iteration, and threshold policies follow from it by root finding.
"""
from .bench import BenchmarkConfig, BenchmarkResult, compare_solutions, group3_cost_model, run_benchmark
from .config import RunConfig, dump_config, load_config, parse_config
from .core import DecisionModel, Grid, GridFunction, StateSpace, make_grid
from .errors import (BoundaryDerivativeError, CertificateError, ConfigError, CvstopError, DiagnosticUnavailable,
                     EvaluationError, InputError, NoThresholdError, PosteriorError)
from .integrate import IntegratorSpec, expectation, expectation_stderr
from .io import emit_results, read_grid_function, write_grid_function
from .models import build_model
from .operators import (BellmanOperator, Choice, JovanovicOperator, MultiChoiceOperator, RepeatedModel,
                        SolveReport, apply_bellman, apply_jovanovic, apply_multichoice, apply_repeated,
                        continuation_from_value, estimate_contraction_factor, iterate_to_fixed_point,
                        solve_cvi, solve_multichoice, solve_repeated, solve_vfi, value_from_continuation)
from .threshold import (Decision, ThresholdCurve, ThresholdModel, decide, solve_threshold_curve,
                        threshold_gradient)
from .weights import (DriftCertificate, DriftReport, WeightFunction, build_weight_function, verify_drift,
                      weighted_sup_norm)

__version__ = "0.1.0"
