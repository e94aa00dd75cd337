"""Finite-population mean estimation from a nonprobability sample and a reference probability sample.

Sampling scores come from either a linear logit or a ReLU network fitted to
the survey pseudo-log-likelihood; estimators cover the naive mean,
regression, inverse-score weighting and doubly robust forms.
"""

from .data import (CovariateMatrix, EstimateReport, FinitePopulation, NonprobSample, ProbSample,
                   align_covariates, load_nonprob_csv, load_prob_csv, minmax_rescale)
from .errors import (ConfigError, ConvergenceError, DataError, DomainError, NumericalError,
                     ParseError, RankError, SchemaError, TrainingError)
from .estimators import (OutcomeModel, estimate_all, estimate_dipw, estimate_ddr, estimate_dr,
                         estimate_ipw, estimate_naive, estimate_reg, ols_fit)
from .nnet import Architecture, Network, TrainConfig, xavier_init
from .scores import LogisticTheta, ScoreSet, fit_dnn_scores, fit_logistic_pl, truncate_scores

__version__ = "0.1.0"
