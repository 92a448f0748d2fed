"""TasteNet-MNL: a neural-embedded multinomial logit.

A feed-forward network maps individual characteristics to taste
coefficients; those coefficients enter a multinomial logit whose structure
is declared term by term. Network weights and parametric coefficients are
estimated jointly by regularized maximum likelihood, and the fitted model
yields per-person values of time and choice elasticities.
"""
from . import backend
from .choice import Term, UtilitySpec, probabilities, systematic_utility
from .data import (CategoricalRule, Dataset, FeatureSchema, Observation, load_csv,
                   load_swissmetro, split_dataset, swissmetro_schema, write_csv)
from .errors import (ConfigError, DataError, IndicatorError, ParseError, ProbeError,
                     RegressionError, SchemaError, SpecError, TasteNetError, TrainingError)
from .estimation import (ModelSpec, RclSpec, SearchSpace, TrainConfig, estimate_mnl,
                         estimate_rcl, grid_search, regularized_loss, train)
from .indicators import (ErrorMetrics, activation_probe, aggregate_elasticity,
                         classification_metrics, error_metrics, point_elasticity,
                         taste_recovery_regression, value_of_time, what_if_curve)
from .mlp import MlpParams, MlpSpec, init_params
from .model import FittedModel, RclModel, dataset_nll, load_model
from .synthetic import (GenConfig, TrueTasteParams, draw_characteristics,
                        generate_dataset, true_taste)

__version__ = "0.1.0"

__all__ = [
    "backend",
    "Term", "UtilitySpec", "probabilities", "systematic_utility",
    "CategoricalRule", "Dataset", "FeatureSchema", "Observation", "load_csv",
    "load_swissmetro", "split_dataset", "swissmetro_schema", "write_csv",
    "ConfigError", "DataError", "IndicatorError", "ParseError", "ProbeError",
    "RegressionError", "SchemaError", "SpecError", "TasteNetError", "TrainingError",
    "ModelSpec", "RclSpec", "SearchSpace", "TrainConfig", "estimate_mnl",
    "estimate_rcl", "grid_search", "regularized_loss", "train",
    "ErrorMetrics", "activation_probe", "aggregate_elasticity",
    "classification_metrics", "error_metrics", "point_elasticity",
    "taste_recovery_regression", "value_of_time", "what_if_curve",
    "MlpParams", "MlpSpec", "init_params",
    "FittedModel", "RclModel", "dataset_nll", "load_model",
    "GenConfig", "TrueTasteParams", "draw_characteristics", "generate_dataset", "true_taste",
    "__version__",
]
