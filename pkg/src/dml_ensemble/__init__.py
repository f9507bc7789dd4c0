"""Adaptive ensemble of boosted trees and a dropout MLP, combined per input
by a softmax gating network fed with confidences and fused importances."""

from .attribution import AttributionConfig, combined_importance, integrated_gradients
from .errors import (DivergedTrainingError, DmlError, InvalidInputError, ModelParseError,
                     SchemaError, UndefinedMetricError, UnsupportedFormatError)
from .gbrt import (GbrtConfig, GbrtModel, confidence_xgb, fit_gbrt, gbrt_predict,
                   per_tree_contributions)
from .metalearner import (GateProbabilities, build_meta_features, fit_gate, gate_forward,
                          gating_weights, meta_loss)
from .neuralnet import (McPrediction, MlpConfig, MlpModel, confidence_nn, fit_mlp,
                        input_gradient, mc_predict, mlp_forward)
from .numkit import (Dataset, SplitSpec, Standardizer, mae, r2, rmse, softmax,
                     standardize_fit, train_test_split)
from .pipeline import (DmlConfig, DmlModel, PredictionReport, TrainingError, evaluate,
                       load_model, predict_batch, predict_dml, save_model, selection_stats,
                       train_dml)
from .synth import make_synthetic

__version__ = "0.1.0"
