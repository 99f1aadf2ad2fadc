"""Classifier ladder over the four statistical window features."""
from .boosting import GbtConfig, GbtModel, gbt_proba, train_gbt
from .ensemble import EnsembleModel, ensemble_predict, ensemble_proba
from .heuristics import (ThresholdModel, VarianceModel, fit_threshold, fit_variance,
                         threshold_predict, variance_predict)
from .knn import KnnModel, knn_predict, train_knn
from .linear import (LogRegConfig, LogRegModel, PcaLogRegModel, PcaModel, logreg_loss_grad,
                     logreg_proba, pca_fit, pca_project, train_logreg, train_pca_logreg)
from .serialize import ModelFormatError, load_model, save_model
from .trees import (Forest, ForestConfig, Tree, TreeConfig, forest_predict, forest_proba, gini,
                    train_forest, train_tree)

__all__ = [
    "EnsembleModel", "Forest", "ForestConfig", "GbtConfig", "GbtModel", "KnnModel", "LogRegConfig",
    "LogRegModel", "ModelFormatError", "PcaLogRegModel", "PcaModel", "ThresholdModel", "Tree",
    "TreeConfig", "VarianceModel", "ensemble_predict", "ensemble_proba", "fit_threshold",
    "fit_variance", "forest_predict", "forest_proba", "gbt_proba", "gini", "knn_predict",
    "load_model", "logreg_loss_grad", "logreg_proba", "pca_fit", "pca_project", "save_model",
    "threshold_predict", "train_forest", "train_gbt", "train_knn", "train_logreg",
    "train_pca_logreg", "train_tree", "variance_predict",
]
