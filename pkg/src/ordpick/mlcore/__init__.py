from .metrics import accuracy, chosen_cost, metric_accuracy_within, metric_total_time
from .models import (
    FAMILIES,
    KNN,
    MLP,
    DecisionTree,
    LinearSVM,
    ModelSpec,
    Standardizer,
    TrainedModel,
    load_models,
    predict,
    save_models,
    standardize_apply,
    standardize_fit,
    train,
)
from .search import CVConfig, SearchResult, TrainingSet, cv_search, run_search, sample_candidates

__all__ = [
    "FAMILIES", "KNN", "MLP", "CVConfig", "DecisionTree", "LinearSVM", "ModelSpec", "SearchResult", "Standardizer",
    "TrainedModel", "TrainingSet", "accuracy", "chosen_cost", "cv_search", "load_models", "metric_accuracy_within",
    "metric_total_time", "predict", "run_search", "sample_candidates", "save_models", "standardize_apply",
    "standardize_fit", "train",
]
