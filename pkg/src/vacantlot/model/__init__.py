from .base import (
    CLASSIFIERS,
    KNN,
    MAJORITY,
    MLP,
    NAIVE_BAYES,
    RANDOM_FOREST,
    SVM,
    Hyperparams,
    KnnParams,
    MlpParams,
    NaiveBayesParams,
    RandomForestParams,
    SvmParams,
    TrainedModel,
    fit_knn,
    fit_majority,
    fit_mlp,
    fit_model,
    fit_naive_bayes,
    fit_random_forest,
    fit_svm,
    load_model,
    predict,
    save_model,
)
from .preprocess import Preprocessor
