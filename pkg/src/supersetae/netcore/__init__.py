"""Neural engine: masked layers, hand-derived backprop, SGD, PCA, k-fold CV."""

from .model import (
    LayerSpec,
    Model,
    build_autoencoder,
    build_classifier,
    build_dense_classifier,
    build_geneset_classifier,
    build_network,
    encode,
    forward,
    forward_cache,
    he_uniform,
    loss_value,
    softmax,
)
from .train import (
    EarlyStopping,
    History,
    OptimizerState,
    TrainConfig,
    backward,
    one_hot,
    predict,
    sgd_step,
    train,
)
from .pca import PcaResult, pca
from .crossval import CvResult, kfold_cv, stratified_folds
from .serialize import load_model, model_from_json, model_to_json, save_model

__all__ = [
    "LayerSpec",
    "Model",
    "build_autoencoder",
    "build_classifier",
    "build_dense_classifier",
    "build_geneset_classifier",
    "build_network",
    "encode",
    "forward",
    "forward_cache",
    "he_uniform",
    "loss_value",
    "softmax",
    "EarlyStopping",
    "History",
    "OptimizerState",
    "TrainConfig",
    "backward",
    "one_hot",
    "predict",
    "sgd_step",
    "train",
    "PcaResult",
    "pca",
    "CvResult",
    "kfold_cv",
    "stratified_folds",
    "load_model",
    "model_from_json",
    "model_to_json",
    "save_model",
]
