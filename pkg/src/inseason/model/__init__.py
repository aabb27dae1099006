from .autodiff import Tensor
from .checkpoint import Checkpoint
from .gradcheck import grad_check
from .losses import focal_loss, mae_loss
from .network import Batch, CropModel, ModelConfig, TokenSequence
from .optim import Adam
from .training import (
    ExampleArrays,
    TrainingConfig,
    arrays_from_examples,
    embed_examples,
    finetune,
    knn_predict,
    knn_probe,
    predict_probs,
    pretrain,
    steps_to_reach,
)

__all__ = [
    "Adam",
    "Batch",
    "Checkpoint",
    "CropModel",
    "ExampleArrays",
    "ModelConfig",
    "Tensor",
    "TokenSequence",
    "TrainingConfig",
    "arrays_from_examples",
    "embed_examples",
    "finetune",
    "focal_loss",
    "grad_check",
    "knn_predict",
    "knn_probe",
    "mae_loss",
    "predict_probs",
    "pretrain",
    "steps_to_reach",
]
