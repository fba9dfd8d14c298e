"""Table-pair relation classifier."""
from .encode import ColumnVector, EncodedTable, canonical_mode, encode_column, encode_table
from .model import AlignmentModel, Batch, NonFiniteGradient, forward, forward_batch, gradients, loss, make_batch
from .train import PairExample, Prediction, TrainConfig, TrainResult, predict, predict_examples, split_dataset, train

__all__ = [
    "AlignmentModel", "Batch", "ColumnVector", "EncodedTable", "NonFiniteGradient", "PairExample",
    "Prediction", "TrainConfig", "TrainResult", "canonical_mode", "encode_column", "encode_table",
    "forward", "forward_batch", "gradients", "loss", "make_batch", "predict", "predict_examples",
    "split_dataset", "train",
]
