"""Reverse-mode autodiff and the neural-network layers built on it."""
from .tensor import GraphError, Tensor, concat, pad, stack
from .functional import (LstmParams, avg_pool1d, avg_pool2d, batch_norm, bilstm, conv1d,
                         conv2d, dropout, global_avg_pool, linear, lstm_cell, lstm_sequence,
                         multi_head_attention, relu, sigmoid, softmax, tanh)
from .layers import (LSTM, BatchNorm, BiLSTM, Conv1d, Conv2d, Dropout, Linear, Module,
                     MultiHeadAttention, Parameter, ReLU, assign_dropout_keys)
from .optim import Adam, RMSProp, make_optimizer

__all__ = [
    "GraphError", "Tensor", "concat", "pad", "stack",
    "LstmParams", "avg_pool1d", "avg_pool2d", "batch_norm", "bilstm", "conv1d", "conv2d",
    "dropout", "global_avg_pool", "linear", "lstm_cell", "lstm_sequence",
    "multi_head_attention", "relu", "sigmoid", "softmax", "tanh",
    "LSTM", "BatchNorm", "BiLSTM", "Conv1d", "Conv2d", "Dropout", "Linear", "Module",
    "MultiHeadAttention", "Parameter", "ReLU", "assign_dropout_keys",
    "Adam", "RMSProp", "make_optimizer",
]
