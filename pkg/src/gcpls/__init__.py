"""Grammar-compressed sparse binary matrices and PLS learning on them."""

from .cmatrix import CompressedMatrix, WeightArray, build_weight_array, load_gcmx, save_gcmx
from .counters import ExactCounter, FreqCounter, LossyCounter
from .grammar import Grammar
from .ingest import (FingerprintMatrix, ResponseVector, from_gap_sequence, parse_sparse_file,
                     to_gap_sequence, write_sparse_file)
from .pls import (FitConfig, PlsModel, compute_alpha, cpls_fit, evaluate, extract_features,
                  load_model, nipals_fit, predict, predict_matrix, predict_rows, save_model)
from .repair import CompressorConfig, compress, count_pairs, replace_pairs, select_topk

__version__ = "0.1.0"
