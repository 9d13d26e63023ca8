"""Model augmentation for transfer-learned classifiers.

Penultimate-layer features of training samples form a class-arranged
dictionary; each test sample gets a sparse (OMP) and a dense (ridge) code
over it, the two are normalized and summed, pooled per class and added to
the network's softmax scores before the argmax.
"""

__version__ = "0.1.0"

from .coders import DenseCode, DenseCoder, FusedCode, SparseCode, dense_encode, fuse, omp_encode
from .dictionary import Dictionary, LabeledFeature, build_dictionary, class_of_column
from .errors import FactorizationError, FormatError, InputError
from .predictor import (ClassScores, ConfusionCounts, EvalReport, Metrics, SplitSpec, chunk_splits,
                        compute_metrics, evaluate_draws, evaluate_pipeline, pool_by_class, predict)
