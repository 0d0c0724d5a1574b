"""Low-rank, kernel-reshaped spectral filters for semi-supervised node classification."""

from .dataset import Dataset, SbmConfig, generate_sbm, load_dataset, summary, write_dataset
from .filters import KernelSpec, build_propagation, filter_values, kernel_eval, kernel_matrix, regularize
from .model import ForwardContext, ModelParams, backward, forward, init_params, sensing_form
from .representation import GraphMatrix, build_representation
from .spectral import SpectralSystem, decompose, load_cache, save_cache, truncate
from .splits import SplitSet, make_balanced, make_dense, make_public, make_sparse
from .training import TrainConfig, accuracy, adam_step, cross_entropy, train_run

__version__ = "0.1.0"
