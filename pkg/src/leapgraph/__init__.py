"""Learnable local Euler-characteristic positional encodings for graphs."""

from .autodiff import Parameter, Value, backward, finite_difference_check, zero_grad
from .datasets import Dataset, SyntheticSpec, generate_synthetic, parse_tu, read_jsonl, write_jsonl
from .ect import (DirectionSet, EctMatrix, ThresholdGrid, exact_ect,
                  local_ect, renormalize_directions, sample_directions,
                  smooth_ect)
from .encoders import (LeapConfig, LeapParams, init_leap_params, lape,
                       leap_encode, project_attention, project_conv1d,
                       project_deepsets, project_linear, rwpe,
                       symmetric_eigendecomposition)
from .graphs import (FeaturedGraph, adjacency, build_graph, degree,
                     m_hop_neighborhood, normalize_features,
                     normalized_laplacian, random_walk_matrix)
from .models import (ModelConfig, embed_categorical, gat_forward, gcn_forward,
                     init_model_params, nomp_forward, readout_mean)
from .training import (BaselinePeConfig, TrainConfig, accuracy, adam_step,
                       auroc, cross_entropy, kfold_split, mse, r2, train_eval)

__version__ = "0.1.0"
