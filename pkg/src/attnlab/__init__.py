"""Upper-, doubly- and hybrid-normalized attention.

Normalization kernels come from a compiled Cython extension when it is
built, otherwise from numpy; ``attnlab.BACKEND`` names the one in use.
"""
from ._backend import NAME as BACKEND
from .attention import (AttentionOutput, HeadParams, attention_forward, dnas_weights, hnas_weights, logits,
                        padded_query_transform, unas_weights)
from .collapse_sim import (TwoClusterSpec, center_distance_dnas, center_distance_unas, simulate_2d,
                           sweep_ratio)
from .diagnostics import ExplainAwayReport, analyze, theorem1_bound
from .gmm_lab import GmmConfig, default_priors, fixed_point_dnas, fixed_point_unas, log_likelihood, responsibilities
from .gradients import GradBundle, dnas_backward, finite_diff_check, hnas_backward, unas_backward
from .sinkhorn import SinkhornReport, ds_residual, sinkhorn_run, transport_objective, unas_closed_form
from .tensor_core import col_softmax, matmul, row_normalize, row_softmax

__version__ = "0.1.0"
