"""Deterministic random-feature kernel expansions with a fast
Walsh-Hadamard core, a hash-derived randomness layer, an exact-kernel
oracle and a mini-batch softmax trainer."""

__version__ = "0.1.0"

from .detrand import (
    RandomStream,
    chi_sample,
    fisher_yates_permutation,
    unit_ball_sample,
)
from .wht import bench_wht, wht_fast, wht_fast_batch, wht_naive, wht_recursive
from .fastfood import (
    RBF,
    RBFMatern,
    FastfoodBlock,
    FeatureMapSpec,
    apply_zhat,
    build_block,
    build_blocks,
    feature_dim,
    feature_map,
    feature_map_batch,
    param_count,
)
from .exact_kernel import (
    kernel_check,
    rbf_gram,
    rbf_kernel,
    ridge_predict,
    ridge_solve,
    v_matrix,
    v_ridge_solve,
)
from .linear_model import (
    RunMetrics,
    SoftmaxModel,
    TrainConfig,
    evaluate,
    forward,
    train,
)
from .dataio import Dataset, load_idx, subset, synth_blobs, synth_xor

__all__ = [
    "RandomStream", "chi_sample", "fisher_yates_permutation", "unit_ball_sample",
    "bench_wht", "wht_fast", "wht_fast_batch", "wht_naive", "wht_recursive",
    "RBF", "RBFMatern", "FastfoodBlock", "FeatureMapSpec", "apply_zhat",
    "build_block", "build_blocks", "feature_dim", "feature_map",
    "feature_map_batch", "param_count",
    "kernel_check", "rbf_gram", "rbf_kernel", "ridge_predict", "ridge_solve",
    "v_matrix", "v_ridge_solve",
    "RunMetrics", "SoftmaxModel", "TrainConfig", "evaluate", "forward", "train",
    "Dataset", "load_idx", "subset", "synth_blobs", "synth_xor",
]
