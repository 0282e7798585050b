"""Lower bounds on adversarial 0-1 loss for binary classification via optimal transport."""
from .cost import IndistGraph, NeighborhoodSpec, pairwise_distances, threshold
from .dataset import BinaryTask, DatasetError, LabeledDataset, load_cifar10, load_csv, load_idx, make_binary_task
from .gaussian import (
    AlphaCertificate,
    GaussianProblem,
    alpha_star,
    alpha_star_generic,
    alpha_star_linf_explicit,
    alpha_star_matching_norm,
    linear_classifier_adv_loss,
    optimal_adv_loss,
    translate_and_pair_upper_bound,
    tv_gaussians_symmetric,
)
from .matching import (
    MatchingResult,
    RobustnessBound,
    WitnessPotentials,
    brute_force_min_weight,
    classify_with_witness,
    max_matching,
    robustness_curve,
    transport_cost,
    witness_potentials,
)
from .numerics import BallSpec, SpdMatrix, ball_norm, dual_norm, project_ball, q_function, rng_stream

__version__ = "0.1.0"
