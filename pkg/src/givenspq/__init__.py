"""Rotation learning for product quantization on SO(n) by Givens coordinate descent."""

from .cayley import CayleyState, cayley_rotation, cayley_step
from .convergence import ConvexObjective, convergence_run, estimate_lipschitz
from .data import gen_synthetic, read_fvecs, read_ivecs, write_fvecs, write_ivecs
from .descent import (
    SelectionStrategy,
    directional_derivatives,
    gcd_step,
    select_pairs_greedy,
    select_pairs_random,
    select_pairs_steepest,
)
from .linalg import GivensPlan, RotationState, givens_apply_right, procrustes
from .opq import TrainerConfig, run_trainer
from .pq import PQCodebook, adc_eval, pq_decode, pq_encode, pq_train

__all__ = [
    "adc_eval",
    "cayley_rotation",
    "cayley_step",
    "CayleyState",
    "convergence_run",
    "ConvexObjective",
    "directional_derivatives",
    "estimate_lipschitz",
    "gcd_step",
    "gen_synthetic",
    "givens_apply_right",
    "GivensPlan",
    "pq_decode",
    "pq_encode",
    "pq_train",
    "PQCodebook",
    "procrustes",
    "read_fvecs",
    "read_ivecs",
    "RotationState",
    "run_trainer",
    "select_pairs_greedy",
    "select_pairs_random",
    "select_pairs_steepest",
    "SelectionStrategy",
    "TrainerConfig",
    "write_fvecs",
    "write_ivecs",
]

__version__ = "0.1.0"
