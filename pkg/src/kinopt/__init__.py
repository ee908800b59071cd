"""Collision-based gradient transforms, small-network training tools and a DSMC gas simulator."""

from .dsmc import DsmcConfig, DsmcSimulation, h_function, mb_distance, velocity_histogram
from .estimator import KOMLPRegressor
from .exp import ExperimentConfig, SyntheticSpec, bench_overhead, gen_synthetic, run_condensation
from .kinetic import (
    CollisionMode,
    KineticConfig,
    collision_mask,
    hard_collision,
    kinetic_transform,
    pairwise_relatives,
    soft_collision,
    thm3_oracle,
)
from .linalg import make_rng
from .metrics import MetricsRecord, cosine_matrix, neuron_similarity, weight_correlation
from .net import Activation, DenseLayer, Network, mse_loss
from .optim import SGD, Adam, AdamW, KineticOptimizer, OptimizerConfig, ko_step, make_optimizer

__version__ = "0.1.0"
