"""scikit-learn style regressor around the MLP and collision optimizers."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted, validate_data

from .exp import train_epochs
from .kinetic import KineticConfig
from .linalg import make_rng
from .net import Activation, Network
from .optim import KineticOptimizer, OptimizerConfig, make_optimizer


class KOMLPRegressor(RegressorMixin, BaseEstimator):
    """Fully connected regressor trained with MSE and an optional collision transform.

    Parameters
    ----------
    hidden_layer_sizes : tuple of int
        Width of each hidden layer.
    activation : str
        Hidden activation: ``tanh``, ``xtanh``, ``sigmoid``, ``softplus`` or ``identity``.
        The output layer is linear.
    init_std : float
        Weights and biases start as ``N(0, init_std**2)``.
    optimizer : str
        ``sgd``, ``adam`` or ``adamw``.
    learning_rate, momentum, weight_decay : float
        Base optimizer settings (momentum is used by ``sgd`` only).
    collision : str or None
        ``"soft"``, ``"hard"`` or None for the plain optimizer.
    coll_coef : float in [0, 1]
        Collision strength; 0 reproduces the plain optimizer exactly.
    soft_zero_diagonal : bool
        Drop each neuron's self term from the soft repulsion.
    target_layers : tuple of int
        Layers whose weight gradients are collided (0 is the first hidden layer).
    max_epochs : int
        Passes over the training data.
    batch_size : int
        Minibatch size; 0 means full batch.
    random_state : int
        Seeds initialisation, batch order and collision draws.

    Attributes
    ----------
    network_ : Network
    history_ : list of MetricsRecord, one per epoch
    loss_ : float, training loss of the last epoch
    n_features_in_ : int
    """

    def __init__(self, hidden_layer_sizes=(50,), activation="tanh", init_std=0.005,
                 optimizer="adam", learning_rate=1e-3, momentum=0.0, weight_decay=0.0,
                 collision=None, coll_coef=0.1, soft_zero_diagonal=False,
                 target_layers=(0,), max_epochs=100, batch_size=0, random_state=0):
        self.hidden_layer_sizes = hidden_layer_sizes
        self.activation = activation
        self.init_std = init_std
        self.optimizer = optimizer
        self.learning_rate = learning_rate
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.collision = collision
        self.coll_coef = coll_coef
        self.soft_zero_diagonal = soft_zero_diagonal
        self.target_layers = target_layers
        self.max_epochs = max_epochs
        self.batch_size = batch_size
        self.random_state = random_state

    def _check_params(self):
        sizes = tuple(int(h) for h in np.atleast_1d(self.hidden_layer_sizes))
        if not sizes or min(sizes) < 1:
            raise ValueError(f"hidden_layer_sizes must be positive, got {self.hidden_layer_sizes}")
        if int(self.max_epochs) < 1:
            raise ValueError("max_epochs must be >= 1")
        if int(self.batch_size) < 0:
            raise ValueError("batch_size must be >= 0")
        if self.init_std < 0:
            raise ValueError("init_std must be >= 0")
        opt = OptimizerConfig(kind=self.optimizer, learning_rate=self.learning_rate,
                              momentum=self.momentum, weight_decay=self.weight_decay)
        kin = None
        if self.collision is not None:
            kin = KineticConfig(mode=self.collision, coll_coef=self.coll_coef,
                                soft_zero_diagonal=self.soft_zero_diagonal)
        return sizes, Activation.parse(self.activation), opt, kin

    def __sklearn_tags__(self):
        tags = super().__sklearn_tags__()
        tags.target_tags.multi_output = True
        return tags

    def fit(self, X, y):
        X, y = validate_data(self, X, y, y_numeric=True, multi_output=True, dtype=np.float64)
        sizes, act, opt_cfg, kin = self._check_params()
        y2 = y.reshape(-1, 1) if y.ndim == 1 else y
        self._y_1d = y.ndim == 1
        dims = (X.shape[1], *sizes, y2.shape[1])
        seed = int(self.random_state)
        net = Network.from_dims(dims, act, rng=make_rng(seed, "init"), init_std=self.init_std)
        targets = tuple(self.target_layers) if kin is not None else ()
        for t in targets:
            if not 0 <= int(t) < len(dims) - 1:
                raise ValueError(f"target layer {t} out of range")
        opt = KineticOptimizer(make_optimizer(opt_cfg), kin, targets, seed=seed)
        result = train_epochs(net, opt, X, y2, epochs=int(self.max_epochs),
                              batch_size=int(self.batch_size), rng=make_rng(seed, "batches"))
        self.network_ = net
        self.history_ = result.records
        self.loss_ = result.records[-1].train_loss
        return self

    def predict(self, X):
        check_is_fitted(self, "network_")
        X = validate_data(self, X, reset=False, dtype=np.float64)
        out = self.network_.forward(X)
        return out[:, 0] if self._y_1d else out
