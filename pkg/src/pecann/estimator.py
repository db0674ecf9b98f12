"""Scikit-learn style front end for constrained network training."""

from __future__ import annotations

import dataclasses

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .alm import AlmConfig, Block, Term, train
from .exceptions import ConfigurationError
from .lbfgs import LbfgsConfig
from .network import forward_value
from .problems import build_problem
from .sampling import fixed_points

__all__ = ["PecannRegressor"]


class PecannRegressor(BaseEstimator, RegressorMixin):
    """Constrained-network solver wrapped as a scikit-learn regressor.

    ``fit`` trains the network for the named benchmark problem.  When
    ``X`` and ``y`` are given they join the problem as one more equality
    constraint group (a high-fidelity data term); with ``X=None`` the
    problem's own blocks alone drive training, which is the usual
    physics-only setup.

    Parameters
    ----------
    problem : str
        Registered problem name (see ``available_problems``).
    strategy : str
        Dual update schedule: ``mpu``, ``cpu`` or ``apu``.
    epochs : int
        Outer training epochs (one dual update each).
    constraint_mode : str
        ``expectation`` (scalar multiplier per group) or ``pointwise``.
    layer_sizes : tuple or None
        Network architecture; ``None`` uses the problem default.
    lbfgs_max_iterations : int or None
        Inner iterations per epoch; ``None`` uses the problem default.
    batch_size : int or None
        Mini-batch size for expectation mode; ``None`` trains full batch.
    seed : int
        Seed for initialization and sampling; fixed seed, fixed result.
    problem_options : dict or None
        Extra keyword arguments for the problem builder (point counts,
        Reynolds number data files, noise levels).

    Attributes
    ----------
    model_ : DenseNetwork
        Trained network.
    result_ : TrainResult
        Full training record (multiplier groups, history).
    metrics_ : dict
        Problem evaluation metrics at the default grid.
    n_features_in_ : int
        Input coordinate count.
    """

    def __init__(self, problem="wave", strategy="apu", epochs=100,
                 constraint_mode="expectation", layer_sizes=None,
                 lbfgs_max_iterations=None, batch_size=None, seed=0,
                 problem_options=None):
        self.problem = problem
        self.strategy = strategy
        self.epochs = epochs
        self.constraint_mode = constraint_mode
        self.layer_sizes = layer_sizes
        self.lbfgs_max_iterations = lbfgs_max_iterations
        self.batch_size = batch_size
        self.seed = seed
        self.problem_options = problem_options

    def fit(self, X=None, y=None):
        """Train the network; optionally anchor it to labeled samples."""
        spec = build_problem(self.problem, **(self.problem_options or {}))
        n_fields = len(spec.field_names)

        if X is None and y is not None:
            raise ConfigurationError("y given without X")
        if X is not None:
            if y is None:
                raise ConfigurationError("X given without y")
            X, y = check_X_y(X, y, multi_output=True)
            if X.shape[1] != len(spec.coordinates):
                raise ConfigurationError(
                    f"X has {X.shape[1]} columns; problem "
                    f"'{spec.name}' expects {len(spec.coordinates)}"
                )
            targets = np.atleast_2d(np.asarray(y, dtype=np.float64).T).T
            if targets.shape[1] > n_fields:
                raise ConfigurationError(
                    f"y has {targets.shape[1]} columns; problem "
                    f"'{spec.name}' outputs {n_fields} fields"
                )
            self._output_columns = targets.shape[1]
            self._squeeze_output = np.ndim(y) == 1
            spec = _with_data_term(spec, X, targets)
        else:
            self._output_columns = n_fields
            self._squeeze_output = n_fields == 1

        model = spec.init_model(self.seed, self.layer_sizes)
        alm_config = AlmConfig(
            strategy=self.strategy,
            epochs=self.epochs,
            constraint_mode=self.constraint_mode,
            batch_size=self.batch_size,
        )
        lbfgs_config = LbfgsConfig(
            max_inner_iterations=(
                self.lbfgs_max_iterations
                if self.lbfgs_max_iterations is not None
                else spec.defaults.lbfgs_max_iterations
            ),
        )
        self.result_ = train(spec, model, alm_config, lbfgs_config,
                             seed=self.seed)
        self.model_ = self.result_.model
        self.spec_ = spec
        self.n_features_in_ = len(spec.coordinates)
        self.metrics_ = (
            spec.evaluate(self.model_, spec.defaults.eval_grid)
            if spec.evaluate else {}
        )
        return self

    def predict(self, X):
        """Network outputs at coordinates ``X`` (rows are points)."""
        check_is_fitted(self, "model_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ConfigurationError(
                f"X has {X.shape[1]} columns; expected {self.n_features_in_}"
            )
        out = forward_value(self.model_, X)[:, : self._output_columns]
        if self._squeeze_output:
            return out[:, 0]
        return out

    def history(self):
        """Per-epoch training records from the last fit."""
        check_is_fitted(self, "result_")
        return self.result_.history


def _with_data_term(spec, X, targets):
    """Append a labeled-sample equality constraint group to ``spec``."""
    coords = np.ascontiguousarray(X, dtype=np.float64)
    values = np.ascontiguousarray(targets, dtype=np.float64)
    cols = tuple(range(values.shape[1]))

    def residual(jet, pts, aux):
        if len(cols) == 1:
            return jet.value[:, 0] - values[:, 0]
        return tuple(jet.value[:, j] - values[:, j] for j in cols)

    block = Block("fit_data", lambda seed: fixed_points(
        coords, spec.coordinates))
    term = Term(name="fit_data", block="fit_data", order=0, residual=residual)
    return dataclasses.replace(
        spec,
        blocks=spec.blocks + (block,),
        constraints=spec.constraints + (term,),
    )
