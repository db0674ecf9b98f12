"""Dense tanh networks with forward propagation of input-derivative jets.

The residuals in this package need network outputs together with first and
pure second derivatives with respect to each input coordinate (mixed second
derivatives never appear).  Both are propagated layer by layer in closed
form alongside the activations: for a layer ``z = a W^T + b`` with
elementwise ``tanh``,

    value:  a' = tanh(z)
    d1:     D' = tanh'(z) * (D W^T)
    d2:     S' = tanh''(z) * (D W^T)^2 + tanh'(z) * (S W^T)

per input coordinate, with the final layer left linear.  The corresponding
reverse pass (gradients of any scalar loss with respect to the weights and
biases, including the paths through d1 and d2) is hand-derived and applied
as a single fused tape operation, so the hot loop stays in large numpy
matmuls.

Parameter layout ("parameter vector"): layers in order, each contributing
``W.ravel()`` (C order, shape ``(n_out, n_in)``) followed by ``b``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Tape, Var
from .exceptions import ConfigurationError, EvaluationError

__all__ = [
    "DenseNetwork",
    "InputJet",
    "IdentityModel",
    "NetworkGraph",
    "init_network",
    "flatten",
    "unflatten",
    "forward_value",
    "forward_jet_batch",
    "forward_jet",
    "loss_value_and_gradient",
    "loss_gradient",
    "fd_gradient_oracle",
]


@dataclass(frozen=True)
class InputJet:
    """Network outputs and input derivatives at a single point.

    Attributes
    ----------
    value : ndarray, shape (m,)
        Output components.
    d1 : ndarray, shape (d, m)
        First derivatives, ``d1[i, j] = d y_j / d x_i``.
    d2 : ndarray, shape (d, m)
        Pure second derivatives, ``d2[i, j] = d^2 y_j / d x_i^2``.
    """

    value: np.ndarray
    d1: np.ndarray
    d2: np.ndarray


@dataclass(frozen=True)
class JetBatch:
    """Batched jet: ``value (N, m)``, ``d1 (N, d, m)``, ``d2 (N, d, m)``.

    Fields are ndarrays in plain evaluation and tape Vars inside a loss
    graph; residual expressions are written to work with either.  Entries
    above the requested derivative order are None.
    """

    value: object
    d1: object = None
    d2: object = None


@dataclass(frozen=True)
class DenseNetwork:
    """Fully connected tanh network (linear final layer), float64.

    Instances are treated as immutable: training produces new parameter
    vectors rather than mutating a network in place.
    """

    layer_sizes: tuple
    weights: tuple
    biases: tuple

    @property
    def n_inputs(self):
        return self.layer_sizes[0]

    @property
    def n_outputs(self):
        return self.layer_sizes[-1]

    @property
    def n_parameters(self):
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def parameter_vector(self):
        return flatten(self)

    def with_parameters(self, theta):
        return unflatten(self.layer_sizes, theta)

    def bind(self, tape, theta=None):
        return NetworkGraph(self, tape, theta)


def init_network(layer_sizes, seed=0):
    """Create a :class:`DenseNetwork` with Glorot-uniform weights, zero biases.

    Parameters
    ----------
    layer_sizes : sequence of int
        ``(n_in, hidden..., n_out)``; at least two entries, all positive.
    seed : int or numpy SeedSequence
        Reproducible initialization stream.
    """
    sizes = tuple(int(s) for s in layer_sizes)
    if len(sizes) < 2:
        raise ConfigurationError("layer_sizes needs at least input and output")
    if any(s <= 0 for s in sizes):
        raise ConfigurationError(f"layer sizes must be positive, got {sizes}")
    rng = np.random.default_rng(seed)
    weights = []
    biases = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out, dtype=np.float64))
    return DenseNetwork(sizes, tuple(weights), tuple(biases))


def flatten(net):
    """Concatenate all parameters into one float64 vector (layer order)."""
    parts = []
    for w, b in zip(net.weights, net.biases):
        parts.append(np.asarray(w, dtype=np.float64).ravel())
        parts.append(np.asarray(b, dtype=np.float64).ravel())
    return np.concatenate(parts)


def unflatten(layer_sizes, theta):
    """Rebuild a :class:`DenseNetwork` from a flat parameter vector."""
    sizes = tuple(int(s) for s in layer_sizes)
    theta = np.asarray(theta, dtype=np.float64)
    expected = sum(fi * fo + fo for fi, fo in zip(sizes[:-1], sizes[1:]))
    if theta.ndim != 1 or theta.size != expected:
        raise ConfigurationError(
            f"parameter vector of length {expected} required for layer "
            f"sizes {sizes}, got shape {theta.shape}"
        )
    weights = []
    biases = []
    offset = 0
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        w = theta[offset : offset + fan_out * fan_in].reshape(fan_out, fan_in)
        offset += fan_out * fan_in
        b = theta[offset : offset + fan_out]
        offset += fan_out
        weights.append(w)
        biases.append(b)
    return DenseNetwork(sizes, tuple(weights), tuple(biases))


def _check_points(X, n_inputs):
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != n_inputs:
        raise EvaluationError(
            f"expected points of shape (N, {n_inputs}), got {X.shape}"
        )
    if not np.all(np.isfinite(X)):
        raise EvaluationError("non-finite input coordinates")
    return X


def forward_value(net, X):
    """Plain forward pass, ``(N, d) -> (N, m)``."""
    A = _check_points(X, net.n_inputs)
    last = len(net.weights) - 1
    for k, (W, b) in enumerate(zip(net.weights, net.biases)):
        A = A @ W.T + b
        if k != last:
            A = np.tanh(A)
    return A


def forward_jet_batch(net, X, order=2):
    """Forward pass with input-derivative jets, numpy arrays only.

    Returns a :class:`JetBatch` whose ``d1``/``d2`` are None when ``order``
    is below 1/2 respectively.
    """
    if order not in (0, 1, 2):
        raise ConfigurationError(f"jet order must be 0, 1 or 2, got {order}")
    A = _check_points(X, net.n_inputs)
    N, d = A.shape
    D = None
    S = None
    if order >= 1:
        D = np.ascontiguousarray(np.broadcast_to(np.eye(d), (N, d, d)))
    last = len(net.weights) - 1
    for k, (W, b) in enumerate(zip(net.weights, net.biases)):
        n_out = W.shape[0]
        Z = A @ W.T + b
        Q = None
        R = None
        if D is not None:
            Q = (D.reshape(N * d, -1) @ W.T).reshape(N, d, n_out)
        if S is not None:
            R = (S.reshape(N * d, -1) @ W.T).reshape(N, d, n_out)
        if k == last:
            A, D, S = Z, Q, R
            if order >= 2 and S is None:
                S = np.zeros_like(Q)
        else:
            T = np.tanh(Z)
            P = 1.0 - T * T
            A = T
            if order >= 2:
                S = (-2.0 * T * P)[:, None, :] * Q * Q
                if R is not None:
                    S += P[:, None, :] * R
            if order >= 1:
                D = P[:, None, :] * Q
    return JetBatch(A, D, S)


def forward_jet(net, x, order=2):
    """Single-point jet, ``(d,) -> InputJet`` with ``d1``/``d2`` of shape (d, m)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise EvaluationError(f"expected a single point of shape (d,), got {x.shape}")
    jet = forward_jet_batch(net, x[None, :], order=order)
    m = net.n_outputs
    d = net.n_inputs
    d1 = jet.d1[0] if jet.d1 is not None else np.zeros((d, m))
    d2 = jet.d2[0] if jet.d2 is not None else np.zeros((d, m))
    return InputJet(jet.value[0], d1, d2)


class NetworkGraph:
    """Taped binding of a network's parameters for one loss evaluation.

    Parameters become leaf Vars (views into ``theta`` when given).  Each
    :meth:`jet` call runs the jet recursion forward in numpy and appends a
    single fused backward closure to the tape.
    """

    def __init__(self, net, tape, theta=None):
        self.net = net
        self.tape = tape
        if theta is None:
            weights = net.weights
            biases = net.biases
        else:
            bound = unflatten(net.layer_sizes, theta)
            weights = bound.weights
            biases = bound.biases
        self.wvars = [Var(w, tape) for w in weights]
        self.bvars = [Var(b, tape) for b in biases]

    def jet(self, X, order=2):
        """Taped analogue of :func:`forward_jet_batch` (outputs are Vars)."""
        if order not in (0, 1, 2):
            raise ConfigurationError(f"jet order must be 0, 1 or 2, got {order}")
        A = _check_points(X, self.net.n_inputs)
        N, d = A.shape
        D = None
        S = None
        if order >= 1:
            D = np.ascontiguousarray(np.broadcast_to(np.eye(d), (N, d, d)))
        last = len(self.wvars) - 1
        caches = []
        for k in range(last + 1):
            W = self.wvars[k].value
            b = self.bvars[k].value
            n_out = W.shape[0]
            Z = A @ W.T + b
            Q = None
            R = None
            if D is not None:
                Q = (D.reshape(N * d, -1) @ W.T).reshape(N, d, n_out)
            if S is not None:
                R = (S.reshape(N * d, -1) @ W.T).reshape(N, d, n_out)
            if k == last:
                caches.append((A, D, S, None, None, Q, R))
                A, D, S = Z, Q, R
                if order >= 2 and S is None:
                    S = np.zeros_like(Q)
            else:
                T = np.tanh(Z)
                P = 1.0 - T * T
                caches.append((A, D, S, T, P, Q, R))
                A = T
                if order >= 2:
                    S = (-2.0 * T * P)[:, None, :] * Q * Q
                    if R is not None:
                        S += P[:, None, :] * R
                if order >= 1:
                    D = P[:, None, :] * Q

        value_var = Var(A, self.tape)
        d1_var = Var(D, self.tape) if order >= 1 else None
        d2_var = Var(S, self.tape) if order >= 2 else None
        self.tape.append(
            self._make_jet_backward(caches, value_var, d1_var, d2_var, N, d, last)
        )
        return JetBatch(value_var, d1_var, d2_var)

    def _make_jet_backward(self, caches, value_var, d1_var, d2_var, N, d, last):
        wvars = self.wvars
        bvars = self.bvars

        def back():
            aB = value_var.grad
            dB = d1_var.grad if d1_var is not None else None
            sB = d2_var.grad if d2_var is not None else None
            if aB is None and dB is None and sB is None:
                return
            for k in range(last, -1, -1):
                A_in, D_in, S_in, T, P, Q, R = caches[k]
                W = wvars[k].value
                if k == last:
                    zB, qB, rB = aB, dB, sB
                    if rB is not None and R is None:
                        rB = None  # d2 of a linear net is identically zero
                else:
                    # S' = (-2 T P) Q^2 + P R ; D' = P Q ; A' = T
                    Pq = P[:, None, :]
                    tB = aB
                    pB = None
                    qB = None
                    if dB is not None:
                        pB = (dB * Q).sum(axis=1)
                        qB = dB * Pq
                    if sB is not None:
                        QQ = Q * Q
                        tB = _addinto(tB, (sB * (-2.0 * Pq * QQ)).sum(axis=1))
                        w = -2.0 * T[:, None, :] * QQ
                        if R is not None:
                            w = w + R
                        pB = _addinto(pB, (sB * w).sum(axis=1))
                        qB = _addinto(qB, sB * ((-4.0 * T * P)[:, None, :] * Q))
                    rB = sB * Pq if (sB is not None and R is not None) else None
                    if pB is not None:
                        tB = _addinto(tB, pB * (-2.0 * T))
                    zB = tB * P if tB is not None else None

                wgrad = None
                if zB is not None:
                    wgrad = zB.T @ A_in
                    _accumulate_var(bvars[k], zB.sum(axis=0))
                if qB is not None:
                    wgrad = _addinto(
                        wgrad, qB.reshape(N * d, -1).T @ D_in.reshape(N * d, -1)
                    )
                if rB is not None and S_in is not None:
                    wgrad = _addinto(
                        wgrad, rB.reshape(N * d, -1).T @ S_in.reshape(N * d, -1)
                    )
                if wgrad is not None:
                    _accumulate_var(wvars[k], wgrad)

                if k == 0:
                    break
                aB = zB @ W if zB is not None else None
                dB = (
                    (qB.reshape(N * d, -1) @ W).reshape(N, d, -1)
                    if qB is not None
                    else None
                )
                sB = (
                    (rB.reshape(N * d, -1) @ W).reshape(N, d, -1)
                    if (rB is not None and S_in is not None)
                    else None
                )

        return back

    def gradient(self):
        """Flat gradient in parameter-vector order (zeros where untouched)."""
        parts = []
        for wv, bv in zip(self.wvars, self.bvars):
            wg = wv.grad if wv.grad is not None else np.zeros_like(wv.value)
            bg = bv.grad if bv.grad is not None else np.zeros_like(bv.value)
            parts.append(np.asarray(wg).ravel())
            parts.append(np.asarray(bg).ravel())
        return np.concatenate(parts)


def _addinto(acc, term):
    if acc is None:
        return term
    return acc + term


def _accumulate_var(var, grad):
    if var.grad is None:
        var.grad = np.array(grad, dtype=np.float64)
    else:
        var.grad += grad


class IdentityModel:
    """Model whose outputs are the raw parameters themselves.

    Used for analytic optimization problems (no network, no jets): binding
    exposes the parameter vector as a single Var under ``.value``.
    """

    def __init__(self, values):
        self.values = np.asarray(values, dtype=np.float64)
        if self.values.ndim != 1:
            raise ConfigurationError("IdentityModel takes a 1-d parameter vector")

    @property
    def n_parameters(self):
        return self.values.size

    def parameter_vector(self):
        return self.values.copy()

    def with_parameters(self, theta):
        return IdentityModel(theta)

    def bind(self, tape, theta=None):
        return IdentityGraph(self, tape, theta)


class IdentityGraph:
    def __init__(self, model, tape, theta=None):
        self.tape = tape
        values = model.values if theta is None else np.asarray(theta, np.float64)
        self.value = Var(values, tape)

    def gradient(self):
        if self.value.grad is None:
            return np.zeros_like(self.value.value)
        return np.asarray(self.value.grad)


def loss_value_and_gradient(net, loss_evaluator, theta=None):
    """Evaluate a taped loss and its flat parameter gradient.

    ``loss_evaluator`` receives the bound graph and must return a scalar
    Var.  Raises :class:`EvaluationError` if the loss is non-finite.
    """
    tape = Tape()
    try:
        graph = net.bind(tape, theta)
        loss = loss_evaluator(graph)
        value = float(loss.value)
        if not np.isfinite(value):
            raise EvaluationError("loss evaluated to a non-finite value")
        tape.backward(loss)
        return value, graph.gradient()
    finally:
        tape.release()


def loss_gradient(net, loss_evaluator, theta=None):
    """Flat gradient of a scalar loss with respect to the parameter vector."""
    return loss_value_and_gradient(net, loss_evaluator, theta)[1]


def fd_gradient_oracle(net, loss_evaluator, h=1e-5):
    """Central-difference gradient of the same loss, for cross-checking.

    ``h`` is clamped to a sensible float64 window: too small drowns in
    round-off, too large in truncation error.
    """
    if not 1e-7 <= h <= 1e-3:
        raise ConfigurationError(f"step h must lie in [1e-7, 1e-3], got {h}")

    def value_at(theta):
        tape = Tape()
        try:
            graph = net.bind(tape, theta)
            return float(loss_evaluator(graph).value)
        finally:
            tape.release()

    theta0 = net.parameter_vector()
    grad = np.zeros_like(theta0)
    for i in range(theta0.size):
        theta = theta0.copy()
        theta[i] = theta0[i] + h
        up = value_at(theta)
        theta[i] = theta0[i] - h
        down = value_at(theta)
        grad[i] = (up - down) / (2.0 * h)
    return grad
