"""One-hidden-layer feedforward classifier used as the sampled model.

All network parameters live in a single flat float64 vector so the
samplers and the surrogate can treat the model as a generic density over
R^L. Layout, in order:

    w      input-to-hidden weights, I*H entries, row-major over (input, hidden)
    del_h  hidden biases, H entries
    v      hidden-to-output weights, H*O entries, row-major over (hidden, output)
    del_o  output biases, O entries

The hidden layer applies a logistic sigmoid; the output layer is linear
and class probabilities come from a softmax over the O outputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import ContractError

# Probability clamp applied before taking logs. Keeps a fully saturated
# softmax from turning the log-likelihood into -inf and poisoning
# acceptance ratios.
PROB_FLOOR = 1e-308


@dataclass(frozen=True)
class NetworkTopology:
    """Layer sizes (input, hidden, output) of the classifier."""

    input_count: int
    hidden_count: int
    output_count: int

    def __post_init__(self):
        if min(self.input_count, self.hidden_count, self.output_count) < 1:
            raise ContractError(f"layer sizes must all be >= 1, got {self}")

    @property
    def parameter_count(self) -> int:
        i, h, o = self.input_count, self.hidden_count, self.output_count
        return i * h + h * o + h + o


@dataclass(frozen=True)
class PriorConfig:
    """Isotropic Gaussian prior over all weights and biases."""

    sigma_sq: float = 25.0

    def __post_init__(self):
        if not self.sigma_sq > 0:
            raise ContractError(f"prior variance must be positive, got {self.sigma_sq}")


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # tanh form stays finite for any float input, no overflow warnings
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def check_theta(theta: np.ndarray, topology: NetworkTopology) -> np.ndarray:
    theta = np.asarray(theta, dtype=np.float64)
    if theta.shape != (topology.parameter_count,):
        raise ContractError(
            f"parameter vector has shape {theta.shape}, expected "
            f"({topology.parameter_count},) for {topology}"
        )
    if not np.all(np.isfinite(theta)):
        raise ContractError("parameter vector has non-finite entries")
    return theta


def unpack(theta: np.ndarray, topology: NetworkTopology):
    """Split a flat parameter vector into (w, del_h, v, del_o) views."""
    theta = check_theta(theta, topology)
    i, h, o = topology.input_count, topology.hidden_count, topology.output_count
    n_w = i * h
    w = theta[:n_w].reshape(i, h)
    del_h = theta[n_w:n_w + h]
    v = theta[n_w + h:n_w + h + h * o].reshape(h, o)
    del_o = theta[n_w + h + h * o:]
    return w, del_h, v, del_o


def pack(w, del_h, v, del_o) -> np.ndarray:
    """Inverse of unpack: flatten layer arrays back into one vector."""
    return np.concatenate([
        np.ravel(w), np.ravel(del_h), np.ravel(v), np.ravel(del_o),
    ]).astype(np.float64)


def softmax(f: np.ndarray) -> np.ndarray:
    """Softmax along the last axis, shifted by the row max for stability."""
    f = np.asarray(f, dtype=np.float64)
    shifted = f - np.max(f, axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=-1, keepdims=True)


def forward_batch(theta: np.ndarray, features: np.ndarray,
                  topology: NetworkTopology) -> np.ndarray:
    """Pre-softmax outputs for a feature matrix, one row per sample."""
    w, del_h, v, del_o = unpack(theta, topology)
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[1] != topology.input_count:
        raise ContractError(
            f"feature matrix has shape {features.shape}, expected "
            f"(N, {topology.input_count})"
        )
    hidden = _sigmoid(features @ w + del_h)
    return hidden @ v + del_o


def forward(theta: np.ndarray, x: np.ndarray, topology: NetworkTopology) -> np.ndarray:
    """Pre-softmax output vector for a single input row."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ContractError(f"expected a 1-d input row, got shape {x.shape}")
    return forward_batch(theta, x[None, :], topology)[0]


def class_probabilities(theta: np.ndarray, features: np.ndarray,
                        topology: NetworkTopology) -> np.ndarray:
    return softmax(forward_batch(theta, features, topology))


def log_likelihood(theta: np.ndarray, dataset, topology: NetworkTopology) -> float:
    """Multinomial log-likelihood: sum over samples of log pi_label.

    Probabilities are clamped below at PROB_FLOOR so the result is
    finite for every finite theta.
    """
    n = dataset.features.shape[0]
    if n < 1:
        raise ContractError("log_likelihood needs a nonempty dataset")
    probs = class_probabilities(theta, dataset.features, topology)
    picked = probs[np.arange(n), dataset.labels]
    return float(np.sum(np.log(np.maximum(picked, PROB_FLOOR))))


def log_prior(theta: np.ndarray, prior: PriorConfig) -> float:
    """Gaussian log-prior -(L/2) log(sigma^2) - |theta|^2 / (2 sigma^2)."""
    theta = np.asarray(theta, dtype=np.float64)
    if not np.all(np.isfinite(theta)):
        raise ContractError("log_prior requires finite parameters")
    length = theta.size
    quad = float(theta @ theta)
    return -(length / 2.0) * np.log(prior.sigma_sq) - quad / (2.0 * prior.sigma_sq)


def sse_gradient(theta: np.ndarray, dataset, topology: NetworkTopology) -> np.ndarray:
    """Gradient of E(theta) = sum_t sum_k (z_tk - pi_tk)^2 in vector layout.

    pi are the softmax outputs, z the one-hot targets. This is the
    objective the gradient-drift proposal descends; classification
    likelihoods elsewhere are unaffected by it.
    """
    w, del_h, v, del_o = unpack(theta, topology)
    features = dataset.features
    z = dataset.one_hot
    hidden = _sigmoid(features @ w + del_h)
    probs = softmax(hidden @ v + del_o)
    diff = probs - z
    # dE/df_j = 2 pi_j ((pi_j - z_j) - sum_k (pi_k - z_k) pi_k), per sample
    row_dot = np.sum(diff * probs, axis=1, keepdims=True)
    d_out = 2.0 * probs * (diff - row_dot)
    g_v = hidden.T @ d_out
    g_del_o = d_out.sum(axis=0)
    d_pre = (d_out @ v.T) * hidden * (1.0 - hidden)
    g_w = features.T @ d_pre
    g_del_h = d_pre.sum(axis=0)
    return pack(g_w, g_del_h, g_v, g_del_o)


def predict_accuracy(theta: np.ndarray, dataset, topology: NetworkTopology) -> float:
    """Percent of samples whose most probable class matches the label.

    Ties break toward the lowest class index (argmax convention).
    Softmax is monotone, so argmax runs on the pre-softmax outputs.
    """
    n = dataset.features.shape[0]
    if n < 1:
        raise ContractError("predict_accuracy needs a nonempty dataset")
    outputs = forward_batch(theta, dataset.features, topology)
    predicted = np.argmax(outputs, axis=1)
    return 100.0 * float(np.mean(predicted == dataset.labels))


class BnnPosterior:
    """Bundles topology, dataset and prior into log-density callbacks.

    Samplers only touch log_likelihood / log_prior / sse_gradient, so any
    object with those three methods (e.g. an analytic toy density in
    tests) can stand in for the network posterior.
    """

    def __init__(self, topology: NetworkTopology, dataset, prior: PriorConfig):
        if dataset.features.shape[1] != topology.input_count:
            raise ContractError(
                f"dataset has {dataset.features.shape[1]} features, topology "
                f"expects {topology.input_count}"
            )
        if dataset.one_hot.shape[1] != topology.output_count:
            raise ContractError(
                f"dataset has {dataset.one_hot.shape[1]} classes, topology "
                f"expects {topology.output_count}"
            )
        self.topology = topology
        self.dataset = dataset
        self.prior = prior

    def log_likelihood(self, theta: np.ndarray) -> float:
        return log_likelihood(theta, self.dataset, self.topology)

    def log_prior(self, theta: np.ndarray) -> float:
        return log_prior(theta, self.prior)

    def sse_gradient(self, theta: np.ndarray) -> np.ndarray:
        return sse_gradient(theta, self.dataset, self.topology)
