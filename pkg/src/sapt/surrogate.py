"""Learned stand-in for the expensive log-likelihood.

A small ReLU network with a sigmoid output maps a flat parameter vector
to (0,1); training targets are log-likelihood values squashed into [0,1]
by a running min-max scaler so the binary cross-entropy loss is well
defined. The model refits incrementally each collection interval from
its previous weights, keeping its optimizer moments, so later fits start
warm instead of from scratch.

Checkpoint format (text, one record per line, floats as %.17g):

    SAPT-SURR-1
    topology <input> <h1> <h2>
    scaler <lo> <hi>
    train_count <n>
    adam_step <t>
    <12 array lines: W1 b1 W2 b2 W3 b3, then their first moments m*,
     then second moments v*, each "name x0 x1 ...", row-major>
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from .exceptions import ContractError, DataFormatError

CHECKPOINT_HEADER = "SAPT-SURR-1"


class TargetScaler:
    """Append-only min-max scaler: bounds only ever widen."""

    __slots__ = ("lo", "hi")

    def __init__(self, lo: float = math.inf, hi: float = -math.inf):
        self.lo = lo
        self.hi = hi

    @property
    def seen(self) -> bool:
        return math.isfinite(self.lo)

    @property
    def ready(self) -> bool:
        """True once two distinct target values have been observed."""
        return self.hi > self.lo

    def update(self, values) -> None:
        values = np.asarray(values, dtype=np.float64)
        if values.size == 0:
            return
        if not np.all(np.isfinite(values)):
            raise ContractError("scaler update with non-finite target")
        self.lo = min(self.lo, float(values.min()))
        self.hi = max(self.hi, float(values.max()))

    def scale(self, values):
        if not self.seen:
            raise ContractError("scaler has seen no targets yet")
        values = np.asarray(values, dtype=np.float64)
        if not self.ready:
            # single distinct value so far; park everything mid-range
            return np.full(values.shape, 0.5)
        return (values - self.lo) / (self.hi - self.lo)

    def inverse(self, scaled):
        if not self.seen:
            raise ContractError("scaler has seen no targets yet")
        if not self.ready:
            return np.full(np.shape(scaled), self.lo) if np.ndim(scaled) \
                else self.lo
        return self.lo + np.asarray(scaled, dtype=np.float64) * (self.hi - self.lo)


@dataclass
class SurrogateBatch:
    """True-likelihood training rows collected from the replicas."""

    inputs: np.ndarray          # rows x parameter_count
    targets: np.ndarray         # rows, raw log-likelihood values
    replica_origin: np.ndarray  # rows, ladder slot each row came from

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=np.float64)
        self.targets = np.asarray(self.targets, dtype=np.float64)
        self.replica_origin = np.asarray(self.replica_origin, dtype=np.int64)
        if self.inputs.ndim != 2:
            raise ContractError("batch inputs must be 2-d")
        n = self.inputs.shape[0]
        if self.targets.shape != (n,) or self.replica_origin.shape != (n,):
            raise ContractError("batch row counts differ")
        if n and not np.all(np.isfinite(self.targets)):
            raise ContractError("batch targets must be finite true likelihoods")

    @property
    def rows(self) -> int:
        return self.inputs.shape[0]

    @classmethod
    def empty(cls, parameter_count: int) -> "SurrogateBatch":
        return cls(np.empty((0, parameter_count)), np.empty(0), np.empty(0, int))

    @classmethod
    def concat(cls, batches) -> "SurrogateBatch":
        batches = list(batches)
        if not batches:
            raise ContractError("concat of zero batches")
        return cls(np.concatenate([b.inputs for b in batches]),
                   np.concatenate([b.targets for b in batches]),
                   np.concatenate([b.replica_origin for b in batches]))


@dataclass(frozen=True)
class AdamParams:
    step_size: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def _relu(x):
    return np.maximum(x, 0.0)


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


class SurrogateModel:
    """[L, h1, h2, 1] network trained on scaled likelihood targets.

    Weight layout: weights[k] and biases[k] for the three layers; ReLU
    after the first two, sigmoid on the scalar output. Adam moments and
    the step counter persist across train() calls.
    """

    def __init__(self, input_count: int, hidden1: int = 64, hidden2: int = 16,
                 seed: int = 0):
        if min(input_count, hidden1, hidden2) < 1:
            raise ContractError("surrogate layer sizes must be >= 1")
        self.input_count = input_count
        self.hidden1 = hidden1
        self.hidden2 = hidden2
        self._rng = np.random.default_rng(seed)
        sizes = [(input_count, hidden1), (hidden1, hidden2), (hidden2, 1)]
        self.weights = [self._rng.normal(0.0, math.sqrt(2.0 / fan_in),
                                         (fan_in, fan_out))
                        for fan_in, fan_out in sizes]
        self.biases = [np.zeros(fan_out) for _, fan_out in sizes]
        self._m = [np.zeros_like(w) for w in self.weights] \
            + [np.zeros_like(b) for b in self.biases]
        self._v = [np.zeros_like(w) for w in self.weights] \
            + [np.zeros_like(b) for b in self.biases]
        self.adam_step = 0
        self.train_count = 0
        self.scaler = TargetScaler()

    # -- forward ---------------------------------------------------------

    def _forward(self, inputs):
        z1 = inputs @ self.weights[0] + self.biases[0]
        a1 = _relu(z1)
        z2 = a1 @ self.weights[1] + self.biases[1]
        a2 = _relu(z2)
        z3 = a2 @ self.weights[2] + self.biases[2]
        return z1, a1, z2, a2, _sigmoid(z3)

    def predict_scaled(self, inputs) -> np.ndarray:
        """Sigmoid outputs in (0,1) for a matrix of parameter vectors."""
        inputs = np.asarray(inputs, dtype=np.float64)
        if inputs.ndim != 2 or inputs.shape[1] != self.input_count:
            raise ContractError(
                f"surrogate input has shape {inputs.shape}, expected "
                f"(N, {self.input_count})"
            )
        return self._forward(inputs)[4][:, 0]

    def predict(self, theta) -> float:
        """Inverse-scaled scalar estimate for one parameter vector."""
        if self.train_count == 0:
            raise ContractError("surrogate queried before first training")
        theta = np.asarray(theta, dtype=np.float64)
        out = self.predict_scaled(theta[None, :])[0]
        return float(self.scaler.inverse(out))

    # -- training --------------------------------------------------------

    def _adam_update(self, grads, adam: AdamParams):
        self.adam_step += 1
        t = self.adam_step
        params = self.weights + self.biases
        for p, g, m, v in zip(params, grads, self._m, self._v):
            m *= adam.beta1
            m += (1.0 - adam.beta1) * g
            v *= adam.beta2
            v += (1.0 - adam.beta2) * (g * g)
            m_hat = m / (1.0 - adam.beta1 ** t)
            v_hat = v / (1.0 - adam.beta2 ** t)
            p -= adam.step_size * m_hat / (np.sqrt(v_hat) + adam.eps)

    def _gradients(self, inputs, scaled_targets):
        n = inputs.shape[0]
        z1, a1, z2, a2, out = self._forward(inputs)
        # mean binary cross-entropy with sigmoid output: dJ/dz3 = (out - y)/n
        d_z3 = (out - scaled_targets[:, None]) / n
        g_w3 = a2.T @ d_z3
        g_b3 = d_z3.sum(axis=0)
        d_a2 = d_z3 @ self.weights[2].T
        d_z2 = d_a2 * (z2 > 0)
        g_w2 = a1.T @ d_z2
        g_b2 = d_z2.sum(axis=0)
        d_a1 = d_z2 @ self.weights[1].T
        d_z1 = d_a1 * (z1 > 0)
        g_w1 = inputs.T @ d_z1
        g_b1 = d_z1.sum(axis=0)
        return [g_w1, g_w2, g_w3, g_b1, g_b2, g_b3]

    def loss(self, batch: SurrogateBatch) -> float:
        """Mean binary cross-entropy of the batch under the current scaler."""
        y = self.scaler.scale(batch.targets)
        p = np.clip(self.predict_scaled(batch.inputs), 1e-12, 1.0 - 1e-12)
        return float(-np.mean(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)))

    def train(self, batch: SurrogateBatch, epochs: int = 20,
              adam: AdamParams = AdamParams(), batch_size: int = 32) -> float:
        """Fit on one collected batch; returns RMSE on its scaled targets.

        The running scaler widens to cover the new targets first, then
        mini-batch Adam runs for the given epochs. Weights, moments and
        the step counter all carry over from previous calls.
        """
        if batch.rows == 0:
            raise ContractError("train called with an empty batch")
        if epochs < 1 or batch_size < 1:
            raise ContractError("epochs and batch_size must be >= 1")
        self.scaler.update(batch.targets)
        scaled = np.asarray(self.scaler.scale(batch.targets))
        inputs = batch.inputs
        n = batch.rows
        for _ in range(epochs):
            order = self._rng.permutation(n)
            for start in range(0, n, batch_size):
                idx = order[start:start + batch_size]
                grads = self._gradients(inputs[idx], scaled[idx])
                self._adam_update(grads, adam)
        self.train_count += 1
        residual = self.predict_scaled(inputs) - scaled
        return float(np.sqrt(np.mean(residual ** 2)))

    # -- persistence -----------------------------------------------------

    def _arrays(self):
        names = ["W1", "b1", "W2", "b2", "W3", "b3"]
        flat = [self.weights[0], self.biases[0], self.weights[1],
                self.biases[1], self.weights[2], self.biases[2]]
        # moment banks are stored weights-first, matching _m/_v layout
        for prefix, bank in (("m", self._m), ("v", self._v)):
            for name, arr in zip(["W1", "W2", "W3", "b1", "b2", "b3"], bank):
                names.append(prefix + name)
                flat.append(arr)
        return names, flat

    def save(self, path) -> None:
        names, arrays = self._arrays()
        with open(path, "w") as fh:
            fh.write(CHECKPOINT_HEADER + "\n")
            fh.write(f"topology {self.input_count} {self.hidden1} "
                     f"{self.hidden2}\n")
            fh.write(f"scaler {self.scaler.lo:.17g} {self.scaler.hi:.17g}\n")
            fh.write(f"train_count {self.train_count}\n")
            fh.write(f"adam_step {self.adam_step}\n")
            for name, arr in zip(names, arrays):
                values = " ".join(f"{x:.17g}" for x in np.ravel(arr))
                fh.write(f"{name} {values}\n")

    @classmethod
    def load(cls, path) -> "SurrogateModel":
        with open(path) as fh:
            lines = [ln.rstrip("\n") for ln in fh]
        if not lines or lines[0] != CHECKPOINT_HEADER:
            raise DataFormatError(
                f"{path}: not a {CHECKPOINT_HEADER} checkpoint"
            )
        fields = {}
        for ln in lines[1:]:
            if ln.strip():
                key, _, rest = ln.partition(" ")
                fields[key] = rest
        try:
            inp, h1, h2 = (int(x) for x in fields["topology"].split())
            model = cls(inp, h1, h2)
            lo, hi = (float(x) for x in fields["scaler"].split())
            model.scaler = TargetScaler(lo, hi)
            model.train_count = int(fields["train_count"])
            model.adam_step = int(fields["adam_step"])
            names, arrays = model._arrays()
            for name, arr in zip(names, arrays):
                vals = np.array(fields[name].split(), dtype=np.float64)
                if vals.size != arr.size:
                    raise DataFormatError(
                        f"{path}: array {name} has {vals.size} values, "
                        f"expected {arr.size}"
                    )
                arr[...] = vals.reshape(arr.shape)
        except (KeyError, ValueError) as exc:
            raise DataFormatError(f"{path}: malformed checkpoint ({exc})") \
                from None
        return model


class LikelihoodHistory:
    """Last three per-step likelihood values of one replica.

    Holds whatever the step actually used: true values on true-path
    steps, blended pseudo-values on surrogate-path steps.
    """

    def __init__(self):
        self._values = deque(maxlen=3)

    def push(self, value: float) -> None:
        value = float(value)
        if not math.isfinite(value):
            raise ContractError("history value must be finite")
        self._values.append(value)

    def mean(self) -> float:
        if not self._values:
            raise ContractError("likelihood history is empty")
        return sum(self._values) / len(self._values)

    def __len__(self) -> int:
        return len(self._values)


def blend(l_surrogate: float, history: LikelihoodHistory) -> float:
    """Equal-weight mix of the surrogate estimate and the recent mean."""
    return 0.5 * float(l_surrogate) + 0.5 * history.mean()


def surrogate_rmse(true_values, estimates) -> float:
    """Root mean squared error between two equal-length vectors."""
    a = np.asarray(true_values, dtype=np.float64)
    b = np.asarray(estimates, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ContractError(f"rmse over mismatched shapes {a.shape} vs {b.shape}")
    if a.size == 0:
        raise ContractError("rmse of empty vectors")
    return float(np.sqrt(np.mean((a - b) ** 2)))
