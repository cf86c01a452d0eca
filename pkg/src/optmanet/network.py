"""Feed-forward network with input batch normalization and inverted dropout,
plus its training machinery: MSE loss, Adam, plateau LR scheduling, and
bit-exact parameter checkpoints.

Architecture (fixed): normalize(x) -> linear_in -> [linear -> dropout ->
relu] x n_hidden_layers -> linear_out. Weights are stored (out x in) so the
forward pass uses matmul_nt. Only gamma/beta of the normalizer are
trainable; batch statistics flow as constants.
"""

import json
import os
import tempfile
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ContractError, GradientError
from .tape import constant

BN_EPS = 1e-5
BN_MOMENTUM = 0.1


@dataclass(frozen=True)
class MlpSpec:
    n_inputs: int
    n_outputs: int
    n_hidden_layers: int = 3
    nodes_per_layer: int = 50
    dropout_p: float = 0.1
    learning_rate: float = 1e-4
    batch_size: int = 25
    max_epochs: int = 100

    def __post_init__(self):
        if self.n_inputs < 1 or self.n_outputs < 1:
            raise ConfigError("n_inputs and n_outputs must be >= 1")
        if self.n_hidden_layers < 1 or self.nodes_per_layer < 1:
            raise ConfigError("need at least one hidden layer with width >= 1")
        if not 0.0 <= self.dropout_p < 1.0:
            raise ConfigError(f"dropout_p must lie in [0, 1), got {self.dropout_p}")
        if self.learning_rate <= 0.0:
            raise ConfigError("learning_rate must be positive")
        if self.batch_size < 2:
            # train-mode batch statistics are undefined for a single row
            raise ConfigError("batch_size must be >= 2")
        if self.max_epochs < 0:
            raise ConfigError("max_epochs must be >= 0")


def _xavier(rng, fan_out, fan_in):
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_out, fan_in))


def init_params(spec, seed):
    """Deterministic init: Xavier-uniform weights in a fixed draw order,
    zero biases, identity normalizer, unit running variance."""
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    d, h, o = spec.n_inputs, spec.nodes_per_layer, spec.n_outputs
    params = {
        "norm.gamma": np.ones((1, d)),
        "norm.beta": np.zeros((1, d)),
        "lin_in.w": _xavier(rng, h, d),
        "lin_in.b": np.zeros((1, h)),
    }
    for i in range(spec.n_hidden_layers):
        params[f"h{i}.w"] = _xavier(rng, h, h)
        params[f"h{i}.b"] = np.zeros((1, h))
    params["out.w"] = _xavier(rng, o, h)
    params["out.b"] = np.zeros((1, o))
    buffers = {
        "norm.running_mean": np.zeros((1, d)),
        "norm.running_var": np.ones((1, d)),
    }
    return params, buffers


def param_count(params):
    return sum(v.size for v in params.values())


def wrap_params(tape, params, track=True):
    """Tensor views of the parameter arrays: tracked leaves for training,
    constants for pure evaluation."""
    if track:
        return {k: tape.tensor(v) for k, v in params.items()}
    return {k: constant(v) for k, v in params.items()}


def mlp_forward(tape, spec, ptensors, buffers, x, mode, rng=None):
    """One pass over a batch x (n, n_inputs). mode 'train' updates running
    statistics in place, draws one dropout mask per hidden layer from rng,
    and requires n >= 2; mode 'eval' is deterministic."""
    xa = x if isinstance(x, np.ndarray) else np.asarray(x, dtype=np.float64)
    if xa.ndim != 2 or xa.shape[1] != spec.n_inputs:
        raise ContractError(
            f"input must be (n, {spec.n_inputs}), got {xa.shape}"
        )
    if mode not in ("train", "eval"):
        raise ContractError(f"mode must be 'train' or 'eval', got {mode!r}")
    n = xa.shape[0]
    if mode == "train":
        if n < 2:
            raise ContractError("train-mode forward needs a batch of >= 2 rows")
        if rng is None and spec.dropout_p > 0.0:
            raise ContractError("train-mode forward needs an rng for dropout")
        mu = xa.mean(axis=0, keepdims=True)
        var = xa.var(axis=0, keepdims=True)
        xhat = (xa - mu) / np.sqrt(var + BN_EPS)
        rm, rv = buffers["norm.running_mean"], buffers["norm.running_var"]
        rm *= 1.0 - BN_MOMENTUM
        rm += BN_MOMENTUM * mu
        rv *= 1.0 - BN_MOMENTUM
        rv += BN_MOMENTUM * var * (n / (n - 1.0))
    else:
        rm, rv = buffers["norm.running_mean"], buffers["norm.running_var"]
        xhat = (xa - rm) / np.sqrt(rv + BN_EPS)

    h = tape.badd(tape.bmul(constant(xhat), ptensors["norm.gamma"]),
                  ptensors["norm.beta"])
    h = tape.badd(tape.matmul_nt(h, ptensors["lin_in.w"]), ptensors["lin_in.b"])
    keep = 1.0 - spec.dropout_p
    for i in range(spec.n_hidden_layers):
        h = tape.badd(tape.matmul_nt(h, ptensors[f"h{i}.w"]), ptensors[f"h{i}.b"])
        if mode == "train" and spec.dropout_p > 0.0:
            mask = (rng.random(h.values.shape) >= spec.dropout_p) / keep
            h = tape.mul(h, constant(mask))
        h = tape.relu(h)
    return tape.badd(tape.matmul_nt(h, ptensors["out.w"]), ptensors["out.b"])


def mse_loss(tape, pred, target):
    """Mean squared error over all entries; target enters as a constant."""
    diff = tape.sub(pred, constant(target) if isinstance(target, np.ndarray) else target)
    return tape.mean(tape.pow(diff, 2.0))


class AdamState:
    """First/second moment accumulators with bias correction."""

    def __init__(self, params, beta1=0.9, beta2=0.999, eps=1e-8):
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}


def adam_step(params, grads, state, lr):
    """In-place parameter update. Rejects non-finite gradients: that is the
    divergence signal, not something to average away."""
    for k in params:
        g = grads.get(k)
        if g is None:
            raise GradientError(f"missing gradient for parameter {k!r}")
        if not np.all(np.isfinite(g)):
            raise GradientError(f"non-finite gradient for parameter {k!r}")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1 ** state.t
    bc2 = 1.0 - b2 ** state.t
    for k, p in params.items():
        g = grads[k]
        m = state.m[k]
        v = state.v[k]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p -= lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)


class PlateauScheduler:
    """Halves the learning rate after `patience` consecutive non-improving
    validation losses (improvement = drop by more than `threshold`), never
    below min_lr. The first observed loss seeds the best value and counts as
    a non-improvement."""

    def __init__(self, lr, factor=0.5, patience=10, threshold=1e-6, min_lr=1e-7):
        if lr <= 0.0:
            raise ConfigError("initial lr must be positive")
        self.lr = lr
        self.factor = factor
        self.patience = patience
        self.threshold = threshold
        self.min_lr = min_lr
        self.best = None
        self.bad = 0

    def step(self, loss):
        loss = float(loss)
        if not np.isfinite(loss):
            raise GradientError("scheduler received a non-finite loss")
        if self.best is None:
            self.best = loss
            self.bad = 1
        elif loss < self.best - self.threshold:
            self.best = loss
            self.bad = 0
        else:
            self.bad += 1
        if self.bad >= self.patience:
            self.lr = max(self.lr * self.factor, self.min_lr)
            self.bad = 0
        return self.lr


PARAMS_FORMAT = "mlp-params@1"


def _pack(arrays):
    return {
        k: {"shape": list(v.shape), "values": v.ravel().tolist()}
        for k, v in arrays.items()
    }


def _unpack(blob):
    out = {}
    for k, rec in blob.items():
        arr = np.asarray(rec["values"], dtype=np.float64).reshape(rec["shape"])
        out[k] = np.ascontiguousarray(arr)
    return out


def save_params(path, params, buffers):
    """Atomic write (temp file + rename); float64 round-trips bit-exact
    through repr-based JSON floats."""
    doc = {
        "format": PARAMS_FORMAT,
        "trainable": _pack(params),
        "buffers": _pack(buffers),
    }
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as f:
            json.dump(doc, f)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_params(path):
    with open(path) as f:
        doc = json.load(f)
    if doc.get("format") != PARAMS_FORMAT:
        raise ConfigError(
            f"unsupported checkpoint format: {doc.get('format')!r}"
        )
    return _unpack(doc["trainable"]), _unpack(doc["buffers"])


def snapshot(params, buffers):
    """Deep copy for in-memory best-checkpoint tracking."""
    return {k: v.copy() for k, v in params.items()}, {
        k: v.copy() for k, v in buffers.items()
    }
