"""MLP training objectives with exact derivatives, plus derivative checking.

Each dataset row i contributes the component f_i(w) = (y_i - net(w, x_i))^2,
where net is a tanh multilayer perceptron (tanh on every layer, output
included) over the flattened parameter vector w.  Gradients come from
reverse-mode differentiation and dense Hessians from forward-over-reverse,
vmapped across the batch and jit-compiled in float64; component outputs are
bit-deterministic for identical inputs.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

import jax

jax.config.update("jax_enable_x64", True)

import jax.numpy as jnp

from .datasets import Dataset
from .problems import FiniteSumProblem

MAX_PARAMETERS = 2000


@dataclass(frozen=True)
class MLPSpec:
    """Architecture of a trained network: layer sizes input..output(=1),
    tanh activations on all layers, per-sample squared-error loss."""

    layer_sizes: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "layer_sizes", tuple(int(s) for s in self.layer_sizes))
        if len(self.layer_sizes) < 2 or min(self.layer_sizes) < 1:
            raise ValueError("layer_sizes needs at least input and output, all positive")
        if self.layer_sizes[-1] != 1:
            raise ValueError("the output layer must have a single neuron")
        if self.parameter_count > MAX_PARAMETERS:
            raise ValueError(
                f"{self.parameter_count} parameters exceeds the dense-Hessian cap "
                f"of {MAX_PARAMETERS}"
            )

    @property
    def parameter_count(self) -> int:
        return sum(
            (w_in + 1) * w_out
            for w_in, w_out in zip(self.layer_sizes[:-1], self.layer_sizes[1:])
        )

    @property
    def label(self) -> str:
        return "-".join(str(s) for s in self.layer_sizes)


def _layer_shapes(layer_sizes):
    shapes = []
    for w_in, w_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        shapes.append((w_out, w_in))
        shapes.append((w_out,))
    return shapes


@lru_cache(maxsize=None)
def _compiled(layer_sizes: tuple[int, ...]):
    """Jitted batched (values, gradients, hessians) functions for one
    architecture, shared across problem instances."""
    shapes = _layer_shapes(layer_sizes)
    sizes = [int(np.prod(s)) for s in shapes]
    offsets = np.concatenate([[0], np.cumsum(sizes)])

    def unpack(w):
        return [
            w[offsets[k] : offsets[k + 1]].reshape(shapes[k])
            for k in range(len(shapes))
        ]

    def predict(w, x):
        parts = unpack(w)
        a = x
        for k in range(0, len(parts), 2):
            a = jnp.tanh(parts[k] @ a + parts[k + 1])
        return a[0]

    def loss_i(w, x, y):
        r = y - predict(w, x)
        return r * r

    batch_axes = (None, 0, 0)
    values = jax.jit(jax.vmap(loss_i, in_axes=batch_axes))
    grads = jax.jit(jax.vmap(jax.grad(loss_i), in_axes=batch_axes))
    hessians = jax.jit(jax.vmap(jax.jacfwd(jax.grad(loss_i)), in_axes=batch_axes))
    return values, grads, hessians


class MLPProblem(FiniteSumProblem):
    """Finite-sum problem over the per-sample squared errors of a tanh MLP.

    The parameter vector packs, layer by layer, the weight matrix in row-major
    order followed by the bias vector.
    """

    def __init__(self, spec: MLPSpec, dataset: Dataset):
        if dataset.d != spec.layer_sizes[0]:
            raise ValueError(
                f"dataset has {dataset.d} features, network expects {spec.layer_sizes[0]}"
            )
        self.spec = spec
        self.dataset = dataset
        self.n = spec.parameter_count
        self.N = dataset.N
        self._values, self._grads, self._hessians = _compiled(spec.layer_sizes)
        self._X = jnp.asarray(dataset.features)
        self._Y = jnp.asarray(dataset.labels)

    def component(self, i, x):
        vals, grads, hessians = self.batch_components([i], x)
        return float(vals[0]), grads[0], hessians[0]

    def component_value(self, i, x):
        return float(self.batch_values([i], x)[0])

    def batch_components(self, indices, x):
        idx = jnp.asarray(np.asarray(indices, dtype=np.int64))
        w = jnp.asarray(x)
        X, Y = self._X[idx], self._Y[idx]
        vals = np.asarray(self._values(w, X, Y))
        grads = np.asarray(self._grads(w, X, Y))
        hessians = np.asarray(self._hessians(w, X, Y))
        # Forward-over-reverse is symmetric only to rounding; make it exact.
        hessians = 0.5 * (hessians + hessians.transpose(0, 2, 1))
        return vals, grads, hessians

    def batch_values(self, indices, x):
        idx = jnp.asarray(np.asarray(indices, dtype=np.int64))
        return np.asarray(self._values(jnp.asarray(x), self._X[idx], self._Y[idx]))

    def batch_gradients(self, indices, x):
        idx = jnp.asarray(np.asarray(indices, dtype=np.int64))
        return np.asarray(self._grads(jnp.asarray(x), self._X[idx], self._Y[idx]))


def mlp_oracle(spec: MLPSpec, dataset: Dataset) -> MLPProblem:
    return MLPProblem(spec, dataset)


def init_params(spec: MLPSpec, seed) -> np.ndarray:
    """Default training start: per layer, standard-normal entries scaled by
    1/sqrt(fan-in) for weights and biases alike."""
    rng = np.random.default_rng(seed)
    chunks = []
    for w_in, w_out in zip(spec.layer_sizes[:-1], spec.layer_sizes[1:]):
        scale = 1.0 / np.sqrt(w_in)
        chunks.append(rng.standard_normal(w_out * w_in) * scale)
        chunks.append(rng.standard_normal(w_out) * scale)
    return np.concatenate(chunks)


def finite_difference_check(problem: FiniteSumProblem, x: np.ndarray,
                            h: float = 1e-5) -> tuple[float, float]:
    """Central-difference verification of the full objective's derivatives.

    Differences of f check the gradient; differences of the gradient check
    the Hessian.  Returns the componentwise maximum relative discrepancies,
    measured against the finite-difference reference with the denominator
    floored at 1.
    """
    from .problems import full_gradient, full_hessian, full_value

    if h <= 0:
        raise ValueError("h must be positive")
    x = np.asarray(x, dtype=float)
    n = x.size
    grad = full_gradient(problem, x)
    hess = full_hessian(problem, x)
    grad_err = 0.0
    hess_err = 0.0
    for j in range(n):
        e = np.zeros(n)
        e[j] = h
        fd_g = (full_value(problem, x + e) - full_value(problem, x - e)) / (2 * h)
        grad_err = max(grad_err, abs(grad[j] - fd_g) / max(1.0, abs(fd_g)))
        fd_col = (full_gradient(problem, x + e) - full_gradient(problem, x - e)) / (2 * h)
        col_err = np.abs(hess[:, j] - fd_col) / np.maximum(1.0, np.abs(fd_col))
        hess_err = max(hess_err, float(col_err.max()))
    return grad_err, hess_err
