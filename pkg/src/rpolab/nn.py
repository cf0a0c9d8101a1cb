"""Dense tanh networks with hand-written reverse-mode gradients.

Everything here operates on float64 numpy arrays. Forward passes return a
cache of activations; the matching backward pass turns an output gradient
into exact parameter gradients. There is no general autodiff: the backward
code mirrors the forward code line by line, which keeps it auditable and
lets the finite-difference suite pin it down tightly.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError, InternalError

Array = np.ndarray


def orthogonal_init(rows: int, cols: int, gain: float, rng: np.random.Generator) -> Array:
    """Gain-scaled orthogonal matrix of shape (rows, cols).

    Rows are orthonormal when rows <= cols, columns otherwise, so the
    Gram matrix on the short side equals gain**2 * I.
    """
    if rows < 1 or cols < 1:
        raise ConfigError(f"orthogonal_init needs positive dims, got {rows}x{cols}")
    a = rng.standard_normal((rows, cols))
    transpose = rows < cols
    if transpose:
        a = a.T
    q, r = np.linalg.qr(a)
    # Fix the signs so the factorization (and hence the draw) is unique.
    q = q * np.copysign(1.0, np.diag(r))
    if transpose:
        q = q.T
    return np.ascontiguousarray(gain * q)


class ParameterStore:
    """Flat, ordered collection of named parameter arrays.

    Networks register their weight/bias arrays under group-prefixed names
    (``actor/w0``, ``critic/b1``, ``actor/log_std``, ...). Updates happen
    in place, so the registering network and the store always see the same
    memory.
    """

    def __init__(self):
        self._params: dict[str, Array] = {}

    def register(self, name: str, array: Array) -> Array:
        if name in self._params:
            raise ConfigError(f"duplicate parameter name {name!r}")
        self._params[name] = array
        return array

    def names(self) -> list[str]:
        return list(self._params)

    def __getitem__(self, name: str) -> Array:
        return self._params[name]

    def __iter__(self):
        return iter(self._params.items())

    def __len__(self) -> int:
        return len(self._params)

    def zeros_like(self) -> dict[str, Array]:
        """Fresh gradient dict, shape-congruent with the store."""
        return {name: np.zeros_like(p) for name, p in self._params.items()}

    def copy_values(self) -> dict[str, Array]:
        return {name: p.copy() for name, p in self._params.items()}

    def all_finite(self) -> bool:
        return all(np.isfinite(p).all() for p in self._params.values())

    def equals(self, other: "ParameterStore | dict[str, Array]") -> bool:
        """Bitwise equality of every parameter array."""
        items = other._params if isinstance(other, ParameterStore) else other
        if set(items) != set(self._params):
            return False
        return all(np.array_equal(self._params[k], items[k]) for k in self._params)


class Mlp:
    """Feed-forward net: tanh on hidden layers, linear output layer.

    ``sizes`` gives layer widths input-first; ``gains`` one orthogonal-init
    gain per weight matrix. Biases start at zero.
    """

    def __init__(self, sizes: list[int], gains: list[float], rng: np.random.Generator):
        if len(sizes) < 2:
            raise ConfigError("Mlp needs at least one layer")
        if len(gains) != len(sizes) - 1:
            raise ConfigError(f"expected {len(sizes) - 1} gains, got {len(gains)}")
        self.weights: list[Array] = []
        self.biases: list[Array] = []
        for (n_in, n_out), gain in zip(zip(sizes[:-1], sizes[1:]), gains):
            self.weights.append(orthogonal_init(n_out, n_in, gain, rng))
            self.biases.append(np.zeros(n_out))
        self.sizes = list(sizes)

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def register(self, store: ParameterStore, prefix: str) -> None:
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            store.register(f"{prefix}/w{k}", w)
            store.register(f"{prefix}/b{k}", b)

    def forward(self, x: Array) -> tuple[Array, list[Array]]:
        """Returns (output, cache). x is (batch, in_dim).

        The cache holds the input plus every hidden post-activation, which
        is exactly what the backward pass needs.
        """
        if x.ndim != 2 or x.shape[1] != self.sizes[0]:
            raise ConfigError(
                f"expected input (*, {self.sizes[0]}), got {x.shape}"
            )
        cache = [x]
        h = x
        last = self.n_layers - 1
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w.T + b
            if k != last:
                h = np.tanh(h)
                cache.append(h)
        return h, cache

    def backward(
        self, cache: list[Array], dout: Array
    ) -> tuple[list[tuple[Array, Array]], Array]:
        """Exact gradients from an output gradient.

        Returns ([(dW, db) per layer, input-first], dx). ``cache`` must come
        from a forward pass of this net; a shape mismatch means it is stale.
        """
        if len(cache) != self.n_layers:
            raise InternalError("forward cache does not match network depth")
        grads: list[tuple[Array, Array]] = [None] * self.n_layers  # type: ignore[list-item]
        delta = dout
        for k in range(self.n_layers - 1, -1, -1):
            a_prev = cache[k]
            if a_prev.shape[1] != self.weights[k].shape[1]:
                raise InternalError(f"stale cache at layer {k}")
            grads[k] = (delta.T @ a_prev, delta.sum(axis=0))
            delta = delta @ self.weights[k]
            if k > 0:
                # d tanh(z) = 1 - tanh(z)^2, and cache holds tanh(z).
                delta = delta * (1.0 - a_prev * a_prev)
        return grads, delta

    def accumulate(
        self, grads: dict[str, Array], prefix: str, layer_grads: list[tuple[Array, Array]]
    ) -> None:
        for k, (dw, db) in enumerate(layer_grads):
            grads[f"{prefix}/w{k}"] += dw
            grads[f"{prefix}/b{k}"] += db


class Adam:
    """Adam with bias correction over a ParameterStore.

    The eps convention follows the torch lineage: denominator is
    sqrt(v_hat) + eps with eps = 1e-5.
    """

    def __init__(self, store: ParameterStore, lr: float, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-5):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = store.zeros_like()
        self.v = store.zeros_like()
        self._store = store

    def step(self, grads: dict[str, Array], lr: float | None = None) -> None:
        """One in-place update; raises if a parameter goes non-finite."""
        eta = self.lr if lr is None else lr
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        # The isfinite check below governs; silence the transient warnings
        # a non-finite gradient would produce on its way to that check.
        with np.errstate(invalid="ignore", over="ignore"):
            for name, p in self._store:
                g = grads[name]
                m = self.m[name]
                v = self.v[name]
                m *= self.beta1
                m += (1.0 - self.beta1) * g
                v *= self.beta2
                v += (1.0 - self.beta2) * (g * g)
                p -= eta * (m / bc1) / (np.sqrt(v / bc2) + self.eps)
                if not np.isfinite(p).all():
                    raise InternalError(f"parameter {name!r} went non-finite at step {self.t}")


def clip_grad_norm(grads: dict[str, Array], max_norm: float) -> float:
    """Global-norm clipping in place; returns the pre-clip norm."""
    total = 0.0
    for g in grads.values():
        total += float(np.dot(g.ravel(), g.ravel()))
    norm = total ** 0.5
    if norm > max_norm:
        scale = max_norm / (norm + 1e-6)
        for g in grads.values():
            g *= scale
    return norm
