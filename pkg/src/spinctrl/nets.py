"""Small fully-connected networks with hand-written backprop, plus Adam.

Everything is float64 numpy.  The nets are tiny (tens of neurons), so exact
gradients are cheap and the test suite checks backprop against central
finite differences.
"""

from __future__ import annotations

import numpy as np


def orthogonal_init(n_in: int, n_out: int, gain: float,
                    rng: np.random.Generator) -> np.ndarray:
    """Orthogonal weight matrix of shape (n_in, n_out), scaled by gain."""
    a = rng.standard_normal((max(n_in, n_out), min(n_in, n_out)))
    q, r = np.linalg.qr(a)
    q *= np.sign(np.diag(r))  # fix the QR sign ambiguity
    if n_in < n_out:
        q = q.T
    return gain * q[:n_in, :n_out]


class Mlp:
    """Affine layers with tanh hidden activations.

    out_activation is "linear" or "tanh"; the latter bounds the output to
    (-1, 1) for actions that are later mapped onto a control range.
    """

    def __init__(self, sizes, rng, out_activation="linear",
                 hidden_gain=1.0, final_gain=1.0):
        if len(sizes) < 2:
            raise ValueError("need at least input and output sizes")
        if out_activation not in ("linear", "tanh"):
            raise ValueError(f"unknown out_activation {out_activation!r}")
        self.sizes = list(sizes)
        self.out_activation = out_activation
        self.weights = []
        self.biases = []
        for i in range(len(sizes) - 1):
            gain = final_gain if i == len(sizes) - 2 else hidden_gain
            self.weights.append(orthogonal_init(sizes[i], sizes[i + 1], gain, rng))
            self.biases.append(np.zeros(sizes[i + 1]))

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def forward(self, x: np.ndarray):
        """Returns (output, cache); x has shape (batch, sizes[0])."""
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if x.shape[1] != self.sizes[0]:
            raise ValueError(
                f"input dim {x.shape[1]} does not match net input {self.sizes[0]}"
            )
        inputs = []   # layer inputs
        outputs = []  # post-activation outputs
        h = x
        last = self.n_layers - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            inputs.append(h)
            z = h @ w + b
            if i < last or self.out_activation == "tanh":
                h = np.tanh(z)
            else:
                h = z
            outputs.append(h)
        return h, (inputs, outputs)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x)[0]

    def backward(self, cache, grad_out: np.ndarray):
        """Backprop grad_out (batch, sizes[-1]) through the cached forward pass.

        Returns (grads, grad_input) where grads is a list of (dW, db) in
        layer order.
        """
        inputs, outputs = cache
        grads = [None] * self.n_layers
        g = np.asarray(grad_out, dtype=np.float64)
        last = self.n_layers - 1
        for i in range(last, -1, -1):
            if i < last or self.out_activation == "tanh":
                g = g * (1.0 - outputs[i] ** 2)
            grads[i] = (inputs[i].T @ g, g.sum(axis=0))
            g = g @ self.weights[i].T
        return grads, g

    # Parameter plumbing (optimizers, checkpoints, finite-difference tests).

    def params(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def set_params(self, params) -> None:
        it = iter(params)
        for i in range(self.n_layers):
            self.weights[i] = np.asarray(next(it), dtype=np.float64)
            self.biases[i] = np.asarray(next(it), dtype=np.float64)

    def flat_grads(self, grads) -> list[np.ndarray]:
        out = []
        for dw, db in grads:
            out.extend((dw, db))
        return out


class Adam:
    """Adaptive moment estimation over a list of parameter arrays."""

    def __init__(self, params, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, params, grads) -> None:
        """Update params in place from matching grads."""
        self.t += 1
        b1t = 1.0 - self.beta1 ** self.t
        b2t = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / b1t) / (np.sqrt(v / b2t) + self.eps)
