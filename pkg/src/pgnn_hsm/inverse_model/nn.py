"""Single-hidden-layer tanh network with hand-written backpropagation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class NNParams:
    """``out = W2 @ tanh(W1 @ x + B1) + B2`` with ``W1: (n1, n0)``, ``W2: (1, n1)``."""

    W1: np.ndarray
    B1: np.ndarray
    W2: np.ndarray
    B2: np.ndarray

    def __post_init__(self):
        self.W1 = np.asarray(self.W1, dtype=float).reshape(len(self.B1), -1)
        self.B1 = np.asarray(self.B1, dtype=float).reshape(-1)
        self.W2 = np.asarray(self.W2, dtype=float).reshape(1, -1)
        self.B2 = np.asarray(self.B2, dtype=float).reshape(1)
        n1, _ = self.W1.shape
        if self.W2.shape[1] != n1:
            raise ValueError(f"W2 has {self.W2.shape[1]} columns, expected {n1}")

    @property
    def n_inputs(self) -> int:
        return self.W1.shape[1]

    @property
    def n_hidden(self) -> int:
        return self.W1.shape[0]

    @classmethod
    def init(cls, n_inputs: int, n_hidden: int, rng: np.random.Generator) -> "NNParams":
        """Uniform ``[-a, a]`` weights with ``a = 1/sqrt(fan_in)`` per layer; zero biases."""
        a1 = 1.0 / np.sqrt(n_inputs)
        a2 = 1.0 / np.sqrt(n_hidden)
        return cls(
            W1=rng.uniform(-a1, a1, size=(n_hidden, n_inputs)),
            B1=np.zeros(n_hidden),
            W2=rng.uniform(-a2, a2, size=(1, n_hidden)),
            B2=np.zeros(1),
        )

    @classmethod
    def zeros(cls, n_inputs: int, n_hidden: int) -> "NNParams":
        return cls(np.zeros((n_hidden, n_inputs)), np.zeros(n_hidden), np.zeros((1, n_hidden)), np.zeros(1))

    def flat(self) -> np.ndarray:
        return np.concatenate([self.W1.ravel(), self.B1, self.W2.ravel(), self.B2])

    def unflat(self, theta: np.ndarray) -> "NNParams":
        n1, n0 = self.W1.shape
        i = 0
        parts = []
        for size in (n1 * n0, n1, n1, 1):
            parts.append(np.asarray(theta[i:i + size], dtype=float))
            i += size
        return NNParams(parts[0].reshape(n1, n0), parts[1], parts[2].reshape(1, n1), parts[3])

    def copy(self) -> "NNParams":
        return NNParams(self.W1.copy(), self.B1.copy(), self.W2.copy(), self.B2.copy())

    def to_dict(self) -> dict:
        return {"W1": self.W1.tolist(), "B1": self.B1.tolist(), "W2": self.W2.tolist(), "B2": self.B2.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "NNParams":
        return cls(np.array(d["W1"], dtype=float), np.array(d["B1"], dtype=float),
                   np.array(d["W2"], dtype=float), np.array(d["B2"], dtype=float))


def nn_forward(nn: NNParams, x):
    """Network output for one input vector (scalar) or a batch of rows (vector)."""
    x = np.asarray(x, dtype=float)
    h = np.tanh(x @ nn.W1.T + nn.B1)
    out = h @ nn.W2[0] + nn.B2[0]
    return float(out) if x.ndim == 1 else out


def nn_gradient(nn: NNParams, x, upstream: float = 1.0) -> tuple[NNParams, np.ndarray]:
    """Backpropagate ``upstream * d(out)`` for a single input.

    Returns the parameter gradient (same layout as ``nn``) and the gradient
    with respect to ``x``.
    """
    x = np.asarray(x, dtype=float)
    h = np.tanh(nn.W1 @ x + nn.B1)
    g_b2 = np.array([upstream])
    g_w2 = upstream * h[None, :]
    g_z = upstream * nn.W2[0] * (1.0 - h * h)
    g_w1 = np.outer(g_z, x)
    g_x = nn.W1.T @ g_z
    return NNParams(g_w1, g_z.copy(), g_w2, g_b2), g_x


def mse_and_gradient(nn: NNParams, X: np.ndarray, target: np.ndarray,
                     l2: float = 0.0) -> tuple[float, np.ndarray]:
    """``mean((target - nn(X))^2) + l2*|theta|^2`` and its gradient as a flat vector."""
    z = X @ nn.W1.T + nn.B1
    h = np.tanh(z)
    err = h @ nn.W2[0] + nn.B2[0] - target
    n = len(target)
    loss = float(err @ err) / n
    g_out = (2.0 / n) * err
    g_w2 = g_out @ h
    g_b2 = g_out.sum()
    g_z = np.outer(g_out, nn.W2[0]) * (1.0 - h * h)
    g_w1 = g_z.T @ X
    g_b1 = g_z.sum(axis=0)
    grad = np.concatenate([g_w1.ravel(), g_b1, g_w2, [g_b2]])
    if l2:
        theta = nn.flat()
        loss += l2 * float(theta @ theta)
        grad += 2.0 * l2 * theta
    return loss, grad


class Adam:
    """Adaptive-moment gradient descent on a flat parameter vector."""

    def __init__(self, theta: np.ndarray, learning_rate: float = 1e-2,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.theta = np.array(theta, dtype=float)
        self.lr = learning_rate
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = np.zeros_like(self.theta)
        self.v = np.zeros_like(self.theta)
        self.t = 0

    def step(self, grad: np.ndarray, learning_rate: float | None = None) -> np.ndarray:
        lr = self.lr if learning_rate is None else learning_rate
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad * grad
        m_hat = self.m / (1 - self.beta1 ** self.t)
        v_hat = self.v / (1 - self.beta2 ** self.t)
        self.theta = self.theta - lr * m_hat / (np.sqrt(v_hat) + self.eps)
        return self.theta
