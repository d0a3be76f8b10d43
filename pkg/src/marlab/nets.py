"""Dense-network numerics: manual forward/backward, Adam, soft target updates.

Everything is float64 numpy. Networks are plain value objects mutated only by
the optimizer; a forward pass caches activations for the matching backward.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np


class NumericsError(RuntimeError):
    """Raised when a gradient or loss goes non-finite."""


CHECKPOINT_MAGIC = b"MARLABNET1\n"

_OUT_ACTS = ("identity", "tanh")


class Mlp:
    """Fully-connected ReLU network with hand-written backprop.

    Layers run input -> hidden[0] -> ... -> hidden[-1] -> output with ReLU on
    every hidden layer. The output activation is "identity" (critics) or
    "tanh" (actors, bounding outputs to [-1, 1]). `hidden` may be empty,
    giving a single affine layer.
    """

    def __init__(self, in_dim, out_dim, hidden=(64, 64), out_act="identity", rng=None):
        if out_act not in _OUT_ACTS:
            raise ValueError(f"out_act must be one of {_OUT_ACTS}, got {out_act!r}")
        if rng is None:
            rng = np.random.default_rng()
        self.sizes = [int(in_dim), *(int(h) for h in hidden), int(out_dim)]
        if any(s <= 0 for s in self.sizes):
            raise ValueError(f"layer sizes must be positive, got {self.sizes}")
        self.out_act = out_act
        self.weights = []
        self.biases = []
        for fan_in, fan_out in zip(self.sizes[:-1], self.sizes[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            self.weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            self.biases.append(np.zeros(fan_out))
        self.grad_weights = [np.zeros_like(w) for w in self.weights]
        self.grad_biases = [np.zeros_like(b) for b in self.biases]
        self._cache = None

    @property
    def in_dim(self):
        return self.sizes[0]

    @property
    def out_dim(self):
        return self.sizes[-1]

    @property
    def n_layers(self):
        return len(self.weights)

    def parameters(self):
        """Flat parameter list, layer order, weights before biases per layer."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def gradients(self):
        """Gradient buffers aligned with parameters()."""
        out = []
        for gw, gb in zip(self.grad_weights, self.grad_biases):
            out.extend((gw, gb))
        return out

    def param_count(self):
        return sum(p.size for p in self.parameters())

    def copy(self):
        dup = Mlp.__new__(Mlp)
        dup.sizes = list(self.sizes)
        dup.out_act = self.out_act
        dup.weights = [w.copy() for w in self.weights]
        dup.biases = [b.copy() for b in self.biases]
        dup.grad_weights = [np.zeros_like(w) for w in self.weights]
        dup.grad_biases = [np.zeros_like(b) for b in self.biases]
        dup._cache = None
        return dup

    def set_params_from(self, other):
        _check_congruent(self, other)
        for p, q in zip(self.weights + self.biases, other.weights + other.biases):
            p[...] = q

    def forward(self, x):
        """Run the network on a (B, in_dim) batch, caching for backward."""
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.in_dim:
            raise ValueError(
                f"expected batch of shape (B, {self.in_dim}), got {x.shape}"
            )
        pre = []          # pre-activations z_k per layer
        acts = [x]        # layer inputs, acts[k] feeds layer k
        h = x
        last = self.n_layers - 1
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ w + b
            pre.append(z)
            if k < last:
                h = np.maximum(z, 0.0)
            elif self.out_act == "tanh":
                h = np.tanh(z)
            else:
                h = z
            acts.append(h)
        self._cache = (pre, acts)
        return h

    def backward(self, upstream, need_input_grads=True):
        """Backprop sum(upstream * output) through the cached forward pass.

        Returns (param_grads, input_grads): param_grads is a list aligned with
        parameters(), input_grads has the cached batch's shape (None when
        need_input_grads is False, which skips the final matmul). The same
        arrays are also left in the grad buffers.
        """
        if self._cache is None:
            raise RuntimeError("backward called without a cached forward pass")
        pre, acts = self._cache
        upstream = np.asarray(upstream, dtype=np.float64)
        out = acts[-1]
        if upstream.shape != out.shape:
            raise ValueError(
                f"upstream gradient shape {upstream.shape} != output shape {out.shape}"
            )
        last = self.n_layers - 1
        if self.out_act == "tanh":
            delta = upstream * (1.0 - out * out)
        else:
            delta = upstream
        for k in range(last, -1, -1):
            self.grad_weights[k][...] = acts[k].T @ delta
            self.grad_biases[k][...] = delta.sum(axis=0)
            if k == 0 and not need_input_grads:
                return self.gradients(), None
            delta = delta @ self.weights[k].T
            if k > 0:
                delta = delta * (pre[k - 1] > 0.0)
        return self.gradients(), delta


@dataclass
class AdamState:
    """Adam accumulators for one network, created lazily from its shapes."""

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    @classmethod
    def for_net(cls, net, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        st = cls(lr=lr, beta1=beta1, beta2=beta2, eps=eps)
        st.m = [np.zeros_like(p) for p in net.parameters()]
        st.v = [np.zeros_like(p) for p in net.parameters()]
        return st

    def snapshot(self):
        return (self.t, [a.copy() for a in self.m], [a.copy() for a in self.v])

    def restore(self, snap):
        self.t = snap[0]
        for a, s in zip(self.m, snap[1]):
            a[...] = s
        for a, s in zip(self.v, snap[2]):
            a[...] = s


def adam_step(net, adam, grads):
    """One bias-corrected Adam update of `net` along -grads (minimization)."""
    params = net.parameters()
    if len(grads) != len(params):
        raise ValueError(f"expected {len(params)} gradient arrays, got {len(grads)}")
    for g, p in zip(grads, params):
        if g.shape != p.shape:
            raise ValueError(f"gradient shape {g.shape} != parameter shape {p.shape}")
        if not np.all(np.isfinite(g)):
            raise NumericsError("non-finite gradient passed to adam_step")
    adam.t += 1
    b1, b2 = adam.beta1, adam.beta2
    c1 = 1.0 - b1**adam.t
    c2 = 1.0 - b2**adam.t
    for p, g, m, v in zip(params, grads, adam.m, adam.v):
        m[...] = b1 * m + (1.0 - b1) * g
        v[...] = b2 * v + (1.0 - b2) * np.square(g)
        p -= adam.lr * (m / c1) / (np.sqrt(v / c2) + adam.eps)


def soft_update(target, online, tau):
    """Blend target <- tau * online + (1 - tau) * target, element-wise."""
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"tau must lie in [0, 1], got {tau}")
    _check_congruent(target, online)
    for t, o in zip(target.parameters(), online.parameters()):
        t[...] = tau * o + (1.0 - tau) * t


def grad_norm_sq(grads):
    """Sum of squared entries over a list of gradient arrays."""
    return float(sum(np.sum(np.square(g)) for g in grads))


def clip_gradients(grads, max_norm):
    """Scale the whole gradient list so its global L2 norm is at most max_norm."""
    norm = np.sqrt(grad_norm_sq(grads))
    if norm <= max_norm or norm == 0.0:
        return grads
    scale = max_norm / norm
    return [g * scale for g in grads]


def _check_congruent(a, b):
    if a.sizes != b.sizes:
        raise ValueError(f"network shapes differ: {a.sizes} vs {b.sizes}")


def save_network(net, path):
    """Write a bit-exact binary checkpoint: magic, JSON header, raw float64."""
    header = json.dumps({"sizes": net.sizes, "out_act": net.out_act})
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(header.encode("utf-8"))
        fh.write(b"\n")
        for p in net.parameters():
            fh.write(np.ascontiguousarray(p, dtype="<f8").tobytes())


def load_network(path):
    """Read a checkpoint written by save_network, restoring exact bits."""
    with open(path, "rb") as fh:
        magic = fh.read(len(CHECKPOINT_MAGIC))
        if magic != CHECKPOINT_MAGIC:
            raise ValueError(f"{path}: not a network checkpoint (bad magic)")
        header = json.loads(fh.readline().decode("utf-8"))
        sizes = header["sizes"]
        net = Mlp(sizes[0], sizes[-1], hidden=sizes[1:-1], out_act=header["out_act"],
                  rng=np.random.default_rng(0))
        for p in net.parameters():
            raw = fh.read(p.size * 8)
            if len(raw) != p.size * 8:
                raise ValueError(f"{path}: truncated checkpoint")
            p[...] = np.frombuffer(raw, dtype="<f8").reshape(p.shape)
        trailing = fh.read(1)
        if trailing:
            raise ValueError(f"{path}: trailing bytes after parameters")
    return net
