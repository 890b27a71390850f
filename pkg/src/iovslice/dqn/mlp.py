"""Dueling Q-network as a plain numpy MLP, with Adam and a binary checkpoint format.

ReLU hidden stack feeding two linear heads: a scalar state value and one
advantage per action, combined as Q = V + A - mean(A). Everything is float64
and single-threaded so a seed pins training bit-for-bit.
"""

from __future__ import annotations

import os
import struct
from pathlib import Path

import numpy as np

CHECKPOINT_MAGIC = b"IOVDQNCK"
CHECKPOINT_VERSION = 1


class CheckpointFormatError(ValueError):
    """Corrupt header, wrong magic, or truncated parameter payload."""


class UnsupportedVersionError(CheckpointFormatError):
    """Well-formed checkpoint written by an incompatible format version."""


class DuelingQNetwork:
    """MLP with hidden ReLU layers and dueling value/advantage heads.

    Parameters live in self.params as a flat list
    [W1, b1, ..., Wk, bk, Wv, bv, Wa, ba]; weight matrices are (in, out).
    """

    def __init__(
        self,
        obs_dim: int,
        hidden: tuple[int, ...],
        n_actions: int,
        rng: np.random.Generator | None = None,
    ):
        if obs_dim < 1 or n_actions < 1 or not hidden:
            raise ValueError("need positive dims and at least one hidden layer")
        self.obs_dim = obs_dim
        self.hidden = tuple(int(h) for h in hidden)
        self.n_actions = n_actions
        self.params: list[np.ndarray] = []
        dims = [obs_dim, *self.hidden]
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            self.params.append(_he_init(fan_in, fan_out, rng))
            self.params.append(np.zeros(fan_out))
        last = self.hidden[-1]
        self.params.append(_he_init(last, 1, rng))  # value head
        self.params.append(np.zeros(1))
        self.params.append(_he_init(last, n_actions, rng))  # advantage head
        self.params.append(np.zeros(n_actions))

    # -- inference -------------------------------------------------------

    def forward(self, obs: np.ndarray) -> np.ndarray:
        q, _ = self.forward_cached(obs)
        return q

    def forward_cached(self, obs: np.ndarray):
        x = np.asarray(obs, dtype=np.float64)
        squeeze = x.ndim == 1
        if squeeze:
            x = x[None, :]
        if x.shape[1] != self.obs_dim:
            raise ValueError(f"observation dim {x.shape[1]} != network input {self.obs_dim}")
        acts = [x]
        h = x
        n_hidden = len(self.hidden)
        for i in range(n_hidden):
            w, b = self.params[2 * i], self.params[2 * i + 1]
            h = np.maximum(h @ w + b, 0.0)
            acts.append(h)
        wv, bv = self.params[2 * n_hidden], self.params[2 * n_hidden + 1]
        wa, ba = self.params[2 * n_hidden + 2], self.params[2 * n_hidden + 3]
        v = h @ wv + bv  # (B, 1)
        a = h @ wa + ba  # (B, |A|)
        q = v + a - a.mean(axis=1, keepdims=True)
        cache = (acts, v, a)
        return (q[0] if squeeze else q), cache

    # -- gradients ---------------------------------------------------------

    def backward(self, cache, dq: np.ndarray) -> list[np.ndarray]:
        """Gradients for every parameter given dLoss/dQ, same order as params."""
        acts, _, _ = cache
        n_hidden = len(self.hidden)
        h_last = acts[-1]
        k = self.n_actions
        dv = dq.sum(axis=1, keepdims=True)  # (B, 1)
        da = dq - dq.sum(axis=1, keepdims=True) / k  # mean-subtraction backprop
        wv = self.params[2 * n_hidden]
        wa = self.params[2 * n_hidden + 2]
        grads_heads = [
            h_last.T @ dv,
            dv.sum(axis=0),
            h_last.T @ da,
            da.sum(axis=0),
        ]
        dh = dv @ wv.T + da @ wa.T
        grads_hidden: list[np.ndarray] = []
        for i in range(n_hidden - 1, -1, -1):
            w = self.params[2 * i]
            pre_mask = acts[i + 1] > 0.0  # ReLU: activation > 0 iff pre-activation > 0
            dh = dh * pre_mask
            grads_hidden.append(dh.sum(axis=0))
            grads_hidden.append(acts[i].T @ dh)
            dh = dh @ w.T
        grads_hidden.reverse()
        return grads_hidden + grads_heads

    def loss_and_grads(
        self,
        obs: np.ndarray,
        actions: np.ndarray,
        targets: np.ndarray,
        weights: np.ndarray,
        huber_delta: float = 1.0,
    ):
        """Importance-weighted Huber loss on the chosen actions' Q values.

        Returns (mean loss, gradients, |td error| per sample).
        """
        q, cache = self.forward_cached(obs)
        batch = q.shape[0]
        rows = np.arange(batch)
        delta = q[rows, actions] - targets
        abs_delta = np.abs(delta)
        quadratic = abs_delta <= huber_delta
        loss_per = np.where(
            quadratic, 0.5 * delta**2, huber_delta * (abs_delta - 0.5 * huber_delta)
        )
        loss = float(np.mean(weights * loss_per))
        dq = np.zeros_like(q)
        dq[rows, actions] = weights * np.clip(delta, -huber_delta, huber_delta) / batch
        return loss, self.backward(cache, dq), abs_delta

    # -- copies ------------------------------------------------------------

    def clone(self) -> "DuelingQNetwork":
        dup = DuelingQNetwork.__new__(DuelingQNetwork)
        dup.obs_dim = self.obs_dim
        dup.hidden = self.hidden
        dup.n_actions = self.n_actions
        dup.params = [p.copy() for p in self.params]
        return dup

    def copy_from(self, other: "DuelingQNetwork") -> None:
        for mine, theirs in zip(self.params, other.params):
            mine[...] = theirs


def _he_init(fan_in: int, fan_out: int, rng: np.random.Generator | None) -> np.ndarray:
    if rng is None:
        return np.zeros((fan_in, fan_out))
    return rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_in, fan_out))


class Adam:
    """Standard Adam with bias correction; state is per-parameter moments."""

    def __init__(self, params: list[np.ndarray], lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        self.t += 1
        b1t = 1.0 - self.beta1**self.t
        b2t = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g**2
            p -= self.lr * (m / b1t) / (np.sqrt(v / b2t) + self.eps)


# -- checkpoint format -------------------------------------------------------
#
# magic (8 bytes) | version u32 | obs_dim u32 | n_hidden u32 | hidden dims u32...
# | n_actions u32 | parameters as little-endian float64, C order, in the fixed
# params-list order. Written atomically (temp file then rename).


def save_checkpoint(net: DuelingQNetwork, path: str | Path) -> None:
    path = Path(path)
    header = CHECKPOINT_MAGIC + struct.pack(
        f"<3I{len(net.hidden)}II",
        CHECKPOINT_VERSION,
        net.obs_dim,
        len(net.hidden),
        *net.hidden,
        net.n_actions,
    )
    payload = b"".join(np.ascontiguousarray(p, dtype="<f8").tobytes() for p in net.params)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(header + payload)
    os.replace(tmp, path)


def load_checkpoint(path: str | Path) -> DuelingQNetwork:
    raw = Path(path).read_bytes()
    if len(raw) < len(CHECKPOINT_MAGIC) + 4 or raw[: len(CHECKPOINT_MAGIC)] != CHECKPOINT_MAGIC:
        raise CheckpointFormatError(f"{path}: bad magic, not a checkpoint")
    off = len(CHECKPOINT_MAGIC)
    (version,) = struct.unpack_from("<I", raw, off)
    off += 4
    if version != CHECKPOINT_VERSION:
        raise UnsupportedVersionError(
            f"{path}: checkpoint version {version}, this build reads {CHECKPOINT_VERSION}"
        )
    try:
        obs_dim, n_hidden = struct.unpack_from("<2I", raw, off)
        off += 8
        hidden = struct.unpack_from(f"<{n_hidden}I", raw, off)
        off += 4 * n_hidden
        (n_act,) = struct.unpack_from("<I", raw, off)
        off += 4
    except struct.error as exc:
        raise CheckpointFormatError(f"{path}: truncated header") from exc
    net = DuelingQNetwork(obs_dim, hidden, n_act, rng=None)
    expected = sum(p.size for p in net.params) * 8
    if len(raw) - off != expected:
        raise CheckpointFormatError(
            f"{path}: parameter payload is {len(raw) - off} bytes, expected {expected}"
        )
    flat = np.frombuffer(raw, dtype="<f8", offset=off)
    pos = 0
    for p in net.params:
        p[...] = flat[pos : pos + p.size].reshape(p.shape)
        pos += p.size
    return net
