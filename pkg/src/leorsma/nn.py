"""Dense networks with hand-written reverse- and forward-mode derivatives,
Adam, and diagonal-Gaussian policy heads.

All parameters of a network live in one flat float64 vector; layer weights
and biases are views into it, so flat get/set, optimizers and Polyak
averaging operate on a single array.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from .errors import StructuralError

LOG_2PI = math.log(2.0 * math.pi)
LOG_STD_MIN, LOG_STD_MAX = -5.0, 2.0


def param_count(widths: Sequence[int]) -> int:
    return sum((a + 1) * b for a, b in zip(widths[:-1], widths[1:]))


def _orthogonal(rng: np.random.Generator, rows: int, cols: int, gain: float) -> np.ndarray:
    a = rng.standard_normal((max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))
    if rows < cols:
        q = q.T
    return gain * q[:rows, :cols]


class Mlp:
    """tanh hidden layers, linear output; optional tanh squash on the output."""

    def __init__(self, widths: Sequence[int], rng: np.random.Generator | None = None,
                 out_scale: float = 1.0, squash: bool = False):
        if len(widths) < 2 or min(widths) < 1:
            raise StructuralError(f"invalid layer widths {widths}")
        self.widths = [int(w) for w in widths]
        self.squash = squash
        self.theta = np.zeros(param_count(self.widths))
        self._bind()
        if rng is not None:
            n_layers = len(self.weights)
            for k, w in enumerate(self.weights):
                gain = out_scale if k == n_layers - 1 else 1.0
                w[...] = _orthogonal(rng, *w.shape, gain)

    def _bind(self):
        self.weights, self.biases = [], []
        pos = 0
        for a, b in zip(self.widths[:-1], self.widths[1:]):
            self.weights.append(self.theta[pos:pos + a * b].reshape(b, a))
            pos += a * b
            self.biases.append(self.theta[pos:pos + b])
            pos += b

    @property
    def in_dim(self) -> int:
        return self.widths[0]

    @property
    def out_dim(self) -> int:
        return self.widths[-1]

    @property
    def n_params(self) -> int:
        return self.theta.size

    def get_flat(self) -> np.ndarray:
        return self.theta.copy()

    def set_flat(self, flat: np.ndarray) -> None:
        flat = np.asarray(flat, dtype=float)
        if flat.shape != self.theta.shape:
            raise StructuralError(f"expected {self.theta.size} parameters, got {flat.shape}")
        self.theta[...] = flat

    def copy(self) -> "Mlp":
        other = Mlp(self.widths, squash=self.squash)
        other.theta[...] = self.theta
        return other

    def _as_batch(self, x) -> Tuple[np.ndarray, bool]:
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        x = np.atleast_2d(x)
        if x.shape[1] != self.in_dim:
            raise StructuralError(f"input width {x.shape[1]} != {self.in_dim}")
        return x, single

    def forward(self, x, keep: bool = False):
        """Batch forward pass. With ``keep`` also returns the activation cache."""
        a, single = self._as_batch(x)
        acts = [a]
        last = len(self.weights) - 1
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = a @ w.T + b
            a = np.tanh(z) if (k < last or self.squash) else z
            acts.append(a)
        y = a[0] if single else a
        return (y, acts) if keep else y

    def backward(self, x, dy, acts=None) -> Tuple[np.ndarray, np.ndarray]:
        """Reverse-mode gradient of ``sum(dy * y)``: (flat parameter grad, input grad)."""
        if acts is None:
            _, acts = self.forward(x, keep=True)
        dy = np.asarray(dy, dtype=float)
        single = dy.ndim == 1
        delta = np.atleast_2d(dy)
        if delta.shape != acts[-1].shape:
            raise StructuralError(f"upstream gradient shape {delta.shape} != output {acts[-1].shape}")
        grad = np.empty_like(self.theta)
        gw, gb = self._views(grad)
        last = len(self.weights) - 1
        for k in range(last, -1, -1):
            if k < last or self.squash:
                delta = delta * (1.0 - acts[k + 1] ** 2)
            gw[k][...] = delta.T @ acts[k]
            gb[k][...] = delta.sum(axis=0)
            delta = delta @ self.weights[k]
        return grad, (delta[0] if single else delta)

    def jvp(self, x, v: np.ndarray) -> np.ndarray:
        """Forward-mode derivative of the outputs along parameter direction ``v``."""
        a, single = self._as_batch(x)
        vw, vb = self._views(np.asarray(v, dtype=float))
        da = np.zeros_like(a)
        last = len(self.weights) - 1
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = a @ w.T + b
            dz = a @ vw[k].T + da @ w.T + vb[k]
            if k < last or self.squash:
                a = np.tanh(z)
                da = (1.0 - a ** 2) * dz
            else:
                a, da = z, dz
        return da[0] if single else da

    def _views(self, flat: np.ndarray):
        ws, bs = [], []
        pos = 0
        for a, b in zip(self.widths[:-1], self.widths[1:]):
            ws.append(flat[pos:pos + a * b].reshape(b, a))
            pos += a * b
            bs.append(flat[pos:pos + b])
            pos += b
        return ws, bs


@dataclass
class AdamState:
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    m: np.ndarray = None
    v: np.ndarray = None
    t: int = 0

    @classmethod
    def like(cls, params: np.ndarray, lr: float, **kw) -> "AdamState":
        return cls(lr=lr, m=np.zeros_like(params), v=np.zeros_like(params), **kw)


def adam_step(state: AdamState, params: np.ndarray, grads: np.ndarray) -> np.ndarray:
    """One bias-corrected Adam descent step; mutates ``state``, returns new params."""
    if grads.shape != params.shape or state.m.shape != params.shape:
        raise StructuralError("Adam moments, parameters and gradients must share a shape")
    state.t += 1
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * grads
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * grads * grads
    m_hat = state.m / (1.0 - state.beta1 ** state.t)
    v_hat = state.v / (1.0 - state.beta2 ** state.t)
    return params - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)


class GaussianPolicy:
    """Diagonal Gaussian ``N(mean_net(s), exp(log_std)^2)``.

    The flat parameter vector is the mean network's parameters followed by
    the per-dimension log standard deviations.
    """

    def __init__(self, widths: Sequence[int], rng: np.random.Generator | None = None,
                 log_std: float = -0.5, out_scale: float = 0.01):
        self.net = Mlp(widths, rng, out_scale=out_scale)
        self.log_std = np.full(widths[-1], float(log_std))

    @property
    def act_dim(self) -> int:
        return self.net.out_dim

    @property
    def n_params(self) -> int:
        return self.net.n_params + self.act_dim

    def clamped_log_std(self) -> np.ndarray:
        return np.clip(self.log_std, LOG_STD_MIN, LOG_STD_MAX)

    def std(self) -> np.ndarray:
        return np.exp(self.clamped_log_std())

    def get_flat(self) -> np.ndarray:
        return np.concatenate([self.net.theta, self.log_std])

    def set_flat(self, flat: np.ndarray) -> None:
        flat = np.asarray(flat, dtype=float)
        if flat.shape != (self.n_params,):
            raise StructuralError(f"expected {self.n_params} parameters, got {flat.shape}")
        self.net.theta[...] = flat[:self.net.n_params]
        self.log_std[...] = flat[self.net.n_params:]

    def copy(self) -> "GaussianPolicy":
        other = GaussianPolicy(self.net.widths)
        other.set_flat(self.get_flat())
        return other

    def mean(self, s) -> np.ndarray:
        return self.net.forward(s)

    def sample(self, s, rng: np.random.Generator) -> np.ndarray:
        mu = self.mean(s)
        return mu + self.std() * rng.standard_normal(mu.shape)

    def logprob(self, s, a) -> np.ndarray:
        return gaussian_logprob(np.atleast_2d(self.mean(s)), self.clamped_log_std(), np.atleast_2d(a))

    def entropy(self) -> float:
        return gaussian_entropy(self.clamped_log_std())

    def grad_logprob(self, s, a, weights) -> np.ndarray:
        """Flat gradient of ``sum_t weights[t] * log pi(a_t | s_t)``."""
        s, a = np.atleast_2d(s), np.atleast_2d(a)
        mu, acts = self.net.forward(s, keep=True)
        ls = self.clamped_log_std()
        inv_var = np.exp(-2.0 * ls)
        diff = a - mu
        w = np.asarray(weights, dtype=float)[:, None]
        g_net, _ = self.net.backward(s, w * diff * inv_var, acts)
        g_ls = np.sum(w * (diff * diff * inv_var - 1.0), axis=0)
        g_ls = g_ls * ((self.log_std > LOG_STD_MIN) & (self.log_std < LOG_STD_MAX))
        return np.concatenate([g_net, g_ls])

    def grad_entropy(self) -> np.ndarray:
        g_ls = ((self.log_std > LOG_STD_MIN) & (self.log_std < LOG_STD_MAX)).astype(float)
        return np.concatenate([np.zeros(self.net.n_params), g_ls])

    def fisher_vector_product(self, s, v: np.ndarray, damping: float = 0.0) -> np.ndarray:
        """Hessian of the batch-mean ``KL(pi_current || pi_theta)`` at the current
        parameters, applied to ``v``: ``J^T diag(1/sigma^2) J v`` for the mean
        network and ``2 v`` for the log standard deviations."""
        s = np.atleast_2d(s)
        n = self.net.n_params
        jv = self.net.jvp(s, v[:n])
        inv_var = np.exp(-2.0 * self.clamped_log_std())
        g_net, _ = self.net.backward(s, jv * inv_var / len(s))
        return np.concatenate([g_net, 2.0 * v[n:]]) + damping * v


def gaussian_logprob(mean: np.ndarray, log_std: np.ndarray, a: np.ndarray) -> np.ndarray:
    z = (a - mean) * np.exp(-log_std)
    return -0.5 * np.sum(z * z, axis=-1) - np.sum(log_std) - 0.5 * mean.shape[-1] * LOG_2PI


def gaussian_entropy(log_std: np.ndarray) -> float:
    return float(np.sum(log_std) + 0.5 * log_std.size * (1.0 + LOG_2PI))


def gaussian_kl(mean_old, log_std_old, mean_new, log_std_new) -> np.ndarray:
    """Per-sample ``KL(N_old || N_new)`` for diagonal Gaussians."""
    var_old = np.exp(2.0 * log_std_old)
    var_new = np.exp(2.0 * log_std_new)
    term = log_std_new - log_std_old + (var_old + (mean_old - mean_new) ** 2) / (2.0 * var_new) - 0.5
    return np.sum(term, axis=-1)


def gaussian_logprob_entropy_kl(policy: GaussianPolicy, other_policy: GaussianPolicy, s, a):
    """``(log pi(a|s), H(pi(.|s)), KL(other(.|s) || pi(.|s)))`` per sample."""
    s = np.atleast_2d(s)
    mu = np.atleast_2d(policy.mean(s))
    ls = policy.clamped_log_std()
    logp = gaussian_logprob(mu, ls, np.atleast_2d(a))
    ent = np.full(len(s), gaussian_entropy(ls))
    kl = gaussian_kl(np.atleast_2d(other_policy.mean(s)), other_policy.clamped_log_std(), mu, ls)
    return logp, ent, kl
