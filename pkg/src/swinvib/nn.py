"""Minimal neural-network primitives with hand-derived gradients.

Each layer exposes a forward returning ``(out, cache)`` and a backward
consuming ``(dout, cache)``. Everything is float64 numpy; no autodiff
framework is involved, which keeps the gradient path checkable against
finite differences.
"""

import numpy as np

BN_EPS = 1e-5
BN_MOMENTUM = 0.1


def affine_forward(x, w, b):
    return x @ w + b, (x, w)


def affine_backward(dout, cache):
    x, w = cache
    return dout @ w.T, x.T @ dout, dout.sum(axis=0)


def relu_forward(x):
    return np.maximum(x, 0.0), x


def relu_backward(dout, cache):
    return dout * (cache > 0.0)


def batchnorm_forward(x, gamma, beta, running_mean, running_var, *, training,
                      momentum=BN_MOMENTUM, eps=BN_EPS):
    """Feature-wise batch normalization.

    Training mode normalizes with biased batch statistics and returns
    updated running statistics (unbiased variance, torch convention);
    inference mode uses the running statistics unchanged.
    """
    if training:
        mu = x.mean(axis=0)
        centered = x - mu
        var = np.mean(centered * centered, axis=0)
        inv_std = 1.0 / np.sqrt(var + eps)
        x_hat = centered * inv_std
        n = x.shape[0]
        unbiased = var * n / (n - 1) if n > 1 else var
        new_mean = (1.0 - momentum) * running_mean + momentum * mu
        new_var = (1.0 - momentum) * running_var + momentum * unbiased
        cache = (x_hat, inv_std, gamma)
        return gamma * x_hat + beta, cache, (new_mean, new_var)
    inv_std = 1.0 / np.sqrt(running_var + eps)
    x_hat = (x - running_mean) * inv_std
    cache = (x_hat, inv_std, gamma)
    return gamma * x_hat + beta, cache, (running_mean, running_var)


def batchnorm_backward(dout, cache):
    """Backward through training-mode batch normalization (batch statistics)."""
    x_hat, inv_std, gamma = cache
    n = dout.shape[0]
    dgamma = (dout * x_hat).sum(axis=0)
    dbeta = dout.sum(axis=0)
    dx_hat = dout * gamma
    dx = (inv_std / n) * (
        n * dx_hat - dx_hat.sum(axis=0) - x_hat * (dx_hat * x_hat).sum(axis=0)
    )
    return dx, dgamma, dbeta


def batchnorm_backward_inference(dout, cache):
    """Backward when the forward used fixed (running) statistics."""
    x_hat, inv_std, gamma = cache
    dgamma = (dout * x_hat).sum(axis=0)
    dbeta = dout.sum(axis=0)
    return dout * gamma * inv_std, dgamma, dbeta


def dropout_mask(rng, shape, rate):
    """Inverted-dropout mask: zeros with probability ``rate``, else 1/(1-rate)."""
    keep = 1.0 - rate
    return (rng.random(shape) < keep) / keep


def dropout_forward(x, mask):
    if mask is None:
        return x, None
    return x * mask, mask


def dropout_backward(dout, mask):
    if mask is None:
        return dout
    return dout * mask


def sigmoid(x):
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def bce_with_logits(logits, y):
    """Mean binary cross-entropy from logits (log-sum-exp form) and its gradient."""
    n = logits.shape[0]
    loss = float(np.mean(np.maximum(logits, 0.0) - logits * y + np.log1p(np.exp(-np.abs(logits)))))
    dlogits = (sigmoid(logits) - y) / n
    return loss, dlogits


class Adam:
    """Adaptive-moment stochastic gradient descent over one flat parameter vector.

    Operating on a single contiguous vector (with named tensors as views into
    it) keeps the update to a few in-place vector ops instead of a Python loop
    over tensors.
    """

    def __init__(self, learning_rate=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m = None
        self._v = None
        self._tmp = None

    def step(self, flat_params: np.ndarray, flat_grads: np.ndarray) -> None:
        if self._m is None:
            self._m = np.zeros_like(flat_params)
            self._v = np.zeros_like(flat_params)
            self._tmp = np.empty_like(flat_params)
        self.t += 1
        m, v, tmp = self._m, self._v, self._tmp
        np.subtract(flat_grads, m, out=tmp)
        tmp *= 1.0 - self.beta1
        m += tmp
        np.multiply(flat_grads, flat_grads, out=tmp)
        tmp -= v
        tmp *= 1.0 - self.beta2
        v += tmp
        np.divide(v, 1.0 - self.beta2**self.t, out=tmp)
        np.sqrt(tmp, out=tmp)
        tmp += self.eps
        np.divide(m, tmp, out=tmp)
        tmp *= self.learning_rate / (1.0 - self.beta1**self.t)
        flat_params -= tmp
