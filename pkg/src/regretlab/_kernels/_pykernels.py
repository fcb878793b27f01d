"""Numpy implementations of the hot kernels (fallback when the extension is absent).

Each function mirrors one in ``_ckernels.pyx`` with identical semantics. All
arrays are ``float64``; 2-D inputs are ``(T, d)`` gradient histories.
"""
import numpy as np


def prefix_sq_norms(G):
    return np.sqrt(np.cumsum(G * G, axis=0))


def lemma4_terms(G):
    """Per coordinate: sum_t g_{t,i}^2 / ||g_{1:t,i}||_2, zero-denominator terms dropped."""
    S = prefix_sq_norms(G)
    sq = G * G
    out = np.zeros_like(S)
    np.divide(sq, S, out=out, where=S > 0)
    return out.sum(axis=0)


def lemma103_terms(G):
    t = np.arange(1, G.shape[0] + 1, dtype=np.float64)
    return (np.abs(G) / np.sqrt(t)[:, None]).sum(axis=0)


def adam_moments(G, beta1, beta2, lam=1.0):
    """Bias-corrected first and second moments for every prefix of ``G``.

    The first-moment coefficient at step t is ``beta1 * lam**(t-1)``; bias
    correction always divides by ``1 - beta1**t`` and ``1 - beta2**t``.
    """
    T, d = G.shape
    mhat = np.empty((T, d))
    vhat = np.empty((T, d))
    m = np.zeros(d)
    v = np.zeros(d)
    b1_decay = beta1
    b1_pow = 1.0
    b2_pow = 1.0
    for k in range(T):
        g = G[k]
        m = b1_decay * m + (1.0 - b1_decay) * g
        v = beta2 * v + (1.0 - beta2) * (g * g)
        b1_pow *= beta1
        b2_pow *= beta2
        mhat[k] = m / (1.0 - b1_pow)
        vhat[k] = v / (1.0 - b2_pow)
        b1_decay *= lam
    return mhat, vhat


def lemma104_terms(G, beta1, beta2):
    """Per coordinate: sum_t mhat_{t,i}^2 / sqrt(t * vhat_{t,i}), zero-vhat terms dropped."""
    mhat, vhat = adam_moments(G, beta1, beta2)
    t = np.arange(1, G.shape[0] + 1, dtype=np.float64)[:, None]
    den = np.sqrt(t * vhat)
    out = np.zeros_like(den)
    np.divide(mhat * mhat, den, out=out, where=den > 0)
    return out.sum(axis=0)


def adagrad_update(theta, accum, g, eta, eps):
    new_accum = accum + g * g
    den = np.sqrt(new_accum + eps)
    step = np.zeros_like(theta)
    np.divide(eta * g, den, out=step, where=den > 0)
    return theta - step, new_accum


def adam_update(theta, m, v, g, beta1_t, beta2, bc1, bc2, eta_t, eps):
    new_m = beta1_t * m + (1.0 - beta1_t) * g
    new_v = beta2 * v + (1.0 - beta2) * (g * g)
    mhat = new_m / bc1
    vhat = new_v / bc2
    den = np.sqrt(vhat) + eps
    step = np.zeros_like(theta)
    np.divide(eta_t * mhat, den, out=step, where=den > 0)
    return theta - step, new_m, new_v
