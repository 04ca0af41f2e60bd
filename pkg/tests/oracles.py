"""Naive scalar-loop reference implementations used by the tests.

Deliberately written as slow, obvious, two-nested-loop code over Python
floats: these are the independent oracles the fast vectorized paths are
checked against.
"""

import math

import numpy as np

TWO_PI = 2.0 * math.pi


def pearson_oracle(data):
    n, t = data.shape
    out = [[1.0] * n for _ in range(n)]
    for k in range(n):
        for l in range(n):
            xk = [float(v) for v in data[k]]
            xl = [float(v) for v in data[l]]
            mk = sum(xk) / t
            ml = sum(xl) / t
            num = sum((xk[i] - mk) * (xl[i] - ml) for i in range(t))
            dk = math.sqrt(sum((v - mk) ** 2 for v in xk))
            dl = math.sqrt(sum((v - ml) ** 2 for v in xl))
            out[k][l] = num / (dk * dl) if k != l else 1.0
    return np.array(out)


def relative_phase_oracle(phase_k, phase_l):
    return [abs(float(a) - float(b)) % TWO_PI for a, b in zip(phase_k, phase_l)]


def plv_oracle(phase):
    n, t = phase.shape
    out = [[1.0] * n for _ in range(n)]
    for k in range(n):
        for l in range(n):
            if k == l:
                continue
            dphi = relative_phase_oracle(phase[k], phase[l])
            re = sum(math.cos(d) for d in dphi) / t
            im = sum(math.sin(d) for d in dphi) / t
            out[k][l] = math.sqrt(re * re + im * im)
    return np.array(out)


def _wrap_signed(value):
    return math.pi - (math.pi - value) % TWO_PI


def pli_oracle(phase, signed=True):
    n, t = phase.shape
    out = [[0.0] * n for _ in range(n)]
    for k in range(n):
        for l in range(n):
            if k == l:
                continue
            total = 0.0
            for i in range(t):
                d = float(phase[k][i]) - float(phase[l][i])
                if signed:
                    d = _wrap_signed(d)
                else:
                    d = abs(d) % TWO_PI
                total += (d > 0) - (d < 0)
            out[k][l] = abs(total / t)
    return np.array(out)


def rho_oracle(phase, n_bins=None):
    n, t = phase.shape
    bins = t if n_bins is None else n_bins
    out = [[1.0] * n for _ in range(n)]
    for k in range(n):
        for l in range(n):
            if k == l:
                continue
            counts = [0] * bins
            for i in range(t):
                d = abs(float(phase[k][i]) - float(phase[l][i])) % TWO_PI
                idx = min(int(d * bins / TWO_PI), bins - 1)
                counts[idx] += 1
            entropy = 0.0
            for c in counts:
                if c > 0:
                    p = c / t
                    entropy -= p * math.log(p)
            out[k][l] = 1.0 - entropy / math.log(bins)
    return np.array(out)


def conv_valid_oracle(x, kernels):
    """Per-channel valid correlation, nested loops."""
    n, t = x.shape
    klen = kernels.shape[1]
    w = t - klen + 1
    out = np.zeros((n, w))
    for c in range(n):
        for i in range(w):
            acc = 0.0
            for j in range(klen):
                acc += float(x[c, i + j]) * float(kernels[c, j])
            out[c, i] = acc
    return out


def sliding_max_oracle(x, window):
    n, t = x.shape
    w = t - window + 1
    out = np.zeros((n, w))
    for c in range(n):
        for i in range(w):
            out[c, i] = max(float(v) for v in x[c, i : i + window])
    return out


def matmul_oracle(a, b):
    n, k = a.shape
    k2, m = b.shape
    assert k == k2
    out = np.zeros((n, m))
    for i in range(n):
        for j in range(m):
            acc = 0.0
            for p in range(k):
                acc += float(a[i, p]) * float(b[p, j])
            out[i, j] = acc
    return out


def batch_norm_oracle(x, eps=1e-3):
    """Per-feature normalization of a 2-D batch, scalar loops."""
    b, f = x.shape
    out = np.zeros_like(x, dtype=np.float64)
    for j in range(f):
        col = [float(v) for v in x[:, j]]
        mean = sum(col) / b
        var = sum((v - mean) ** 2 for v in col) / b
        for i in range(b):
            out[i, j] = (col[i] - mean) / math.sqrt(var + eps)
    return out


def adam_oracle(param, grad, steps, lr=1e-3, b1=0.9, b2=0.999, eps=1e-8):
    """Scalar Adam on one coordinate sequence; grad is constant."""
    p = float(param)
    m = 0.0
    v = 0.0
    for t in range(1, steps + 1):
        m = b1 * m + (1 - b1) * grad
        v = b2 * v + (1 - b2) * grad * grad
        m_hat = m / (1 - b1**t)
        v_hat = v / (1 - b2**t)
        p -= lr * m_hat / (math.sqrt(v_hat) + eps)
    return p
