"""Layer primitives and parameterized layers.

The forward functions here are fused ops with hand-derived gradients,
registered on the tape via :func:`eegbbnet.neural.tensor.from_op`.  The
convolution runs in the frequency domain (exact up to FFT roundoff),
which keeps epoch times reasonable on a single CPU.

Time-domain conventions: inputs are (batch, channels, time) or
(channels, time); convolutions are unpadded correlations with stride 1,
pooling is a stride-1 sliding maximum.  This is the unique combination
that maps 1000 input samples to 812 features (and 200 to 12) through the
two conv/pool stages of the model.
"""

from __future__ import annotations

import numpy as np
import scipy.fft as sfft
from scipy.ndimage import maximum_filter1d

from ..errors import ParameterError, ShapeError, StatisticsError
from .tensor import Tensor, from_op, grad_enabled, matmul, relu  # noqa: F401  (relu re-exported)


def glorot_uniform(rng: np.random.Generator, shape, fan_in: int, fan_out: int, dtype=np.float32):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


# -- depthwise temporal convolution -----------------------------------------


def _rfft_len(t: int) -> int:
    return sfft.next_fast_len(t, real=True)


def depthwise_conv_time(x: Tensor, kernels: Tensor, bias: Tensor | None = None) -> Tensor:
    """Per-channel 1-D correlation along time ("valid", stride 1).

    ``x`` is (batch, channels, time) or (channels, time); ``kernels`` is
    (channels, kernel_len): one kernel per channel, depth multiplier 1.
    Output time length is ``time - kernel_len + 1``.
    """
    squeeze = x.ndim == 2
    xd = x.data[None] if squeeze else x.data
    if xd.ndim != 3:
        raise ShapeError(f"conv input must be 2-D or 3-D, got shape {x.shape}")
    kd = kernels.data
    if kd.ndim != 2 or kd.shape[0] != xd.shape[1]:
        raise ShapeError(f"kernels {kernels.shape} do not match input channels {xd.shape[1]}")
    t = xd.shape[-1]
    klen = kd.shape[-1]
    if t < klen:
        raise ShapeError(f"input length {t} shorter than kernel {klen}")
    w = t - klen + 1
    length = _rfft_len(t)
    x_hat = sfft.rfft(xd, length, axis=-1)
    k_hat = sfft.rfft(kd, length, axis=-1)
    out = sfft.irfft(x_hat * np.conj(k_hat), length, axis=-1)[..., :w]
    out = np.ascontiguousarray(out, dtype=xd.dtype)
    if bias is not None:
        out += bias.data[:, None]
    if squeeze:
        out = out[0]

    def grad_fn(g):
        gd = g[None] if squeeze else g
        g_hat = sfft.rfft(gd, length, axis=-1)
        gx = gk = None
        if x.requires_grad:
            gx = sfft.irfft(g_hat * k_hat, length, axis=-1)[..., :t]
            gx = np.ascontiguousarray(gx[0] if squeeze else gx, dtype=xd.dtype)
        if kernels.requires_grad:
            gk = sfft.irfft((x_hat * np.conj(g_hat)).sum(axis=0), length, axis=-1)[..., :klen]
            gk = np.ascontiguousarray(gk, dtype=kd.dtype)
        if bias is None:
            return gx, gk
        gb = gd.sum(axis=(0, 2)).astype(bias.data.dtype, copy=False)
        return gx, gk, gb

    parents = (x, kernels) if bias is None else (x, kernels, bias)
    return from_op(out, parents, grad_fn)


# -- sliding-window max pooling ----------------------------------------------

try:  # optional JIT for the pooling hot loop; the numpy path is equivalent
    import numba

    @numba.njit(cache=True)
    def _sliding_max_kernel(x2d, window, out_val, out_idx):  # pragma: no cover
        rows, t = x2d.shape
        queue = np.empty(t, np.int64)
        for r in range(rows):
            head = 0
            tail = 0
            for i in range(t):
                v = x2d[r, i]
                while tail > head and x2d[r, queue[tail - 1]] < v:
                    tail -= 1
                queue[tail] = i
                tail += 1
                if queue[head] <= i - window:
                    head += 1
                if i >= window - 1:
                    out_val[r, i - window + 1] = x2d[r, queue[head]]
                    out_idx[r, i - window + 1] = queue[head]

    @numba.njit(cache=True)
    def _pool_scatter_kernel(grad2d, idx2d, out2d):  # pragma: no cover
        rows, w_out = grad2d.shape
        for r in range(rows):
            for i in range(w_out):
                out2d[r, idx2d[r, i]] += grad2d[r, i]

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    _HAVE_NUMBA = False


def _sliding_max_with_argmax(x: np.ndarray, window: int):
    """Stride-1 sliding max and its (lowest-index) argmax along the last axis."""
    if _HAVE_NUMBA:
        t = x.shape[-1]
        x2d = np.ascontiguousarray(x).reshape(-1, t)
        w_out = t - window + 1
        out_val = np.empty((x2d.shape[0], w_out), dtype=x.dtype)
        out_idx = np.empty((x2d.shape[0], w_out), dtype=np.int64)
        _sliding_max_kernel(x2d, window, out_val, out_idx)
        return out_val.reshape(x.shape[:-1] + (w_out,)), out_idx.reshape(x.shape[:-1] + (w_out,))
    return _sliding_max_scan(x, window)


def _sliding_max_scan(x: np.ndarray, window: int):
    """Pure-numpy fallback: block prefix/suffix cummax, O(T) per signal.

    Every window [i, i+window) spans the suffix of one block and the prefix
    of the next; ties resolve to the suffix part, i.e. the lower index.
    """
    t = x.shape[-1]
    n_blocks = -(-t // window)
    pad = n_blocks * window - t
    if pad:
        fill = np.full(x.shape[:-1] + (pad,), -np.inf, dtype=x.dtype)
        xp = np.concatenate([x, fill], axis=-1)
    else:
        xp = x
    blocks = xp.reshape(x.shape[:-1] + (n_blocks, window))
    suf_val = blocks.copy()
    suf_idx = np.broadcast_to(
        np.arange(window, dtype=np.int64), blocks.shape
    ).copy()
    for j in range(window - 2, -1, -1):
        worse = blocks[..., j] < suf_val[..., j + 1]
        suf_val[..., j] = np.where(worse, suf_val[..., j + 1], blocks[..., j])
        suf_idx[..., j] = np.where(worse, suf_idx[..., j + 1], j)
    pre_val = blocks.copy()
    pre_idx = np.broadcast_to(
        np.arange(window, dtype=np.int64), blocks.shape
    ).copy()
    for j in range(1, window):
        keep = blocks[..., j] > pre_val[..., j - 1]
        pre_val[..., j] = np.where(keep, blocks[..., j], pre_val[..., j - 1])
        pre_idx[..., j] = np.where(keep, j, pre_idx[..., j - 1])
    base = (np.arange(n_blocks, dtype=np.int64) * window)[:, None]
    flat_shape = x.shape[:-1] + (n_blocks * window,)
    suf_val = suf_val.reshape(flat_shape)
    suf_gidx = (suf_idx + base).reshape(flat_shape)
    pre_val = pre_val.reshape(flat_shape)
    pre_gidx = (pre_idx + base).reshape(flat_shape)
    w_out = t - window + 1
    left_val = suf_val[..., :w_out]
    right_val = pre_val[..., window - 1 : window - 1 + w_out]
    left_wins = left_val >= right_val
    values = np.where(left_wins, left_val, right_val)
    indices = np.where(left_wins, suf_gidx[..., :w_out], pre_gidx[..., window - 1 :][..., :w_out])
    return values, indices


def max_pool_time(x: Tensor, window: int) -> Tensor:
    """Stride-1 sliding maximum along time.

    The subgradient routes to the argmax element of each window; ties go
    to the lowest index.
    """
    if window < 1:
        raise ParameterError("pool window must be >= 1")
    t = x.data.shape[-1]
    if t < window:
        raise ShapeError(f"input length {t} shorter than pool window {window}")
    if window == 1:
        return from_op(x.data.copy(), (x,), lambda g: (g,))
    if not (grad_enabled() and x.requires_grad):
        # eval path: values only, via the C maximum filter
        filt = maximum_filter1d(x.data, window, axis=-1, origin=-(window // 2))
        out = np.ascontiguousarray(filt[..., : t - window + 1])
        return from_op(out, (x,), lambda g: (None,))
    out, idx = _sliding_max_with_argmax(x.data, window)
    out = np.ascontiguousarray(out)
    shape = x.data.shape

    def grad_fn(g):
        lead = int(np.prod(shape[:-1])) if x.data.ndim > 1 else 1
        if _HAVE_NUMBA:
            gx = np.zeros((lead, t), dtype=x.data.dtype)
            _pool_scatter_kernel(
                np.ascontiguousarray(g).reshape(lead, -1), idx.reshape(lead, -1), gx
            )
            return (gx.reshape(shape),)
        base = (np.arange(lead, dtype=np.int64) * t).reshape(shape[:-1] + (1,))
        flat = (idx + base).ravel()
        gx = np.bincount(flat, weights=g.ravel().astype(np.float64), minlength=lead * t)
        return (gx.reshape(shape).astype(x.data.dtype, copy=False),)

    return from_op(out, (x,), grad_fn)


# -- batch normalization -----------------------------------------------------


def _feature_shape(ndim: int, n_features: int) -> tuple[int, ...]:
    # features live on axis 1; broadcast shape for (B, F) or (B, F, T)
    return (1, n_features) + (1,) * (ndim - 2)


def batch_norm(
    x: Tensor,
    gamma: Tensor,
    beta: Tensor,
    running_mean: np.ndarray,
    running_var: np.ndarray,
    eps: float = 1e-3,
    momentum: float = 0.99,
    train: bool = True,
) -> Tensor:
    """Normalize per feature (axis 1) across batch and time.

    Train mode uses biased batch statistics and updates the running
    buffers in place (``running = momentum * running + (1-momentum) * batch``);
    eval mode normalizes with the running buffers.
    """
    xd = x.data
    if xd.ndim < 2:
        raise ShapeError("batch norm input must be at least 2-D")
    n_features = xd.shape[1]
    fshape = _feature_shape(xd.ndim, n_features)
    red_axes = (0,) + tuple(range(2, xd.ndim))
    gamma_b = gamma.data.reshape(fshape)
    beta_b = beta.data.reshape(fshape)

    if train:
        if xd.shape[0] < 2:
            raise StatisticsError("train-mode batch norm needs a batch of >= 2")
        m = xd.mean(axis=red_axes)
        centered = xd - m.reshape(fshape)
        v = (centered**2).mean(axis=red_axes)
        inv = 1.0 / np.sqrt(v.reshape(fshape) + xd.dtype.type(eps))
        xhat = centered * inv
        running_mean *= momentum
        running_mean += (1.0 - momentum) * m.astype(running_mean.dtype)
        running_var *= momentum
        running_var += (1.0 - momentum) * v.astype(running_var.dtype)
        count = int(np.prod([xd.shape[ax] for ax in red_axes]))

        def grad_fn(g):
            dgamma = (g * xhat).sum(axis=red_axes).astype(gamma.data.dtype, copy=False)
            dbeta = g.sum(axis=red_axes).astype(beta.data.dtype, copy=False)
            dxhat = g * gamma_b
            s1 = dxhat.sum(axis=red_axes).reshape(fshape)
            s2 = (dxhat * xhat).sum(axis=red_axes).reshape(fshape)
            dx = (inv / count) * (count * dxhat - s1 - xhat * s2)
            return dx.astype(xd.dtype, copy=False), dgamma, dbeta

    else:
        inv = 1.0 / np.sqrt(running_var.reshape(fshape) + xd.dtype.type(eps))
        xhat = (xd - running_mean.reshape(fshape)) * inv
        xhat = xhat.astype(xd.dtype, copy=False)

        def grad_fn(g):
            dgamma = (g * xhat).sum(axis=red_axes).astype(gamma.data.dtype, copy=False)
            dbeta = g.sum(axis=red_axes).astype(beta.data.dtype, copy=False)
            dx = (g * gamma_b * inv).astype(xd.dtype, copy=False)
            return dx, dgamma, dbeta

    out = (gamma_b * xhat + beta_b).astype(xd.dtype, copy=False)
    return from_op(out, (x, gamma, beta), grad_fn)


# -- dropout -----------------------------------------------------------------


def dropout(x: Tensor, rate: float, rng: np.random.Generator | None, train: bool) -> Tensor:
    """Zero each element with probability ``rate`` and rescale survivors.

    Eval mode (or rate 0) is the identity.  The mask is drawn from the
    supplied generator, so the op is reproducible from the seed.
    """
    if not 0.0 <= rate < 1.0:
        raise ParameterError(f"dropout rate must be in [0, 1), got {rate}")
    if not train or rate == 0.0:
        return from_op(x.data, (x,), lambda g: (g,))
    if rng is None:
        raise ParameterError("train-mode dropout needs a random generator")
    draw_dtype = np.float32 if x.data.dtype == np.float32 else np.float64
    keep = rng.random(x.data.shape, dtype=draw_dtype) >= rate
    scale = 1.0 / (1.0 - rate)
    mask = keep.astype(x.data.dtype) * x.data.dtype.type(scale)
    out = x.data * mask

    def grad_fn(g):
        return (g * mask,)

    return from_op(out, (x,), grad_fn)


# -- softmax / cross-entropy ---------------------------------------------------


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax (plain numpy; used for prediction)."""
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_cross_entropy(logits: Tensor, labels: np.ndarray) -> Tensor:
    """Mean cross-entropy over the batch, in log-sum-exp form.

    ``logits`` is (batch, n_classes); ``labels`` are integer class ids.
    The gradient is (softmax - onehot) / batch.
    """
    ld = logits.data
    if ld.ndim != 2:
        raise ShapeError(f"logits must be 2-D, got {logits.shape}")
    b, m = ld.shape
    if m < 2:
        raise ParameterError("need at least 2 classes")
    labels = np.asarray(labels)
    if labels.shape != (b,):
        raise ShapeError(f"labels must have shape ({b},), got {labels.shape}")
    if labels.min() < 0 or labels.max() >= m:
        raise ParameterError(f"labels must lie in [0, {m})")
    z = ld - ld.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=1, keepdims=True))
    logp = z - lse
    loss = -logp[np.arange(b), labels].mean()

    def grad_fn(g):
        probs = np.exp(logp)
        probs[np.arange(b), labels] -= 1.0
        scale = np.asarray(g, dtype=ld.dtype) / ld.dtype.type(b)
        return (scale * probs.astype(ld.dtype, copy=False),)

    return from_op(np.asarray(loss, dtype=ld.dtype), (logits,), grad_fn)


# -- parameterized layers ------------------------------------------------------


class DepthwiseConvTime:
    """One trainable kernel (plus bias) per channel, correlated along time."""

    def __init__(self, n_channels: int, kernel_len: int, rng: np.random.Generator, dtype=np.float32):
        self.kernel = Tensor(
            glorot_uniform(rng, (n_channels, kernel_len), kernel_len, kernel_len, dtype),
            requires_grad=True,
        )
        self.bias = Tensor(np.zeros(n_channels, dtype=dtype), requires_grad=True)

    def __call__(self, x: Tensor) -> Tensor:
        return depthwise_conv_time(x, self.kernel, self.bias)

    def params(self):
        return [("kernel", self.kernel), ("bias", self.bias)]

    def state(self):
        return {}


class BatchNorm:
    """Batch normalization over axis 1 with running statistics."""

    def __init__(self, n_features: int, momentum: float = 0.99, eps: float = 1e-3, dtype=np.float32):
        self.gamma = Tensor(np.ones(n_features, dtype=dtype), requires_grad=True)
        self.beta = Tensor(np.zeros(n_features, dtype=dtype), requires_grad=True)
        self.running_mean = np.zeros(n_features, dtype=dtype)
        self.running_var = np.ones(n_features, dtype=dtype)
        self.momentum = momentum
        self.eps = eps

    def __call__(self, x: Tensor, train: bool) -> Tensor:
        return batch_norm(
            x, self.gamma, self.beta, self.running_mean, self.running_var,
            eps=self.eps, momentum=self.momentum, train=train,
        )

    def params(self):
        return [("gamma", self.gamma), ("beta", self.beta)]

    def state(self):
        return {"running_mean": self.running_mean, "running_var": self.running_var}


class Dense:
    """Affine map with bias."""

    def __init__(self, f_in: int, f_out: int, rng: np.random.Generator, dtype=np.float32):
        self.weight = Tensor(glorot_uniform(rng, (f_in, f_out), f_in, f_out, dtype), requires_grad=True)
        self.bias = Tensor(np.zeros(f_out, dtype=dtype), requires_grad=True)

    def __call__(self, x: Tensor) -> Tensor:
        return matmul(x, self.weight) + self.bias

    def params(self):
        return [("weight", self.weight), ("bias", self.bias)]

    def state(self):
        return {}


class GraphConv:
    """Trainable feature map of one graph-convolution layer (no bias)."""

    def __init__(self, f_in: int, f_out: int, rng: np.random.Generator, dtype=np.float32):
        self.weight = Tensor(glorot_uniform(rng, (f_in, f_out), f_in, f_out, dtype), requires_grad=True)

    def params(self):
        return [("weight", self.weight)]

    def state(self):
        return {}
