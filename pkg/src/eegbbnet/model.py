"""Model assembly and the training loop.

Two architectures share the graph-convolution and classification tail:

* ``"bbnet"`` — depthwise-conv feature extraction feeding the graph
  convolution (the full hybrid model);
* ``"gcn"`` — the graph-only baseline, where the raw channel-by-time
  matrix is used directly as node features.

Training minimizes softmax cross-entropy with Adam, stops early when the
validation loss has not improved for ``patience`` consecutive epochs and
restores the parameters of the best validation epoch.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field, replace

import numpy as np

from .connectivity import MEASURES
from .errors import ParameterError, ShapeError, TrainingDivergedError
from .neural import (
    Adam,
    BatchNorm,
    Dense,
    DepthwiseConvTime,
    GraphConv,
    Tensor,
    load_checkpoint,
    save_checkpoint,
    softmax,
    softmax_cross_entropy,
)
from .neural.layers import dropout as dropout_op
from .neural.layers import max_pool_time
from .neural.tensor import matmul, no_grad, relu, reshape

ARCHITECTURES = ("bbnet", "gcn")


@dataclass
class ModelConfig:
    """Hyperparameters of one model instance."""

    n_channels: int
    input_len: int
    n_classes: int
    measure: str = "COR"
    architecture: str = "bbnet"
    conv_kernel: int = 64
    pool_window: int = 32
    gconv_dims: tuple[int, int] = (64, 32)
    dense_dims: tuple[int, int] = (256, 128)
    dropout: float = 0.2
    learning_rate: float = 0.001
    batch_size: int = 32
    patience: int = 20
    max_epochs: int = 500
    seed: int = 0
    dtype: str = "float32"
    signed_degree: bool = False

    def __post_init__(self):
        if self.n_channels < 2:
            raise ParameterError("need at least 2 channels")
        if self.n_classes < 2:
            raise ParameterError("need at least 2 classes")
        if not 0.0 <= self.dropout < 1.0:
            raise ParameterError("dropout must be in [0, 1)")
        if self.architecture not in ARCHITECTURES:
            raise ParameterError(f"unknown architecture {self.architecture!r}")
        if self.measure.upper() not in MEASURES:
            raise ParameterError(f"unknown measure {self.measure!r}")
        if min(self.gconv_dims) < 1 or min(self.dense_dims) < 1:
            raise ParameterError("layer dimensions must be positive")
        if self.batch_size < 2:
            raise ParameterError("batch size must be >= 2 (batch norm needs it)")
        if self.architecture == "bbnet":
            # raises ShapeError if the conv/pool stack does not fit
            feature_length(self.input_len, self.conv_kernel, self.pool_window)

    @property
    def np_dtype(self):
        return np.float32 if self.dtype == "float32" else np.float64


def feature_length(input_len: int, conv_kernel: int = 64, pool_window: int = 32) -> int:
    """Propagate the time axis through conv/pool/conv/pool.

    Each "valid" stride-1 stage shortens the axis; the result is
    ``input_len - 2*(conv_kernel-1) - 2*(pool_window-1)``.  Raises if any
    stage underflows.
    """
    t = input_len
    for stage, width in (("conv1", conv_kernel), ("pool1", pool_window),
                         ("conv2", conv_kernel), ("pool2", pool_window)):
        if t < width:
            raise ShapeError(
                f"input length {input_len} too short: {stage} needs {width}, has {t}"
            )
        t = t - width + 1
    return t


class Network:
    """Parameter container plus forward passes for both architectures."""

    def __init__(self, config: ModelConfig):
        self.config = config
        dtype = config.np_dtype
        seq = np.random.SeedSequence(config.seed)
        init_rng, self.dropout_rng, self.shuffle_rng = (
            np.random.default_rng(s) for s in seq.spawn(3)
        )
        n = config.n_channels
        g1, g2 = config.gconv_dims
        d1, d2 = config.dense_dims
        self.layers: dict[str, object] = {}
        if config.architecture == "bbnet":
            self.feature_dim = feature_length(config.input_len, config.conv_kernel, config.pool_window)
            self.layers["conv1"] = DepthwiseConvTime(n, config.conv_kernel, init_rng, dtype)
            self.layers["bn1"] = BatchNorm(n, dtype=dtype)
            self.layers["conv2"] = DepthwiseConvTime(n, config.conv_kernel, init_rng, dtype)
            self.layers["bn2"] = BatchNorm(n, dtype=dtype)
        else:
            self.feature_dim = config.input_len
        self.layers["gc1"] = GraphConv(self.feature_dim, g1, init_rng, dtype)
        self.layers["gc2"] = GraphConv(g1, g2, init_rng, dtype)
        self.layers["fc1"] = Dense(n * g2, d1, init_rng, dtype)
        self.layers["fc2"] = Dense(d1, d2, init_rng, dtype)
        self.layers["out"] = Dense(d2, config.n_classes, init_rng, dtype)

    # -- parameters ---------------------------------------------------------

    def named_params(self) -> list[tuple[str, Tensor]]:
        out = []
        for lname, layer in self.layers.items():
            for pname, p in layer.params():
                out.append((f"{lname}.{pname}", p))
        return out

    def state_dict(self) -> dict[str, np.ndarray]:
        state = {name: p.data for name, p in self.named_params()}
        for lname, layer in self.layers.items():
            for sname, arr in layer.state().items():
                state[f"{lname}.{sname}"] = arr
        return state

    def load_state_dict(self, state: dict[str, np.ndarray]):
        own = self.state_dict()
        missing = set(own) - set(state)
        extra = set(state) - set(own)
        if missing or extra:
            raise ParameterError(f"state mismatch: missing {sorted(missing)}, extra {sorted(extra)}")
        for name, p in self.named_params():
            if own[name].shape != state[name].shape:
                raise ShapeError(f"{name}: shape {state[name].shape} != {own[name].shape}")
            p.data = np.array(state[name], dtype=p.data.dtype)
        for lname, layer in self.layers.items():
            for sname, arr in layer.state().items():
                arr[...] = state[f"{lname}.{sname}"]

    def snapshot(self) -> dict[str, np.ndarray]:
        return {k: v.copy() for k, v in self.state_dict().items()}

    def param_count(self) -> int:
        return sum(p.data.size for _, p in self.named_params())

    # -- forward -------------------------------------------------------------

    def extract_features(self, x: Tensor, train: bool) -> Tensor:
        cfg = self.config
        h = self.layers["conv1"](x)
        h = self.layers["bn1"](h, train)
        h = relu(h)
        h = max_pool_time(h, cfg.pool_window)
        h = self.layers["conv2"](h)
        h = self.layers["bn2"](h, train)
        h = relu(h)
        h = max_pool_time(h, cfg.pool_window)
        return dropout_op(h, cfg.dropout, self.dropout_rng, train)

    def forward_batch(self, x: np.ndarray, ops: np.ndarray, train: bool) -> Tensor:
        """Logits for a (batch, channels, time) stack.

        ``ops`` is the per-trial normalized operator stack
        (batch, n, n), or a single (n, n) matrix shared by the batch.
        """
        cfg = self.config
        if x.ndim != 3 or x.shape[1] != cfg.n_channels or x.shape[2] != cfg.input_len:
            raise ShapeError(
                f"expected batch of ({cfg.n_channels}, {cfg.input_len}) trials, got {x.shape}"
            )
        xt = Tensor(np.ascontiguousarray(x, dtype=cfg.np_dtype))
        if cfg.architecture == "bbnet":
            h = self.extract_features(xt, train)
        else:
            h = xt
        p = Tensor(np.ascontiguousarray(ops, dtype=cfg.np_dtype))
        h = relu(matmul(matmul(p, h), self.layers["gc1"].weight))
        h = dropout_op(h, cfg.dropout, self.dropout_rng, train)
        h = relu(matmul(matmul(p, h), self.layers["gc2"].weight))
        h = dropout_op(h, cfg.dropout, self.dropout_rng, train)
        h = reshape(h, (h.shape[0], cfg.n_channels * cfg.gconv_dims[1]))
        h = relu(self.layers["fc1"](h))
        h = dropout_op(h, cfg.dropout, self.dropout_rng, train)
        h = relu(self.layers["fc2"](h))
        return self.layers["out"](h)

    def predict_probs(self, x: np.ndarray, ops: np.ndarray) -> np.ndarray:
        """Eval-mode class probabilities, one simplex row per trial."""
        with no_grad():
            logits = self.forward_batch(x, ops, train=False)
        return softmax(logits.data.astype(np.float64))

    def feature_matrix(self, trial) -> np.ndarray:
        """Eval-mode node-feature matrix (channels x features) of one trial.

        Accepts a Trial or a raw (channels, time) array.
        """
        from .signal import Trial

        trial_data = trial.data if isinstance(trial, Trial) else trial
        if self.config.architecture != "bbnet":
            return np.asarray(trial_data, dtype=np.float64)
        x = Tensor(np.asarray(trial_data, dtype=self.config.np_dtype)[None])
        with no_grad():
            h = self.extract_features(x, train=False)
        return h.data[0].astype(np.float64)


class EarlyStopper:
    """Stop after ``patience`` consecutive epochs without improvement."""

    def __init__(self, patience: int):
        if patience < 1:
            raise ParameterError("patience must be >= 1")
        self.patience = patience
        self.best_loss = np.inf
        self.best_epoch = 0
        self.stale = 0

    def update(self, loss: float, epoch: int) -> bool:
        """Record one epoch; returns True when this epoch is the new best."""
        if loss < self.best_loss:
            self.best_loss = loss
            self.best_epoch = epoch
            self.stale = 0
            return True
        self.stale += 1
        return False

    @property
    def should_stop(self) -> bool:
        return self.stale >= self.patience


@dataclass
class TrainedModel:
    """Fit result: the network plus its training history."""

    config: ModelConfig
    network: Network
    history: list[tuple[int, float, float]] = field(default_factory=list)
    best_epoch: int = 0

    def save(self, path):
        save_checkpoint(path, self.state_for_checkpoint())

    def state_for_checkpoint(self) -> dict[str, np.ndarray]:
        return self.network.state_dict()

    @classmethod
    def load(cls, path, config: ModelConfig) -> "TrainedModel":
        network = Network(config)
        state = load_checkpoint(path)
        target = network.state_dict()
        network.load_state_dict(
            {k: v.astype(target[k].dtype) if k in target else v for k, v in state.items()}
        )
        return cls(config=config, network=network)


def _batch_slices(n: int, batch_size: int):
    """Contiguous batch index ranges; a trailing singleton joins its neighbor."""
    edges = list(range(0, n, batch_size)) + [n]
    if len(edges) > 2 and edges[-1] - edges[-2] == 1:
        edges.pop(-2)
    return list(zip(edges[:-1], edges[1:]))


def _epoch_loss(pieces: list[tuple[float, int]]) -> float:
    total = sum(l * c for l, c in pieces)
    count = sum(c for _, c in pieces)
    return total / count


def evaluate_loss(network: Network, data, batch_size: int = 256) -> float:
    """Mean cross-entropy of a (X, y, ops) triple in eval mode."""
    x, y, ops = data
    pieces = []
    with no_grad():
        for lo, hi in _batch_slices(len(y), batch_size):
            logits = network.forward_batch(x[lo:hi], _op_slice(ops, lo, hi), train=False)
            loss = softmax_cross_entropy(logits, y[lo:hi])
            pieces.append((float(loss.data), hi - lo))
    return _epoch_loss(pieces)


def _op_slice(ops: np.ndarray, lo: int, hi: int) -> np.ndarray:
    return ops if ops.ndim == 2 else ops[lo:hi]


def _op_take(ops: np.ndarray, idx: np.ndarray) -> np.ndarray:
    return ops if ops.ndim == 2 else ops[idx]


def fit(train, validation, config: ModelConfig) -> TrainedModel:
    """Train a network on (X, y, ops) triples.

    ``X`` is (n, channels, time), ``y`` integer labels, ``ops`` either a
    per-trial (n, channels, channels) operator stack or one shared
    matrix.  Stops early on stagnating validation loss and restores the
    best-epoch parameters.
    """
    x_train, y_train, ops_train = train
    if len(y_train) == 0 or len(validation[1]) == 0:
        raise ParameterError("train and validation sets must be non-empty")
    if len(np.unique(y_train)) < 2:
        raise ParameterError("training set must contain at least 2 classes")
    network = Network(config)
    optimizer = Adam(network.named_params(), lr=config.learning_rate)
    stopper = EarlyStopper(config.patience)
    history: list[tuple[int, float, float]] = []
    best_state = network.snapshot()
    n = len(y_train)
    for epoch in range(1, config.max_epochs + 1):
        order = network.shuffle_rng.permutation(n)
        pieces = []
        for lo, hi in _batch_slices(n, config.batch_size):
            idx = order[lo:hi]
            logits = network.forward_batch(x_train[idx], _op_take(ops_train, idx), train=True)
            loss = softmax_cross_entropy(logits, y_train[idx])
            loss_value = float(loss.data)
            if not np.isfinite(loss_value):
                raise TrainingDivergedError(
                    f"non-finite training loss {loss_value} at epoch {epoch}"
                )
            loss.backward()
            optimizer.step()
            optimizer.zero_grad()
            pieces.append((loss_value, hi - lo))
        train_loss = _epoch_loss(pieces)
        val_loss = evaluate_loss(network, validation)
        history.append((epoch, train_loss, val_loss))
        if stopper.update(val_loss, epoch):
            best_state = network.snapshot()
        if stopper.should_stop:
            break
    network.load_state_dict(best_state)
    return TrainedModel(
        config=config, network=network, history=history, best_epoch=stopper.best_epoch
    )


def predict(model: TrainedModel, x: np.ndarray, ops: np.ndarray) -> np.ndarray:
    """Most probable subject id per trial; ties break to the lowest index."""
    if x.ndim == 2:
        x = x[None]
    probs = model.network.predict_probs(x, ops)
    return probs.argmax(axis=1)


def predict_in_batches(model: TrainedModel, data, batch_size: int = 256) -> np.ndarray:
    x, _, ops = data
    parts = []
    for lo, hi in _batch_slices(x.shape[0], batch_size):
        parts.append(predict(model, x[lo:hi], _op_slice(ops, lo, hi)))
    return np.concatenate(parts)


def gcn_only_config(config: ModelConfig) -> ModelConfig:
    """The graph-only baseline twin of a configuration."""
    return replace(config, architecture="gcn")


def clone_network(network: Network) -> Network:
    """Deep copy (used to snapshot models across fine-tuning repetitions)."""
    twin = Network(network.config)
    twin.load_state_dict(copy.deepcopy(network.state_dict()))
    return twin
