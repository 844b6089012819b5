"""Dense feed-forward networks trained with backpropagation and Adam.

Three architectures are provided: correlation-entropy regression, chi
regression and [chi] classification over the classes (1, 2, 4). Hidden layers
use ReLU; the output layer is linear for regression and softmax for
classification.

Weights are initialized He-normal: ``W ~ N(0, 2 / fan_in)`` drawn layer by
layer from ``Generator(Philox(key=seed)).standard_normal``, biases zero.

Model file layout (all integers and reals little-endian)::

    offset  size  content
    0       8     magic b"NHTLMDL\\0"
    8       4     uint32 format version (1)
    12      4     uint32 header length H
    16      H     UTF-8 JSON header, keys sorted, no whitespace:
                    {"arch": {...}, "arrays": [{"name", "shape"}, ...],
                     "meta": {...}}
    16+H    ...   float64 payload: the arrays listed in "arrays", in order,
                  each row-major (scaler_mean, scaler_std, W0, b0, W1, b1, ...)

``W_i`` has shape (fan_in, fan_out) so a layer computes ``x @ W_i + b_i``.
"""

from __future__ import annotations

import json
import logging
import struct
from dataclasses import asdict, dataclass, field

import numpy as np

log = logging.getLogger(__name__)

CLASSES = (1, 2, 4)
MAGIC = b"NHTLMDL\0"
VERSION = 1

MAE = "mae"
CROSS_ENTROPY = "cross_entropy"

TASK_HIDDEN = {
    "entropy": [1024, 1024],
    "chi_reg": [128, 1024, 2048, 1024, 128],
    "chi_class": [128, 1024, 3072, 1024, 128],
}
TASK_LABEL = {"entropy": "c_corr", "chi_reg": "chi", "chi_class": "chi_class"}


class TrainingError(RuntimeError):
    pass


@dataclass
class ArchSpec:
    input_dim: int
    hidden: list[int]
    output: int = 1
    hidden_activation: str = "relu"
    output_activation: str = "linear"

    def __post_init__(self):
        self.hidden = [int(h) for h in self.hidden]
        if self.output_activation not in ("linear", "softmax"):
            raise ValueError(f"unknown output activation {self.output_activation!r}")
        if self.hidden_activation != "relu":
            raise ValueError("only relu hidden layers are supported")
        if (self.output_activation == "softmax") != (self.output > 1):
            raise ValueError("softmax output goes with a multi-class output layer")

    @property
    def is_classifier(self) -> bool:
        return self.output_activation == "softmax"

    @property
    def widths(self) -> list[int]:
        return [self.input_dim, *self.hidden, self.output]

    @property
    def loss(self) -> str:
        return CROSS_ENTROPY if self.is_classifier else MAE


def arch_for_task(task: str, input_dim: int, hidden=None) -> ArchSpec:
    if task not in TASK_HIDDEN:
        raise ValueError(f"unknown task {task!r}; expected one of {sorted(TASK_HIDDEN)}")
    hidden = TASK_HIDDEN[task] if hidden is None else hidden
    if task == "chi_class":
        return ArchSpec(input_dim, hidden, len(CLASSES), output_activation="softmax")
    return ArchSpec(input_dim, hidden, 1)


@dataclass
class TrainConfig:
    learning_rate: float = 1e-6
    batch_size: int = 64
    max_epochs: int = 200
    val_fraction: float = 0.1
    target_val_loss: float = 0.005
    seed: int = 0
    normalize_features: bool = True
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


@dataclass
class Network:
    arch: ArchSpec
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def params(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out


def init(arch: ArchSpec, seed: int = 0) -> Network:
    rng = np.random.Generator(np.random.Philox(key=seed))
    ws, bs = [], []
    for fan_in, fan_out in zip(arch.widths[:-1], arch.widths[1:]):
        ws.append(rng.standard_normal((fan_in, fan_out)) * np.sqrt(2.0 / fan_in))
        bs.append(np.zeros(fan_out))
    return Network(arch, ws, bs)


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _forward(net: Network, x: np.ndarray):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != net.arch.input_dim:
        raise ValueError(f"expected inputs of width {net.arch.input_dim}, got shape {x.shape}")
    acts = [x]
    last = len(net.weights) - 1
    h = x
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = h @ w + b
        h = np.maximum(z, 0.0) if i < last else z
        acts.append(h)
    return acts


def forward(net: Network, x: np.ndarray) -> np.ndarray:
    """Network outputs; softmax probabilities for classifiers."""
    logits = _forward(net, x)[-1]
    return softmax(logits) if net.arch.is_classifier else logits


def one_hot(labels) -> np.ndarray:
    labels = np.asarray(labels).astype(int).ravel()
    out = np.zeros((len(labels), len(CLASSES)))
    for k, c in enumerate(CLASSES):
        out[labels == c, k] = 1.0
    if not np.all(out.sum(axis=1) == 1):
        raise ValueError(f"class labels must be in {CLASSES}")
    return out


def _targets(net: Network, y) -> np.ndarray:
    if net.arch.is_classifier:
        y = np.asarray(y, dtype=np.float64)
        return y if y.ndim == 2 else one_hot(y)
    return np.asarray(y, dtype=np.float64).reshape(-1, net.arch.output)


def loss_and_gradients(net: Network, x: np.ndarray, y, loss: str | None = None):
    """Mean batch loss and its exact gradients ``[dW0, db0, dW1, db1, ...]``."""
    loss = loss or net.arch.loss
    acts = _forward(net, x)
    out = acts[-1]
    if not np.all(np.isfinite(out)):
        raise TrainingError("non-finite values in forward pass")
    y = _targets(net, y)
    n = out.shape[0]
    if loss == MAE:
        r = out - y
        value = float(np.abs(r).mean())
        delta = np.sign(r) / r.size
    elif loss == CROSS_ENTROPY:
        z = out - out.max(axis=1, keepdims=True)
        logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
        value = float(-(y * logp).sum() / n)
        delta = (np.exp(logp) - y) / n
    else:
        raise ValueError(f"unknown loss {loss!r}")

    grads = [None] * (2 * len(net.weights))
    for i in range(len(net.weights) - 1, -1, -1):
        grads[2 * i] = acts[i].T @ delta
        grads[2 * i + 1] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ net.weights[i].T) * (acts[i] > 0)
    return value, grads


class Adam:
    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self._tmp = [np.empty_like(p) for p in params]
        self.t = 0

    def step(self, grads) -> None:
        self.t += 1
        c1 = 1 - self.beta1**self.t
        c2 = 1 - self.beta2**self.t
        # in place; these arrays are large for the production widths
        for p, g, m, v, tmp in zip(self.params, grads, self.m, self.v, self._tmp):
            m *= self.beta1
            np.multiply(g, 1 - self.beta1, out=tmp)
            m += tmp
            v *= self.beta2
            np.multiply(g, g, out=tmp)
            tmp *= 1 - self.beta2
            v += tmp
            np.divide(v, c2, out=tmp)
            np.sqrt(tmp, out=tmp)
            tmp += self.eps
            np.divide(m, tmp, out=tmp)
            tmp *= self.lr / c1
            p -= tmp


@dataclass
class Scaler:
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, x: np.ndarray, enabled: bool = True) -> "Scaler":
        x = np.asarray(x, dtype=np.float64)
        if not enabled:
            return cls(np.zeros(x.shape[1]), np.ones(x.shape[1]))
        mean = x.mean(axis=0)
        std = x.std(axis=0)
        # constant columns (structural zeros) are only centred
        std = np.where(std > 1e-12 * np.maximum(1.0, np.abs(mean)), std, 1.0)
        return cls(mean, std)

    def transform(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=np.float64) - self.mean) / self.std


@dataclass
class Model:
    network: Network
    scaler: Scaler
    meta: dict = field(default_factory=dict)
    curve: list[tuple[int, float, float]] = field(default_factory=list)

    @property
    def arch(self) -> ArchSpec:
        return self.network.arch


def _split(n: int, val_fraction: float, rng: np.random.Generator):
    perm = rng.permutation(n)
    n_val = int(round(val_fraction * n)) if n > 1 else 0
    n_val = min(max(n_val, 1 if val_fraction > 0 and n > 1 else 0), n - 1)
    return perm[n_val:], perm[:n_val]


def _mean_loss(net, x, y, loss, chunk=4096):
    total = 0.0
    for s in range(0, len(x), chunk):
        value, _ = _loss_only(net, x[s:s + chunk], y[s:s + chunk], loss)
        total += value * len(x[s:s + chunk])
    return total / len(x)


def _loss_only(net, x, y, loss):
    out = _forward(net, x)[-1]
    y = _targets(net, y)
    if loss == MAE:
        return float(np.abs(out - y).mean()), None
    z = out - out.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    return float(-(y * logp).sum() / len(out)), None


def train(x, y, arch: ArchSpec, config: TrainConfig | None = None, network: Network | None = None) -> Model:
    """Adam training with validation-loss early stopping.

    The validation split (``config.val_fraction``) and every epoch's
    shuffle come from a Philox generator keyed by ``config.seed``. Training
    stops once the validation loss reaches ``config.target_val_loss`` or after
    ``config.max_epochs``.
    """
    config = config or TrainConfig()
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if len(x) == 0:
        raise ValueError("empty training set")
    if len(x) != len(y):
        raise ValueError("features and labels differ in length")
    rng = np.random.Generator(np.random.Philox(key=config.seed))
    train_idx, val_idx = _split(len(x), config.val_fraction, rng)
    scaler = Scaler.fit(x[train_idx], config.normalize_features)
    xs = scaler.transform(x)
    xt, yt = xs[train_idx], y[train_idx]
    xv, yv = xs[val_idx], y[val_idx]

    net = network or init(arch, config.seed)
    opt = Adam(net.params(), config.learning_rate, config.beta1, config.beta2, config.eps)
    batch = min(config.batch_size, len(xt))
    curve = []
    val_loss = float("nan")
    epoch = 0
    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(len(xt))
        seen, total = 0, 0.0
        for s in range(0, len(xt), batch):
            idx = order[s:s + batch]
            value, grads = loss_and_gradients(net, xt[idx], yt[idx], arch.loss)
            if not np.isfinite(value):
                raise TrainingError(f"non-finite loss at epoch {epoch}")
            opt.step(grads)
            total += value * len(idx)
            seen += len(idx)
        train_loss = total / seen
        val_loss = _mean_loss(net, xv, yv, arch.loss) if len(xv) else train_loss
        curve.append((epoch, train_loss, val_loss))
        log.info("epoch %d train %.6g val %.6g", epoch, train_loss, val_loss)
        if val_loss <= config.target_val_loss:
            break

    meta = {
        "seed": config.seed,
        "epochs": epoch,
        "final_train_loss": curve[-1][1],
        "final_val_loss": val_loss,
        "learning_rate": config.learning_rate,
        "batch_size": config.batch_size,
        "n_train": int(len(train_idx)),
        "n_val": int(len(val_idx)),
    }
    if arch.is_classifier and len(xv):
        meta["val_accuracy"] = accuracy(classify(forward(net, xv)), yv)
    elif len(xv):
        meta["val_mae"] = float(np.abs(forward(net, xv).ravel() - yv).mean())
    return Model(net, scaler, meta, curve)


def classify(probs: np.ndarray) -> np.ndarray:
    return np.asarray(CLASSES)[np.argmax(probs, axis=1)]


def accuracy(pred, true) -> float:
    pred, true = np.asarray(pred).ravel(), np.asarray(true).ravel()
    return float((pred == true).mean()) if len(true) else float("nan")


def predict(model: Model, x):
    """Regression: array of values. Classification: (classes, probabilities)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.arch.input_dim:
        raise ValueError(f"model expects {model.arch.input_dim} features, got shape {x.shape}")
    out = forward(model.network, model.scaler.transform(x))
    if model.arch.is_classifier:
        return classify(out), out
    return out.ravel()


def _header_json(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()


def to_bytes(model: Model) -> bytes:
    arrays = [("scaler_mean", model.scaler.mean), ("scaler_std", model.scaler.std)]
    for i, (w, b) in enumerate(zip(model.network.weights, model.network.biases)):
        arrays += [(f"W{i}", w), (f"b{i}", b)]
    header = _header_json({
        "arch": asdict(model.arch),
        "arrays": [{"name": n, "shape": list(a.shape)} for n, a in arrays],
        "meta": model.meta,
    })
    payload = b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes() for _, a in arrays)
    return MAGIC + struct.pack("<II", VERSION, len(header)) + header + payload


def from_bytes(data: bytes) -> Model:
    if data[:8] != MAGIC:
        raise ValueError("not a model file (bad magic)")
    version, hlen = struct.unpack_from("<II", data, 8)
    if version != VERSION:
        raise ValueError(f"unsupported model file version {version}")
    header = json.loads(data[16:16 + hlen].decode())
    arch = ArchSpec(**header["arch"])
    pos = 16 + hlen
    arrays = {}
    for spec in header["arrays"]:
        shape = tuple(spec["shape"])
        n = int(np.prod(shape))
        arrays[spec["name"]] = np.frombuffer(data, dtype="<f8", count=n, offset=pos).reshape(shape).astype(np.float64)
        pos += 8 * n
    if pos != len(data):
        raise ValueError("trailing bytes in model file")
    n_layers = len(arch.widths) - 1
    ws = [arrays[f"W{i}"] for i in range(n_layers)]
    bs = [arrays[f"b{i}"] for i in range(n_layers)]
    for i, w in enumerate(ws):
        if w.shape != (arch.widths[i], arch.widths[i + 1]):
            raise ValueError(f"layer {i} weight shape {w.shape} inconsistent with arch")
    if arrays["scaler_mean"].shape != (arch.input_dim,):
        raise ValueError("scaler length differs from input width")
    return Model(Network(arch, ws, bs), Scaler(arrays["scaler_mean"], arrays["scaler_std"]), header["meta"])


def save(model: Model, path) -> None:
    with open(path, "wb") as fh:
        fh.write(to_bytes(model))


def load(path) -> Model:
    with open(path, "rb") as fh:
        return from_bytes(fh.read())
