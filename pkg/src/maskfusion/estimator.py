"""Two-head mask estimation network.

A frame-context MLP (257*context -> 200 -> 300 -> two 257-unit sigmoid
heads) trained against oracle IRM and TBM targets with the combined loss.
Forward, backward, and Adam are written out by hand so gradients stay
verifiable against finite differences.
"""
import struct
from dataclasses import dataclass, field, replace

import numpy as np

from .dsp import MagnitudeSpectrogram, Waveform, magnitude, stft
from .ioutil import atomic_write_bytes
from .masks import SOFT, Mask
from .objectives import LossWeights, combined_loss

CHECKPOINT_MAGIC = b"MFNN"
CHECKPOINT_VERSION = 1

_STD_FLOOR = 1e-8


class TrainingDivergedError(RuntimeError):
    """Raised when a loss or gradient stops being finite."""


@dataclass(frozen=True)
class EstimatorConfig:
    input_bins: int = 257
    context: int = 5
    hidden1: int = 200
    hidden2: int = 300
    seed: int = 0

    def __post_init__(self):
        if self.context < 1 or self.context % 2 == 0:
            raise ValueError(f"context must be a positive odd integer, got {self.context}")
        if min(self.input_bins, self.hidden1, self.hidden2) < 1:
            raise ValueError("all layer sizes must be >= 1")

    @property
    def input_dim(self):
        return self.input_bins * self.context


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    epochs: int = 20
    batch_frames: int = 256
    alpha: float = 0.1
    seed: int = 0
    dev_selection: bool = True

    def __post_init__(self):
        if self.learning_rate <= 0 or self.eps <= 0:
            raise ValueError("rates must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_frames < 1:
            raise ValueError("batch_frames must be >= 1")


# Parameter fields in serialization order.
PARAM_FIELDS = ("w1", "b1", "w2", "b2", "w_irm", "b_irm", "w_tbm", "b_tbm")


@dataclass
class Params:
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    w_irm: np.ndarray
    b_irm: np.ndarray
    w_tbm: np.ndarray
    b_tbm: np.ndarray

    def copy(self):
        return Params(**{k: getattr(self, k).copy() for k in PARAM_FIELDS})

    def items(self):
        return [(k, getattr(self, k)) for k in PARAM_FIELDS]


@dataclass
class AdamState:
    m: dict
    v: dict
    t: int = 0

    @classmethod
    def for_params(cls, params: Params):
        return cls(
            m={k: np.zeros_like(a) for k, a in params.items()},
            v={k: np.zeros_like(a) for k, a in params.items()},
        )


@dataclass(frozen=True)
class FeatureStats:
    """Per-bin mean / std of log(1 + magnitude), computed on training data."""

    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mean", np.asarray(self.mean, dtype=np.float64))
        object.__setattr__(
            self, "std", np.maximum(np.asarray(self.std, dtype=np.float64), _STD_FLOOR)
        )

    @classmethod
    def from_spectrograms(cls, mags):
        stacked = np.vstack([np.log1p(m.data) for m in mags])
        return cls(stacked.mean(axis=0), stacked.std(axis=0))


def _glorot(rng, fan_in, fan_out):
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


def init_params(cfg: EstimatorConfig) -> Params:
    """Seeded uniform Glorot weights, zero biases."""
    rng = np.random.default_rng(cfg.seed)
    d = cfg.input_dim
    return Params(
        w1=_glorot(rng, d, cfg.hidden1),
        b1=np.zeros(cfg.hidden1),
        w2=_glorot(rng, cfg.hidden1, cfg.hidden2),
        b2=np.zeros(cfg.hidden2),
        w_irm=_glorot(rng, cfg.hidden2, cfg.input_bins),
        b_irm=np.zeros(cfg.input_bins),
        w_tbm=_glorot(rng, cfg.hidden2, cfg.input_bins),
        b_tbm=np.zeros(cfg.input_bins),
    )


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def featurize(noisy_mag: MagnitudeSpectrogram, stats: FeatureStats, context: int = 5):
    """Standardized log-magnitude frames stacked over a context window.

    Frame t becomes the concatenation of frames t-c//2 .. t+c//2, with
    edge frames replicated; output shape (M, bins * context).
    """
    if context < 1 or context % 2 == 0:
        raise ValueError(f"context must be a positive odd integer, got {context}")
    z = (np.log1p(noisy_mag.data) - stats.mean) / stats.std
    m = z.shape[0]
    half = context // 2
    idx = np.clip(np.arange(m)[:, None] + np.arange(-half, half + 1), 0, m - 1)
    return z[idx].reshape(m, -1)


def forward(params: Params, features):
    """Run the net on (frames, input_dim) features.

    Returns (irm_pred, tbm_pred, cache); both predictions are sigmoid
    outputs in (0, 1), one row per frame.
    """
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != params.w1.shape[0]:
        raise ValueError(
            f"expected features of shape (frames, {params.w1.shape[0]}), got {x.shape}"
        )
    h1 = np.maximum(x @ params.w1 + params.b1, 0.0)
    h2 = np.maximum(h1 @ params.w2 + params.b2, 0.0)
    irm = _sigmoid(h2 @ params.w_irm + params.b_irm)
    tbm = _sigmoid(h2 @ params.w_tbm + params.b_tbm)
    return irm, tbm, (x, h1, h2, irm, tbm)


def backward(params: Params, cache, grad_irm, grad_tbm) -> Params:
    """Backprop loss gradients (w.r.t. the sigmoid outputs) to all parameters.

    The shared trunk accumulates contributions from both heads.
    """
    x, h1, h2, irm, tbm = cache
    if grad_irm.shape != irm.shape or grad_tbm.shape != tbm.shape:
        raise ValueError("loss gradient shapes do not match the forward cache")
    dz_irm = grad_irm * irm * (1.0 - irm)
    dz_tbm = grad_tbm * tbm * (1.0 - tbm)
    dh2 = dz_irm @ params.w_irm.T + dz_tbm @ params.w_tbm.T
    dz2 = dh2 * (h2 > 0)
    dh1 = dz2 @ params.w2.T
    dz1 = dh1 * (h1 > 0)
    return Params(
        w1=x.T @ dz1,
        b1=dz1.sum(axis=0),
        w2=h1.T @ dz2,
        b2=dz2.sum(axis=0),
        w_irm=h2.T @ dz_irm,
        b_irm=dz_irm.sum(axis=0),
        w_tbm=h2.T @ dz_tbm,
        b_tbm=dz_tbm.sum(axis=0),
    )


def adam_step(params: Params, grads: Params, state: AdamState, t: TrainConfig) -> Params:
    """Standard Adam update with bias correction; mutates params and state."""
    state.t += 1
    bc1 = 1.0 - t.beta1**state.t
    bc2 = 1.0 - t.beta2**state.t
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise TrainingDivergedError(f"non-finite gradient for {name}")
        m = state.m[name]
        v = state.v[name]
        m *= t.beta1
        m += (1.0 - t.beta1) * g
        v *= t.beta2
        v += (1.0 - t.beta2) * g**2
        getattr(params, name)[...] -= t.learning_rate * (m / bc1) / (
            np.sqrt(v / bc2) + t.eps
        )
    return params


@dataclass
class TrainItem:
    """One training utterance: noisy magnitudes plus oracle mask targets."""

    noisy_mag: MagnitudeSpectrogram
    irm: np.ndarray
    tbm: np.ndarray

    def __post_init__(self):
        self.irm = np.asarray(self.irm, dtype=np.float64)
        self.tbm = np.asarray(self.tbm, dtype=np.float64)


@dataclass
class EpochLog:
    epoch: int
    train_loss: float
    dev_loss: float
    kept: bool


def _dataset_loss(params, items, stats, cfg, weights):
    total, frames = 0.0, 0
    for item in items:
        feats = featurize(item.noisy_mag, stats, cfg.context)
        irm, tbm, _ = forward(params, feats)
        report = combined_loss(irm, tbm, item.irm, item.tbm, weights)
        total += report.total
        frames += feats.shape[0]
    return total / frames


def train(train_items, dev_items, cfg: EstimatorConfig, tcfg: TrainConfig):
    """Minibatch Adam training with per-epoch dev-set model selection.

    Returns (best_params, stats, list of EpochLog). The retained model is
    the one with the lowest dev loss seen so far; with dev_selection off
    the final epoch wins.
    """
    if not train_items or not dev_items:
        raise ValueError("train and dev sets must be non-empty")
    stats = FeatureStats.from_spectrograms([it.noisy_mag for it in train_items])
    weights = LossWeights(alpha=tcfg.alpha)
    params = init_params(cfg)
    state = AdamState.for_params(params)
    rng = np.random.default_rng(tcfg.seed)

    best_params = params.copy()
    best_dev = np.inf
    log = []
    for epoch in range(1, tcfg.epochs + 1):
        order = rng.permutation(len(train_items))
        epoch_loss, epoch_frames = 0.0, 0
        for utt_idx in order:
            item = train_items[utt_idx]
            feats = featurize(item.noisy_mag, stats, cfg.context)
            n = feats.shape[0]
            for start in range(0, n, tcfg.batch_frames):
                stop = min(start + tcfg.batch_frames, n)
                batch = slice(start, stop)
                irm, tbm, cache = forward(params, feats[batch])
                report = combined_loss(
                    irm, tbm, item.irm[batch], item.tbm[batch], weights
                )
                if not np.isfinite(report.total):
                    raise TrainingDivergedError(
                        f"non-finite training loss at epoch {epoch}"
                    )
                scale = 1.0 / (stop - start)
                grads = backward(
                    params, cache, scale * report.grad_irm, scale * report.grad_tbm
                )
                adam_step(params, grads, state, tcfg)
                epoch_loss += report.total
                epoch_frames += stop - start
        dev_loss = _dataset_loss(params, dev_items, stats, cfg, weights)
        if not np.isfinite(dev_loss):
            raise TrainingDivergedError(f"non-finite dev loss at epoch {epoch}")
        kept = dev_loss < best_dev or not tcfg.dev_selection
        if kept:
            best_dev = dev_loss
            best_params = params.copy()
        log.append(EpochLog(epoch, epoch_loss / epoch_frames, dev_loss, kept))
    return best_params, stats, log


def predict_masks(params: Params, noisy: Waveform, stats: FeatureStats, context: int = 5):
    """Estimated (irm, tbm) soft masks for an utterance."""
    feats = featurize(magnitude(stft(noisy)), stats, context)
    irm, tbm, _ = forward(params, feats)
    return Mask(irm, SOFT), Mask(tbm, SOFT)


def checkpoint_bytes(params: Params, stats: FeatureStats, cfg: EstimatorConfig) -> bytes:
    """Serialize: MFNN magic, version, config block, f64 weights, feature stats."""
    blob = bytearray()
    blob += CHECKPOINT_MAGIC
    blob += struct.pack(
        "<IIIIIq",
        CHECKPOINT_VERSION,
        cfg.input_bins,
        cfg.context,
        cfg.hidden1,
        cfg.hidden2,
        cfg.seed,
    )
    for _, arr in params.items():
        blob += arr.astype("<f8").tobytes()
    blob += stats.mean.astype("<f8").tobytes()
    blob += stats.std.astype("<f8").tobytes()
    return bytes(blob)


def save_checkpoint(path, params: Params, stats: FeatureStats, cfg: EstimatorConfig):
    atomic_write_bytes(path, checkpoint_bytes(params, stats, cfg))


def load_checkpoint(path):
    """Read a checkpoint back as (params, stats, config)."""
    with open(path, "rb") as f:
        raw = f.read()
    if raw[:4] != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not a model checkpoint (bad magic at byte 0)")
    version, bins, context, h1, h2, seed = struct.unpack_from("<IIIIIq", raw, 4)
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    cfg = EstimatorConfig(input_bins=bins, context=context, hidden1=h1, hidden2=h2, seed=seed)
    shapes = {
        "w1": (cfg.input_dim, h1), "b1": (h1,),
        "w2": (h1, h2), "b2": (h2,),
        "w_irm": (h2, bins), "b_irm": (bins,),
        "w_tbm": (h2, bins), "b_tbm": (bins,),
    }
    offset = 4 + struct.calcsize("<IIIIIq")
    arrays = {}
    for name in PARAM_FIELDS:
        shape = shapes[name]
        count = int(np.prod(shape))
        arrays[name] = np.frombuffer(raw, dtype="<f8", count=count, offset=offset).reshape(shape).copy()
        offset += 8 * count
    mean = np.frombuffer(raw, dtype="<f8", count=bins, offset=offset).copy()
    offset += 8 * bins
    std = np.frombuffer(raw, dtype="<f8", count=bins, offset=offset).copy()
    return Params(**arrays), FeatureStats(mean, std), cfg
