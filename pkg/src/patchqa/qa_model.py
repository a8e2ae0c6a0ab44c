"""Bidirectional-LSTM attention scorer for bug-report/description pairs.

Both input sequences run through one shared BiLSTM (a forward and a backward
cell). Every description position attends over the bug-report positions with
dot-product softmax weights; the bug-report rows and the attended vectors are
flattened and compared with cosine similarity squashed through a sigmoid:

    score = sigmoid(cosine(flatten(e_bug), flatten(attended)))

Cosine is bounded, so every score lies in [sigmoid(-1), sigmoid(1)]. Padded
positions are excluded from attention logits and zeroed in the flattened
vectors, so padding cannot influence a score. Training minimizes binary
cross-entropy with Adam; all arithmetic is float64 numpy and deterministic
under the config seed.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .embed import SequenceMatrix

__all__ = [
    "Adam",
    "BatchExample",
    "LstmCellParams",
    "ModelConfig",
    "Prediction",
    "QaModel",
    "SCORE_CEILING",
    "SCORE_FLOOR",
    "TrainingError",
    "attention_apply",
    "attention_weights",
    "batch_loss_and_gradients",
    "bilstm_forward",
    "cosine_similarity",
    "load_model",
    "loss",
    "predict",
    "save_model",
    "score",
    "score_many",
    "stack_examples",
    "train",
]

SCORE_FLOOR = 1.0 / (1.0 + math.e)          # sigmoid(-1)
SCORE_CEILING = 1.0 / (1.0 + math.exp(-1))  # sigmoid(1)

_MASKED_LOGIT = -1e30
_CHECKPOINT_MAGIC = b"PQQA\x01\n"


class TrainingError(RuntimeError):
    """Raised when optimization produces a non-finite loss."""


@dataclass
class ModelConfig:
    max_seq_len: int = 64
    hidden_size: int = 16
    learning_rate: float = 0.01
    epochs: int = 10
    batch_size: int = 128
    seed: int = 0

    def validate(self) -> None:
        for name in ("max_seq_len", "hidden_size", "epochs", "batch_size"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")


@dataclass
class LstmCellParams:
    """Stacked gate parameters; the leading axis holds the input, forget and
    output gates followed by the candidate block, so the three sigmoid gates
    occupy one contiguous range."""

    w_x: np.ndarray  # (4*hidden, input_dim)
    w_h: np.ndarray  # (4*hidden, hidden)
    b: np.ndarray    # (4*hidden,)


@dataclass
class BatchExample:
    bug: SequenceMatrix
    description: SequenceMatrix
    label: int


@dataclass(frozen=True)
class Prediction:
    label: int
    score: float


def _init_cell(rng: np.random.Generator, input_dim: int, hidden: int) -> LstmCellParams:
    def uniform(shape, fan_in):
        bound = 1.0 / math.sqrt(fan_in)
        return rng.uniform(-bound, bound, size=shape)

    return LstmCellParams(
        w_x=uniform((4 * hidden, input_dim), input_dim),
        w_h=uniform((4 * hidden, hidden), hidden),
        b=uniform((4 * hidden,), hidden),
    )


class QaModel:
    """The two shared LSTM cells plus run configuration and metadata."""

    def __init__(self, config: ModelConfig, input_dim: int,
                 forward_cell: LstmCellParams, backward_cell: LstmCellParams,
                 metadata: dict | None = None):
        self.config = config
        self.input_dim = input_dim
        self.forward_cell = forward_cell
        self.backward_cell = backward_cell
        self.metadata = dict(metadata or {})

    @classmethod
    def create(cls, config: ModelConfig, input_dim: int,
               metadata: dict | None = None) -> "QaModel":
        config.validate()
        if input_dim < 1:
            raise ValueError("input_dim must be positive")
        rng = np.random.default_rng(config.seed)
        hidden = config.hidden_size
        return cls(
            config,
            input_dim,
            _init_cell(rng, input_dim, hidden),
            _init_cell(rng, input_dim, hidden),
            metadata,
        )

    @property
    def output_dim(self) -> int:
        # Output rows concatenate both direction states.
        return 2 * self.config.hidden_size

    def parameters(self) -> dict[str, np.ndarray]:
        return {
            "forward.w_x": self.forward_cell.w_x,
            "forward.w_h": self.forward_cell.w_h,
            "forward.b": self.forward_cell.b,
            "backward.w_x": self.backward_cell.w_x,
            "backward.w_h": self.backward_cell.w_h,
            "backward.b": self.backward_cell.b,
        }


def _sigmoid(x):
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(-x))


def _lstm_run(cell: LstmCellParams, x_tm: np.ndarray):
    """Run one direction over time-major input (steps, batch, dim).

    Returns time-major states and the caches needed for backpropagation. The
    input projection is hoisted out of the loop as one large matmul; only the
    recurrent term stays inside.
    """
    steps, batch, _ = x_tm.shape
    hidden = cell.w_h.shape[1]
    states = np.empty((steps, batch, hidden))
    cells = np.empty((steps, batch, hidden))
    gates = np.empty((steps, batch, 4 * hidden))
    tanh_cells = np.empty((steps, batch, hidden))
    x_proj = (x_tm.reshape(steps * batch, -1) @ cell.w_x.T + cell.b)
    x_proj = x_proj.reshape(steps, batch, 4 * hidden)
    wh_t = cell.w_h.T
    split = 3 * hidden
    h = np.zeros((batch, hidden))
    c = np.zeros((batch, hidden))
    for t in range(steps):
        a = x_proj[t] + h @ wh_t
        gate = gates[t]
        gate[:, :split] = _sigmoid(a[:, :split])
        gate[:, split:] = np.tanh(a[:, split:])
        i = gate[:, :hidden]
        f = gate[:, hidden:2 * hidden]
        o = gate[:, 2 * hidden:split]
        g = gate[:, split:]
        cell_state = cells[t]
        np.multiply(f, c, out=cell_state)
        cell_state += i * g
        c = cell_state
        tc = np.tanh(c, out=tanh_cells[t])
        h = np.multiply(o, tc, out=states[t])
    return states, (x_tm, gates, cells, tanh_cells, states)


def _lstm_back(cell: LstmCellParams, cache, g_states: np.ndarray):
    """Backpropagation through time; everything time-major.

    Previous-step states are shifted views of the forward caches (zero at
    t=0), so the non-recurrent reductions collapse into single large matmuls.
    """
    x_tm, gates, cells, tanh_cells, states = cache
    steps, batch, hidden = states.shape
    split = 3 * hidden
    d_a_all = np.empty((steps, batch, 4 * hidden))
    dh_next = np.zeros((batch, hidden))
    dc_next = np.zeros((batch, hidden))
    zeros = np.zeros((batch, hidden))
    for t in range(steps - 1, -1, -1):
        gate = gates[t]
        i = gate[:, :hidden]
        f = gate[:, hidden:2 * hidden]
        o = gate[:, 2 * hidden:split]
        g = gate[:, split:]
        tc = tanh_cells[t]
        c_prev = cells[t - 1] if t > 0 else zeros
        dh = g_states[t] + dh_next
        dc = dc_next + dh * o * (1.0 - tc * tc)
        d_a = d_a_all[t]
        d_a[:, :hidden] = dc * g * i * (1.0 - i)
        d_a[:, hidden:2 * hidden] = dc * c_prev * f * (1.0 - f)
        d_a[:, 2 * hidden:split] = dh * tc * o * (1.0 - o)
        d_a[:, split:] = dc * i * (1.0 - g * g)
        dh_next = d_a @ cell.w_h
        dc_next = dc * f
    flat_a = d_a_all.reshape(steps * batch, 4 * hidden)
    g_wx = flat_a.T @ x_tm.reshape(steps * batch, -1)
    # h_prev is zero at t=0, so that term drops out of the sum.
    g_wh = d_a_all[1:].reshape((steps - 1) * batch, -1).T \
        @ states[:-1].reshape((steps - 1) * batch, hidden)
    g_b = flat_a.sum(axis=0)
    g_x_tm = (flat_a @ cell.w_x).reshape(steps, batch, -1)
    return g_x_tm, (g_wx, g_wh, g_b)


def _bilstm_run(model: QaModel, x: np.ndarray):
    x_tm = np.ascontiguousarray(x.transpose(1, 0, 2))
    x_tm_rev = np.ascontiguousarray(x_tm[::-1])
    fwd_states, fwd_cache = _lstm_run(model.forward_cell, x_tm)
    bwd_states_rev, bwd_cache = _lstm_run(model.backward_cell, x_tm_rev)
    e = np.concatenate(
        [fwd_states.transpose(1, 0, 2), bwd_states_rev[::-1].transpose(1, 0, 2)],
        axis=2,
    )
    return e, (fwd_cache, bwd_cache)


def _bilstm_back(model: QaModel, caches, g_e: np.ndarray):
    fwd_cache, bwd_cache = caches
    hidden = model.config.hidden_size
    g_fwd = np.ascontiguousarray(g_e[:, :, :hidden].transpose(1, 0, 2))
    g_bwd_rev = np.ascontiguousarray(g_e[:, ::-1, hidden:].transpose(1, 0, 2))
    g_x_fwd_tm, fwd_grads = _lstm_back(model.forward_cell, fwd_cache, g_fwd)
    g_x_bwd_rev_tm, bwd_grads = _lstm_back(model.backward_cell, bwd_cache, g_bwd_rev)
    g_x = (g_x_fwd_tm + g_x_bwd_rev_tm[::-1]).transpose(1, 0, 2)
    return g_x, fwd_grads, bwd_grads


def bilstm_forward(model: QaModel, matrix) -> np.ndarray:
    """Embed one (N, dim) sequence; row t concatenates both direction states."""
    rows = matrix.rows if isinstance(matrix, SequenceMatrix) else np.asarray(matrix, float)
    if rows.ndim != 2 or rows.shape[1] != model.input_dim:
        raise ValueError(f"input dim mismatch: model expects dim {model.input_dim}")
    e, _ = _bilstm_run(model, rows[None])
    return e[0]


def attention_weights(e_b, xc_j, mask_b) -> np.ndarray:
    """Softmax weights of one description position over bug-report rows.

    Masked positions get weight 0; the remaining weights sum to 1. Computed
    with max-subtraction for stability.
    """
    e_b = np.asarray(e_b, dtype=np.float64)
    xc_j = np.asarray(xc_j, dtype=np.float64)
    mask = np.asarray(mask_b, dtype=np.float64)
    if e_b.ndim != 2 or e_b.shape[1] != xc_j.shape[0] or e_b.shape[0] != mask.shape[0]:
        raise ValueError("dimension mismatch between e_b, xc_j and mask")
    if not np.any(mask > 0):
        raise ValueError("all positions are masked")
    logits = np.where(mask > 0, e_b @ xc_j, -np.inf)
    weights = np.exp(logits - logits.max())
    return weights / weights.sum()


def attention_apply(alpha, e_b) -> np.ndarray:
    """Weighted sum of bug-report rows: att = sum_n alpha_n * e_b[n]."""
    return np.asarray(alpha, dtype=np.float64) @ np.asarray(e_b, dtype=np.float64)


def cosine_similarity(u, v) -> float:
    """Cosine of two flat vectors; zero-norm inputs define the value as 0."""
    u = np.asarray(u, dtype=np.float64).ravel()
    v = np.asarray(v, dtype=np.float64).ravel()
    denom = np.linalg.norm(u) * np.linalg.norm(v)
    if denom == 0.0:
        return 0.0
    return float(np.clip(np.dot(u, v) / denom, -1.0, 1.0))


@dataclass
class _ForwardCache:
    bug_caches: tuple
    desc_caches: tuple
    e_b: np.ndarray
    e_c: np.ndarray
    alpha: np.ndarray
    bug_mask: np.ndarray
    desc_mask: np.ndarray
    rb: np.ndarray
    rc: np.ndarray
    dot: np.ndarray
    norm_b: np.ndarray
    norm_c: np.ndarray
    scores: np.ndarray


def _forward_batch(model: QaModel, bug_rows, bug_mask, desc_rows, desc_mask):
    e_b, bug_caches = _bilstm_run(model, bug_rows)
    e_c, desc_caches = _bilstm_run(model, desc_rows)
    logits = e_b @ e_c.transpose(0, 2, 1)
    # A finite stand-in for -inf keeps fully-masked columns NaN-free; the
    # zero-norm rule then forces those scores to 0.5 anyway.
    logits = np.where(bug_mask[:, :, None] > 0, logits, _MASKED_LOGIT)
    weights = np.exp(logits - logits.max(axis=1, keepdims=True))
    alpha = weights / weights.sum(axis=1, keepdims=True)
    attended = alpha.transpose(0, 2, 1) @ e_b
    attended *= desc_mask[:, :, None]
    batch = bug_rows.shape[0]
    rb = (e_b * bug_mask[:, :, None]).reshape(batch, -1)
    rc = attended.reshape(batch, -1)
    dot = (rb * rc).sum(axis=1)
    norm_b = np.linalg.norm(rb, axis=1)
    norm_c = np.linalg.norm(rc, axis=1)
    denom = norm_b * norm_c
    cos = np.where(denom > 0, dot / np.where(denom > 0, denom, 1.0), 0.0)
    cos = np.clip(cos, -1.0, 1.0)
    scores = _sigmoid(cos)
    cache = _ForwardCache(bug_caches, desc_caches, e_b, e_c, alpha,
                          np.asarray(bug_mask, float), np.asarray(desc_mask, float),
                          rb, rc, dot, norm_b, norm_c, scores)
    return scores, cache


def _backward_batch(model: QaModel, cache: _ForwardCache, labels: np.ndarray):
    """Gradients of the mean BCE over the batch for every parameter tensor
    plus both input tensors."""
    batch = labels.shape[0]
    # d(mean BCE)/d cosine collapses to (score - label) / batch.
    g_cos = (cache.scores - labels) / batch
    denom = cache.norm_b * cache.norm_c
    ok = denom > 0
    g_cos = np.where(ok, g_cos, 0.0)
    safe = np.where(ok, denom, 1.0)
    nb3 = np.where(ok, cache.norm_b ** 3 * cache.norm_c, 1.0)
    nc3 = np.where(ok, cache.norm_c ** 3 * cache.norm_b, 1.0)
    g_rb = g_cos[:, None] * (cache.rc / safe[:, None] - (cache.dot / nb3)[:, None] * cache.rb)
    g_rc = g_cos[:, None] * (cache.rb / safe[:, None] - (cache.dot / nc3)[:, None] * cache.rc)
    steps = cache.bug_mask.shape[1]
    d = model.output_dim
    g_e_b = g_rb.reshape(batch, steps, d) * cache.bug_mask[:, :, None]
    g_att = g_rc.reshape(batch, steps, d) * cache.desc_mask[:, :, None]
    g_alpha = cache.e_b @ g_att.transpose(0, 2, 1)
    g_e_b = g_e_b + cache.alpha @ g_att
    inner = (cache.alpha * g_alpha).sum(axis=1, keepdims=True)
    g_logits = cache.alpha * (g_alpha - inner)
    g_e_b += g_logits @ cache.e_c
    g_e_c = g_logits.transpose(0, 2, 1) @ cache.e_b
    g_bug_rows, fwd_b, bwd_b = _bilstm_back(model, cache.bug_caches, g_e_b)
    g_desc_rows, fwd_c, bwd_c = _bilstm_back(model, cache.desc_caches, g_e_c)
    grads = {
        "forward.w_x": fwd_b[0] + fwd_c[0],
        "forward.w_h": fwd_b[1] + fwd_c[1],
        "forward.b": fwd_b[2] + fwd_c[2],
        "backward.w_x": bwd_b[0] + bwd_c[0],
        "backward.w_h": bwd_b[1] + bwd_c[1],
        "backward.b": bwd_b[2] + bwd_c[2],
    }
    return grads, g_bug_rows, g_desc_rows


def stack_examples(examples: list[BatchExample]):
    """Stack examples into (bug_rows, bug_mask, desc_rows, desc_mask, labels)."""
    bug_rows = np.stack([ex.bug.rows for ex in examples])
    bug_mask = np.stack([ex.bug.mask for ex in examples]).astype(np.float64)
    desc_rows = np.stack([ex.description.rows for ex in examples])
    desc_mask = np.stack([ex.description.mask for ex in examples]).astype(np.float64)
    labels = np.array([float(ex.label) for ex in examples])
    return bug_rows, bug_mask, desc_rows, desc_mask, labels


def score(model: QaModel, example: BatchExample) -> float:
    """Match probability for one example, in [SCORE_FLOOR, SCORE_CEILING]."""
    scores, _ = _forward_batch(
        model,
        example.bug.rows[None], example.bug.mask[None].astype(np.float64),
        example.description.rows[None], example.description.mask[None].astype(np.float64),
    )
    return float(scores[0])


def score_many(model: QaModel, examples: list[BatchExample]) -> np.ndarray:
    if not examples:
        return np.empty(0)
    scores, _ = _forward_batch(model, *stack_examples(examples)[:4])
    return scores


def loss(score_value: float, label: int) -> float:
    """Binary cross-entropy for one score."""
    if not 0.0 < score_value < 1.0:
        raise ValueError("score must lie strictly inside (0, 1)")
    if label not in (0, 1):
        raise ValueError("label must be 0 or 1")
    return float(-(label * math.log(score_value) + (1 - label) * math.log(1.0 - score_value)))


def batch_loss_and_gradients(model: QaModel, bug_rows, bug_mask, desc_rows,
                             desc_mask, labels):
    """Mean BCE over the batch, parameter gradients and input gradients."""
    scores, cache = _forward_batch(model, bug_rows, bug_mask, desc_rows, desc_mask)
    y = np.asarray(labels, dtype=np.float64)
    losses = -(y * np.log(scores) + (1.0 - y) * np.log(1.0 - scores))
    grads, g_bug, g_desc = _backward_batch(model, cache, y)
    return float(losses.mean()), grads, (g_bug, g_desc)


class Adam:
    """Adam with bias correction; state is keyed by parameter name."""

    def __init__(self, params: dict[str, np.ndarray], learning_rate: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {name: np.zeros_like(value) for name, value in params.items()}
        self.v = {name: np.zeros_like(value) for name, value in params.items()}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        correct1 = 1.0 - self.beta1 ** self.t
        correct2 = 1.0 - self.beta2 ** self.t
        for name, value in params.items():
            g = grads[name]
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            value -= self.learning_rate * (m / correct1) / (np.sqrt(v / correct2) + self.eps)


def train(model: QaModel, examples: list[BatchExample],
          config: ModelConfig | None = None):
    """Adam-train in place; returns the model and per-epoch mean loss.

    Deterministic given config.seed: the per-epoch shuffles come from one
    seeded generator, batches run in order and gradients accumulate in fixed
    order. The epoch count is fixed; there is no early stopping.
    """
    cfg = config if config is not None else model.config
    cfg.validate()
    if not examples:
        raise ValueError("need at least one training example")
    bug_rows, bug_mask, desc_rows, desc_mask, labels = stack_examples(examples)
    if bug_rows.shape[2] != model.input_dim:
        raise ValueError(f"input dim mismatch: model expects dim {model.input_dim}")
    rng = np.random.default_rng(cfg.seed)
    optimizer = Adam(model.parameters(), cfg.learning_rate)
    history: list[float] = []
    count = len(examples)
    for epoch in range(cfg.epochs):
        perm = rng.permutation(count)
        epoch_loss = 0.0
        for start in range(0, count, cfg.batch_size):
            idx = perm[start:start + cfg.batch_size]
            batch_loss, grads, _ = batch_loss_and_gradients(
                model, bug_rows[idx], bug_mask[idx], desc_rows[idx], desc_mask[idx],
                labels[idx],
            )
            if not np.isfinite(batch_loss):
                raise TrainingError(
                    f"non-finite loss at epoch {epoch}, batch {start // cfg.batch_size}"
                )
            optimizer.step(model.parameters(), grads)
            epoch_loss += batch_loss * len(idx)
        history.append(epoch_loss / count)
    return model, history


def predict(model: QaModel, example: BatchExample, threshold: float) -> Prediction:
    """Classify one example; ties at the threshold classify as correct."""
    if not 0.0 <= threshold <= 1.0:
        raise ValueError("threshold must lie in [0, 1]")
    s = score(model, example)
    return Prediction(label=1 if s >= threshold else 0, score=s)


_TENSOR_ORDER = ("forward.w_x", "forward.w_h", "forward.b",
                 "backward.w_x", "backward.w_h", "backward.b")


def save_model(model: QaModel, path) -> None:
    """Write a byte-stable checkpoint: JSON header plus raw float64 tensors."""
    params = model.parameters()
    header = {
        "format": 1,
        "input_dim": model.input_dim,
        "config": asdict(model.config),
        "metadata": model.metadata,
        "tensors": [{"name": name, "shape": list(params[name].shape)}
                    for name in _TENSOR_ORDER],
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_CHECKPOINT_MAGIC)
        fh.write(len(blob).to_bytes(8, "little"))
        fh.write(blob)
        for name in _TENSOR_ORDER:
            fh.write(np.ascontiguousarray(params[name], dtype="<f8").tobytes())


def load_model(path) -> QaModel:
    with open(path, "rb") as fh:
        magic = fh.read(len(_CHECKPOINT_MAGIC))
        if magic != _CHECKPOINT_MAGIC:
            raise ValueError(f"{path}: not a model checkpoint")
        size = int.from_bytes(fh.read(8), "little")
        header = json.loads(fh.read(size).decode("utf-8"))
        if header.get("format") != 1:
            raise ValueError(f"{path}: unsupported checkpoint format")
        tensors = {}
        for spec in header["tensors"]:
            shape = tuple(spec["shape"])
            count = int(np.prod(shape))
            data = np.frombuffer(fh.read(count * 8), dtype="<f8").astype(np.float64)
            tensors[spec["name"]] = data.reshape(shape)
    config = ModelConfig(**header["config"])
    forward_cell = LstmCellParams(tensors["forward.w_x"], tensors["forward.w_h"],
                                  tensors["forward.b"])
    backward_cell = LstmCellParams(tensors["backward.w_x"], tensors["backward.w_h"],
                                   tensors["backward.b"])
    return QaModel(config, int(header["input_dim"]), forward_cell, backward_cell,
                   header.get("metadata") or {})
