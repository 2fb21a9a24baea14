"""Scene classifier assembly: ablation modes, training loop, evaluation.

Four modes cover the ablation grid:

* ``baseline``         -- pooled raw features into a single affine head.
* ``eval-only-iodp``   -- plug-and-play: degree-normalized graph propagation
                          (no weights, no activation) applied to the features
                          of a trained baseline at evaluation time.
* ``train-eval-iodp``  -- one trained graph-convolution layer, main head only.
* ``full``             -- graph layer plus an auxiliary head on the shared-
                          weight per-node linear path, active in training only.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import fileio
from .corpus import Corpus, nn_resize
from .errors import ValidationError
from .graph import build_graph
from .nn import (
    AdamState,
    ClassifierParams,
    ForwardRecord,
    adam_step,
    backward,
    gap,
    linear,
    propagate,
    sigmoid,
    softmax_ce,
    xavier_init,
)
from .prototype import Prototype

MODEL_MAGIC = b"DGNM"


class AblationMode(enum.Enum):
    BASELINE = "baseline"
    EVAL_ONLY_IODP = "eval-only-iodp"
    TRAIN_EVAL_IODP = "train-eval-iodp"
    FULL = "full"


_MODE_BYTE = {
    AblationMode.BASELINE: 0,
    AblationMode.EVAL_ONLY_IODP: 1,
    AblationMode.TRAIN_EVAL_IODP: 2,
    AblationMode.FULL: 3,
}
_BYTE_MODE = {v: k for k, v in _MODE_BYTE.items()}

_GRAPH_MODES = (AblationMode.EVAL_ONLY_IODP, AblationMode.TRAIN_EVAL_IODP, AblationMode.FULL)
_BASELINE_SHAPED = (AblationMode.BASELINE, AblationMode.EVAL_ONLY_IODP)


@dataclass(eq=False)
class DgnModel:
    """Trainable parameters plus the mode they were trained for.

    The hidden weight ``gc_weight`` is shared storage between the graph
    convolution and the auxiliary per-node linear path; the auxiliary head's
    own parameters are independent of the main head.
    """

    mode: AblationMode
    in_channels: int
    hidden_dim: int
    num_classes: int
    lam: float
    main_head: ClassifierParams
    gc_weight: np.ndarray | None = None
    aux_head: ClassifierParams | None = None
    aux_activation: bool = True

    def parameter_count(self) -> int:
        total = self.main_head.weight.size + self.main_head.bias.size
        if self.gc_weight is not None:
            total += self.gc_weight.size
        if self.aux_head is not None:
            total += self.aux_head.weight.size + self.aux_head.bias.size
        return total


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    batch_size: int = 32
    lr: float = 0.001
    decay_epochs: tuple[int, ...] = (10, 15, 20)
    decay_factor: float = 0.1
    weight_decay: float = 1e-5
    lam: float = 0.25
    hidden_dim: int | None = None  # None: match the feature channel count
    seed: int = 304
    aux_activation: bool = True

    def validate(self) -> None:
        if self.epochs < 1 or self.batch_size < 1 or self.lr <= 0:
            raise ValidationError("epochs, batch_size and lr must be positive")
        if self.lam < 0 or self.weight_decay < 0:
            raise ValidationError("lam and weight_decay must be >= 0")
        if self.hidden_dim is not None and self.hidden_dim < 1:
            raise ValidationError("hidden_dim must be >= 1")


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    lr: float
    loss: float
    loss_main: float
    loss_aux: float
    train_accuracy: float
    val_accuracy: float | None = None


@dataclass(frozen=True, eq=False)
class EvalReport:
    accuracy: float
    per_class: np.ndarray
    count: int


def init_model(
    mode: AblationMode, in_channels: int, num_classes: int, config: TrainConfig
) -> DgnModel:
    """Deterministic Xavier initialization; weights per sub-seed, biases zero."""
    keys = np.random.SeedSequence(config.seed).spawn(3)
    lam = config.lam if mode is AblationMode.FULL else 0.0
    if mode in _BASELINE_SHAPED:
        head = ClassifierParams(
            xavier_init(in_channels, num_classes, keys[1]), np.zeros(num_classes)
        )
        return DgnModel(mode, in_channels, in_channels, num_classes, lam, head)
    d = config.hidden_dim if config.hidden_dim is not None else in_channels
    return DgnModel(
        mode,
        in_channels,
        d,
        num_classes,
        lam,
        ClassifierParams(xavier_init(d, num_classes, keys[1]), np.zeros(num_classes)),
        gc_weight=xavier_init(in_channels, d, keys[0]),
        aux_head=ClassifierParams(xavier_init(d, num_classes, keys[2]), np.zeros(num_classes)),
        aux_activation=config.aux_activation,
    )


def total_loss(loss_main: float, loss_aux: float, lam: float) -> float:
    return loss_main + lam * loss_aux


def forward_parts(
    model: DgnModel,
    features: np.ndarray,
    propagated: np.ndarray | None,
    mode: AblationMode | None = None,
) -> tuple[np.ndarray, np.ndarray | None, ForwardRecord]:
    """Forward pass from a node-feature matrix and its (optional) propagation.

    ``propagated`` is the degree-normalized neighborhood mix of the features;
    the baseline path ignores it.  Used directly by the training loop, which
    caches the propagation per instance.
    """
    mode = mode or model.mode
    if mode is AblationMode.BASELINE:
        pooled = gap(features)
        logits = linear(pooled, model.main_head)
        record = ForwardRecord(features, pooled, model.main_head, logits)
        return logits, None, record
    if propagated is None:
        raise ValidationError(f"mode {mode.value} needs a graph propagation")
    if mode is AblationMode.EVAL_ONLY_IODP:
        if model.main_head.weight.shape[0] != features.shape[1]:
            raise ValidationError("eval-only plug-in needs a baseline-shaped head")
        pooled = gap(propagated)
        logits = linear(pooled, model.main_head)
        record = ForwardRecord(features, pooled, model.main_head, logits, propagated=propagated)
        return logits, None, record

    pre = propagated @ model.gc_weight
    hidden = sigmoid(pre)
    pooled = gap(hidden)
    logits = linear(pooled, model.main_head)
    record = ForwardRecord(
        features,
        pooled,
        model.main_head,
        logits,
        lam=model.lam,
        propagated=propagated,
        gc_weight=model.gc_weight,
        hidden=hidden,
    )
    if mode is not AblationMode.FULL or model.aux_head is None:
        return logits, None, record

    aux_pre = features @ model.gc_weight
    aux_hidden = sigmoid(aux_pre) if model.aux_activation else aux_pre
    aux_pooled = gap(aux_hidden)
    aux_logits = linear(aux_pooled, model.aux_head)
    record.aux_hidden = aux_hidden
    record.aux_pooled = aux_pooled
    record.aux_head = model.aux_head
    record.aux_logits = aux_logits
    record.aux_activation = model.aux_activation
    return logits, aux_logits, record


def forward(model: DgnModel, graph, mode: AblationMode | None = None):
    """Forward pass on a built graph (or bare node set for the baseline)."""
    mode = mode or model.mode
    nodes = graph.nodes if hasattr(graph, "nodes") else graph
    if nodes.features.shape[1] != model.in_channels:
        raise ValidationError(
            f"feature width {nodes.features.shape[1]} != model channels {model.in_channels}"
        )
    propagated = None
    if mode is not AblationMode.BASELINE:
        if not hasattr(graph, "adjacency"):
            raise ValidationError(f"mode {mode.value} needs a built graph, not a bare node set")
        propagated = propagate(graph.adjacency, nodes.features)
    return forward_parts(model, nodes.features, propagated, mode)


# ---------------------------------------------------------------------------
# training and evaluation


def _prepared_inputs(
    corpus: Corpus, prototype: Prototype | None, needs_graph: bool
) -> list[tuple[np.ndarray, np.ndarray | None, int]]:
    shape = corpus.feature_shape
    if shape is None:
        raise ValidationError("corpus carries no feature maps")
    h1, w1, c = shape
    out = []
    for inst in corpus.instances:
        if inst.feature_map is None:
            raise ValidationError("every instance needs a feature map")
        features = inst.feature_map.values.reshape(h1 * w1, c)
        propagated = None
        if needs_graph:
            resized = nn_resize(inst.label_map, w1, h1)
            g = build_graph(inst.feature_map, resized, prototype)
            propagated = propagate(g.adjacency, g.nodes.features)
        out.append((features, propagated, inst.scene_id))
    return out


def _check_graph_args(mode: AblationMode, corpus: Corpus, prototype: Prototype | None) -> None:
    if mode in _GRAPH_MODES:
        if prototype is None:
            raise ValidationError(f"mode {mode.value} requires a prototype")
        if prototype.vocab_size != corpus.vocab_size:
            raise ValidationError(
                f"prototype vocab {prototype.vocab_size} != corpus vocab {corpus.vocab_size}"
            )


def _optimized_params(model: DgnModel, include_aux: bool) -> list[np.ndarray]:
    params = []
    if model.gc_weight is not None:
        params.append(model.gc_weight)
    params += [model.main_head.weight, model.main_head.bias]
    if include_aux:
        params += [model.aux_head.weight, model.aux_head.bias]
    return params


def _assign_params(model: DgnModel, params: list[np.ndarray], include_aux: bool) -> None:
    it = iter(params)
    if model.gc_weight is not None:
        model.gc_weight = next(it)
    model.main_head.weight = next(it)
    model.main_head.bias = next(it)
    if include_aux:
        model.aux_head.weight = next(it)
        model.aux_head.bias = next(it)


def train(
    train_corpus: Corpus,
    prototype: Prototype | None,
    config: TrainConfig,
    mode: AblationMode = AblationMode.FULL,
    eval_corpus: Corpus | None = None,
) -> tuple[DgnModel, list[EpochStats]]:
    """Train a model of the given mode; deterministic under ``config.seed``.

    Batches accumulate per-instance gradients and apply one optimizer step
    per batch (the mean of the per-instance losses).  The learning rate
    drops by ``decay_factor`` at each epoch in ``decay_epochs``.  When
    ``eval_corpus`` is given, each epoch's stats include its accuracy.
    """
    config.validate()
    if mode is AblationMode.EVAL_ONLY_IODP:
        raise ValidationError("eval-only-iodp is an evaluation mode; train a baseline instead")
    if not train_corpus.instances:
        raise ValidationError("cannot train on an empty corpus")
    _check_graph_args(mode, train_corpus, prototype)

    needs_graph = mode in _GRAPH_MODES
    data = _prepared_inputs(train_corpus, prototype, needs_graph)
    c = train_corpus.feature_shape[2]
    model = init_model(mode, c, train_corpus.num_classes, config)
    include_aux = mode is AblationMode.FULL and config.lam > 0

    params = _optimized_params(model, include_aux)
    state = AdamState.for_params(params, config.lr, config.weight_decay)
    shuffle_rng = np.random.default_rng(np.random.SeedSequence(config.seed).spawn(4)[3])

    trace: list[EpochStats] = []
    n_total = len(data)
    for epoch in range(1, config.epochs + 1):
        drops = sum(1 for boundary in config.decay_epochs if epoch >= boundary)
        state.lr = config.lr * config.decay_factor**drops
        order = shuffle_rng.permutation(n_total)
        sums = {"loss": 0.0, "main": 0.0, "aux": 0.0}
        correct = 0
        for start in range(0, n_total, config.batch_size):
            batch = order[start : start + config.batch_size]
            params = _optimized_params(model, include_aux)
            grad_sums = [np.zeros_like(p) for p in params]
            batch_loss = 0.0
            for idx in batch:
                features, propagated, target = data[idx]
                logits, aux_logits, record = forward_parts(model, features, propagated, mode)
                loss_main = softmax_ce(logits, target)
                loss_aux = softmax_ce(aux_logits, target) if aux_logits is not None else 0.0
                loss = total_loss(loss_main, loss_aux, model.lam)
                grads = backward(record, target)
                for acc, g in zip(grad_sums, _collect_grads(grads, model, include_aux)):
                    acc += g
                batch_loss += loss
                sums["loss"] += loss
                sums["main"] += loss_main
                sums["aux"] += loss_aux
                correct += int(np.argmax(logits) == target)
            if not np.isfinite(batch_loss):
                raise FloatingPointError(f"non-finite loss in epoch {epoch}")
            mean_grads = [g / batch.size for g in grad_sums]
            _assign_params(model, adam_step(params, mean_grads, state), include_aux)
        val_accuracy = None
        if eval_corpus is not None:
            val_accuracy = evaluate(model, eval_corpus, prototype, mode).accuracy
        trace.append(
            EpochStats(
                epoch,
                state.lr,
                sums["loss"] / n_total,
                sums["main"] / n_total,
                sums["aux"] / n_total,
                correct / n_total,
                val_accuracy,
            )
        )
    return model, trace


def _collect_grads(grads, model: DgnModel, include_aux: bool) -> list[np.ndarray]:
    out = []
    if model.gc_weight is not None:
        out.append(grads.gc_weight)
    out += [grads.main_weight, grads.main_bias]
    if include_aux:
        out += [grads.aux_weight, grads.aux_bias]
    return out


def evaluate(
    model: DgnModel,
    corpus: Corpus,
    prototype: Prototype | None = None,
    mode: AblationMode | None = None,
) -> EvalReport:
    """Top-1 accuracy of the main head; argmax ties go to the lowest class."""
    mode = mode or model.mode
    if not corpus.instances:
        raise ValidationError("cannot evaluate an empty corpus")
    if mode is AblationMode.EVAL_ONLY_IODP and model.mode not in _BASELINE_SHAPED:
        raise ValidationError("eval-only-iodp plugs into a trained baseline model")
    _check_graph_args(mode, corpus, prototype)
    needs_graph = mode in _GRAPH_MODES
    totals = np.zeros(corpus.num_classes, dtype=np.int64)
    hits = np.zeros(corpus.num_classes, dtype=np.int64)
    for features, propagated, target in _prepared_inputs(corpus, prototype, needs_graph):
        logits, _, _ = forward_parts(model, features, propagated, mode)
        totals[target] += 1
        hits[target] += int(np.argmax(logits) == target)
    per_class = np.where(totals > 0, hits / np.maximum(totals, 1), 0.0)
    return EvalReport(float(hits.sum() / totals.sum()), per_class, int(totals.sum()))


# ---------------------------------------------------------------------------
# checkpoints


def save_model(model: DgnModel, path: str | Path) -> None:
    """Binary checkpoint; parameter blocks depend on the mode.

    Baseline-shaped modes store main weight then bias; graph modes store the
    shared hidden weight, main weight, main bias, aux weight, aux bias.  All
    blocks are row-major little-endian float64.
    """
    blocks = []
    if model.mode in _BASELINE_SHAPED:
        blocks += [model.main_head.weight, model.main_head.bias]
    else:
        blocks += [
            model.gc_weight,
            model.main_head.weight,
            model.main_head.bias,
            model.aux_head.weight,
            model.aux_head.bias,
        ]
    payload = (
        MODEL_MAGIC
        + fileio.pack_u32(fileio.FORMAT_VERSION)
        + fileio.pack_u8(_MODE_BYTE[model.mode])
        + fileio.pack_u32(model.in_channels, model.hidden_dim, model.num_classes)
        + fileio.pack_f64(model.lam)
        + b"".join(b.astype("<f8").tobytes() for b in blocks)
    )
    fileio.atomic_write_bytes(path, payload)


def load_model(path: str | Path) -> DgnModel:
    r = fileio.Reader(Path(path).read_bytes(), str(path))
    r.magic(MODEL_MAGIC)
    r.version()
    mode_byte = r.u8()
    if mode_byte not in _BYTE_MODE:
        raise ValidationError(f"{path}: unknown mode byte {mode_byte}")
    mode = _BYTE_MODE[mode_byte]
    c, d, num_classes = r.u32(), r.u32(), r.u32()
    lam = r.f64()
    if mode in _BASELINE_SHAPED:
        head = ClassifierParams(
            r.array("<f8", c * num_classes).reshape(c, num_classes),
            r.array("<f8", num_classes),
        )
        r.done()
        return DgnModel(mode, c, d, num_classes, lam, head)
    gc_weight = r.array("<f8", c * d).reshape(c, d)
    main = ClassifierParams(
        r.array("<f8", d * num_classes).reshape(d, num_classes), r.array("<f8", num_classes)
    )
    aux = ClassifierParams(
        r.array("<f8", d * num_classes).reshape(d, num_classes), r.array("<f8", num_classes)
    )
    r.done()
    return DgnModel(mode, c, d, num_classes, lam, main, gc_weight=gc_weight, aux_head=aux)
