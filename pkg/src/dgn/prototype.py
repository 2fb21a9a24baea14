"""Inter-object discriminative prototype built from co-occurrence statistics.

For every pair of object ids the corpus yields per-class co-occurrence
likelihoods, a posterior over scene classes (uniform prior), and a dispersion
score of that posterior: pairs whose presence concentrates the posterior on
few classes are discriminative, pairs spread evenly are not.  An optional
square root flattens overly sharp contrasts.  The resulting symmetric
vocab_size x vocab_size matrix is the prototype.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import fileio
from .corpus import Corpus, object_presence
from .errors import ValidationError

PROTOTYPE_MAGIC = b"DGNP"


class CooccurrenceMode(enum.Enum):
    """How the pair likelihood P(i, j | class) is estimated.

    NON_INDEPENDENT counts joint presence directly; INDEPENDENT multiplies
    the two marginal presence rates, a lower-variance estimate for small
    corpora.
    """

    NON_INDEPENDENT = "nonindependent"
    INDEPENDENT = "independent"


class DispersionMetric(enum.Enum):
    RANGE = "range"
    STD_DEV = "std"
    COEFF_VAR = "cv"


_MODE_BYTE = {CooccurrenceMode.NON_INDEPENDENT: 0, CooccurrenceMode.INDEPENDENT: 1}
_METRIC_BYTE = {DispersionMetric.RANGE: 0, DispersionMetric.STD_DEV: 1, DispersionMetric.COEFF_VAR: 2}
_BYTE_MODE = {v: k for k, v in _MODE_BYTE.items()}
_BYTE_METRIC = {v: k for k, v in _METRIC_BYTE.items()}


@dataclass(frozen=True, eq=False)
class CooccurrenceCounts:
    """Presence counts per scene class.

    ``pair_presence[c, i, j]`` is the number of class-c instances containing
    both i and j; its diagonal equals ``presence[c]``.
    """

    num_classes: int
    vocab_size: int
    instances_per_class: np.ndarray  # (C,) int64
    presence: np.ndarray  # (C, L) int64
    pair_presence: np.ndarray  # (C, L, L) int64


@dataclass(frozen=True, eq=False)
class Prototype:
    """Symmetric matrix of discriminative correlation between object ids."""

    vocab_size: int
    omega: np.ndarray  # (L, L) float64, non-negative
    mode: CooccurrenceMode
    metric: DispersionMetric
    passivated: bool
    num_classes: int


def count(corpus: Corpus) -> CooccurrenceCounts:
    """Tally per-class object and object-pair presence at full resolution."""
    if not corpus.instances:
        raise ValidationError("cannot count an empty corpus")
    C, L = corpus.num_classes, corpus.vocab_size
    n_inst = np.zeros(C, dtype=np.int64)
    pair = np.zeros((C, L, L), dtype=np.int64)
    for inst in corpus.instances:
        present = np.fromiter(object_presence(inst.label_map), dtype=np.int64)
        indicator = np.zeros(L, dtype=np.int64)
        indicator[present] = 1
        n_inst[inst.scene_id] += 1
        pair[inst.scene_id] += np.outer(indicator, indicator)
    if (n_inst == 0).any():
        missing = int(np.flatnonzero(n_inst == 0)[0])
        raise ValidationError(f"scene class {missing} has no instances")
    presence = pair[:, np.arange(L), np.arange(L)].copy()
    return CooccurrenceCounts(C, L, n_inst, presence, pair)


def cooccurrence_prob(
    counts: CooccurrenceCounts, mode: CooccurrenceMode, i: int, j: int, scene: int
) -> float:
    """Estimated probability of seeing objects i and j together in a class."""
    L, C = counts.vocab_size, counts.num_classes
    if not (0 <= i < L and 0 <= j < L and 0 <= scene < C):
        raise ValidationError("index out of range")
    n = float(counts.instances_per_class[scene])
    if mode is CooccurrenceMode.NON_INDEPENDENT:
        return float(counts.pair_presence[scene, i, j]) / n
    return float(counts.presence[scene, i]) * float(counts.presence[scene, j]) / (n * n)


def posterior(likelihoods: np.ndarray) -> np.ndarray | None:
    """Class posterior under a uniform prior; None when there is no evidence.

    With equal priors the prior cancels, so the posterior is the likelihood
    vector normalized to sum 1.  An all-zero likelihood vector (the pair was
    never seen) has no defined posterior and yields None.
    """
    lik = np.asarray(likelihoods, dtype=np.float64)
    if (lik < 0).any():
        raise ValidationError("likelihoods must be non-negative")
    total = lik.sum()
    if total == 0.0:
        return None
    return lik / total


def dispersion(p: np.ndarray | None, metric: DispersionMetric) -> float:
    """Spread of a class posterior; 0 for the no-evidence marker.

    Computed on the sorted vector so the result is bit-identical under any
    permutation of class ids.  Standard deviation is the population form
    (divide by C); the coefficient of variation uses mean 1/C.
    """
    if p is None:
        return 0.0
    p = np.sort(np.asarray(p, dtype=np.float64))
    if metric is DispersionMetric.RANGE:
        return float(p[-1] - p[0])
    std = float(np.sqrt(np.mean((p - np.mean(p)) ** 2)))
    if metric is DispersionMetric.STD_DEV:
        return std
    return std * p.size  # cv = std / mean, mean = 1/C


def passivate(theta: float, enabled: bool = True) -> float:
    """Square-root flattening of a dispersion score."""
    if theta < 0:
        raise ValidationError("dispersion must be non-negative")
    return float(np.sqrt(theta)) if enabled else float(theta)


def build_prototype(
    corpus: Corpus,
    mode: CooccurrenceMode,
    metric: DispersionMetric = DispersionMetric.COEFF_VAR,
    passivated: bool = True,
) -> Prototype:
    """Compute the full pairwise discriminative-correlation matrix."""
    counts = count(corpus)
    C, L = counts.num_classes, counts.vocab_size
    n = counts.instances_per_class.astype(np.float64)[:, None, None]
    if mode is CooccurrenceMode.NON_INDEPENDENT:
        lik = counts.pair_presence.astype(np.float64) / n
    else:
        marg = counts.presence.astype(np.float64)
        lik = marg[:, :, None] * marg[:, None, :] / (n * n)
    # canonical class order before any reduction: sums and quotients are then
    # bit-identical under scene-id permutation
    lik = np.sort(lik, axis=0)
    evidence = lik.sum(axis=0)
    seen = evidence > 0
    post = np.zeros_like(lik)
    np.divide(lik, evidence[None, :, :], out=post, where=seen[None, :, :])
    if metric is DispersionMetric.RANGE:
        theta = post[-1] - post[0]
    else:
        theta = np.sqrt(np.mean((post - post.mean(axis=0)) ** 2, axis=0))
        if metric is DispersionMetric.COEFF_VAR:
            theta = theta * C
    omega = np.sqrt(theta) if passivated else theta
    omega = np.where(seen, omega, 0.0)
    return Prototype(L, omega, mode, metric, passivated, C)


def save_prototype(prototype: Prototype, path: str | Path) -> None:
    payload = (
        PROTOTYPE_MAGIC
        + fileio.pack_u32(fileio.FORMAT_VERSION)
        + fileio.pack_u32(prototype.vocab_size)
        + fileio.pack_u8(_MODE_BYTE[prototype.mode])
        + fileio.pack_u8(_METRIC_BYTE[prototype.metric])
        + fileio.pack_u8(1 if prototype.passivated else 0)
        + fileio.pack_u32(prototype.num_classes)
        + prototype.omega.astype("<f8").tobytes()
    )
    fileio.atomic_write_bytes(path, payload)


def load_prototype(path: str | Path) -> Prototype:
    r = fileio.Reader(Path(path).read_bytes(), str(path))
    r.magic(PROTOTYPE_MAGIC)
    r.version()
    vocab = r.u32()
    mode_byte, metric_byte, passivated = r.u8(), r.u8(), r.u8()
    if mode_byte not in _BYTE_MODE or metric_byte not in _BYTE_METRIC or passivated > 1:
        raise ValidationError(f"{path}: bad mode/metric/passivation byte")
    num_classes = r.u32()
    omega = r.array("<f8", vocab * vocab).reshape(vocab, vocab)
    r.done()
    return Prototype(
        vocab, omega, _BYTE_MODE[mode_byte], _BYTE_METRIC[metric_byte], bool(passivated), num_classes
    )
