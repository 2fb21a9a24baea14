"""Per-instance discriminative graph over pixel-level feature nodes.

Every feature-map pixel becomes a node; the edge weight between two nodes is
the prototype entry for their object ids, gathered from the label map at
feature resolution.  Row normalization turns the gathered weights into a
row-stochastic adjacency matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import FeatureMap, LabelMap
from .errors import ValidationError
from .prototype import Prototype


@dataclass(frozen=True, eq=False)
class NodeSet:
    """Flattened pixel features and their object ids, row-major pixel order."""

    features: np.ndarray  # (n, channels) float64
    semantics: np.ndarray  # (n,) int

    @property
    def n(self) -> int:
        return self.features.shape[0]


@dataclass(frozen=True, eq=False)
class DiscriminativeGraph:
    nodes: NodeSet
    affinity: np.ndarray  # raw gathered weights, (n, n), non-negative
    adjacency: np.ndarray  # row-stochastic, (n, n)


def flatten(feature_map: FeatureMap, resized_labels: LabelMap) -> NodeSet:
    """Node i is pixel (i mod width, i div width) of both inputs."""
    if (resized_labels.height, resized_labels.width) != (feature_map.height, feature_map.width):
        raise ValidationError(
            f"label map {resized_labels.height}x{resized_labels.width} does not match "
            f"feature map {feature_map.height}x{feature_map.width}"
        )
    n = feature_map.height * feature_map.width
    features = feature_map.values.reshape(n, feature_map.channels)
    semantics = resized_labels.labels.reshape(n).astype(np.int64)
    return NodeSet(features, semantics)


def extract_local_knowledge(semantics: np.ndarray, prototype: Prototype) -> np.ndarray:
    """Gather the prototype entry for every pair of node object ids."""
    sem = np.asarray(semantics, dtype=np.int64)
    if sem.size and (sem.min() < 0 or sem.max() >= prototype.vocab_size):
        raise ValidationError(
            f"object id out of range for prototype vocab {prototype.vocab_size}"
        )
    return prototype.omega[sem[:, None], sem[None, :]]


def row_normalize(affinity: np.ndarray) -> np.ndarray:
    """Divide each row by its sum; an all-zero row becomes uniform.

    The uniform fallback keeps the result row-stochastic and degrades to
    plain feature averaging for nodes without discriminative relations.
    """
    a = np.asarray(affinity, dtype=np.float64)
    if a.ndim != 2 or a.shape[1] < 1:
        raise ValidationError("affinity must be a non-empty 2-D matrix")
    if (a < 0).any():
        raise ValidationError("affinity entries must be non-negative")
    sums = a.sum(axis=1)
    zero = sums == 0
    out = np.empty_like(a)
    np.divide(a, np.where(zero, 1.0, sums)[:, None], out=out)
    out[zero] = 1.0 / a.shape[1]
    return out


def build_graph(
    feature_map: FeatureMap, resized_labels: LabelMap, prototype: Prototype
) -> DiscriminativeGraph:
    nodes = flatten(feature_map, resized_labels)
    affinity = extract_local_knowledge(nodes.semantics, prototype)
    return DiscriminativeGraph(nodes, affinity, row_normalize(affinity))
