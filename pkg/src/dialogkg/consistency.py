"""Historical consistency: graph anchoring of new nodes plus a frozen session anchor."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .embedding import EmbeddingProvider, cosine
from .errors import NodeNotFound
from .graph import SemanticKnowledgeGraph
from .relevance import glue
from .taxonomy import EdgeKind


@dataclass(frozen=True)
class ConsistencyConfig:
    eta_fact: float = 1.0
    eta_semantic: float = 0.65
    eta_drift: float = 0.20
    delta: float = 0.85

    def __post_init__(self):
        if not (1.0 >= self.eta_fact > self.eta_semantic > self.eta_drift >= 0.0):
            raise ValueError("need 1 >= eta_fact > eta_semantic > eta_drift >= 0")
        if not 0.0 < self.delta <= 1.0:
            raise ValueError("delta must lie in (0, 1]")


@dataclass(frozen=True)
class SessionAnchor:
    vector: np.ndarray

    @classmethod
    def from_first_turn(cls, prompt: str, response: str, embedder: EmbeddingProvider) -> "SessionAnchor":
        vec = np.array(embedder.embed(glue(prompt, response)), dtype=np.float64)
        vec.setflags(write=False)
        return cls(vec)


def anchor_class(graph: SemanticKnowledgeGraph, key: str, turn: int, config: ConsistencyConfig) -> float:
    """a(u): the best live connection from ``key`` to a node introduced before ``turn``."""
    best = config.eta_drift
    for edge in graph.incident(key):
        if edge.quarantined:
            continue
        other = graph.nodes[edge.other(key)]
        if other.quarantined or other.intro_turn >= turn:
            continue
        if edge.kind is EdgeKind.FACT:
            return config.eta_fact
        best = config.eta_semantic
    return best


def weighted_anchor_mean(pairs: Iterable[tuple[float, float]]) -> float:
    """Importance-weighted mean of (importance, anchor) pairs.

    Falls back to the plain mean when every importance is zero.
    """
    pairs = list(pairs)
    if not pairs:
        return 1.0
    top = max(imp for imp, _ in pairs)
    if top <= 0.0:
        return sum(a for _, a in pairs) / len(pairs)
    # rescale first: subnormal importances would otherwise underflow imp * a to 0
    ws = [imp / top for imp, _ in pairs]
    return sum(w * a for w, (_, a) in zip(ws, pairs)) / sum(ws)


def graph_anchor_score(
    graph: SemanticKnowledgeGraph,
    new_nodes: Iterable[str],
    turn: int,
    config: ConsistencyConfig = ConsistencyConfig(),
) -> float:
    keys = sorted(set(new_nodes))
    for key in keys:
        if key not in graph.nodes:
            raise NodeNotFound(key)
    if not keys:
        return 1.0
    if not any(node.intro_turn < turn for node in graph.nodes.values()):
        return 1.0
    pairs = [(graph.nodes[k].importance, anchor_class(graph, k, turn, config)) for k in keys]
    return weighted_anchor_mean(pairs)


def session_anchor_score(
    response: str,
    anchor: SessionAnchor,
    embedder: EmbeddingProvider,
    config: ConsistencyConfig = ConsistencyConfig(),
) -> float:
    sim = cosine(embedder.embed(response), anchor.vector)
    return min(1.0, max(0.0, config.delta * sim))


def historical_consistency(graph_score: float, anchor_score: float) -> float:
    return max(graph_score, anchor_score)
