"""The per-session semantic knowledge graph and its incremental update rule."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Callable, Iterable

import numpy as np

from .errors import EmptyLabel, NodeNotFound
from .taxonomy import (
    Attribute,
    EdgeKind,
    EntityType,
    Intent,
    PropertyType,
    RelType,
    intent_for,
    parse_attribute,
    parse_entity_type,
    parse_intent,
    parse_property_type,
    parse_rel_type,
)

if TYPE_CHECKING:
    from .embedding import EmbeddingProvider
    from .extraction import Triple

logger = logging.getLogger(__name__)

SEMANTIC_RELATION = "semantic_link"


def canonical_key(label: str) -> str:
    key = label.strip().lower()
    if not key:
        raise EmptyLabel(f"label {label!r} is empty after trimming")
    return key


@dataclass
class SkgNode:
    key: str
    label: str
    entity_type: EntityType
    importance: float
    intro_turn: int
    embedding: np.ndarray | None = None
    quarantined: bool = False


@dataclass
class SkgEdge:
    edge_id: int
    source_key: str
    target_key: str
    relation: str
    kind: EdgeKind
    turn: int
    attribute: Attribute | None = None
    intent: Intent | None = None
    rel_type: RelType | None = None
    property_type: PropertyType | None = None
    quarantined: bool = False
    user_deprecated: bool = False
    semantic_similarity: float | None = None

    def other(self, key: str) -> str:
        return self.target_key if key == self.source_key else self.source_key


@dataclass
class UpdateResult:
    graph: "SemanticKnowledgeGraph"
    new_nodes: set[str]
    warnings: list[str] = field(default_factory=list)


class SemanticKnowledgeGraph:
    """Typed, turn-stamped directed multigraph.

    Nodes are keyed by canonical label. Edges live in one list ordered by
    ``edge_id`` with a per-node incidence index; a unit-normalised embedding
    matrix over nodes backs deduplication and semantic linking.
    """

    def __init__(self) -> None:
        self.nodes: dict[str, SkgNode] = {}
        self.edges: list[SkgEdge] = []
        self.current_turn = 0
        self._incidence: dict[str, list[int]] = {}
        self._by_turn: dict[int, list[int]] = {}
        self._row_keys: list[str] = []
        self._rows = np.zeros((0, 0))

    def __len__(self) -> int:
        return len(self.nodes)

    def node(self, key: str) -> SkgNode:
        try:
            return self.nodes[key]
        except KeyError:
            raise NodeNotFound(key) from None

    def edge(self, edge_id: int) -> SkgEdge:
        return self.edges[edge_id]

    def incident(self, key: str) -> list[SkgEdge]:
        if key not in self.nodes:
            raise NodeNotFound(key)
        return [self.edges[i] for i in self._incidence[key]]

    def edges_at(self, turn: int) -> list[SkgEdge]:
        return [self.edges[i] for i in self._by_turn.get(turn, ())]

    # -- mutation -----------------------------------------------------------

    def add_node(self, node: SkgNode) -> SkgNode:
        if node.key in self.nodes:
            raise ValueError(f"duplicate node key {node.key!r}")
        self.nodes[node.key] = node
        self._incidence[node.key] = []
        if node.embedding is not None:
            self._append_row(node.key, node.embedding)
        return node

    def _append_row(self, key: str, vec: np.ndarray) -> None:
        n = len(self._row_keys)
        if self._rows.shape[1] != vec.shape[0]:
            if n:
                raise ValueError("embedding dimension changed within a session")
            self._rows = np.zeros((16, vec.shape[0]))
        if n == self._rows.shape[0]:
            grown = np.zeros((2 * n, self._rows.shape[1]))
            grown[:n] = self._rows
            self._rows = grown
        norm = np.linalg.norm(vec)
        self._rows[n] = vec / norm if norm > 0 else 0.0
        self._row_keys.append(key)

    def add_edge(self, source: str, target: str, relation: str, kind: EdgeKind, turn: int, **attrs) -> SkgEdge:
        for key in (source, target):
            if key not in self.nodes:
                raise NodeNotFound(key)
        edge = SkgEdge(len(self.edges), source, target, relation, kind, turn, **attrs)
        self.edges.append(edge)
        self._incidence[source].append(edge.edge_id)
        if target != source:
            self._incidence[target].append(edge.edge_id)
        self._by_turn.setdefault(turn, []).append(edge.edge_id)
        return edge

    def similarities(self, vec: np.ndarray) -> tuple[list[str], np.ndarray]:
        """Cosine of ``vec`` against every embedded node, in insertion order."""
        n = len(self._row_keys)
        if n == 0:
            return self._row_keys, np.zeros(0)
        norm = np.linalg.norm(vec)
        if norm == 0:
            return self._row_keys, np.zeros(n)
        sims = self._rows[:n] @ (vec / norm)
        return self._row_keys, np.clip(sims, -1.0, 1.0)

    # -- serialisation ------------------------------------------------------

    def to_dict(self, include_embeddings: bool = True) -> dict:
        nodes = []
        for node in self.nodes.values():
            item = {
                "key": node.key,
                "label": node.label,
                "entity_type": node.entity_type.value,
                "importance": node.importance,
                "intro_turn": node.intro_turn,
                "quarantined": node.quarantined,
            }
            if include_embeddings:
                item["embedding"] = None if node.embedding is None else node.embedding.tolist()
            nodes.append(item)
        edges = []
        for e in self.edges:
            edges.append(
                {
                    "edge_id": e.edge_id,
                    "source_key": e.source_key,
                    "target_key": e.target_key,
                    "relation": e.relation,
                    "kind": e.kind.value,
                    "turn": e.turn,
                    "attribute": e.attribute.value if e.attribute else None,
                    "intent": e.intent.value if e.intent else None,
                    "rel_type": e.rel_type.value if e.rel_type else None,
                    "property_type": e.property_type.value if e.property_type else None,
                    "quarantined": e.quarantined,
                    "user_deprecated": e.user_deprecated,
                    "semantic_similarity": e.semantic_similarity,
                }
            )
        return {"nodes": nodes, "edges": edges, "current_turn": self.current_turn}

    @classmethod
    def from_dict(cls, doc: dict) -> "SemanticKnowledgeGraph":
        graph = cls()
        for item in doc["nodes"]:
            emb = item.get("embedding")
            vec = None
            if emb is not None:
                vec = np.array(emb, dtype=np.float64)
                vec.setflags(write=False)
            graph.add_node(
                SkgNode(
                    key=item["key"],
                    label=item["label"],
                    entity_type=parse_entity_type(item["entity_type"]),
                    importance=float(item["importance"]),
                    intro_turn=int(item["intro_turn"]),
                    embedding=vec,
                    quarantined=bool(item.get("quarantined", False)),
                )
            )
        for item in sorted(doc["edges"], key=lambda e: e["edge_id"]):
            kind = EdgeKind(item["kind"])
            fact = kind is EdgeKind.FACT
            edge = graph.add_edge(
                item["source_key"],
                item["target_key"],
                item["relation"],
                kind,
                int(item["turn"]),
                attribute=parse_attribute(item["attribute"]) if fact else None,
                intent=parse_intent(item["intent"]) if fact else None,
                rel_type=parse_rel_type(item["rel_type"]) if fact else None,
                property_type=parse_property_type(item["property_type"]) if fact else None,
                quarantined=bool(item.get("quarantined", False)),
                user_deprecated=bool(item.get("user_deprecated", False)),
                semantic_similarity=item.get("semantic_similarity"),
            )
            if edge.edge_id != item["edge_id"]:
                raise ValueError("edge ids must be contiguous from 0")
        graph.current_turn = int(doc["current_turn"])
        return graph


def edges_incident(
    graph: SemanticKnowledgeGraph,
    node_key: str,
    kind: EdgeKind | None = EdgeKind.FACT,
    turn_predicate: Callable[[int], bool] | None = None,
    include_quarantined: bool = False,
    include_deprecated: bool = False,
) -> list[SkgEdge]:
    """Edges touching ``node_key`` that pass every filter, ordered by edge id."""
    out = []
    for edge in graph.incident(node_key):
        if kind is not None and edge.kind is not kind:
            continue
        if turn_predicate is not None and not turn_predicate(edge.turn):
            continue
        if edge.quarantined and not include_quarantined:
            continue
        if edge.user_deprecated and not include_deprecated:
            continue
        out.append(edge)
    return out


def current_edges(graph: SemanticKnowledgeGraph, key: str, turn: int) -> list[SkgEdge]:
    return edges_incident(graph, key, EdgeKind.FACT, lambda t: t == turn)


def historical_edges(graph: SemanticKnowledgeGraph, key: str, turn: int) -> list[SkgEdge]:
    return edges_incident(graph, key, EdgeKind.FACT, lambda t: t < turn)


def _above(graph: SemanticKnowledgeGraph, vec: np.ndarray, threshold: float, turn: int):
    """(node, similarity) for live nodes introduced before ``turn`` at or above ``threshold``."""
    keys, sims = graph.similarities(vec)
    for i in np.flatnonzero(sims >= threshold):
        node = graph.nodes[keys[i]]
        if node.intro_turn < turn and not node.quarantined:
            yield node, float(sims[i])


def _best_match(graph: SemanticKnowledgeGraph, vec: np.ndarray, threshold: float, turn: int) -> str | None:
    best: tuple | None = None
    for node, sim in _above(graph, vec, threshold, turn):
        key = node.key
        rank = (-sim, node.intro_turn, key)
        if best is None or rank < best:
            best = rank
    return None if best is None else best[2]


def update_graph(
    graph: SemanticKnowledgeGraph,
    triples: Iterable["Triple"],
    turn: int,
    embedder: "EmbeddingProvider",
    theta_dedup: float = 0.80,
    theta_sem: float = 0.50,
    dedup_objects: bool = False,
) -> UpdateResult:
    """Fold one turn of triples into ``graph`` (mutated in place).

    Subjects whose label embedding reaches ``theta_dedup`` against a prior
    node are merged into it; objects are merged too when ``dedup_objects``.
    New nodes are then linked by Semantic edges to every prior node at
    cosine >= ``theta_sem``.
    """
    if not 0 < theta_dedup <= 1 or not 0 < theta_sem <= 1:
        raise ValueError("thresholds must lie in (0, 1]")
    expected = graph.current_turn + 1
    if turn != expected:
        raise ValueError(f"turn {turn} out of order; graph expects turn {expected}")

    warnings: list[str] = []
    new_nodes: set[str] = set()
    seen: set[tuple] = set()

    def resolve(label: str, etype: EntityType, importance: float, dedup: bool) -> str:
        key = canonical_key(label)
        if key in graph.nodes:
            node = graph.nodes[key]
            node.importance = max(node.importance, importance)
            return key
        vec = embedder.embed(key)
        if dedup:
            match = _best_match(graph, vec, theta_dedup, turn)
            if match is not None:
                node = graph.nodes[match]
                node.importance = max(node.importance, importance)
                return match
        graph.add_node(SkgNode(key, label.strip(), etype, importance, turn, embedding=vec))
        new_nodes.add(key)
        return key

    for triple in triples:
        ident = triple.identity()
        if ident in seen:
            continue
        seen.add(ident)
        try:
            u = resolve(triple.sub, triple.type_sub, triple.importance, True)
            v = resolve(triple.obj, triple.type_obj, triple.importance, dedup_objects)
        except EmptyLabel as exc:
            warnings.append(f"turn {turn}: skipped triple with empty label ({exc})")
            continue
        graph.add_edge(
            u,
            v,
            triple.rel.strip().lower(),
            EdgeKind.FACT,
            turn,
            attribute=triple.attribute,
            intent=intent_for(triple.rel_type),
            rel_type=triple.rel_type,
            property_type=triple.property_type,
        )

    for key in sorted(new_nodes):
        for other, sim in _above(graph, graph.nodes[key].embedding, theta_sem, turn):
            graph.add_edge(key, other.key, SEMANTIC_RELATION, EdgeKind.SEMANTIC, turn, semantic_similarity=sim)

    graph.current_turn = turn
    for w in warnings:
        logger.warning(w)
    return UpdateResult(graph, new_nodes, warnings)


def quarantine_turn(graph: SemanticKnowledgeGraph, turn: int) -> SemanticKnowledgeGraph:
    """Flag every node introduced and every edge created at ``turn``."""
    if turn > graph.current_turn:
        raise ValueError(f"turn {turn} has not been applied yet")
    for node in graph.nodes.values():
        if node.intro_turn == turn:
            node.quarantined = True
    for edge in graph.edges_at(turn):
        edge.quarantined = True
    return graph


def attach_embeddings(graph: SemanticKnowledgeGraph, embedder: "EmbeddingProvider") -> SemanticKnowledgeGraph:
    """Re-embed nodes restored without vectors so dedup and linking work again."""
    for node in graph.nodes.values():
        if node.embedding is None:
            node.embedding = embedder.embed(node.key)
            graph._append_row(node.key, node.embedding)
    return graph
