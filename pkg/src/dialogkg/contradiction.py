"""Rule-cascade contradiction detection over a turn's graph snapshot.

Each candidate node's current Fact edges are compared against its historical
Fact edges. For a pair, detectors run in a fixed order and the first one that
fires decides the confidence; three guards in the middle of the order abstain
instead of firing. ``S_log`` is one minus the largest confidence seen.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from decimal import Decimal
from enum import Enum
from typing import Iterable

import numpy as np

from .embedding import EmbeddingProvider, cosine
from .graph import SemanticKnowledgeGraph, SkgEdge, current_edges, historical_edges
from .lexicons import Lexicons
from .taxonomy import NON_ASSERTIVE, EdgeKind, PropertyType

logger = logging.getLogger(__name__)


class Detector(str, Enum):
    NEG_FLIP = "NegFlip"
    ANTONYM = "Antonym"
    NUM_MISMATCH = "NumMismatch"
    EOC = "EOC"
    SAME_TYPE_EOC = "SameTypeEOC"
    RESIDUAL_DRIFT = "ResidualSemanticDrift"


@dataclass(frozen=True)
class DetectorThresholds:
    rel_min: float = 0.15
    obj_min: float = 0.10
    neg_obj: float = 0.40
    obj_div: float = 0.35
    same_type: float = 0.85
    drift: float = 0.60
    num_rel: float = 0.70
    eoc_rel: float = 0.85
    drift_obj_max: float = 0.75
    drift_strong_below: float = 0.40
    c_neg: float = 0.95
    c_ant: float = 0.88
    c_num: float = 0.92
    c_same_type_floor: float = 0.60
    c_drift_moderate: float = 0.45
    revision_match: float = 0.55

    def __post_init__(self):
        for name, value in self.__dict__.items():
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"threshold {name}={value} outside [0, 1]")


@dataclass(frozen=True)
class PairVerdict:
    detector: Detector
    confidence: float
    rs: float
    os: float


@dataclass(frozen=True)
class ContradictionCertificate:
    candidate_node: str
    current_edge_id: int
    historical_edge_id: int
    detector: Detector
    confidence: float
    relation_similarity: float
    object_similarity: float
    historical_turn: int = 0

    def sort_key(self):
        return (-self.confidence, self.historical_turn, self.current_edge_id, self.historical_edge_id)

    def to_dict(self) -> dict:
        return {
            "candidate_node": self.candidate_node,
            "current_edge_id": self.current_edge_id,
            "historical_edge_id": self.historical_edge_id,
            "historical_turn": self.historical_turn,
            "detector": self.detector.value,
            "confidence": self.confidence,
            "relation_similarity": self.relation_similarity,
            "object_similarity": self.object_similarity,
        }


@dataclass
class PairCounter:
    """Counts cascade invocations; lets tests check the per-turn work bound."""

    pairs: int = 0
    by_turn: dict[int, int] = field(default_factory=dict)

    def bump(self, turn: int) -> None:
        self.pairs += 1
        self.by_turn[turn] = self.by_turn.get(turn, 0) + 1


class _Memo:
    """Per-call memo: each string is embedded once, each pair compared once."""

    def __init__(self, embedder: EmbeddingProvider):
        self.embedder = embedder
        self._store: dict[str, np.ndarray] = {}
        self._sims: dict[tuple[str, str], float] = {}

    def similarity(self, a: str, b: str) -> float:
        key = (a, b) if a <= b else (b, a)
        sim = self._sims.get(key)
        if sim is None:
            # argument order fixed by the key so the cached value is order-free
            sim = self._sims[key] = cosine(self(key[0]), self(key[1]))
        return sim

    def __call__(self, text: str) -> np.ndarray:
        vec = self._store.get(text)
        if vec is None:
            vec = self._store[text] = self.embedder.embed(text)
        return vec


def _memo(embedder) -> _Memo:
    return embedder if isinstance(embedder, _Memo) else _Memo(embedder)


# -- revision handling ----------------------------------------------------------


def is_revision_prompt(prompt: str, lexicons: Lexicons = Lexicons()) -> bool:
    return lexicons.is_revision(prompt)


def extract_revision_targets(
    prompt: str,
    graph: SemanticKnowledgeGraph,
    embedder: EmbeddingProvider,
    turn: int,
    threshold: float = 0.55,
    lexicons: Lexicons = Lexicons(),
) -> set[int]:
    """Historical Exclusive Fact edges the prompt asks to revise.

    Matching edges are flagged ``user_deprecated`` on the graph as a side
    effect, so they stay out of every later turn's comparisons too.
    """
    if not is_revision_prompt(prompt, lexicons):
        return set()
    embed = _memo(embedder)
    q = embed(prompt)
    targets: set[int] = set()
    for edge in graph.edges:
        if edge.kind is not EdgeKind.FACT or edge.turn >= turn or edge.quarantined:
            continue
        if edge.property_type is not PropertyType.EXCLUSIVE:
            continue
        if cosine(q, embed(f"{edge.source_key} {edge.relation}")) >= threshold:
            targets.add(edge.edge_id)
    for edge_id in targets:
        graph.edges[edge_id].user_deprecated = True
    if targets:
        logger.info("turn %d: revision prompt deprecates edges %s", turn, sorted(targets))
    return targets


# -- candidates and numbers -----------------------------------------------------------


def candidate_nodes(
    graph: SemanticKnowledgeGraph,
    new_nodes: Iterable[str],
    turn: int,
    blocklist: Iterable[str] = Lexicons().blocklist,
) -> set[str]:
    blocked = set(blocklist)
    out = set(new_nodes)
    for edge in graph.edges_at(turn):
        if edge.kind is EdgeKind.FACT and not edge.quarantined:
            out.add(edge.source_key)
            out.add(edge.target_key)
    return {k for k in out if k not in blocked and not graph.nodes[k].quarantined}


_NUMBER_RE = re.compile(r"\b(\d+(?:\.\d+)?)\b")


def extract_numbers(text: str) -> list[Decimal]:
    return [Decimal(m) for m in _NUMBER_RE.findall(text)]


def _numbers_differ(a: str, b: str) -> bool:
    na, nb = extract_numbers(a), extract_numbers(b)
    if not na or not nb:
        return False
    return any(x != y for x, y in zip(na, nb))


# -- the cascade ----------------------------------------------------------------


def evaluate_pair(
    e_c: SkgEdge,
    e_h: SkgEdge,
    graph: SemanticKnowledgeGraph,
    embedder: EmbeddingProvider,
    thresholds: DetectorThresholds = DetectorThresholds(),
    lexicons: Lexicons = Lexicons(),
    anchor: str | None = None,
) -> PairVerdict | None:
    """Run the cascade on one (current, historical) pair.

    ``anchor`` is the shared candidate node; the compared "objects" are the
    endpoints opposite to it. Without an anchor the edge targets are used.
    """
    th = thresholds
    embed = _memo(embedder)
    obj_c = graph.nodes[e_c.other(anchor) if anchor else e_c.target_key]
    obj_h = graph.nodes[e_h.other(anchor) if anchor else e_h.target_key]
    rs = embed.similarity(e_c.relation, e_h.relation)
    os_ = embed.similarity(obj_c.key, obj_h.key)

    def fire(det: Detector, c: float) -> PairVerdict:
        return PairVerdict(det, c, rs, os_)

    neg_c, neg_h = lexicons.has_negation(e_c.relation), lexicons.has_negation(e_h.relation)
    if (
        neg_c != neg_h
        and os_ > th.neg_obj
        and e_c.rel_type not in NON_ASSERTIVE
        and e_h.rel_type not in NON_ASSERTIVE
    ):
        return fire(Detector.NEG_FLIP, th.c_neg)
    if lexicons.antonymous(e_c.relation, e_h.relation) and os_ > th.obj_min:
        return fire(Detector.ANTONYM, th.c_ant)

    # guards: abstain rather than compare unlike claims
    if e_c.intent != e_h.intent:
        return None
    if e_c.rel_type in NON_ASSERTIVE:
        return None
    if rs < th.rel_min or os_ < th.obj_min:
        return None

    if rs > th.num_rel and _numbers_differ(obj_c.label, obj_h.label):
        return fire(Detector.NUM_MISMATCH, th.c_num)
    both_exclusive = (
        e_c.property_type is PropertyType.EXCLUSIVE and e_h.property_type is PropertyType.EXCLUSIVE
    )
    if rs > th.eoc_rel and os_ < th.obj_div and both_exclusive:
        return fire(Detector.EOC, 1.0 - os_)
    if rs > th.eoc_rel and obj_c.entity_type == obj_h.entity_type and os_ < th.same_type and both_exclusive:
        return fire(Detector.SAME_TYPE_EOC, max(th.c_same_type_floor, 1.0 - os_))
    if rs > th.drift and th.obj_min < os_ < th.drift_obj_max:
        c = 1.0 - os_ if os_ < th.drift_strong_below else th.c_drift_moderate
        return fire(Detector.RESIDUAL_DRIFT, c)
    return None


def complement(c: float) -> float:
    """1 - c, rounded once from decimal so 1 - 0.95 is the double nearest 0.05."""
    return float(Decimal(1) - Decimal(repr(c)))


def logical_coherence(
    graph: SemanticKnowledgeGraph,
    candidates: Iterable[str],
    turn: int,
    embedder: EmbeddingProvider,
    thresholds: DetectorThresholds = DetectorThresholds(),
    lexicons: Lexicons = Lexicons(),
    revision_targets: Iterable[int] = (),
    counter: PairCounter | None = None,
) -> tuple[float, list[ContradictionCertificate]]:
    excluded = set(revision_targets)
    embed = _memo(embedder)
    best: dict[tuple[int, int], ContradictionCertificate] = {}
    for u in sorted(candidates):
        cur = current_edges(graph, u, turn)
        if not cur:
            continue
        hist = [e for e in historical_edges(graph, u, turn) if e.edge_id not in excluded]
        for e_c in cur:
            for e_h in hist:
                if counter is not None:
                    counter.bump(turn)
                verdict = evaluate_pair(e_c, e_h, graph, embed, thresholds, lexicons, anchor=u)
                if verdict is None:
                    continue
                cert = ContradictionCertificate(
                    u, e_c.edge_id, e_h.edge_id, verdict.detector, verdict.confidence,
                    verdict.rs, verdict.os, e_h.turn,
                )
                # a pair reachable from both endpoints is reported once, at its strongest
                pair = (e_c.edge_id, e_h.edge_id)
                if pair not in best or cert.confidence > best[pair].confidence:
                    best[pair] = cert
    certs = sorted(best.values(), key=ContradictionCertificate.sort_key)
    s_log = complement(certs[0].confidence) if certs else 1.0
    return min(1.0, max(0.0, s_log)), certs
