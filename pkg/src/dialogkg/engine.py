"""Per-turn and per-session scoring.

A :class:`SessionState` carries everything a session accumulates (graph,
frozen anchor, scores so far). :func:`score_turn` advances it by exactly one
turn and reads nothing from later turns, so scores of any prefix equal the
prefix of the full run.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from typing import Sequence

from .aggregation import SessionAggregate, session_score
from .config import EngineConfig
from .consistency import (
    SessionAnchor,
    graph_anchor_score,
    historical_consistency,
    session_anchor_score,
)
from .contradiction import (
    Detector,
    PairCounter,
    candidate_nodes,
    extract_revision_targets,
    logical_coherence,
)
from .embedding import EmbeddingCache, EmbeddingProvider
from .errors import ConfigError, EvaluationError, ProviderError
from .extraction import Extractor, turn_text
from .fusion import TurnScores, classify_regime, decide_flags, fuse
from .graph import SemanticKnowledgeGraph, quarantine_turn, update_graph
from .relevance import local_relevance

logger = logging.getLogger(__name__)

REPORT_VERSION = 1


@dataclass(frozen=True)
class DialogueTurn:
    prompt: str
    response: str
    reference: str | None = None

    def __post_init__(self):
        if not isinstance(self.prompt, str) or not self.prompt.strip():
            raise ValueError("turn prompt must be a non-empty string")
        if not isinstance(self.response, str) or not self.response.strip():
            raise ValueError("turn response must be a non-empty string")

    def to_dict(self) -> dict:
        return {"prompt": self.prompt, "response": self.response, "reference": self.reference}


@dataclass(frozen=True)
class SessionInput:
    session_id: str
    turns: tuple[DialogueTurn, ...]

    def __post_init__(self):
        if not self.session_id:
            raise ValueError("session_id must be non-empty")
        if not self.turns:
            raise ValueError(f"session {self.session_id!r} has no turns")

    @classmethod
    def from_dict(cls, doc: dict) -> "SessionInput":
        try:
            turns = tuple(
                DialogueTurn(t["prompt"], t["response"], t.get("reference")) for t in doc["turns"]
            )
            return cls(str(doc["session_id"]), turns)
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed session record: {exc}") from None

    def to_dict(self) -> dict:
        return {"session_id": self.session_id, "turns": [t.to_dict() for t in self.turns]}


@dataclass
class Providers:
    embedder: EmbeddingProvider
    extractor: Extractor

    def __post_init__(self):
        if not isinstance(self.embedder, EmbeddingCache):
            self.embedder = EmbeddingCache(self.embedder)

    def names(self) -> dict:
        def label(obj):
            return getattr(obj, "name", None) or type(obj).__name__

        return {"embedder": label(self.embedder), "extractor": label(self.extractor)}


@dataclass
class SessionState:
    config: EngineConfig
    providers: Providers
    graph: SemanticKnowledgeGraph = field(default_factory=SemanticKnowledgeGraph)
    anchor: SessionAnchor | None = None
    turns: list[TurnScores] = field(default_factory=list)
    counter: PairCounter = field(default_factory=PairCounter)

    @property
    def next_turn(self) -> int:
        return len(self.turns) + 1


def score_turn(state: SessionState, record: DialogueTurn) -> TurnScores:
    cfg = state.config
    emb = state.providers.embedder
    t = state.next_turn
    warnings: list[str] = []

    regime, both_short = classify_regime(record.prompt, record.response, cfg.fusion)
    s_loc = local_relevance(record.prompt, record.response, record.reference, emb, cfg.relevance).score

    try:
        triples = state.providers.extractor.extract(turn_text(record.prompt, record.response))
    except ProviderError:
        raise
    except Exception as exc:  # extractor output is untrusted; score with no triples
        msg = f"turn {t}: extraction failed ({type(exc).__name__}: {exc}); scored with zero triples"
        logger.warning(msg)
        warnings.append(msg)
        triples = []

    upd = update_graph(
        state.graph, triples, t, emb,
        theta_dedup=cfg.graph.theta_dedup,
        theta_sem=cfg.graph.theta_sem,
        dedup_objects=cfg.graph.dedup_objects,
    )
    warnings.extend(upd.warnings)

    s_graph = graph_anchor_score(state.graph, upd.new_nodes, t, cfg.consistency)
    if state.anchor is None:
        state.anchor = SessionAnchor.from_first_turn(record.prompt, record.response, emb)
        s_anchor = 0.0
        s_cons = s_graph
    else:
        s_anchor = session_anchor_score(record.response, state.anchor, emb, cfg.consistency)
        s_cons = historical_consistency(s_graph, s_anchor)

    targets = extract_revision_targets(
        record.prompt, state.graph, emb, t, cfg.contradiction.revision_match, cfg.lexicons
    )
    cands = candidate_nodes(state.graph, upd.new_nodes, t, cfg.lexicons.blocklist)
    s_log, certs = logical_coherence(
        state.graph, cands, t, emb, cfg.contradiction, cfg.lexicons, targets, state.counter
    )

    drift_only = bool(certs) and all(c.detector is Detector.RESIDUAL_DRIFT for c in certs)
    q_pre, q, guards = fuse(s_loc, s_cons, s_log, regime, both_short, cfg.fusion, drift_only)
    quarantine, passed = decide_flags(q, s_loc, cfg.fusion)
    if quarantine:
        quarantine_turn(state.graph, t)

    scores = TurnScores(
        turn=t,
        s_loc=s_loc,
        s_cons=s_cons,
        s_log=s_log,
        regime=regime,
        both_short=both_short,
        q_pre_guards=q_pre,
        q=q,
        guards_fired=guards,
        quarantined=quarantine,
        passed=passed,
        certificates=certs,
        s_graph=s_graph,
        s_anchor=s_anchor,
        new_nodes=sorted(upd.new_nodes),
        revision_targets=sorted(targets),
        warnings=warnings,
    )
    state.turns.append(scores)
    return scores


@dataclass
class SessionReport:
    session_id: str
    turn_scores: list[TurnScores]
    aggregate: SessionAggregate | None
    graph: SemanticKnowledgeGraph
    config: EngineConfig
    providers: dict
    input_hash: str
    error: str | None = None

    @property
    def final_score(self) -> float | None:
        return None if self.aggregate is None else self.aggregate.final_score

    @property
    def trend(self):
        return None if self.aggregate is None else self.aggregate.trend

    @property
    def certificates(self):
        return [c for ts in self.turn_scores for c in ts.certificates]

    def body(self) -> dict:
        return {
            "version": REPORT_VERSION,
            "session_id": self.session_id,
            "complete": self.error is None,
            "error": self.error,
            "turn_scores": [ts.to_dict() for ts in self.turn_scores],
            "session": None if self.aggregate is None else self.aggregate.to_dict(),
            "graph": self.graph.to_dict(include_embeddings=False),
            "config": self.config.to_dict(),
            "providers": self.providers,
            "input_hash": self.input_hash,
        }

    def to_dict(self) -> dict:
        body = self.body()
        body["content_hash"] = _sha256(body)
        return body

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def _sha256(doc) -> str:
    canon = json.dumps(doc, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def score_session(
    session: SessionInput,
    providers: Providers,
    config: EngineConfig = EngineConfig(),
    state: SessionState | None = None,
) -> SessionReport:
    """Score every turn in order and aggregate.

    On an embedding failure the session stops and the raised
    :class:`EvaluationError` carries a partial report in ``partial``.
    """
    state = state or SessionState(config, providers)
    for record in session.turns:
        try:
            score_turn(state, record)
        except ProviderError as exc:
            t = state.next_turn
            partial = _report(session, state, error=f"turn {t}: {exc}")
            raise EvaluationError(f"session {session.session_id}: turn {t} failed: {exc}", turn=t, partial=partial) from exc
    return _report(session, state)


def _report(session: SessionInput, state: SessionState, error: str | None = None) -> SessionReport:
    qs = [ts.q for ts in state.turns]
    return SessionReport(
        session_id=session.session_id,
        turn_scores=list(state.turns),
        aggregate=session_score(qs, state.config.aggregation) if qs else None,
        graph=state.graph,
        config=state.config,
        providers=state.providers.names(),
        input_hash=_sha256(session.to_dict()),
        error=error,
    )


def read_sessions(lines: Sequence[str] | str) -> list[SessionInput]:
    """Parse JSON Lines session records; blank lines are skipped."""
    if isinstance(lines, str):
        lines = lines.splitlines()
    out, seen = [], set()
    for n, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            session = SessionInput.from_dict(json.loads(line))
        except (json.JSONDecodeError, ValueError) as exc:
            raise ConfigError(f"input line {n}: {exc}") from None
        if session.session_id in seen:
            raise ConfigError(f"input line {n}: duplicate session_id {session.session_id!r}")
        seen.add(session.session_id)
        out.append(session)
    return out
