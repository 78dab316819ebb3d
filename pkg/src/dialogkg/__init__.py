"""Deterministic turn- and session-level scoring of multi-turn dialogues.

Each session grows a typed knowledge graph of extracted claims; turns are
scored for local relevance, consistency with that graph, and contradictions
against earlier claims, then folded into a recency-weighted session score.
"""

from .aggregation import AggregationConfig, Trend, session_score
from .config import EngineConfig, load_config
from .embedding import EmbeddingCache, HashEmbedder, TableEmbedder, hash_embedder, table_embedder
from .engine import DialogueTurn, Providers, SessionInput, SessionReport, SessionState, score_session, score_turn
from .extraction import RuleExtractor, ScriptedExtractor, Triple
from .graph import SemanticKnowledgeGraph, update_graph

__version__ = "0.1.0"

__all__ = [
    "AggregationConfig",
    "DialogueTurn",
    "EmbeddingCache",
    "EngineConfig",
    "HashEmbedder",
    "Providers",
    "RuleExtractor",
    "ScriptedExtractor",
    "SemanticKnowledgeGraph",
    "SessionInput",
    "SessionReport",
    "SessionState",
    "TableEmbedder",
    "Trend",
    "Triple",
    "hash_embedder",
    "load_config",
    "score_session",
    "score_turn",
    "session_score",
    "table_embedder",
    "update_graph",
]
