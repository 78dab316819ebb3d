"""Turning turn text into typed subject-relation-object triples.

Two extractors ship here: :class:`HttpExtractor`, a chat-completion client
driven by a fixed structured-extraction prompt, and :func:`rule_based_extract`,
a deterministic pattern matcher for simple declarative sentences that the
tests and offline runs use. :class:`ScriptedExtractor` replays pre-extracted
triples.
"""

from __future__ import annotations

import json
import logging
import os
import re
import threading
from dataclasses import dataclass
from typing import Callable, Mapping, Protocol, Sequence

import httpx

from .errors import ConfigError, ExtractionParseError
from .lexicons import EXCLUSIVE_PREDICATES, NEGATION_MARKERS, contains_marker, stem, words
from .relevance import segment_sentences
from .taxonomy import (
    Attribute,
    EntityType,
    PropertyType,
    RelType,
    parse_attribute,
    parse_entity_type,
    parse_property_type,
    parse_rel_type,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Triple:
    sub: str
    rel: str
    obj: str
    type_sub: EntityType = EntityType.CONCEPT
    type_obj: EntityType = EntityType.CONCEPT
    importance: float = 0.5
    rel_type: RelType = RelType.ASSERTION
    attribute: Attribute = Attribute.PROPERTY
    property_type: PropertyType = PropertyType.ADDITIVE

    def __post_init__(self):
        for name in ("sub", "rel", "obj"):
            if not getattr(self, name).strip():
                raise ValueError(f"triple field {name!r} is empty")
        imp = min(1.0, max(0.0, float(self.importance)))
        object.__setattr__(self, "importance", imp)

    def identity(self) -> tuple:
        return (
            self.sub.strip().lower(),
            self.rel.strip().lower(),
            self.obj.strip().lower(),
            self.type_sub,
            self.type_obj,
            self.importance,
            self.rel_type,
            self.attribute,
            self.property_type,
        )

    def to_dict(self) -> dict:
        return {
            "sub": self.sub,
            "rel": self.rel,
            "obj": self.obj,
            "type_sub": self.type_sub.value,
            "type_obj": self.type_obj.value,
            "importance": self.importance,
            "rel_type": self.rel_type.value,
            "attribute": self.attribute.value,
            "property_type": self.property_type.value.upper(),
        }


class Extractor(Protocol):
    name: str

    def extract(self, turn_text: str) -> list[Triple]: ...


def turn_text(prompt: str, response: str) -> str:
    return f"User: {prompt}\nAssistant: {response}"


# -- parsing ------------------------------------------------------------------

_FENCE_RE = re.compile(r"^\s*```[a-zA-Z]*\s*\n?(.*?)\n?\s*```\s*$", re.DOTALL)


def strip_fences(raw: str) -> str:
    m = _FENCE_RE.match(raw)
    return m.group(1) if m else raw


def triple_from_mapping(item: Mapping, warnings: list[str] | None = None) -> Triple | None:
    """Build a Triple from one JSON object, or None when it is unusable."""
    note = warnings.append if warnings is not None else (lambda _m: None)
    if not isinstance(item, Mapping):
        note(f"dropped non-object entry {item!r:.60}")
        return None
    core = {}
    for name in ("sub", "rel", "obj"):
        value = item.get(name)
        if not isinstance(value, str) or not value.strip():
            note(f"dropped triple missing {name!r}: {dict(item)!r:.80}")
            return None
        core[name] = value.strip()
    try:
        importance = float(item.get("importance", 0.5))
    except (TypeError, ValueError):
        note(f"non-numeric importance {item.get('importance')!r}; using 0.5")
        importance = 0.5
    if importance != importance:  # NaN
        importance = 0.5
    return Triple(
        type_sub=parse_entity_type(item.get("type_sub")),
        type_obj=parse_entity_type(item.get("type_obj")),
        importance=importance,
        rel_type=parse_rel_type(item.get("rel_type")),
        attribute=parse_attribute(item.get("attribute")),
        property_type=parse_property_type(item.get("property_type")),
        **core,
    )


def parse_triples(raw_json: str, warnings: list[str] | None = None) -> list[Triple]:
    """Parse extractor output; bad entries are dropped, a bad document raises."""
    text = strip_fences(raw_json if isinstance(raw_json, str) else str(raw_json))
    try:
        doc = json.loads(text)
    except (json.JSONDecodeError, TypeError, ValueError) as exc:
        raise ExtractionParseError(f"extractor output is not JSON: {exc}", raw=raw_json) from None
    if isinstance(doc, dict):
        # tolerate {"triples": [...]} wrappers some backends insist on
        inner = next((v for v in doc.values() if isinstance(v, list)), None)
        doc = inner if inner is not None else [doc]
    if not isinstance(doc, list):
        raise ExtractionParseError("extractor output is not a JSON array", raw=raw_json)
    local: list[str] = []
    triples = [t for t in (triple_from_mapping(item, local) for item in doc) if t is not None]
    for w in local:
        logger.warning(w)
    if warnings is not None:
        warnings.extend(local)
    return triples


# -- prompt -------------------------------------------------------------------

SYSTEM_MESSAGE = (
    "You are a structured data extraction system. Output only a valid JSON array.\n"
    "No explanation, no markdown, no preamble."
)

USER_TEMPLATE = """You are an information extraction system for a multi-turn conversation evaluator.

Extract ONLY explicit factual subject-relation-object triples from the text.

Rules:
- Do NOT infer anything not directly stated.
- Keep relations short using normalized verb phrases.
- Assign subject/object type from:
Person, Event, Object, Concept, Condition, Organization, Time, Number.
- Normalize subjects across turns whenever possible.
- Preserve negation markers, numeric values, and comparison terms.
- Assign exactly one attribute:
definition, effect, property, comparison, requirement, quantity, negation.
- Assign exactly one relation type:
assertion, negation_assertion, diagnosis, solution, elaboration.
- Assign property_type:
EXCLUSIVE or ADDITIVE.
- Extract all factual claims; do not summarize multiple claims into one triple.

Return ONLY a valid JSON list:

[
{
    "sub": "...",
    "rel": "...",
    "obj": "...",
    "type_sub": "...",
    "type_obj": "...",
    "importance": 0.0,
    "rel_type": "assertion",
    "attribute": "property",
    "property_type": "ADDITIVE"
}
]

Text:
{text}"""

JSON_REMINDER = "Return only JSON: a single valid JSON array of triple objects, nothing else."


def build_extraction_prompt(text: str) -> tuple[str, str]:
    if not text or not text.strip():
        raise ValueError("turn text must be non-empty")
    # plain replace: the template itself contains JSON braces
    return SYSTEM_MESSAGE, USER_TEMPLATE.replace("{text}", text, 1)


# -- rule-based extractor -----------------------------------------------------

_ARTICLES = {"the", "a", "an"}
_COMPARATIVES = {"more", "less", "better"}
_PERSONAL = {"i", "me", "you", "we", "us", "he", "she", "they", "him", "her", "them", "user"}
_AUX = {"do", "does", "did", "can", "could", "will", "would", "shall", "should", "may", "might", "must", "cannot"}
_COPULA = {"is", "are", "was", "were", "am", "be", "been", "being"}
_HAVE = {"has", "have", "had"}
_NEG_WORDS = {"not", "never", "no", "cannot", "without"}
_ADVERBS = {"also", "really", "still", "often", "usually", "always", "just", "now", "significantly", "generally"}
_VERB_STEMS = frozenset(
    stem(v)
    for v in """own read write eat drink like love hate prefer enjoy want need live work play watch wash
    sweep clean cook buy sell make take give get go come cause prevent increase decrease reduce raise
    lower slow speed trigger affect improve worsen help hurt allow accept reject contain include require
    boil freeze grow use lead link know believe think say suggest recommend seem become remain weigh
    cost measure feed walk run visit study teach learn speak swim drive keep plan attract target
    """.split()
)
_NUMERAL_RE = re.compile(r"\b\d+(?:\.\d+)?\b")
_POSSESSIVE_RE = re.compile(r"(?:'s|s')$")
_SPEAKER_RE = re.compile(r"^\s*(?:user|assistant)\s*:\s*", re.IGNORECASE | re.MULTILINE)


def normalize_subject(sub: str) -> str:
    """Mechanical subject clean-up: articles, possessives, comparative prefixes."""
    original = sub.strip().lower()
    tokens = original.replace("’", "'").split()
    while len(tokens) > 1 and tokens[0] in _ARTICLES:
        tokens = tokens[1:]
    if len(tokens) > 1 and tokens[0] in _COMPARATIVES:
        tokens = tokens[1:]
    if tokens:
        last = _POSSESSIVE_RE.sub("", tokens[-1]) if tokens[-1] not in {"'s", "s'"} else ""
        tokens = tokens[:-1] + ([last] if last else [])
    out = " ".join(tokens).strip()
    return out or original


def _is_verb(token: str) -> bool:
    return token in _AUX or token in _COPULA or token in _HAVE or stem(token) in _VERB_STEMS


def _split_clause(sentence: str) -> tuple[list[str], int] | None:
    """First comma-clause that has a verb after at least one subject token."""
    for clause in sentence.split(","):
        tokens = words(clause)
        for i, tok in enumerate(tokens):
            if _is_verb(tok):
                if i > 0:
                    return tokens, i
                break
    return None


def _verb_phrase(tokens: list[str], start: int) -> int:
    """Index one past the relation phrase that begins at ``start``."""
    i = start
    while i < len(tokens):
        tok = tokens[i]
        if tok in _AUX or tok in _HAVE or tok in _COPULA or tok in _NEG_WORDS or tok in _ADVERBS:
            i += 1
            continue
        if stem(tok) in _VERB_STEMS:
            return i + 1
        break
    return i


def rule_based_extract(
    turn_text: str,
    importance: float = 0.8,
    exclusive_predicates: Sequence[str] = EXCLUSIVE_PREDICATES,
    negation_markers: Sequence[str] = NEGATION_MARKERS,
) -> list[Triple]:
    exclusive = {stem(p) for p in exclusive_predicates}
    out: list[Triple] = []
    for sentence in segment_sentences(_SPEAKER_RE.sub("", turn_text)):
        if sentence.endswith("?"):
            continue  # questions assert nothing
        found = _split_clause(sentence)
        if found is None:
            continue
        tokens, vi = found
        end = _verb_phrase(tokens, vi)
        sub_tokens, rel_tokens, obj_tokens = tokens[:vi], tokens[vi:end], tokens[end:]
        while obj_tokens and obj_tokens[0] in _ARTICLES:
            obj_tokens = obj_tokens[1:]
        if not obj_tokens or not rel_tokens:
            continue
        sub = normalize_subject(" ".join(sub_tokens))
        rel = " ".join(rel_tokens)
        obj = " ".join(obj_tokens)
        has_number = _NUMERAL_RE.search(obj) is not None
        is_exclusive = any(stem(t) in exclusive for t in sub_tokens + rel_tokens)
        out.append(
            Triple(
                sub=sub,
                rel=rel,
                obj=obj,
                type_sub=EntityType.PERSON if sub in _PERSONAL else EntityType.CONCEPT,
                type_obj=EntityType.NUMBER if has_number else EntityType.CONCEPT,
                importance=importance,
                rel_type=RelType.NEGATION_ASSERTION if contains_marker(rel, negation_markers) else RelType.ASSERTION,
                attribute=Attribute.QUANTITY if has_number else Attribute.PROPERTY,
                property_type=PropertyType.EXCLUSIVE if is_exclusive else PropertyType.ADDITIVE,
            )
        )
    return out


class RuleExtractor:
    name = "rules"

    def __init__(self, **options):
        self.options = options

    def extract(self, turn_text: str) -> list[Triple]:
        return rule_based_extract(turn_text, **self.options)


class ScriptedExtractor:
    """Replays pre-extracted triples keyed by exact turn text."""

    name = "scripted"

    def __init__(self, script: Mapping[str, Sequence[Triple]], fallback: Extractor | None = None):
        self.script = {k: list(v) for k, v in script.items()}
        self.fallback = fallback

    def extract(self, turn_text: str) -> list[Triple]:
        if turn_text in self.script:
            return list(self.script[turn_text])
        if self.fallback is not None:
            return self.fallback.extract(turn_text)
        return []


# -- HTTP extractor -----------------------------------------------------------


class HttpExtractor:
    """Chat-completion client with pinned deterministic decoding.

    One request per turn; when the reply does not parse, one more request is
    sent with a JSON-only reminder appended. A semaphore caps in-flight calls
    across all sessions sharing the instance.
    """

    name = "http"

    def __init__(
        self,
        url: str,
        model: str,
        api_key: str | None = None,
        timeout: float = 60.0,
        max_in_flight: int = 4,
        client: httpx.Client | None = None,
    ):
        if not url or not model:
            raise ConfigError("extractor endpoint URL and model are required")
        self.url = url
        self.model = model
        headers = {"Authorization": f"Bearer {api_key}"} if api_key else {}
        self._client = client or httpx.Client(timeout=timeout, headers=headers)
        if client is not None and api_key:
            self._client.headers.update(headers)
        self._slots = threading.BoundedSemaphore(max_in_flight)
        self.name = f"http:{model}"

    @classmethod
    def from_env(cls, **kwargs) -> "HttpExtractor":
        url = os.environ.get("DIALOGKG_LLM_URL", "")
        model = os.environ.get("DIALOGKG_LLM_MODEL", "")
        if not url or not model:
            raise ConfigError("DIALOGKG_LLM_URL and DIALOGKG_LLM_MODEL must be set")
        return cls(
            url=url,
            model=model,
            api_key=os.environ.get("DIALOGKG_LLM_API_KEY"),
            timeout=float(os.environ.get("DIALOGKG_LLM_TIMEOUT", "60")),
            max_in_flight=int(os.environ.get("DIALOGKG_LLM_MAX_IN_FLIGHT", "4")),
            **kwargs,
        )

    def request_body(self, messages: list[dict]) -> dict:
        return {
            "model": self.model,
            "messages": messages,
            "temperature": 0,
            "top_p": 1,
            "seed": 0,
            "n": 1,
        }

    def _complete(self, messages: list[dict]) -> str:
        with self._slots:
            resp = self._client.post(self.url, json=self.request_body(messages))
        resp.raise_for_status()
        return resp.json()["choices"][0]["message"]["content"] or ""

    def extract(self, turn_text: str) -> list[Triple]:
        system, user = build_extraction_prompt(turn_text)
        messages = [{"role": "system", "content": system}, {"role": "user", "content": user}]
        raw = self._complete(messages)
        try:
            return parse_triples(raw)
        except ExtractionParseError:
            logger.info("extractor reply did not parse; retrying once")
        messages = messages + [
            {"role": "assistant", "content": raw},
            {"role": "user", "content": JSON_REMINDER},
        ]
        return parse_triples(self._complete(messages))


def triples_from_json_list(items: Sequence[Mapping]) -> list[Triple]:
    return [t for t in (triple_from_mapping(i) for i in items) if t is not None]


def extractor_factory(kind: str) -> Callable[[], Extractor]:
    if kind == "rules":
        return RuleExtractor
    if kind == "http":
        return HttpExtractor.from_env
    raise ConfigError(f"unknown extractor {kind!r}")
