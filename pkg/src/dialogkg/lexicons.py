"""Word lists shared by extraction and the contradiction engine, with matchers."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import lru_cache

NEGATION_MARKERS = ("not", "never", "no", "does not", "cannot", "without")

ANTONYM_PAIRS = (
    ("increase", "decrease"),
    ("allow", "prevent"),
    ("accept", "reject"),
    ("always", "never"),
    ("causes", "prevents"),
    ("slows", "speeds up"),
)

REVISION_MARKERS = ("change", "replace", "update", "switch", "instead")

BLOCKLIST = (
    "i", "you", "we", "they", "he", "she", "it", "this", "that",
    "thing", "things", "someone", "something",
)

# predicates that admit a single value: favorite X, birthplace, capital, owned counts
EXCLUSIVE_PREDICATES = ("favorite", "favourite", "birthplace", "born", "capital", "own")

_WORD_RE = re.compile(r"\d+(?:\.\d+)?|[a-z0-9]+(?:'[a-z]+)?")


def words(text: str) -> list[str]:
    return _WORD_RE.findall(text.lower().replace("’", "'"))


def stem(word: str) -> str:
    """Strip one of -ing/-es/-ed/-s, then a trailing -e.

    Crude on purpose: both the lexicon and the relation go through the same
    function, so ``increase``/``increases``/``increased`` all meet at ``increas``.
    """
    w = word.lower()
    for suffix in ("ing", "es", "ed", "s"):
        if w.endswith(suffix) and len(w) - len(suffix) >= 3:
            w = w[: -len(suffix)]
            break
    if w.endswith("e") and len(w) > 3:
        w = w[:-1]
    return w


@lru_cache(maxsize=65536)
def stems(text: str) -> tuple[str, ...]:
    return tuple(stem(w) for w in words(text))


@lru_cache(maxsize=64)
def _phrase_pattern(markers: tuple[str, ...]) -> re.Pattern:
    alts = sorted((re.escape(m.lower()) for m in markers), key=len, reverse=True)
    alts = [a.replace(r"\ ", r"\s+") for a in alts]
    return re.compile(r"\b(?:" + "|".join(alts) + r")\b")


def contains_marker(text: str, markers) -> bool:
    """True when any marker phrase occurs in ``text`` on word boundaries."""
    return _contains_marker(text, tuple(markers))


@lru_cache(maxsize=65536)
def _contains_marker(text: str, markers: tuple[str, ...]) -> bool:
    if not markers:
        return False
    return _phrase_pattern(markers).search(text.lower()) is not None


def _contains_seq(hay: tuple[str, ...], needle: tuple[str, ...]) -> bool:
    n = len(needle)
    return n > 0 and any(hay[i : i + n] == needle for i in range(len(hay) - n + 1))


@lru_cache(maxsize=65536)
def _antonymous(pairs: tuple[tuple[str, str], ...], rel_a: str, rel_b: str) -> bool:
    sa, sb = stems(rel_a), stems(rel_b)
    for left, right in pairs:
        pl, pr = stems(left), stems(right)
        if _contains_seq(sa, pl) and _contains_seq(sb, pr) and not _contains_seq(sa, pr):
            return True
        if _contains_seq(sa, pr) and _contains_seq(sb, pl) and not _contains_seq(sa, pl):
            return True
    return False


@dataclass(frozen=True)
class Lexicons:
    negation: tuple[str, ...] = NEGATION_MARKERS
    antonyms: tuple[tuple[str, str], ...] = ANTONYM_PAIRS
    revision: tuple[str, ...] = REVISION_MARKERS
    blocklist: frozenset[str] = field(default_factory=lambda: frozenset(BLOCKLIST))
    exclusive_predicates: tuple[str, ...] = EXCLUSIVE_PREDICATES

    def has_negation(self, relation: str) -> bool:
        return contains_marker(relation, self.negation)

    def is_revision(self, prompt: str) -> bool:
        return contains_marker(prompt, self.revision)

    def antonymous(self, rel_a: str, rel_b: str) -> bool:
        """Symmetric lookup on stemmed relation tokens."""
        return _antonymous(self.antonyms, rel_a, rel_b)

    def to_dict(self) -> dict:
        return {
            "negation": list(self.negation),
            "antonyms": [list(p) for p in self.antonyms],
            "revision": list(self.revision),
            "blocklist": sorted(self.blocklist),
            "exclusive_predicates": list(self.exclusive_predicates),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Lexicons":
        base = cls()
        return cls(
            negation=tuple(s.lower() for s in doc.get("negation", base.negation)),
            antonyms=tuple((a.lower(), b.lower()) for a, b in doc.get("antonyms", base.antonyms)),
            revision=tuple(s.lower() for s in doc.get("revision", base.revision)),
            blocklist=frozenset(s.lower() for s in doc.get("blocklist", base.blocklist)),
            exclusive_predicates=tuple(
                s.lower() for s in doc.get("exclusive_predicates", base.exclusive_predicates)
            ),
        )
