"""Bundled diagnostic sessions: the six probe cases and the four-turn walkthrough.

Each data file ships its turns with pre-extracted triples and a small
similarity table, so the suite runs offline and deterministically.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from importlib import resources

from .config import EngineConfig
from .contradiction import Detector
from .embedding import EmbeddingProvider, hash_embedder, table_from_document
from .engine import DialogueTurn, Providers, SessionInput, SessionReport, score_session
from .extraction import Extractor, ScriptedExtractor, triples_from_json_list, turn_text

logger = logging.getLogger(__name__)

PROBE_IDS = ("S1", "S2", "S3", "S4", "S5", "S6")


def _read(name: str) -> dict:
    return json.loads(resources.files("dialogkg").joinpath("data").joinpath(name).read_text(encoding="utf-8"))


@dataclass(frozen=True)
class ProbeCase:
    session_id: str
    title: str
    session: SessionInput
    script: dict
    table: dict
    expected_detector: Detector | None = None
    expected_confidence: float | None = None
    expect_no_contradiction: bool = False

    def __post_init__(self):
        if (self.expected_detector is None) == (not self.expect_no_contradiction):
            raise ValueError(f"probe {self.session_id}: set exactly one expectation")

    @classmethod
    def from_dict(cls, doc: dict) -> "ProbeCase":
        turns = tuple(DialogueTurn(t["prompt"], t["response"], t.get("reference")) for t in doc["turns"])
        script = {turn_text(t["prompt"], t["response"]): t.get("triples", []) for t in doc["turns"]}
        det = doc.get("expected_detector")
        return cls(
            session_id=doc["session_id"],
            title=doc.get("title", ""),
            session=SessionInput(doc["session_id"], turns),
            script=script,
            table=doc.get("embedding", {}),
            expected_detector=Detector(det) if det else None,
            expected_confidence=doc.get("expected_confidence"),
            expect_no_contradiction=bool(doc.get("expect_no_contradiction", False)),
        )

    def providers(self, fallback: EmbeddingProvider | None = None, extractor: Extractor | None = None) -> Providers:
        embedder = table_from_document(self.table, fallback or hash_embedder())
        if extractor is None:
            extractor = ScriptedExtractor({k: triples_from_json_list(v) for k, v in self.script.items()})
        return Providers(embedder, extractor)


def load_probe(session_id: str) -> ProbeCase:
    if session_id not in PROBE_IDS:
        raise KeyError(session_id)
    return ProbeCase.from_dict(_read(f"probes/{session_id}.json"))


def load_probes() -> list[ProbeCase]:
    return [load_probe(s) for s in PROBE_IDS]


@dataclass
class ProbeVerdict:
    session_id: str
    passed: bool
    fired: list[str]
    confidences: list[float]
    expected: str | None
    report: SessionReport = field(repr=False, default=None)

    def to_dict(self) -> dict:
        return {
            "session_id": self.session_id,
            "passed": self.passed,
            "expected": self.expected,
            "fired": self.fired,
            "confidences": self.confidences,
        }


def run_probe(case: ProbeCase, config: EngineConfig = EngineConfig(), extractor: Extractor | None = None) -> ProbeVerdict:
    report = score_session(case.session, case.providers(extractor=extractor), config)
    certs = report.certificates
    fired = sorted({c.detector.value for c in certs})
    confs = [c.confidence for c in certs]
    if case.expect_no_contradiction:
        ok = not certs
    else:
        ok = fired == [case.expected_detector.value]
        if ok and case.expected_confidence is not None:
            ok = any(abs(c - case.expected_confidence) < 1e-9 for c in confs)
    return ProbeVerdict(
        case.session_id, ok, fired, confs,
        case.expected_detector.value if case.expected_detector else None, report,
    )


def run_probe_suite(config: EngineConfig = EngineConfig(), extractor: Extractor | None = None) -> list[ProbeVerdict]:
    """Score every bundled probe; ``extractor`` replaces the shipped triples when given."""
    return [run_probe(case, config, extractor) for case in load_probes()]


@dataclass(frozen=True)
class Walkthrough:
    session: SessionInput
    config: EngineConfig
    providers: Providers


def load_walkthrough() -> Walkthrough:
    """The four-turn breakfast/metabolism session with scripted providers."""
    doc = _read("walkthrough.json")
    session = SessionInput.from_dict(doc["session"])
    script = {
        turn_text(t.prompt, t.response): triples_from_json_list(items)
        for t, items in zip(session.turns, doc["triples"])
    }
    embedder = table_from_document(doc["embedding"], hash_embedder())
    return Walkthrough(session, EngineConfig.from_dict(doc["config"]), Providers(embedder, ScriptedExtractor(script)))
