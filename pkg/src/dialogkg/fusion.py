"""Regime-weighted fusion of the three turn scores, plus the guard cascade."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .contradiction import ContradictionCertificate
from .relevance import word_count


class Regime(str, Enum):
    SHORT = "Short"
    QA = "QA"
    GENERAL = "General"
    BOTH_SHORT = "BothShort"


class Guard(str, Enum):
    HARD_LOGIC = "HardLogicGate"
    JOINT_WEAKNESS = "JointWeakness"
    NON_SEQUITUR = "NonSequitur"


Weights = tuple[float, float, float]


@dataclass(frozen=True)
class FusionConfig:
    short_weights: Weights = (0.50, 0.10, 0.40)
    qa_weights: Weights = (0.65, 0.05, 0.30)
    general_weights: Weights = (0.50, 0.20, 0.30)
    short_words: int = 12
    qa_words: int = 10
    log_hard: float = 0.60
    hard_cap: float = 0.40
    joint_loc: float = 0.50
    joint_cons: float = 0.45
    joint_factor: float = 0.75
    nonseq_cons: float = 0.45
    nonseq_loc: float = 0.20
    nonseq_factor: float = 0.5
    quarantine_below: float = 0.40
    pass_at: float = 0.60
    loc_fail_below: float = 0.50
    # cap at the hard gate even when S_log was lowered only by residual drift
    gate_on_drift: bool = True

    def __post_init__(self):
        for name in ("short_weights", "qa_weights", "general_weights"):
            w = getattr(self, name)
            if len(w) != 3 or any(x < 0 for x in w) or abs(sum(w) - 1.0) > 1e-9:
                raise ValueError(f"{name} must be three non-negative weights summing to 1")
        if self.short_words < 1 or self.qa_words < 1:
            raise ValueError("word thresholds must be positive")
        for name in (
            "log_hard", "hard_cap", "joint_loc", "joint_cons", "joint_factor", "nonseq_cons",
            "nonseq_loc", "nonseq_factor", "quarantine_below", "pass_at", "loc_fail_below",
        ):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")

    def weights(self, regime: Regime) -> Weights:
        if regime in (Regime.SHORT, Regime.BOTH_SHORT):
            return self.short_weights
        if regime is Regime.QA:
            return self.qa_weights
        return self.general_weights


@dataclass
class TurnScores:
    turn: int
    s_loc: float
    s_cons: float
    s_log: float
    regime: Regime
    both_short: bool
    q_pre_guards: float
    q: float
    guards_fired: list[Guard]
    quarantined: bool
    passed: bool
    certificates: list[ContradictionCertificate] = field(default_factory=list)
    s_graph: float = 1.0
    s_anchor: float = 0.0
    new_nodes: list[str] = field(default_factory=list)
    revision_targets: list[int] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "turn": self.turn,
            "S_loc": self.s_loc,
            "S_graph": self.s_graph,
            "S_anchor": self.s_anchor,
            "S_cons": self.s_cons,
            "S_log": self.s_log,
            "regime": self.regime.value,
            "both_short": self.both_short,
            "Q_pre_guards": self.q_pre_guards,
            "Q": self.q,
            "guards_fired": [g.value for g in self.guards_fired],
            "quarantined": self.quarantined,
            "passed": self.passed,
            "new_nodes": list(self.new_nodes),
            "revision_targets": list(self.revision_targets),
            "certificates": [c.to_dict() for c in self.certificates],
            "warnings": list(self.warnings),
        }


def classify_regime(prompt: str, response: str, config: FusionConfig = FusionConfig()) -> tuple[Regime, bool]:
    """Return the weight-selecting regime and the Both-Short flag."""
    wr, wq = word_count(response), word_count(prompt)
    both_short = wr < config.short_words and wq < config.short_words
    if wr < config.short_words:
        return Regime.SHORT, both_short
    if wq < config.qa_words:
        return Regime.QA, both_short
    return Regime.GENERAL, both_short


def fuse(
    s_loc: float,
    s_cons: float,
    s_log: float,
    regime: Regime,
    both_short: bool = False,
    config: FusionConfig = FusionConfig(),
    drift_only: bool = False,
) -> tuple[float, float, list[Guard]]:
    """Return (Q before guards, Q, guards fired).

    ``drift_only`` says the only contradiction this turn came from residual
    drift; it matters only when ``gate_on_drift`` is switched off.
    """
    w_loc, w_cons, w_log = config.weights(regime)
    pre = w_loc * s_loc + w_cons * s_cons + w_log * s_log
    q = pre
    fired: list[Guard] = []
    if s_log < config.log_hard and (config.gate_on_drift or not drift_only):
        q = min(q, config.hard_cap)
        fired.append(Guard.HARD_LOGIC)
    if not both_short and s_loc < config.joint_loc and s_cons < config.joint_cons:
        q *= config.joint_factor
        fired.append(Guard.JOINT_WEAKNESS)
    if not both_short and s_cons < config.nonseq_cons and s_loc < config.nonseq_loc:
        q *= config.nonseq_factor
        fired.append(Guard.NON_SEQUITUR)
    return min(1.0, max(0.0, pre)), min(1.0, max(0.0, q)), fired


def decide_flags(q: float, s_loc: float, config: FusionConfig = FusionConfig()) -> tuple[bool, bool]:
    """(quarantine, passed); never alters ``q``."""
    quarantine = q < config.quarantine_below
    passed = q >= config.pass_at and s_loc >= config.loc_fail_below
    return quarantine, passed
