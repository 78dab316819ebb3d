"""Closed vocabularies used by triples, nodes and edges.

Extractor output is noisy, so every ``parse_*`` helper is lenient: unknown
strings fall back to a neutral member instead of raising.
"""

from __future__ import annotations

from enum import Enum


class EntityType(str, Enum):
    PERSON = "Person"
    EVENT = "Event"
    OBJECT = "Object"
    CONCEPT = "Concept"
    CONDITION = "Condition"
    ORGANIZATION = "Organization"
    TIME = "Time"
    NUMBER = "Number"


class Attribute(str, Enum):
    DEFINITION = "definition"
    EFFECT = "effect"
    PROPERTY = "property"
    COMPARISON = "comparison"
    REQUIREMENT = "requirement"
    QUANTITY = "quantity"
    NEGATION = "negation"


class Intent(str, Enum):
    STATE = "State"
    ADVICE = "Advice"
    # No extractor rel_type maps here yet; kept so the taxonomy stays closed.
    HYP = "Hyp"


class PropertyType(str, Enum):
    EXCLUSIVE = "Exclusive"
    ADDITIVE = "Additive"


class RelType(str, Enum):
    ASSERTION = "assertion"
    NEGATION_ASSERTION = "negation_assertion"
    DIAGNOSIS = "diagnosis"
    SOLUTION = "solution"
    ELABORATION = "elaboration"


class EdgeKind(str, Enum):
    FACT = "Fact"
    SEMANTIC = "Semantic"


# rel_types that ElabGuard abstains on and NegFlip refuses to compare
NON_ASSERTIVE = frozenset({RelType.ELABORATION, RelType.SOLUTION, RelType.DIAGNOSIS})

_INTENT_BY_REL_TYPE = {
    RelType.ASSERTION: Intent.STATE,
    RelType.NEGATION_ASSERTION: Intent.STATE,
    RelType.ELABORATION: Intent.STATE,
    RelType.DIAGNOSIS: Intent.STATE,
    RelType.SOLUTION: Intent.ADVICE,
}


def _lookup(enum_cls, value, default):
    if isinstance(value, enum_cls):
        return value
    if not isinstance(value, str):
        return default
    folded = value.strip().lower().replace(" ", "_")
    for member in enum_cls:
        if member.value.lower() == folded or member.name.lower() == folded:
            return member
    return default


def parse_entity_type(value) -> EntityType:
    return _lookup(EntityType, value, EntityType.CONCEPT)


def parse_attribute(value) -> Attribute:
    return _lookup(Attribute, value, Attribute.PROPERTY)


def parse_rel_type(value) -> RelType:
    return _lookup(RelType, value, RelType.ASSERTION)


def parse_property_type(value) -> PropertyType:
    return _lookup(PropertyType, value, PropertyType.ADDITIVE)


def parse_intent(value) -> Intent:
    return _lookup(Intent, value, Intent.STATE)


def intent_for(rel_type: RelType) -> Intent:
    """Map an extractor relation type onto the modality taxonomy."""
    return _INTENT_BY_REL_TYPE[rel_type]
