import numpy as np
import pytest

from dialogkg.embedding import hash_embedder
from dialogkg.extraction import Triple
from dialogkg.taxonomy import EntityType, PropertyType, RelType


class DictEmbedder:
    """Fixed vectors for listed texts; anything else gets a hash vector."""

    def __init__(self, vectors, dimension=8):
        self.dimension = dimension
        self.name = "dict"
        self._fallback = hash_embedder(dimension)
        self.vectors = {k: np.asarray(v, dtype=float) for k, v in vectors.items()}
        self.calls = []

    def embed(self, text):
        self.calls.append(text)
        if text in self.vectors:
            return self.vectors[text]
        return self._fallback.embed(text)


def unit(*components, dim=8):
    v = np.zeros(dim)
    v[: len(components)] = components
    return v / np.linalg.norm(v)


def at_cos(c, dim=8):
    """Unit vector whose cosine with axis 0 is ``c``."""
    v = np.zeros(dim)
    v[0] = c
    v[1] = np.sqrt(max(0.0, 1 - c * c))
    return v


def triple(sub, rel, obj, **kw):
    kw.setdefault("importance", 0.8)
    return Triple(sub, rel, obj, **kw)


@pytest.fixture
def hasher():
    return hash_embedder()


# -- acceptance summary ---------------------------------------------------------

_CRITERIA = {}


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("acceptance")
        if mark:
            item.user_properties.append(("criterion", mark.args[0]))


def pytest_runtest_logreport(report):
    crit = dict(report.user_properties).get("criterion")
    if crit is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        if report.skipped:
            outcome = "SKIP"
        else:
            outcome = "PASS" if report.passed else "FAIL"
        prev = _CRITERIA.get(crit)
        if prev != "FAIL":
            _CRITERIA[crit] = "FAIL" if outcome == "FAIL" else (prev if prev == "PASS" and outcome == "SKIP" else outcome)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for crit in sorted(_CRITERIA, key=lambda c: int(c)):
        terminalreporter.write_line(f"criterion {crit:>2}: {_CRITERIA[crit]}")
