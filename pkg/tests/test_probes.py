import pytest

from dialogkg.config import EngineConfig
from dialogkg.contradiction import DetectorThresholds
from dialogkg.probes import PROBE_IDS, load_probe, run_probe, run_probe_suite

EXPECTED = {
    "S1": ("NegFlip", 0.95),
    "S2": ("Antonym", 0.88),
    "S3": ("NumMismatch", 0.92),
    "S4": ("ResidualSemanticDrift", 0.45),
    "S5": ("ResidualSemanticDrift", 0.75),
    "S6": (None, None),
}


@pytest.mark.parametrize("sid", PROBE_IDS)
def test_each_probe(sid):
    case = load_probe(sid)
    verdict = run_probe(case)
    detector, conf = EXPECTED[sid]
    assert verdict.passed, verdict.to_dict()
    if detector is None:
        assert verdict.fired == []
    else:
        assert verdict.fired == [detector]
        assert conf in [pytest.approx(c, abs=1e-9) for c in verdict.confidences]


def test_s6_is_revision_not_contradiction():
    v = run_probe(load_probe("S6"))
    assert any(ts.revision_targets for ts in v.report.turn_scores)


def test_suite_notices_a_broken_threshold():
    # pushing the drift ceiling below S4's object similarity must break S4 and only S4
    cfg = EngineConfig().replace(contradiction=DetectorThresholds(drift_obj_max=0.50))
    verdicts = {v.session_id: v.passed for v in run_probe_suite(cfg)}
    assert verdicts["S4"] is False
    assert all(ok for sid, ok in verdicts.items() if sid != "S4")


def test_unknown_probe():
    with pytest.raises(Exception):
        load_probe("S9")
