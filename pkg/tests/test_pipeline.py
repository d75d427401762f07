import json

import pytest

from substcps import PipelineOptions, VerdictKind, run_pipeline
from substcps.pipeline import EXIT_CODES

from conftest import spec


@pytest.fixture(scope="module")
def reports():
    return {n: run_pipeline(spec(n)) for n in ("fibonacci", "aab_abab", "thue_morse", "doubling", "non_pisot")}


@pytest.mark.parametrize(
    "name,kind",
    [
        ("fibonacci", VerdictKind.REGULAR),
        ("aab_abab", VerdictKind.OVERLAP),
        ("thue_morse", VerdictKind.INAPPLICABLE),
        ("doubling", VerdictKind.INAPPLICABLE),
        ("non_pisot", VerdictKind.INAPPLICABLE),
    ],
)
def test_verdicts(reports, name, kind):
    r = reports[name]
    assert r.verdict.kind == kind
    assert r.exit_code == EXIT_CODES[kind]


def test_gate_reasons(reports):
    assert reports["thue_morse"].verdict.reason == "empty internal space"
    assert reports["doubling"].verdict.reason == "empty internal space"
    assert reports["non_pisot"].verdict.reason == "Pisot family condition fails"
    assert "non-unimodular expansion" in reports["aab_abab"].data["notes"]
    assert "non-unimodular expansion" not in reports["fibonacci"].data["notes"]


def test_overlap_verdict_has_positive_eroded_entry(reports):
    ov = reports["aab_abab"].data["overlap"]["eroded_overlap"]
    assert ov[0][1] > 0


@pytest.mark.parametrize("name", ["fibonacci", "aab_abab", "thue_morse", "doubling", "non_pisot"])
def test_reports_label_their_bounds(reports, name):
    p = reports[name].data["parameters"]
    for key in ("radius", "depth", "m_max"):
        assert p[key] is not None


def test_report_is_deterministic():
    a = run_pipeline(spec("fibonacci")).to_json()
    b = run_pipeline(spec("fibonacci")).to_json()
    assert a == b
    json.loads(a)


def test_not_primitive_is_inapplicable():
    doc = {"format": 1, "letters": ["a", "b"], "rules": {"a": "ab", "b": "b"}}
    r = run_pipeline(doc)
    assert r.verdict.kind == VerdictKind.INAPPLICABLE
    assert "not primitive" in r.verdict.reason


def test_no_certificate_when_m_max_too_small():
    r = run_pipeline(spec("tribonacci"), PipelineOptions(m_max=1, radius=20.0))
    assert r.verdict.kind == VerdictKind.NO_CERTIFICATE
    assert r.data["coincidence"]["found"] is False
    assert r.exit_code == 3


def test_tribonacci_inclusions_have_no_exceptions():
    d = run_pipeline(spec("tribonacci")).data["model_set_inclusions"]
    assert d["depth"] == 8 and d["margin_cells"] == 2 and d["radius"] == 200.0
    assert sum(d["control_points_outside_cover"]) == 0
    assert sum(d["inner_window_points_not_control_points"]) == 0
