from __future__ import annotations

import pytest
from hypothesis import given, strategies as st

from findingskb.model import (
    Location,
    SeverityBand,
    StatusValue,
    ValidationError,
    band_for_score,
    canonical_fingerprint,
    normalize_severity,
    validate_report,
)
from tests.conftest import native_document, native_entry


class TestNormalizeSeverity:
    def test_label_critical_maps_to_band_score(self):
        level = normalize_severity("CRITICAL", None)
        assert level.band is SeverityBand.CRITICAL
        assert level.score == 9.5

    def test_cvss_98_is_critical(self):
        # oracle: CVSS v3.1 qualitative bands, 9.0-10.0 = Critical
        assert normalize_severity(None, 9.8).band is SeverityBand.CRITICAL

    def test_unscored_fallback_is_flagged_medium(self):
        level = normalize_severity(None, None)
        assert level.band is SeverityBand.MEDIUM
        assert "unscored" in level.flags

    def test_cvss_precedence_over_label(self):
        assert normalize_severity("low", 9.1).band is SeverityBand.CRITICAL

    def test_cvss_out_of_range_rejected(self):
        with pytest.raises(ValidationError):
            normalize_severity(None, 10.1)
        with pytest.raises(ValidationError):
            normalize_severity(None, -0.5)

    def test_unknown_label_flagged(self):
        level = normalize_severity("weird", None)
        assert level.band is SeverityBand.MEDIUM
        assert "unknown-label" in level.flags

    @given(st.one_of(st.none(), st.sampled_from(["critical", "HIGH", "note", "bogus", "minor"])),
           st.one_of(st.none(), st.floats(min_value=0, max_value=10)))
    def test_total_over_label_cvss_pairs(self, label, cvss):
        level = normalize_severity(label, cvss)
        assert level.band is band_for_score(level.score)

    @given(st.floats(min_value=0, max_value=10))
    def test_band_score_consistency(self, score):
        band = band_for_score(score)
        if score >= 9.0:
            assert band is SeverityBand.CRITICAL
        elif score >= 7.0:
            assert band is SeverityBand.HIGH
        elif score >= 4.0:
            assert band is SeverityBand.MEDIUM
        elif score > 0.0:
            assert band is SeverityBand.LOW
        else:
            assert band is SeverityBand.INFO


class TestFingerprint:
    def test_deterministic(self):
        loc = Location("src/a.py", line=10)
        a = canonical_fingerprint("p", "tool", "R1", loc, ["CVE-2021-0001"])
        b = canonical_fingerprint("p", "tool", "R1", loc, ["CVE-2021-0001"])
        assert a == b

    def test_line_excluded_from_identity(self):
        a = canonical_fingerprint("p", "tool", "R1", Location("src/a.py", line=10))
        b = canonical_fingerprint("p", "tool", "R1", Location("src/a.py", line=14))
        assert a == b

    def test_path_part_of_key(self):
        a = canonical_fingerprint("p", "tool", "R1", Location("src/a.py"))
        b = canonical_fingerprint("p", "tool", "R1", Location("src/b.py"))
        assert a != b

    def test_missing_mandatory_fields_listed(self):
        with pytest.raises(ValidationError) as exc:
            canonical_fingerprint("p", "", "", Location("x"))
        message = str(exc.value)
        assert "tool name" in message and "rule_id" in message

    @given(
        st.tuples(
            st.text(min_size=1, max_size=8),
            st.text(min_size=1, max_size=8),
            st.text(min_size=1, max_size=8),
            st.lists(st.sampled_from(["CVE-1", "CVE-2"]), max_size=2),
        ),
        st.tuples(
            st.text(min_size=1, max_size=8),
            st.text(min_size=1, max_size=8),
            st.text(min_size=1, max_size=8),
            st.lists(st.sampled_from(["CVE-1", "CVE-2"]), max_size=2),
        ),
    )
    def test_injective_over_key_tuple(self, a, b):
        fa = canonical_fingerprint("p", a[0], a[1], Location(a[2]), a[3])
        fb = canonical_fingerprint("p", b[0], b[1], Location(b[2]), b[3])
        if (a[0], a[1], a[2], sorted(a[3])) != (b[0], b[1], b[2], sorted(b[3])):
            assert fa != fb
        else:
            assert fa == fb


class TestValidateReport:
    def test_happy_path(self):
        report = validate_report(native_document([native_entry()]), "native", "proj")
        assert report.tool.name == "scanny"
        assert report.scan_scope == "main"
        assert report.project_id == "proj"

    def test_empty_document(self):
        with pytest.raises(ValidationError, match="empty document"):
            validate_report(b"", "native", "proj")

    def test_missing_tool_name(self):
        doc = native_document([])
        doc = doc.replace(b'"name": "scanny", ', b'')
        with pytest.raises(ValidationError, match="tool.name"):
            validate_report(doc, "native", "proj")

    def test_unknown_format_tag(self):
        with pytest.raises(ValidationError, match="unknown format_tag"):
            validate_report(b"{}", "nope", "proj")

    def test_same_bytes_same_report_id(self):
        doc = native_document([native_entry()])
        a = validate_report(doc, "native", "proj")
        b = validate_report(doc, "native", "proj")
        assert a.report_id == b.report_id


def test_status_values_exactly_eight():
    assert len(StatusValue) == 8
    assert {s.value for s in StatusValue} == {
        "Open", "InWork", "FalsePositive", "Invalid",
        "Accepted", "Solved", "OnHold", "Disappeared",
    }
