import pytest

import gshs
from gshs.assumptions import POSITION_LABELS, VELOCITY_LABELS


def test_every_label_appears_exactly_once(quad1):
    rep = gshs.validate_assumptions(quad1, quad1)
    names = [e.name for e in rep.entries]
    assert sorted(names) == sorted(POSITION_LABELS + VELOCITY_LABELS)
    assert len(names) == 20


def test_gaussian_pair_passes(quad1):
    rep = gshs.validate_assumptions(quad1, quad1)
    assert rep.passed
    statuses = {e.name: e.status for e in rep.entries}
    assert statuses["phi1-5"] == "not-machine-checkable"
    assert statuses["phi2-4"] == "not-machine-checkable"
    verified = [n for n, s in statuses.items() if s == "verified"]
    assert len(verified) == 18


def test_lennard_jones_pair_passes(lj1, quad1):
    rep = gshs.validate_assumptions(lj1, quad1)
    assert rep.passed
    assert not rep.violations


def test_linear_position_potential_violates(quad1):
    rep = gshs.validate_assumptions(gshs.linear_potential(1), quad1)
    assert not rep.passed
    names = {e.name for e in rep.violations}
    # non-normalizable measure and divergent moments
    assert "phi1-6" in names
    assert "phi1-8" in names


def test_asymmetric_velocity_potential_flagged(quad1):
    asym = gshs.expression_potential("x1**4/4 + x1**3/10", dim=1)
    rep = gshs.validate_assumptions(quad1, asym)
    assert rep.entry("phi2-6").status == "violated"


def test_report_lines_and_entry_lookup(quad1):
    rep = gshs.validate_assumptions(quad1, quad1)
    lines = rep.lines()
    assert len(lines) == 20
    assert any("phi1-6" in ln for ln in lines)
    assert rep.entry("phi1-1").status == "verified"
    with pytest.raises(KeyError):
        rep.entry("phi1-99")
