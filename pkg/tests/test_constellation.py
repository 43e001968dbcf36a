import csv
import io

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from firesat.constellation import PUBLISHED_DESIGN, WalkerChromosome, clamp, expand, validate
from firesat.errors import BoundViolation


def test_singleton():
    c = expand(WalkerChromosome(7000, 0.0, 50, 1, 1, 1))
    assert len(c) == 1
    s = c.sats[0]
    assert (s.raan, s.argp, s.ma0) == (0.0, 0.0, 0.0)


def test_two_by_two_hand_expansion():
    c = expand(WalkerChromosome(7000, 0.01, 50, 2, 1, 2))
    got = [(s.raan, s.argp, s.ma0) for s in c.sats]
    # RAAN 360/P apart, argp 360/n apart in-plane, MA 360F/N = 90 deg across planes
    assert got == [(0.0, 0.0, 0.0), (0.0, 180.0, 0.0), (180.0, 0.0, 90.0), (180.0, 180.0, 90.0)]


def test_published_size(published):
    assert len(published) == 3990


def test_validate_in_bounds():
    assert validate(WalkerChromosome(7000, 0.01, 50, 10, 2, 5)) == []


def test_validate_eccentricity():
    bad = validate(WalkerChromosome(7000, 0.2, 50, 10, 2, 5))
    assert [v.gene for v in bad] == ["e"]
    assert "0.05" in str(bad[0])


def test_published_phasing_flagged_without_override():
    chrom = WalkerChromosome(7334.9, 0.04, 141.39, 95, 9, 42)
    bad = validate(chrom)
    assert [(v.gene, v.value) for v in bad] == [("phasing", 9)]
    with pytest.raises(BoundViolation, match="phasing"):
        expand(chrom)
    assert validate(PUBLISHED_DESIGN) == []


def test_altitude_bounds():
    assert validate(WalkerChromosome(6500, 0.0, 50, 1, 1, 1))[0].gene == "a"
    assert validate(WalkerChromosome(7400, 0.0, 50, 1, 1, 1))[0].gene == "a"


def test_json_round_trip():
    c = WalkerChromosome(7000.5, 0.01, 50.25, 10, 2, 5)
    text = c.to_json()
    assert set(c.to_dict()) == {"a_km", "e", "i_deg", "planes", "phasing", "per_plane"}
    assert WalkerChromosome.from_json(text) == c


def test_csv_export():
    c = expand(WalkerChromosome(7000, 0.01, 50, 3, 1, 4))
    rows = list(csv.DictReader(io.StringIO(c.to_csv())))
    assert len(rows) == 12
    assert float(rows[5]["raan_deg"]) == pytest.approx(120.0)
    assert int(rows[5]["slot"]) == 1


chromosomes = st.builds(
    WalkerChromosome,
    a=st.floats(6571, 7371),
    e=st.floats(0, 0.05),
    i=st.floats(0, 180),
    planes=st.integers(1, 30),
    phasing=st.integers(1, 8),
    per_plane=st.integers(1, 20),
)


@settings(max_examples=60, deadline=None)
@given(chromosomes)
def test_expand_properties(chrom):
    c = expand(chrom)
    assert len(c) == chrom.planes * chrom.per_plane
    assert expand(chrom) == c
    assert {(s.a, s.e, s.i) for s in c.sats} == {(chrom.a, chrom.e, chrom.i % 360.0)}
    raans = sorted({s.raan for s in c.sats})
    assert len(raans) == chrom.planes
    for r in raans:
        assert sum(1 for s in c.sats if s.raan == r) == chrom.per_plane
    gaps = [b - a for a, b in zip(raans, raans[1:])]
    assert all(g == pytest.approx(360.0 / chrom.planes) for g in gaps)


@settings(max_examples=100, deadline=None)
@given(st.floats(6000, 8000), st.floats(-1, 1), st.floats(-10, 200),
       st.integers(-5, 200), st.integers(-5, 20), st.integers(-5, 80))
def test_clamp_always_valid(a, e, i, p, f, n):
    assert validate(clamp(WalkerChromosome(a, e, i, p, f, n))) == []
