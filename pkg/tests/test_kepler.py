import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq
from scipy.spatial.transform import Rotation

from firesat.errors import IterationLimitExceeded
from firesat.kepler import (
    DEFAULT_EARTH,
    EarthModel,
    EciState,
    OrbitalElements,
    ecef_to_geodetic,
    eci_position,
    eci_to_ecef,
    geodetic_to_ecef,
    mean_anomaly_at,
    propagate,
    radius,
    solve_kepler,
    true_anomaly,
)

MU = 398600.4418
A = 7334.9


def test_mean_anomaly_zero_time():
    assert mean_anomaly_at(OrbitalElements(A, 0.0, 0.0), DEFAULT_EARTH, 0.0) == 0.0


def test_mean_anomaly_full_period_wraps():
    el = OrbitalElements(A, 0.0, 0.0)
    ma = mean_anomaly_at(el, DEFAULT_EARTH, 2 * math.pi * math.sqrt(A**3 / MU))
    assert min(ma, 360.0 - ma) < 1e-9


def test_mean_anomaly_after_one_minute():
    # sqrt(mu/a^3) * 60 s in degrees, evaluated separately
    assert mean_anomaly_at(OrbitalElements(A, 0.0, 0.0), DEFAULT_EARTH, 60.0) == pytest.approx(
        3.4550272316730344, rel=1e-12
    )


def test_mean_anomaly_rejects_negative_time():
    with pytest.raises(ValueError):
        mean_anomaly_at(OrbitalElements(A, 0.0, 0.0), DEFAULT_EARTH, -1.0)


def test_kepler_fixed_points():
    assert solve_kepler(0.0, 0.04) == 0.0
    for x in (0.3, 2.0, 5.5):
        assert solve_kepler(x, 0.0) == x


def test_kepler_against_bisection():
    # bisection on [0, 2pi] for E - 0.05 sin E = 1
    assert solve_kepler(1.0, 0.05) == pytest.approx(1.0432010111431818, abs=1e-12)


def test_kepler_iteration_cap():
    with pytest.raises(IterationLimitExceeded):
        solve_kepler(3.0, 0.049, tol=1e-15, max_iter=1)


def test_kepler_residual_random_inputs():
    rng = np.random.default_rng(42)
    ma = rng.uniform(0, 2 * math.pi, 10_000)
    e = rng.uniform(0, 0.05, 10_000)
    big_e = solve_kepler(ma, e)
    assert np.max(np.abs(big_e - e * np.sin(big_e) - ma)) < 1e-10


def test_true_anomaly_values():
    assert true_anomaly(0.0, 0.04) == 0.0
    assert true_anomaly(math.pi, 0.04) == pytest.approx(math.pi)
    assert true_anomaly(1.2, 0.05) == pytest.approx(1.2470489956773958, abs=1e-14)


def test_true_anomaly_keeps_half_plane():
    big_e = np.linspace(-math.pi + 1e-6, math.pi - 1e-6, 101)
    f = true_anomaly(big_e, 0.04)
    assert np.all(np.sign(f) == np.sign(big_e))
    assert np.all(np.diff(f) > 0)


def test_radius():
    assert radius(OrbitalElements(A, 0.0, 0.0), 1.234) == pytest.approx(A)
    assert radius(OrbitalElements(A, 0.04, 0.0), 0.0) == pytest.approx(7041.504)
    assert radius(OrbitalElements(A, 0.04, 0.0), math.pi / 2) == pytest.approx(7323.16416)


def test_eci_identity_rotation():
    s = eci_position(OrbitalElements(A, 0.0, 0.0), DEFAULT_EARTH, 0.0)
    assert (s.x, s.y, s.z) == pytest.approx((A, 0.0, 0.0), abs=1e-9)


def test_eci_polar_quarter_orbit():
    el = OrbitalElements(A, 0.0, 90.0)
    s = eci_position(el, DEFAULT_EARTH, el.period() / 4)
    assert (s.x, s.y, s.z) == pytest.approx((0.0, 0.0, A), abs=1e-6)


def _independent_position(el, t):
    m = (math.radians(el.ma0) + math.sqrt(MU / el.a**3) * t) % (2 * math.pi)
    big_e = brentq(lambda x: x - el.e * math.sin(x) - m, 0.0, 2 * math.pi, xtol=1e-15)
    nu = 2 * math.atan2(math.sqrt(1 + el.e) * math.sin(big_e / 2), math.sqrt(1 - el.e) * math.cos(big_e / 2))
    r = el.a * (1 - el.e * math.cos(big_e))
    rot = Rotation.from_euler("ZXZ", [el.raan, el.i, el.argp], degrees=True)
    return rot.apply([r * math.cos(nu), r * math.sin(nu), 0.0])


def test_eci_matches_independent_propagator(published):
    sat = published.sats[3 * 42 + 5]
    s = eci_position(sat, DEFAULT_EARTH, 300.0)
    frozen = (3992.528582679375, -4263.16791238027, 3966.140066336774)
    assert (s.x, s.y, s.z) == pytest.approx(frozen, abs=1e-6)
    assert s.as_array() == pytest.approx(_independent_position(sat, 300.0), abs=1e-6)


@settings(max_examples=50, deadline=None)
@given(
    e=st.floats(0, 0.049),
    i=st.floats(0, 180),
    raan=st.floats(0, 360),
    argp=st.floats(0, 360),
    ma0=st.floats(0, 360),
    t=st.floats(0, 86400),
)
def test_eci_matches_independent_propagator_property(e, i, raan, argp, ma0, t):
    el = OrbitalElements(A, e, i, raan, argp, ma0)
    assert eci_position(el, DEFAULT_EARTH, t).as_array() == pytest.approx(
        _independent_position(el, t), abs=1e-6
    )


def test_vectorised_matches_scalar(published):
    sats = published.sats[:7]
    times = np.array([0.0, 123.0, 4567.0])
    el = published.subset(range(7)).element_arrays()
    pos = propagate(el["a"], el["e"], el["i"], el["raan"], el["argp"], el["ma0"], times)
    for k, sat in enumerate(sats):
        for j, t in enumerate(times):
            assert pos[k, j] == pytest.approx(eci_position(sat, DEFAULT_EARTH, t).as_array(), abs=1e-8)


def test_radius_bounds_and_period_closure():
    rng = np.random.default_rng(7)
    for _ in range(20):
        el = OrbitalElements(rng.uniform(6571, 7371), rng.uniform(0, 0.049), *rng.uniform(0, 360, 4))
        T = el.period()
        times = np.linspace(0, T, 500)
        pos = propagate(el.a, el.e, el.i, el.raan, el.argp, el.ma0, times)[0]
        r = np.linalg.norm(pos, axis=1)
        assert np.all(r >= el.perigee - 1e-6) and np.all(r <= el.apogee + 1e-6)
        assert np.linalg.norm(pos[-1] - pos[0]) < 1e-6


def test_ecef_rotation():
    s = EciState(1.0, 2.0, 3.0, 0.0)
    assert eci_to_ecef(s).as_array() == pytest.approx([1.0, 2.0, 3.0])
    day = DEFAULT_EARTH.sidereal_day
    r = eci_to_ecef(EciState(6371.0, 0.0, 0.0, day))
    assert r.as_array() == pytest.approx([6371.0, 0.0, 0.0], abs=1e-9)
    w = DEFAULT_EARTH.omega_e * 3600
    r = eci_to_ecef(EciState(7000.0, 0.0, 0.0, 3600.0))
    assert r.as_array() == pytest.approx([7000 * math.cos(w), -7000 * math.sin(w), 0.0], abs=1e-9)


@settings(max_examples=200, deadline=None)
@given(st.tuples(*[st.floats(-1e4, 1e4)] * 3).filter(lambda v: sum(x * x for x in v) > 1),
       st.floats(0, 1e6))
def test_ecef_preserves_norm(v, t):
    s = EciState(*v, t)
    assert eci_to_ecef(s).norm == pytest.approx(s.norm, rel=1e-9)


def test_geodetic_special_points():
    p = ecef_to_geodetic((6371.0, 0.0, 0.0))
    assert (p.lat, p.lon) == pytest.approx((0.0, 0.0))
    assert ecef_to_geodetic((0.0, 0.0, 6371.0)).lat == pytest.approx(90.0)
    p = ecef_to_geodetic((4000.0, 4000.0, 3000.0))
    assert p.lat == pytest.approx(27.93835272960235, abs=1e-10)
    assert p.lon == pytest.approx(45.0)


def test_geodetic_rejects_origin():
    with pytest.raises(ValueError):
        ecef_to_geodetic((0.0, 0.0, 0.0))


def test_longitude_range():
    assert ecef_to_geodetic((-6371.0, 0.0, 0.0)).lon == 180.0


@settings(max_examples=300, deadline=None)
@given(st.floats(-89.9, 89.9), st.floats(-179.9, 179.9))
def test_spherical_round_trip(lat, lon):
    p = ecef_to_geodetic(geodetic_to_ecef(lat, lon))
    assert p.lat == pytest.approx(lat, abs=1e-9)
    assert p.lon == pytest.approx(lon, abs=1e-9)


def test_ellipsoidal_round_trip():
    wgs = EarthModel(r_e=6378.137, e_earth=0.0818191908426)
    rng = np.random.default_rng(3)
    for lat, lon in zip(rng.uniform(-89, 89, 200), rng.uniform(-179, 179, 200)):
        p = ecef_to_geodetic(geodetic_to_ecef(lat, lon, 0.0, wgs), wgs)
        assert p.lat == pytest.approx(lat, abs=1e-9)
        assert p.lon == pytest.approx(lon, abs=1e-9)


def test_element_validation():
    with pytest.raises(ValueError):
        OrbitalElements(-1.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        OrbitalElements(7000.0, 1.0, 0.0)
    assert OrbitalElements(7000.0, 0.0, 370.0).i == pytest.approx(10.0)
    with pytest.raises(ValueError):
        OrbitalElements(6300.0, 0.0, 0.0).check_above_surface()
