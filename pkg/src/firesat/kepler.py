"""Two-body Keplerian propagation and frame conversions.

Angles cross the public API in degrees; everything internal is radians.
The functions are written against numpy so the same code path serves a
single satellite at one instant and a whole constellation over a day.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import IterationLimitExceeded

MU_EARTH = 398600.4418  # km^3/s^2
R_EARTH = 6371.0  # km
OMEGA_EARTH = 7.292e-5  # rad/s, sidereal rotation

KEPLER_TOL = 1e-12
KEPLER_MAX_ITER = 50
LATITUDE_TOL = 1e-10


@dataclass(frozen=True)
class EarthModel:
    mu: float = MU_EARTH
    r_e: float = R_EARTH
    omega_e: float = OMEGA_EARTH
    e_earth: float = 0.0

    def __post_init__(self):
        if self.mu <= 0 or self.r_e <= 0 or self.omega_e <= 0:
            raise ValueError("mu, r_e and omega_e must be positive")
        if not 0.0 <= self.e_earth < 1.0:
            raise ValueError("e_earth must lie in [0, 1)")

    @property
    def sidereal_day(self) -> float:
        return 2.0 * math.pi / self.omega_e


DEFAULT_EARTH = EarthModel()


@dataclass(frozen=True)
class OrbitalElements:
    """Keplerian elements of one satellite at t = 0 (km, degrees)."""

    a: float
    e: float
    i: float
    raan: float = 0.0
    argp: float = 0.0
    ma0: float = 0.0

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError(f"semi-major axis must be positive, got {self.a}")
        if not 0.0 <= self.e < 1.0:
            raise ValueError(f"eccentricity must lie in [0, 1), got {self.e}")
        for name in ("i", "raan", "argp", "ma0"):
            object.__setattr__(self, name, float(getattr(self, name)) % 360.0)

    @property
    def perigee(self) -> float:
        return self.a * (1.0 - self.e)

    @property
    def apogee(self) -> float:
        return self.a * (1.0 + self.e)

    def period(self, earth: EarthModel = DEFAULT_EARTH) -> float:
        return 2.0 * math.pi * math.sqrt(self.a**3 / earth.mu)

    def check_above_surface(self, earth: EarthModel = DEFAULT_EARTH) -> None:
        if self.perigee <= earth.r_e:
            raise ValueError(
                f"perigee radius {self.perigee:.1f} km is inside the Earth ({earth.r_e} km)"
            )


@dataclass(frozen=True)
class EciState:
    """Position in km; ``frame`` is "eci" or "ecef"."""

    x: float
    y: float
    z: float
    t: float
    frame: str = "eci"

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    @property
    def norm(self) -> float:
        return math.sqrt(self.x**2 + self.y**2 + self.z**2)


@dataclass(frozen=True)
class GeodeticPoint:
    lat: float
    lon: float
    t: float = 0.0


def _wrap_lon(lon_deg):
    """Map longitudes into (-180, 180]."""
    out = np.mod(np.asarray(lon_deg, dtype=float) + 180.0, 360.0) - 180.0
    out = np.where(out == -180.0, 180.0, out)
    return out if out.ndim else float(out)


def mean_anomaly_at(el: OrbitalElements, earth: EarthModel, t) -> float | np.ndarray:
    """Mean anomaly in degrees at ``t`` seconds past epoch, in [0, 360)."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be non-negative")
    n = math.sqrt(earth.mu / el.a**3)
    ma = np.mod(math.radians(el.ma0) + n * t, 2.0 * math.pi)
    out = np.degrees(ma)
    # floating wrap can land exactly on 360
    out = np.where(out >= 360.0, 0.0, out)
    return out if out.ndim else float(out)


def solve_kepler(ma, e: float, tol: float = KEPLER_TOL, max_iter: int = KEPLER_MAX_ITER):
    """Eccentric anomaly (radians) for mean anomaly ``ma`` (radians).

    Newton-Raphson from E0 = MA. Accepts scalars or arrays.
    """
    if not np.all((np.asarray(e) >= 0.0) & (np.asarray(e) < 1.0)):
        raise ValueError(f"eccentricity must lie in [0, 1), got {e}")
    if not tol > 0:
        raise ValueError("tol must be positive")
    ma = np.asarray(ma, dtype=float)
    ecc = np.asarray(e, dtype=float)
    big_e = ma.copy()
    for _ in range(max_iter):
        resid = big_e - ecc * np.sin(big_e) - ma
        if np.all(np.abs(resid) < tol):
            return big_e if big_e.ndim else float(big_e)
        big_e = big_e - resid / (1.0 - ecc * np.cos(big_e))
    resid = big_e - ecc * np.sin(big_e) - ma
    if np.all(np.abs(resid) < tol):
        return big_e if big_e.ndim else float(big_e)
    raise IterationLimitExceeded(
        f"Kepler solver residual {np.max(np.abs(resid)):.3e} above tol {tol:.1e} "
        f"after {max_iter} iterations"
    )


def true_anomaly(big_e, e: float):
    """True anomaly (radians) from eccentric anomaly (radians).

    Half-angle form evaluated with atan2 so the result stays in the same
    half-plane as E and is continuous through apogee.
    """
    big_e = np.asarray(big_e, dtype=float)
    half = big_e / 2.0
    f = 2.0 * np.arctan2(np.sqrt(1.0 + e) * np.sin(half), np.sqrt(1.0 - e) * np.cos(half))
    return f if f.ndim else float(f)


def radius(el: OrbitalElements, f):
    """Orbital radius (km) at true anomaly ``f`` (radians)."""
    f = np.asarray(f, dtype=float)
    r = el.a * (1.0 - el.e**2) / (1.0 + el.e * np.cos(f))
    return r if r.ndim else float(r)


def perifocal_to_eci_matrix(i_deg, raan_deg, argp_deg) -> np.ndarray:
    """Rotation from the orbital plane frame into ECI.

    Broadcasts: for array inputs of shape S the result has shape S + (3, 3).
    """
    i = np.radians(np.asarray(i_deg, dtype=float))
    raan = np.radians(np.asarray(raan_deg, dtype=float))
    w = np.radians(np.asarray(argp_deg, dtype=float))
    ci, si = np.cos(i), np.sin(i)
    co, so = np.cos(raan), np.sin(raan)
    cw, sw = np.cos(w), np.sin(w)
    rows = [
        [cw * co - so * sw * ci, -co * sw - so * cw * ci, so * si],
        [so * cw + co * sw * ci, -sw * so + co * cw * ci, -co * si],
        [sw * si, cw * si, ci],
    ]
    return np.moveaxis(np.array(rows), (0, 1), (-2, -1))


def eci_position(el: OrbitalElements, earth: EarthModel, t: float) -> EciState:
    ma = math.radians(mean_anomaly_at(el, earth, t))
    big_e = solve_kepler(ma, el.e)
    f = true_anomaly(big_e, el.e)
    r = radius(el, f)
    vec = perifocal_to_eci_matrix(el.i, el.raan, el.argp) @ np.array(
        [r * math.cos(f), r * math.sin(f), 0.0]
    )
    return EciState(float(vec[0]), float(vec[1]), float(vec[2]), float(t), "eci")


def propagate(
    a, e, i, raan, argp, ma0, times, earth: EarthModel = DEFAULT_EARTH
) -> np.ndarray:
    """ECI positions for many satellites at many times.

    Element arguments are 1-D arrays of length S (degrees / km), ``times``
    has length T. Returns an array of shape (S, T, 3) in km.
    """
    a = np.atleast_1d(np.asarray(a, dtype=float))
    e = np.broadcast_to(np.asarray(e, dtype=float), a.shape)
    i = np.broadcast_to(np.asarray(i, dtype=float), a.shape)
    raan = np.broadcast_to(np.asarray(raan, dtype=float), a.shape)
    argp = np.broadcast_to(np.asarray(argp, dtype=float), a.shape)
    ma0 = np.broadcast_to(np.asarray(ma0, dtype=float), a.shape)
    times = np.atleast_1d(np.asarray(times, dtype=float))

    n = np.sqrt(earth.mu / a**3)
    ma = np.mod(np.radians(ma0)[:, None] + n[:, None] * times[None, :], 2.0 * np.pi)
    ecc = e[:, None]
    big_e = solve_kepler(ma, ecc)
    f = true_anomaly(big_e, ecc)
    r = a[:, None] * (1.0 - ecc**2) / (1.0 + ecc * np.cos(f))
    plane = np.stack([r * np.cos(f), r * np.sin(f), np.zeros_like(r)], axis=-1)
    rot = perifocal_to_eci_matrix(i, raan, argp)  # (S, 3, 3)
    return np.einsum("sij,stj->sti", rot, plane)


def rotation_eci_to_ecef(t, earth: EarthModel = DEFAULT_EARTH) -> np.ndarray:
    theta = earth.omega_e * np.asarray(t, dtype=float)
    c, s = np.cos(theta), np.sin(theta)
    z, o = np.zeros_like(c), np.ones_like(c)
    m = np.array([[c, s, z], [-s, c, z], [z, z, o]])
    return np.moveaxis(m, (0, 1), (-2, -1))


def eci_to_ecef(s: EciState, earth: EarthModel = DEFAULT_EARTH) -> EciState:
    v = rotation_eci_to_ecef(s.t, earth) @ s.as_array()
    return EciState(float(v[0]), float(v[1]), float(v[2]), s.t, "ecef")


def eci_to_ecef_array(pos: np.ndarray, times, earth: EarthModel = DEFAULT_EARTH) -> np.ndarray:
    """Rotate an (..., T, 3) position array; ``times`` has length T."""
    theta = earth.omega_e * np.asarray(times, dtype=float)
    c, s = np.cos(theta), np.sin(theta)
    x, y, z = pos[..., 0], pos[..., 1], pos[..., 2]
    return np.stack([c * x + s * y, -s * x + c * y, z], axis=-1)


def _latitude(x, y, z, earth: EarthModel):
    p = np.hypot(x, y)
    if earth.e_earth == 0.0:
        return np.arctan2(z, p)
    e2 = earth.e_earth**2
    lat = np.arctan2(z, p * (1.0 - e2))
    for _ in range(100):
        n = earth.r_e / np.sqrt(1.0 - e2 * np.sin(lat) ** 2)
        new = np.arctan2(z + e2 * n * np.sin(lat), p)
        if np.all(np.abs(new - lat) < LATITUDE_TOL):
            return new
        lat = new
    return lat


def ecef_to_geodetic_array(pos: np.ndarray, earth: EarthModel = DEFAULT_EARTH):
    """(lat, lon) in degrees for an (..., 3) ECEF array."""
    x, y, z = pos[..., 0], pos[..., 1], pos[..., 2]
    lat = np.degrees(_latitude(x, y, z, earth))
    lon = _wrap_lon(np.degrees(np.arctan2(y, x)))
    return lat, lon


def ecef_to_geodetic(p, earth: EarthModel = DEFAULT_EARTH, t: float | None = None) -> GeodeticPoint:
    if isinstance(p, EciState):
        t = p.t if t is None else t
        p = p.as_array()
    p = np.asarray(p, dtype=float)
    if not np.linalg.norm(p) > 0:
        raise ValueError("cannot convert the origin to geodetic coordinates")
    lat, lon = ecef_to_geodetic_array(p, earth)
    return GeodeticPoint(float(lat), float(lon), 0.0 if t is None else float(t))


def geodetic_to_ecef(lat_deg, lon_deg, h_km=0.0, earth: EarthModel = DEFAULT_EARTH) -> np.ndarray:
    lat = np.radians(np.asarray(lat_deg, dtype=float))
    lon = np.radians(np.asarray(lon_deg, dtype=float))
    e2 = earth.e_earth**2
    n = earth.r_e / np.sqrt(1.0 - e2 * np.sin(lat) ** 2)
    x = (n + h_km) * np.cos(lat) * np.cos(lon)
    y = (n + h_km) * np.cos(lat) * np.sin(lon)
    z = (n * (1.0 - e2) + h_km) * np.sin(lat)
    return np.stack([x, y, z], axis=-1)


def ground_track(el: OrbitalElements, times, earth: EarthModel = DEFAULT_EARTH):
    """Sub-satellite (lat, lon) arrays for one satellite."""
    times = np.atleast_1d(np.asarray(times, dtype=float))
    pos = propagate(el.a, el.e, el.i, el.raan, el.argp, el.ma0, times, earth)[0]
    return ecef_to_geodetic_array(eci_to_ecef_array(pos, times, earth), earth)
