"""Regional coverage and revisit evaluation for a constellation.

The evaluation follows the instance-matrix recipe: each satellite is
propagated over one day, a time step is marked when its sub-satellite
point falls in the area of interest, and grid points inside the sensor
footprint are accumulated while the satellite is over the region.
"""
from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .constellation import Constellation
from .errors import DegenerateRegion, ZeroCoverage
from .kepler import (
    DEFAULT_EARTH,
    EarthModel,
    ecef_to_geodetic_array,
    eci_to_ecef_array,
    geodetic_to_ecef,
    propagate,
)

DAY_SECONDS = 86400.0
GRID_SPACING_KM = 22.2
DEFAULT_DT = 60.0
DEFAULT_HALF_FOV = 6.99  # degrees


class DegenerateRegionWarning(UserWarning):
    pass


# ---------------------------------------------------------------- geometry

def polygon_area(ring) -> float:
    """Planar shoelace area of a (lat, lon) ring in square degrees."""
    pts = np.asarray(ring, dtype=float)
    if len(pts) < 3:
        return 0.0
    y, x = pts[:, 0], pts[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def points_in_polygon(lat, lon, ring) -> np.ndarray:
    """Even-odd ray casting in the (lon, lat) plane.

    ``ring`` is a sequence of (lat, lon) vertices; the closing edge is
    implied. Works on arrays of any shape.
    """
    lat = np.asarray(lat, dtype=float)
    lon = np.asarray(lon, dtype=float)
    poly = np.asarray(ring, dtype=float)
    py, px = poly[:, 0], poly[:, 1]
    inside = np.zeros(np.broadcast(lat, lon).shape, dtype=bool)
    # cheap bounding-box reject first
    box = (lat >= py.min()) & (lat <= py.max()) & (lon >= px.min()) & (lon <= px.max())
    if not box.any():
        return inside
    y, x = lat[box], lon[box]
    hit = np.zeros(y.shape, dtype=bool)
    j = len(poly) - 1
    for k in range(len(poly)):
        yk, xk, yj, xj = py[k], px[k], py[j], px[j]
        crosses = (yk > y) != (yj > y)
        if crosses.any():
            x_cross = xk + (y - yk) * (xj - xk) / (yj - yk) if yj != yk else xk
            hit ^= crosses & (x < x_cross)
        j = k
    inside[box] = hit
    return inside


def great_circle_km(lat1, lon1, lat2, lon2, r_e: float = DEFAULT_EARTH.r_e):
    """Haversine distance in km."""
    p1, p2 = np.radians(lat1), np.radians(lat2)
    dp = p2 - p1
    dl = np.radians(np.asarray(lon2) - np.asarray(lon1))
    h = np.sin(dp / 2) ** 2 + np.cos(p1) * np.cos(p2) * np.sin(dl / 2) ** 2
    return 2.0 * r_e * np.arcsin(np.sqrt(np.clip(h, 0.0, 1.0)))


def footprint_visible(sat_lat, sat_lon, gp_lat, gp_lon, swath_km: float,
                      r_e: float = DEFAULT_EARTH.r_e) -> bool:
    """True iff the grid point lies within half a swath of the sub-satellite point."""
    if not swath_km > 0:
        raise ValueError("swath_km must be positive")
    d = great_circle_km(sat_lat, sat_lon, gp_lat, gp_lon, r_e)
    return bool(d <= swath_km / 2.0 + 1e-9)


def swath_width(h_km: float, half_fov_deg: float) -> float:
    """Cross-track swath 2*h*tan(theta) for half field of view theta."""
    if not h_km > 0:
        raise ValueError("altitude must be positive")
    if not 0 <= half_fov_deg < 90:
        raise ValueError("half field of view must lie in [0, 90) degrees")
    return 2.0 * h_km * math.tan(math.radians(half_fov_deg))


# ---------------------------------------------------------------- grid

@dataclass
class RegionConfig:
    area_of_interest: list  # [(lat, lon), ...]
    exclusion: list = field(default_factory=list)
    spacing_km: float = GRID_SPACING_KM
    name: str = "region"

    @classmethod
    def from_dict(cls, d: dict) -> "RegionConfig":
        return cls(
            area_of_interest=[tuple(p) for p in d["area_of_interest"]],
            exclusion=[tuple(p) for p in d.get("exclusion", [])],
            spacing_km=float(d.get("spacing_km", GRID_SPACING_KM)),
            name=d.get("name", "region"),
        )

    @classmethod
    def load(cls, path) -> "RegionConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


def bundled_region() -> RegionConfig:
    text = resources.files("firesat").joinpath("data/australia_region.json").read_text()
    return RegionConfig.from_dict(json.loads(text))


@dataclass
class RegionGrid:
    lat: np.ndarray
    lon: np.ndarray
    excluded_lat: np.ndarray
    excluded_lon: np.ndarray
    spacing: float
    region: RegionConfig

    def __len__(self):
        return len(self.lat)

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.lat.tolist(), self.lon.tolist()))

    def contains(self, lat, lon) -> np.ndarray:
        """Membership of sub-satellite points in the area of interest."""
        inside = points_in_polygon(lat, lon, self.region.area_of_interest)
        if self.region.exclusion:
            inside &= ~points_in_polygon(lat, lon, self.region.exclusion)
        return inside


def build_grid(region: RegionConfig, r_e: float = DEFAULT_EARTH.r_e) -> RegionGrid:
    """Lattice at ``spacing_km`` over the region's bounding box.

    Rows are a fixed latitude step apart; within a row the longitude step
    is widened by 1/cos(lat) so east-west neighbours keep the same
    ground distance. Points inside the exclusion ring are set aside.
    """
    if polygon_area(region.area_of_interest) <= 0:
        raise DegenerateRegion(f"area of interest of {region.name!r} has zero area")
    ring = np.asarray(region.area_of_interest, dtype=float)
    km_per_deg = r_e * math.pi / 180.0
    dlat = region.spacing_km / km_per_deg
    lat0, lat1 = ring[:, 0].min(), ring[:, 0].max()
    lon0, lon1 = ring[:, 1].min(), ring[:, 1].max()
    rows = np.arange(lat0, lat1 + 1e-9, dlat)
    lats, lons = [], []
    for la in rows:
        dlon = dlat / math.cos(math.radians(la))
        lo = np.arange(lon0, lon1 + 1e-9, dlon)
        lats.append(np.full(lo.shape, la))
        lons.append(lo)
    lat = np.concatenate(lats)
    lon = np.concatenate(lons)
    inside = points_in_polygon(lat, lon, region.area_of_interest)
    lat, lon = lat[inside], lon[inside]
    if region.exclusion:
        excl = points_in_polygon(lat, lon, region.exclusion)
    else:
        excl = np.zeros(lat.shape, dtype=bool)
    grid = RegionGrid(lat[~excl], lon[~excl], lat[excl], lon[excl], region.spacing_km, region)
    if len(grid) == 0:
        warnings.warn(
            f"region {region.name!r} has no grid points outside the exclusion zone",
            DegenerateRegionWarning,
            stacklevel=2,
        )
    return grid


# ---------------------------------------------------------------- evaluation

@dataclass(frozen=True)
class SensorModel:
    half_fov: float = DEFAULT_HALF_FOV  # degrees
    pixel_size: float = 5.0  # metres

    def __post_init__(self):
        if not 0 < self.half_fov < 90:
            raise ValueError("half_fov must lie in (0, 90) degrees")


@dataclass(frozen=True)
class FitnessWeights:
    inv_c: float = 1.0
    revisit: float = 0.01  # applied to R in minutes
    inv_p: float = 1.0
    n_sats: float = 1.0


@dataclass
class CoverageReport:
    C: float
    P_cov: int
    R: float  # seconds
    N: int
    fitness: float
    swath_ok: bool
    swath_km: float
    n_grid: int
    dt: float
    day_length: float
    hits: list[int] = field(default_factory=list)

    @property
    def R_minutes(self) -> float:
        return self.R / 60.0

    @property
    def coverage_fraction(self) -> float:
        return self.P_cov / self.n_grid if self.n_grid else 0.0

    def objectives(self) -> tuple[float, float, float, float]:
        """Minimisation vector (1/C, R, 1/P_cov, N); +inf when infeasible."""
        if not math.isfinite(self.fitness):
            return (math.inf,) * 4
        return (1.0 / self.C, self.R, 1.0 / self.P_cov, float(self.N))

    def to_dict(self, include_hits: bool = False) -> dict:
        d = asdict(self)
        if not include_hits:
            d.pop("hits")
        d["R_minutes"] = self.R_minutes
        d["coverage_fraction"] = self.coverage_fraction
        return d

    def to_json(self, include_hits: bool = False) -> str:
        d = self.to_dict(include_hits)
        if not math.isfinite(d["fitness"]):
            d["fitness"] = "inf"
        return json.dumps(d, sort_keys=True)


def time_axis(dt: float, day_length: float = DAY_SECONDS) -> np.ndarray:
    if not dt > 0:
        raise ValueError("dt must be positive")
    return np.arange(int(math.floor(day_length / dt)) + 1) * dt


def mean_gap(visible: np.ndarray, dt: float) -> float:
    """Mean length in seconds of the runs of invisible steps between visible ones.

    Leading and trailing runs are ignored. With no interior run the gap is
    the total invisible time (0 when the region is always seen).
    """
    visible = np.asarray(visible, dtype=bool)
    idx = np.flatnonzero(visible)
    if idx.size == 0:
        return float(len(visible) * dt)
    interior = np.diff(idx) - 1
    interior = interior[interior > 0]
    if interior.size == 0:
        return float((len(visible) - idx.size) * dt)
    return float(interior.mean() * dt)


def fitness_value(C, R_seconds, P_cov, N, weights: FitnessWeights = FitnessWeights()) -> float:
    if C <= 0 or P_cov <= 0:
        return math.inf
    return (weights.inv_c / C + weights.revisit * (R_seconds / 60.0)
            + weights.inv_p / P_cov + weights.n_sats * N)


def subsatellite_points(constellation: Constellation, times, earth: EarthModel = DEFAULT_EARTH):
    """(lat, lon) arrays of shape (N, T)."""
    el = constellation.element_arrays()
    pos = propagate(el["a"], el["e"], el["i"], el["raan"], el["argp"], el["ma0"], times, earth)
    return ecef_to_geodetic_array(eci_to_ecef_array(pos, times, earth), earth)


def _unit_vectors(lat, lon):
    return geodetic_to_ecef(lat, lon, 0.0, EarthModel(r_e=1.0))


class CoverageEvaluator:
    """Reusable evaluator bound to one grid, sensor and time axis."""

    def __init__(self, grid: RegionGrid, earth: EarthModel = DEFAULT_EARTH,
                 sensor: SensorModel = SensorModel(), dt: float = DEFAULT_DT,
                 day_length: float = DAY_SECONDS, weights: FitnessWeights = FitnessWeights(),
                 chunk: int = 256):
        self.grid = grid
        self.earth = earth
        self.sensor = sensor
        self.dt = dt
        self.day_length = day_length
        self.weights = weights
        self.chunk = chunk
        self.times = time_axis(dt, day_length)
        self._tree = cKDTree(_unit_vectors(grid.lat, grid.lon)) if len(grid) else None

    def instance_matrix(self, constellation: Constellation) -> np.ndarray:
        return self._run(constellation, swath_km=None)[0]

    def _run(self, constellation: Constellation, swath_km):
        n_sat = len(constellation)
        inst = np.zeros((n_sat, len(self.times)), dtype=bool)
        hits = np.zeros(len(self.grid), dtype=np.int64)
        for start in range(0, n_sat, self.chunk):
            part = constellation.subset(range(start, min(n_sat, start + self.chunk)))
            lat, lon = subsatellite_points(part, self.times, self.earth)
            block = self.grid.contains(lat, lon)
            inst[start:start + len(part)] = block
            if swath_km is None or self._tree is None or not block.any():
                continue
            # chord length equivalent of the half-swath arc on the unit sphere
            half_angle = (swath_km / 2.0) / self.earth.r_e
            chord = 2.0 * math.sin(half_angle / 2.0) * (1 + 1e-12)
            found = self._tree.query_ball_point(_unit_vectors(lat[block], lon[block]), chord)
            for pts in found:
                if pts:
                    hits[pts] += 1
        return inst, hits

    def swath_for(self, constellation: Constellation) -> float:
        a = constellation.sats[0].a
        return swath_width(a - self.earth.r_e, self.sensor.half_fov)

    def evaluate(self, constellation: Constellation, raise_on_zero: bool = False) -> CoverageReport:
        if len(constellation) == 0:
            raise ValueError("constellation is empty")
        swath = self.swath_for(constellation)
        inst, hits = self._run(constellation, swath)
        C = float(inst.sum(axis=0).mean())
        P_cov = int(np.count_nonzero(hits))
        R = mean_gap(inst.any(axis=0), self.dt)
        N = len(constellation)
        swath_ok = swath >= 2.0 * self.grid.spacing
        fit = fitness_value(C, R, P_cov, N, self.weights) if swath_ok else math.inf
        report = CoverageReport(C, P_cov, R, N, fit, swath_ok, swath, len(self.grid),
                                self.dt, self.day_length, hits.tolist())
        if raise_on_zero and (C == 0 or P_cov == 0):
            raise ZeroCoverage(f"C={C}, P_cov={P_cov}")
        return report

    __call__ = evaluate

    def hourly_visible(self, constellation: Constellation) -> list[tuple[int, float]]:
        """Mean number of satellites over the region for each hour of the day."""
        counts = self.instance_matrix(constellation).sum(axis=0)
        hours = (self.times // 3600).astype(int)
        out = []
        for h in np.unique(hours):
            out.append((int(h), float(counts[hours == h].mean())))
        return out

    def point_revisit(self, constellation: Constellation) -> np.ndarray:
        """Mean gap (s) between footprint passes, per grid point.

        Diagnostic only; not part of the fitness.
        """
        swath = self.swath_for(constellation)
        seen = np.zeros((len(self.grid), len(self.times)), dtype=bool)
        half_angle = (swath / 2.0) / self.earth.r_e
        chord = 2.0 * math.sin(half_angle / 2.0)
        for start in range(0, len(constellation), self.chunk):
            part = constellation.subset(range(start, min(len(constellation), start + self.chunk)))
            lat, lon = subsatellite_points(part, self.times, self.earth)
            found = self._tree.query_ball_point(_unit_vectors(lat, lon), chord)
            for (s, t), pts in np.ndenumerate(found):
                if pts:
                    seen[pts, t] = True
        return np.array([mean_gap(row, self.dt) for row in seen])


def evaluate(constellation: Constellation, grid: RegionGrid, earth: EarthModel = DEFAULT_EARTH,
             dt: float = DEFAULT_DT, day_length: float = DAY_SECONDS,
             sensor: SensorModel = SensorModel(), weights: FitnessWeights = FitnessWeights(),
             raise_on_zero: bool = False) -> CoverageReport:
    ev = CoverageEvaluator(grid, earth, sensor, dt, day_length, weights)
    return ev.evaluate(constellation, raise_on_zero=raise_on_zero)


def hourly_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["hour", "mean_visible_satellites"])
    w.writerows(rows)
    return buf.getvalue()


def ground_track_csv(constellation: Constellation, times, earth: EarthModel = DEFAULT_EARTH,
                     sats=None) -> str:
    sats = range(len(constellation)) if sats is None else sats
    part = constellation.subset(list(sats))
    lat, lon = subsatellite_points(part, times, earth)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["sat", "t", "lat", "lon"])
    for row, s in enumerate(sats):
        for k, t in enumerate(times):
            w.writerow([s, float(t), float(lat[row, k]), float(lon[row, k])])
    return buf.getvalue()
