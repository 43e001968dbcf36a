"""LEO/GEO visibility and the edge-computing detection latency model.

An image captured by one LEO satellite is split into n segments, relayed
through a geostationary satellite to n visible LEO edge nodes, processed
there, and the fire coordinates return through the GEO satellite to the
ground. Every stage is a closed-form delay.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .constellation import Constellation
from .errors import GeometryError
from .kepler import DEFAULT_EARTH, EarthModel, OrbitalElements, propagate

C_LIGHT = 299792458.0  # m/s

GEO_RELAY = OrbitalElements(
    a=42165.0, e=0.0002541, i=0.0116, raan=48.4858, argp=135.8460, ma0=294.4219
)


@dataclass(frozen=True)
class LinkBudget:
    leo_data_rate_bps: float = 80e6
    geo_bandwidth_hz: float = 54e6
    snr: float = 210.0
    data_amount_bits: float = 559300.0
    clock_rate_hz: float = 200e6
    assembly_lines: float = 241878560.0
    segmentation_overhead_s: float = 1.0
    pixel_size_m: float = 5.0
    cross_track_ratio: float = 1.0
    # orbital geometry of the relay chain
    a_leo_km: float = 7375.0  # worst-case (slowest) LEO radius for the dwell time
    a_geo_km: float = 42165.0
    leo_altitude_km: float = 963.9  # LEO-to-ground path for the single-satellite baseline
    speed_of_light_mps: float = C_LIGHT
    slant_range: bool = False
    count_ground_propagation: bool = False

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, bool):
                continue
            if f.name in ("assembly_lines", "segmentation_overhead_s"):
                if v < 0:
                    raise ValueError(f"{f.name} must be non-negative")
            elif not v > 0:
                raise ValueError(f"{f.name} must be positive")

    @property
    def geo_data_rate_bps(self) -> float:
        """Shannon capacity B log2(1 + SNR)."""
        return self.geo_bandwidth_hz * math.log2(1.0 + self.snr)

    @classmethod
    def from_dict(cls, d: dict) -> "LinkBudget":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown link budget fields: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "LinkBudget":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class LatencyBreakdown:
    n_nodes: int
    t1: float
    t2: float
    t3: float
    t4: float
    t5: float
    t6: float
    t7: float
    t8: float
    t9: float
    t10: float
    t11: float
    t12: float
    t13: float
    total: float
    ground_propagation_counted: bool = False

    def terms(self) -> list[float]:
        return [getattr(self, f"t{k}") for k in range(1, 14)]

    def to_dict(self) -> dict:
        return asdict(self)


# ------------------------------------------------------------------ visibility

def visibility_threshold(a_leo: float, a_geo: float, r_e: float = DEFAULT_EARTH.r_e) -> float:
    """Largest LEO-GEO separation (km) at which the pair is treated as visible."""
    if a_leo < r_e:
        raise GeometryError(f"LEO radius {a_leo} km is below the Earth radius {r_e} km")
    if a_leo == r_e:
        return math.sqrt(a_leo**2 + a_geo**2)
    if a_geo < a_leo:
        raise GeometryError("GEO radius must not be below the LEO radius")
    alpha = math.acos(r_e / a_leo)
    return math.sqrt(a_leo**2 + a_geo**2 - 2.0 * a_leo * a_geo * math.cos(math.pi / 2 + alpha))


def visible_mask(constellation: Constellation, geo: OrbitalElements, times,
                 earth: EarthModel = DEFAULT_EARTH) -> np.ndarray:
    """Boolean (N, T) array of LEO satellites within range of the GEO relay."""
    times = np.atleast_1d(np.asarray(times, dtype=float))
    el = constellation.element_arrays()
    leo = propagate(el["a"], el["e"], el["i"], el["raan"], el["argp"], el["ma0"], times, earth)
    g = propagate(geo.a, geo.e, geo.i, geo.raan, geo.argp, geo.ma0, times, earth)[0]
    dist = np.linalg.norm(leo - g[None], axis=-1)
    thresh = np.array([visibility_threshold(a, geo.a, earth.r_e) for a in el["a"]])
    return dist < thresh[:, None]


def count_visible(constellation: Constellation, geo: OrbitalElements = GEO_RELAY, t: float = 0.0,
                  earth: EarthModel = DEFAULT_EARTH) -> int:
    return int(visible_mask(constellation, geo, [t], earth).sum())


def visible_fraction(constellation: Constellation, geo: OrbitalElements = GEO_RELAY, times=None,
                     earth: EarthModel = DEFAULT_EARTH) -> np.ndarray:
    """Visible fraction at each sample time (hourly over one day by default)."""
    times = np.arange(0.0, 86400.0 + 1.0, 3600.0) if times is None else times
    return visible_mask(constellation, geo, times, earth).mean(axis=0)


# ------------------------------------------------------------------ latency

def orbital_velocity(r_km: float, earth: EarthModel = DEFAULT_EARTH) -> float:
    """Circular speed in m/s."""
    return math.sqrt(earth.mu / r_km) * 1000.0


def dwell_time(budget: LinkBudget, earth: EarthModel = DEFAULT_EARTH) -> float:
    v = orbital_velocity(budget.a_leo_km, earth)
    return (budget.pixel_size_m / v) / budget.cross_track_ratio + budget.segmentation_overhead_s


def _leo_geo_delay(budget: LinkBudget, earth: EarthModel) -> float:
    if budget.slant_range:
        d = visibility_threshold(budget.a_leo_km, budget.a_geo_km, earth.r_e)
    else:
        d = budget.a_geo_km - budget.a_leo_km
    return d * 1000.0 / budget.speed_of_light_mps


def edge_latency(budget: LinkBudget = LinkBudget(), n: int = 1,
                 earth: EarthModel = DEFAULT_EARTH) -> LatencyBreakdown:
    """Stage delays t1..t13 for ``n`` edge nodes.

    ``total`` adds t1..t12; t13 (GEO-to-ground propagation) joins the sum
    only when ``budget.count_ground_propagation`` is set.
    """
    if n < 1:
        raise ValueError("need at least one edge node")
    leo_rate = budget.leo_data_rate_bps
    t1 = dwell_time(budget, earth)
    t2 = budget.data_amount_bits / leo_rate
    t3 = _leo_geo_delay(budget, earth)
    t4 = budget.data_amount_bits / budget.geo_data_rate_bps
    t5 = t4
    t6 = t3
    t7 = (budget.data_amount_bits / n) / leo_rate
    t8 = budget.assembly_lines / (n * budget.clock_rate_hz)
    t9 = t7
    t10 = t3
    t11 = t5
    t12 = t4
    t13 = budget.a_geo_km * 1000.0 / budget.speed_of_light_mps
    terms = [t1, t2, t3, t4, t5, t6, t7, t8, t9, t10, t11, t12]
    total = math.fsum(terms + ([t13] if budget.count_ground_propagation else []))
    return LatencyBreakdown(n, *terms, t13, total, budget.count_ground_propagation)


def single_sat_terms(budget: LinkBudget = LinkBudget(), earth: EarthModel = DEFAULT_EARTH):
    """(dwell, processing, downlink transmit, downlink propagation) in seconds."""
    t1 = dwell_time(budget, earth)
    t2 = budget.assembly_lines / budget.clock_rate_hz
    t3 = budget.data_amount_bits / budget.leo_data_rate_bps
    t4 = budget.leo_altitude_km * 1000.0 / budget.speed_of_light_mps
    return t1, t2, t3, t4


def single_sat_latency(budget: LinkBudget = LinkBudget(), earth: EarthModel = DEFAULT_EARTH) -> float:
    return math.fsum(single_sat_terms(budget, earth))


def asymptotic_latency(budget: LinkBudget = LinkBudget(), earth: EarthModel = DEFAULT_EARTH) -> float:
    """Limit of the edge total as the node count grows without bound."""
    b = edge_latency(budget, 1, earth)
    return b.total - (b.t7 + b.t8 + b.t9)


@dataclass
class Sweep:
    rows: list  # LatencyBreakdown per n
    asymptote: float
    plateau_n: int | None
    plateau_total: float | None
    method: str
    eps: float

    def table(self) -> list[tuple[int, float]]:
        return [(b.n_nodes, b.total) for b in self.rows]

    def total_at(self, n: int) -> float:
        for b in self.rows:
            if b.n_nodes == n:
                return b.total
        raise KeyError(n)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n_nodes"] + [f"t{k}" for k in range(1, 14)] + ["total"])
        for b in self.rows:
            w.writerow([b.n_nodes] + [repr(t) for t in b.terms()] + [repr(b.total)])
        return buf.getvalue()

    def summary(self) -> dict:
        return {
            "asymptote_s": self.asymptote,
            "plateau_n": self.plateau_n,
            "plateau_total_s": self.plateau_total,
            "plateau_method": self.method,
            "plateau_eps_s": self.eps,
        }


def latency_sweep(budget: LinkBudget = LinkBudget(), n_range=range(1, 101),
                  eps: float | None = None, method: str = "marginal",
                  earth: EarthModel = DEFAULT_EARTH) -> Sweep:
    """Totals over ``n_range`` plus a plateau estimate.

    ``method="marginal"`` (default, eps 1 ms) picks the first n where one
    more node saves less than eps; ``method="asymptote"`` (default eps
    10 ms) picks the first n whose total is within eps of the n -> inf
    limit.
    """
    ns = sorted(set(int(n) for n in n_range))
    if not ns:
        raise ValueError("n_range is empty")
    if method not in ("marginal", "asymptote"):
        raise ValueError(f"unknown plateau method {method!r}")
    if eps is None:
        eps = 1e-3 if method == "marginal" else 1e-2
    rows = [edge_latency(budget, n, earth) for n in ns]
    limit = asymptotic_latency(budget, earth)
    plateau = None
    for b in rows:
        if method == "marginal":
            gain = b.total - edge_latency(budget, b.n_nodes + 1, earth).total
            ok = gain < eps
        else:
            ok = b.total - limit <= eps
        if ok:
            plateau = b
            break
    return Sweep(rows, limit, plateau.n_nodes if plateau else None,
                 plateau.total if plateau else None, method, eps)


def parse_node_range(text: str) -> range:
    """'1..100' or '5' -> range."""
    text = text.strip()
    if ".." in text:
        lo, hi = text.split("..", 1)
        lo, hi = int(lo), int(hi)
    else:
        lo = hi = int(text)
    if lo < 1 or hi < lo:
        raise ValueError(f"bad node range {text!r}")
    return range(lo, hi + 1)
