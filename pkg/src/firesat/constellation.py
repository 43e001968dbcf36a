"""Walker-style constellation expansion from the six-gene design vector."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import BoundViolation
from .kepler import R_EARTH, OrbitalElements

A_MIN = R_EARTH + 200.0
A_MAX = R_EARTH + 1000.0
E_MAX = 0.05
I_MAX = 180.0
PLANES_MAX = 100
PER_PLANE_MAX = 50
PHASING_MAX = 8
N_MAX = 5000

# gene name -> (lower, upper); phasing's upper bound may be lifted to P
BOUNDS = {
    "a": (A_MIN, A_MAX),
    "e": (0.0, E_MAX),
    "i": (0.0, I_MAX),
    "planes": (1, PLANES_MAX),
    "phasing": (1, PHASING_MAX),
    "per_plane": (1, PER_PLANE_MAX),
}
CONTINUOUS_GENES = ("a", "e", "i")
INTEGER_GENES = ("planes", "phasing", "per_plane")
GENES = CONTINUOUS_GENES + INTEGER_GENES


@dataclass(frozen=True)
class Violation:
    gene: str
    value: float
    bound: str

    def __str__(self):
        return f"{self.gene}={self.value} violates {self.bound}"


@dataclass(frozen=True)
class WalkerChromosome:
    """Design vector (a, e, i, P, F, n).

    ``allow_phasing_up_to_planes`` relaxes the phasing cap from 8 to P so
    that published designs with F > 8 can still be expanded.
    """

    a: float
    e: float
    i: float
    planes: int
    phasing: int
    per_plane: int
    allow_phasing_up_to_planes: bool = field(default=False, compare=False)

    @property
    def n_sats(self) -> int:
        return int(self.planes) * int(self.per_plane)

    @property
    def altitude(self) -> float:
        return self.a - R_EARTH

    def genes(self) -> tuple:
        return tuple(getattr(self, g) for g in GENES)

    def to_dict(self) -> dict:
        return {
            "a_km": float(self.a),
            "e": float(self.e),
            "i_deg": float(self.i),
            "planes": int(self.planes),
            "phasing": int(self.phasing),
            "per_plane": int(self.per_plane),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict, allow_phasing_up_to_planes: bool = False) -> "WalkerChromosome":
        return cls(
            a=float(d["a_km"]),
            e=float(d["e"]),
            i=float(d["i_deg"]),
            planes=int(d["planes"]),
            phasing=int(d["phasing"]),
            per_plane=int(d["per_plane"]),
            allow_phasing_up_to_planes=bool(
                d.get("allow_phasing_up_to_planes", allow_phasing_up_to_planes)
            ),
        )

    @classmethod
    def from_json(cls, text: str, **kw) -> "WalkerChromosome":
        return cls.from_dict(json.loads(text), **kw)


def phasing_upper(chrom: WalkerChromosome) -> int:
    if chrom.allow_phasing_up_to_planes:
        return max(PHASING_MAX, int(chrom.planes))
    return PHASING_MAX


def validate(chrom: WalkerChromosome) -> list[Violation]:
    """All gene-bound violations; empty when the chromosome is admissible."""
    out = []
    for gene in GENES:
        lo, hi = BOUNDS[gene]
        if gene == "phasing":
            hi = phasing_upper(chrom)
        value = getattr(chrom, gene)
        if gene in INTEGER_GENES and int(value) != value:
            out.append(Violation(gene, value, "integer"))
        if value < lo:
            out.append(Violation(gene, value, f">= {lo}"))
        elif value > hi:
            out.append(Violation(gene, value, f"<= {hi}"))
    if chrom.n_sats > N_MAX:
        out.append(Violation("n_sats", chrom.n_sats, f"<= {N_MAX}"))
    return out


@dataclass(frozen=True)
class Constellation:
    sats: tuple[OrbitalElements, ...]
    source: WalkerChromosome | None = None

    def __len__(self):
        return len(self.sats)

    def element_arrays(self) -> dict[str, np.ndarray]:
        """Column arrays (a, e, i, raan, argp, ma0) for vectorised propagation."""
        names = ("a", "e", "i", "raan", "argp", "ma0")
        return {n: np.array([getattr(s, n) for s in self.sats], dtype=float) for n in names}

    def subset(self, idx) -> "Constellation":
        return Constellation(tuple(self.sats[k] for k in idx), self.source)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["index", "plane", "slot", "a_km", "e", "i_deg", "raan_deg", "argp_deg", "ma_deg"])
        n = int(self.source.per_plane)
        for k, s in enumerate(self.sats):
            w.writerow([k, k // n, k % n, repr(s.a), repr(s.e), repr(s.i),
                        repr(s.raan), repr(s.argp), repr(s.ma0)])
        return buf.getvalue()


def expand(chrom: WalkerChromosome) -> Constellation:
    """Plane-major list of N = n*P element sets.

    Plane p gets RAAN p*360/P; slot k within a plane gets argument of
    perigee k*360/n; the mean anomaly carries the inter-plane phase
    p*360*F/N.
    """
    bad = validate(chrom)
    if bad:
        raise BoundViolation(bad)
    planes, per_plane, phasing = int(chrom.planes), int(chrom.per_plane), int(chrom.phasing)
    total = planes * per_plane
    sats = []
    for p in range(planes):
        raan = p * 360.0 / planes
        ma = (p * 360.0 * phasing / total) % 360.0
        for k in range(per_plane):
            sats.append(OrbitalElements(chrom.a, chrom.e, chrom.i, raan, k * 360.0 / per_plane, ma))
    return Constellation(tuple(sats), chrom)


def clamp(chrom: WalkerChromosome) -> WalkerChromosome:
    """Project every gene back into its bounds (integer genes rounded)."""
    vals = {}
    for gene in GENES:
        lo, hi = BOUNDS[gene]
        v = getattr(chrom, gene)
        if gene in INTEGER_GENES:
            v = int(round(v))
        vals[gene] = min(max(v, lo), hi)
    out = replace(chrom, **vals)
    # the phasing cap may depend on the (clamped) plane count
    return replace(out, phasing=min(max(int(round(chrom.phasing)), 1), phasing_upper(out)))


PUBLISHED_DESIGN = WalkerChromosome(
    a=7334.9, e=0.04, i=141.39, planes=95, phasing=9, per_plane=42,
    allow_phasing_up_to_planes=True,
)
