"""Recompute the published headline numbers next to their printed values."""
from __future__ import annotations

import json
import math
from importlib import resources
from pathlib import Path

from .constellation import WalkerChromosome, expand
from .coverage import CoverageEvaluator, RegionConfig, SensorModel, build_grid, swath_width
from .edgesim import LinkBudget, latency_sweep, single_sat_latency, visible_fraction
from .errors import FixtureMissing
from .kepler import OrbitalElements

FIXTURE_FILES = ("reference_values.json", "australia_region.json")


def fixture_dir() -> Path:
    return Path(str(resources.files("firesat").joinpath("data")))


def load_fixtures(directory=None) -> tuple[dict, RegionConfig]:
    directory = Path(directory) if directory else fixture_dir()
    for name in FIXTURE_FILES:
        if not (directory / name).is_file():
            raise FixtureMissing(str(directory / name))
    try:
        values = json.loads((directory / "reference_values.json").read_text())
        region = RegionConfig.load(directory / "australia_region.json")
        WalkerChromosome.from_dict(values["design"])
    except (ValueError, KeyError) as exc:
        raise FixtureMissing(f"{directory}: unreadable fixture ({exc})") from exc
    return values, region


def _entry(paper, computed, kind="equal"):
    if paper == 0:
        rel = abs(computed)
    else:
        rel = abs(computed - paper) / abs(paper)
    return {"paper_value": paper, "computed_value": computed, "relative_error": rel, "comparison": kind}


def replay_paper(fixtures=None, dt: float = 60.0, subsample: int = 1,
                 budget: LinkBudget | None = None) -> dict:
    """Side-by-side report of published versus recomputed values.

    ``subsample`` keeps every k-th satellite for the coverage run only.
    """
    values, region = load_fixtures(fixtures)
    chrom = WalkerChromosome.from_dict(values["design"])
    const = expand(chrom)
    budget = budget or LinkBudget()

    swath = swath_width(values["altitude_km"], values["half_fov_deg"])
    grid = build_grid(region)
    ev = CoverageEvaluator(grid, sensor=SensorModel(half_fov=values["half_fov_deg"]), dt=dt)
    cov_const = const if subsample <= 1 else const.subset(range(0, len(const), subsample))
    report = ev.evaluate(cov_const)

    sweep = latency_sweep(budget, range(1, 101))
    geo = OrbitalElements(**values["geo"])
    frac = float(visible_fraction(const, geo).min())

    entries = {
        "swath_km": _entry(values["swath_km"], swath),
        "n_sats": _entry(values["n_sats"], len(const)),
        "coverage_fraction": _entry(values["coverage_fraction"], report.coverage_fraction),
        "revisit_min": _entry(values["revisit_min"], report.R_minutes),
        "plateau_s": _entry(values["plateau_s"], sweep.total_at(values["plateau_n"])),
        "plateau_n": _entry(values["plateau_n"], sweep.plateau_n if sweep.plateau_n else math.nan),
        "single_sat_s": _entry(values["single_sat_s"], single_sat_latency(budget)),
        "geo_visible_fraction": _entry(values["geo_visible_fraction"], frac, "at_least"),
    }
    return {
        "entries": entries,
        "coverage": report.to_dict(),
        "coverage_subsample": subsample,
        "sweep": sweep.summary(),
    }
