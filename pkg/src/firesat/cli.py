"""Command-line entry point.

Every subcommand writes its outputs atomically into ``--out-dir`` and
records a ``run_manifest.json`` there. Failures exit non-zero with a
single JSON line on stderr.
"""
from __future__ import annotations

import argparse
import contextlib
import hashlib
import json
import logging
import math
import os
import sys
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .constellation import WalkerChromosome, expand
from .coverage import (
    CoverageEvaluator,
    FitnessWeights,
    RegionConfig,
    SensorModel,
    bundled_region,
    build_grid,
    ground_track_csv,
    hourly_csv,
    time_axis,
)
from .edgesim import LinkBudget, latency_sweep, parse_node_range
from .errors import FiresatError
from .firedetect import SceneRaster, classify_scene, generate_synthetic_scene
from .kepler import EarthModel, OrbitalElements, ecef_to_geodetic_array, eci_to_ecef_array, propagate
from .optimizer import GaConfig, run
from .replay import fixture_dir, replay_paper

log = logging.getLogger("firesat")

LOG_ENV = "FIRESAT_LOG_LEVEL"


class CliError(FiresatError):
    pass


# ------------------------------------------------------------------ config

@dataclass
class RunConfig:
    earth: EarthModel = field(default_factory=EarthModel)
    region_path: str | None = None
    sensor: SensorModel = field(default_factory=SensorModel)
    ga: dict = field(default_factory=dict)
    link_budget: LinkBudget = field(default_factory=LinkBudget)
    output_dir: str = "."
    seed: int = 0
    dt: float = 60.0
    weights: FitnessWeights = field(default_factory=FitnessWeights)
    source: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, d: dict, base: Path = Path(".")) -> "RunConfig":
        cfg = cls(source=dict(d))
        if "earth" in d:
            cfg.earth = EarthModel(**d["earth"])
        if d.get("region"):
            p = (base / d["region"]).resolve()
            if not p.is_file():
                raise CliError(f"region config not found: {p}")
            cfg.region_path = str(p)
        if "sensor" in d:
            cfg.sensor = SensorModel(**d["sensor"])
        cfg.ga = dict(d.get("ga", {}))
        lb = d.get("link_budget")
        if isinstance(lb, str):
            p = (base / lb).resolve()
            if not p.is_file():
                raise CliError(f"link budget not found: {p}")
            cfg.link_budget = LinkBudget.load(p)
        elif isinstance(lb, dict):
            cfg.link_budget = LinkBudget.from_dict(lb)
        if "weights" in d:
            cfg.weights = FitnessWeights(**d["weights"])
        cfg.output_dir = d.get("output_dir", cfg.output_dir)
        cfg.seed = int(d.get("seed", cfg.seed))
        cfg.dt = float(d.get("dt", cfg.dt))
        return cfg

    @classmethod
    def load(cls, path) -> "RunConfig":
        path = Path(path)
        if not path.is_file():
            raise CliError(f"config file not found: {path}")
        return cls.from_dict(json.loads(path.read_text()), path.parent)

    def region(self) -> RegionConfig:
        return RegionConfig.load(self.region_path) if self.region_path else bundled_region()

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.source, sort_keys=True).encode()).hexdigest()[:16]


# ------------------------------------------------------------------ io helpers

def write_atomic(path: Path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(OSError):
            os.unlink(tmp)
        raise
    return path


@contextlib.contextmanager
def output_lock(out_dir: Path):
    out_dir.mkdir(parents=True, exist_ok=True)
    lock = out_dir / ".firesat.lock"
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError as exc:
        raise CliError(f"output directory is locked by another run: {lock}") from exc
    try:
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        yield
    finally:
        with contextlib.suppress(OSError):
            lock.unlink()


def _json_num(o):
    if isinstance(o, float) and not math.isfinite(o):
        return "inf" if o > 0 else ("-inf" if o < 0 else "nan")
    if isinstance(o, dict):
        return {k: _json_num(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_json_num(v) for v in o]
    if isinstance(o, np.generic):
        return _json_num(o.item())
    return o


def dumps(obj) -> str:
    return json.dumps(_json_num(obj), indent=2, sort_keys=True) + "\n"


def _chromosome(args, cfg) -> WalkerChromosome:
    allow = getattr(args, "allow_phasing_override", False)
    if getattr(args, "chromosome", None):
        p = Path(args.chromosome)
        if not p.is_file():
            raise CliError(f"chromosome file not found: {p}")
        return WalkerChromosome.from_json(p.read_text(), allow_phasing_up_to_planes=allow)
    values = json.loads((fixture_dir() / "reference_values.json").read_text())
    return WalkerChromosome.from_dict(values["design"])


# ------------------------------------------------------------------ commands

def cmd_propagate(args, cfg: RunConfig, out: Path) -> dict:
    if args.elements:
        el = OrbitalElements(**json.loads(Path(args.elements).read_text()))
    else:
        const = expand(_chromosome(args, cfg))
        el = const.sats[args.sat]
    el.check_above_surface(cfg.earth)
    times = time_axis(args.dt or cfg.dt, args.duration)
    eci = propagate(el.a, el.e, el.i, el.raan, el.argp, el.ma0, times, cfg.earth)[0]
    ecef = eci_to_ecef_array(eci, times, cfg.earth)
    lat, lon = ecef_to_geodetic_array(ecef, cfg.earth)
    lines = ["t,x_eci,y_eci,z_eci,x_ecef,y_ecef,z_ecef,lat,lon"]
    for k, t in enumerate(times):
        row = [t, *eci[k], *ecef[k], lat[k], lon[k]]
        lines.append(",".join(repr(float(v)) for v in row))
    path = write_atomic(out / "propagation.csv", "\n".join(lines) + "\n")
    return {"outputs": [str(path)]}


def cmd_expand(args, cfg, out: Path) -> dict:
    chrom = _chromosome(args, cfg)
    const = expand(chrom)
    p1 = write_atomic(out / "constellation.csv", const.to_csv())
    p2 = write_atomic(out / "chromosome.json", chrom.to_json() + "\n")
    return {"outputs": [str(p1), str(p2)], "n_sats": len(const)}


def _evaluator(args, cfg) -> CoverageEvaluator:
    sensor = cfg.sensor
    if getattr(args, "half_fov", None):
        sensor = SensorModel(half_fov=args.half_fov, pixel_size=sensor.pixel_size)
    region = RegionConfig.load(args.region) if getattr(args, "region", None) else cfg.region()
    dt = args.dt or cfg.dt
    return CoverageEvaluator(build_grid(region, cfg.earth.r_e), cfg.earth, sensor, dt,
                             weights=cfg.weights)


def cmd_evaluate(args, cfg, out: Path) -> dict:
    chrom = _chromosome(args, cfg)
    const = expand(chrom)
    if args.subsample > 1:
        const = const.subset(range(0, len(const), args.subsample))
    ev = _evaluator(args, cfg)
    report = ev.evaluate(const)
    outputs = [write_atomic(out / "coverage.json", report.to_json(include_hits=args.hits) + "\n")]
    outputs.append(write_atomic(out / "hourly_visible.csv", hourly_csv(ev.hourly_visible(const))))
    if args.track_sats:
        rng = np.random.default_rng(cfg.seed)
        n = min(args.track_sats, len(const))
        sats = sorted(int(s) for s in rng.choice(len(const), size=n, replace=False))
        times = time_axis(args.track_dt, ev.day_length)
        outputs.append(write_atomic(out / "ground_track.csv",
                                    ground_track_csv(const, times, cfg.earth, sats)))
    return {"outputs": [str(p) for p in outputs], "fitness": report.fitness}


def cmd_optimize(args, cfg, out: Path) -> dict:
    ga = dict(cfg.ga)
    for key in ("population", "generations", "mode"):
        if getattr(args, key, None) is not None:
            ga[key] = getattr(args, key)
    ga["seed"] = cfg.seed
    if "bounds" in ga:
        ga["bounds"] = {k: tuple(v) for k, v in ga["bounds"].items()}
    ga.setdefault("stats_path", str(out / "stats.csv"))
    ga.setdefault("checkpoint_path", str(out / "checkpoint.json"))
    if args.checkpoint_every is not None:
        ga["checkpoint_every"] = args.checkpoint_every
    config = GaConfig(**ga)
    ev = _evaluator(args, cfg)

    def fitness(chrom):
        return ev.evaluate(expand(chrom))

    result = run(config, fitness, resume_from=args.resume)
    best = write_atomic(out / "best_chromosome.json", result.best.genes.to_json() + "\n")
    archive = write_atomic(out / "archive.json", dumps(result.to_dict()))
    return {"outputs": [str(best), str(archive), config.stats_path], "best_fitness": result.best.fitness}


def cmd_detect(args, cfg, out: Path) -> dict:
    scene_path = Path(args.scene) if args.scene else fixture_dir() / "synthetic_scene.json"
    scene = SceneRaster.load(scene_path)
    report = classify_scene(scene)
    p1 = write_atomic(out / "fire_report.json", report.to_json() + "\n")
    p2 = write_atomic(out / "fire_pixels.csv", report.to_csv())
    print(f"{report.n_fire} fire pixels in {report.scene_id}")
    return {"outputs": [str(p1), str(p2)], "n_fire": report.n_fire}


def cmd_synth_scene(args, cfg, out: Path) -> dict:
    spec = json.loads(Path(args.spec).read_text())
    scene = generate_synthetic_scene(spec)
    header = scene.save(out / f"{args.name}.json")
    return {"outputs": [str(header), str(header.with_suffix(".bin"))]}


def cmd_latency_sweep(args, cfg, out: Path) -> dict:
    budget = LinkBudget.load(args.budget) if args.budget else cfg.link_budget
    sweep = latency_sweep(budget, parse_node_range(args.nodes), eps=args.eps, method=args.plateau)
    target = Path(args.out) if args.out else out / "sweep.csv"
    p1 = write_atomic(target, sweep.to_csv())
    p2 = write_atomic(target.with_suffix(".json"), dumps(sweep.summary()))
    print(dumps(sweep.summary()).strip())
    return {"outputs": [str(p1), str(p2)], **sweep.summary()}


def cmd_replay_paper(args, cfg, out: Path) -> dict:
    report = replay_paper(args.fixtures, dt=args.dt or cfg.dt, subsample=args.subsample,
                          budget=cfg.link_budget)
    path = write_atomic(out / "replay.json", dumps(report))
    for name, e in report["entries"].items():
        print(f"{name:22s} paper={e['paper_value']!s:>8} computed={e['computed_value']:.6g} "
              f"rel_err={e['relative_error']:.3g}")
    return {"outputs": [str(path)]}


COMMANDS = {
    "propagate": cmd_propagate,
    "expand": cmd_expand,
    "evaluate": cmd_evaluate,
    "optimize": cmd_optimize,
    "detect": cmd_detect,
    "synth-scene": cmd_synth_scene,
    "latency-sweep": cmd_latency_sweep,
    "replay-paper": cmd_replay_paper,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="run configuration JSON")
    common.add_argument("--out-dir", help="directory for outputs and the run manifest")
    common.add_argument("--seed", type=int)

    chrom = argparse.ArgumentParser(add_help=False)
    chrom.add_argument("--chromosome", help="chromosome JSON (defaults to the published design)")
    chrom.add_argument("--allow-phasing-override", action="store_true",
                       help="accept phasing F up to P instead of 8")

    cov = argparse.ArgumentParser(add_help=False)
    cov.add_argument("--region", help="region config JSON (defaults to the bundled one)")
    cov.add_argument("--dt", type=float, help="time step in seconds")
    cov.add_argument("--half-fov", type=float, help="sensor half field of view, degrees")

    p = argparse.ArgumentParser(prog="firesat", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("propagate", parents=[common, chrom], help="propagate one satellite")
    s.add_argument("--elements", help="OrbitalElements JSON {a,e,i,raan,argp,ma0}")
    s.add_argument("--sat", type=int, default=0, help="satellite index within the expanded chromosome")
    s.add_argument("--duration", type=float, default=86400.0)
    s.add_argument("--dt", type=float)

    sub.add_parser("expand", parents=[common, chrom], help="chromosome -> per-satellite elements CSV")

    s = sub.add_parser("evaluate", parents=[common, chrom, cov], help="coverage report for a design")
    s.add_argument("--subsample", type=int, default=1, help="keep every k-th satellite")
    s.add_argument("--hits", action="store_true", help="include per-grid-point hit counts")
    s.add_argument("--track-sats", type=int, default=0, help="export ground tracks of k random satellites")
    s.add_argument("--track-dt", type=float, default=60.0)

    s = sub.add_parser("optimize", parents=[common, cov], help="NSGA-II constellation search")
    s.add_argument("--population", type=int)
    s.add_argument("--generations", type=int)
    s.add_argument("--mode", choices=["scalar", "multi"])
    s.add_argument("--checkpoint-every", type=int)
    s.add_argument("--resume", help="checkpoint JSON to resume from")

    s = sub.add_parser("detect", parents=[common], help="classify fire pixels in a scene")
    s.add_argument("--scene", help="scene header JSON (defaults to the bundled synthetic scene)")

    s = sub.add_parser("synth-scene", parents=[common], help="write a synthetic scene from a spec")
    s.add_argument("--spec", required=True)
    s.add_argument("--name", default="scene")

    s = sub.add_parser("latency-sweep", parents=[common], help="detection latency versus edge nodes")
    s.add_argument("--nodes", default="1..100")
    s.add_argument("--budget", help="link budget JSON")
    s.add_argument("--out", help="CSV path (defaults to <out-dir>/sweep.csv)")
    s.add_argument("--eps", type=float)
    s.add_argument("--plateau", choices=["marginal", "asymptote"], default="marginal")

    s = sub.add_parser("replay-paper", parents=[common], help="published values side by side")
    s.add_argument("--fixtures", help="directory holding the reference fixtures")
    s.add_argument("--dt", type=float)
    s.add_argument("--subsample", type=int, default=1)
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get(LOG_ENV, "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    started = time.time()
    manifest = {"command": args.command, "argv": list(sys.argv[1:] if argv is None else argv),
                "version": __version__}
    out = None
    try:
        cfg = RunConfig.load(args.config) if args.config else RunConfig()
        if args.seed is not None:
            cfg.seed = args.seed
        out = Path(args.out_dir or cfg.output_dir)
        manifest.update(seed=cfg.seed, config_hash=cfg.digest())
        with output_lock(out):
            result = COMMANDS[args.command](args, cfg, out)
            manifest.update(status="success", **result)
            manifest["wall_time_s"] = time.time() - started
            write_atomic(out / "run_manifest.json", dumps(manifest))
        return 0
    except (FiresatError, ValueError, OSError, KeyError) as exc:
        err = {"error": type(exc).__name__, "message": str(exc).replace("\n", " ")}
        manifest.update(status="failure", **err, wall_time_s=time.time() - started)
        if out is not None:
            with contextlib.suppress(OSError):
                write_atomic(out / "run_manifest.json", dumps(manifest))
        print(json.dumps(err), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
