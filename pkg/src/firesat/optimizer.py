"""NSGA-II over the mixed real/integer Walker design vector."""
from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np

from .constellation import (
    BOUNDS,
    CONTINUOUS_GENES,
    GENES,
    INTEGER_GENES,
    WalkerChromosome,
    clamp,
    phasing_upper,
)
from .errors import EvaluatorFailure

SBX_ETA = 15.0
PM_ETA = 20.0


@dataclass
class Individual:
    genes: WalkerChromosome
    objectives: tuple = ()
    fitness: float = math.inf
    rank: int = 0
    crowding: float = 0.0

    def key(self) -> tuple:
        return self.genes.genes()


@dataclass
class GaConfig:
    population: int = 60
    generations: int = 100
    p_crossover: float = 0.9
    p_mutation: float = 1.0 / 6.0
    tournament_size: int = 2
    seed: int = 0
    mode: str = "scalar"  # or "multi"
    bounds: dict = field(default_factory=dict)  # gene -> (lo, hi), narrows the defaults
    allow_phasing_up_to_planes: bool = False
    checkpoint_every: int = 0
    checkpoint_path: str | None = None
    stats_path: str | None = None

    def __post_init__(self):
        if self.population < 4 or self.population % 2:
            raise ValueError("population must be even and at least 4")
        if self.generations < 0:
            raise ValueError("generations must be non-negative")
        for name in ("p_crossover", "p_mutation"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.tournament_size < 1:
            raise ValueError("tournament_size must be at least 1")
        if self.mode not in ("scalar", "multi"):
            raise ValueError("mode must be 'scalar' or 'multi'")
        for gene, (lo, hi) in self.bounds.items():
            if gene not in BOUNDS:
                raise ValueError(f"unknown gene {gene!r}")
            base_lo, base_hi = BOUNDS[gene]
            if gene == "phasing" and self.allow_phasing_up_to_planes:
                base_hi = BOUNDS["planes"][1]
            if lo < base_lo or hi > base_hi or lo > hi:
                raise ValueError(f"bounds for {gene} must lie within [{base_lo}, {base_hi}]")

    def gene_bounds(self, gene: str) -> tuple:
        return tuple(self.bounds.get(gene, BOUNDS[gene]))

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["bounds"] = {k: list(v) for k, v in self.bounds.items()}
        return d


# ------------------------------------------------------------------ sorting

def dominates(a, b) -> bool:
    """Pareto dominance for minimisation."""
    no_worse = all(x <= y for x, y in zip(a, b))
    return no_worse and any(x < y for x, y in zip(a, b))


def _objectives(item):
    return tuple(item.objectives) if hasattr(item, "objectives") else tuple(item)


def sort_fronts(objectives) -> list[list[int]]:
    """Fast non-dominated sort; returns fronts as lists of indices."""
    objs = np.asarray(objectives, dtype=float)
    n = len(objs)
    if n == 0:
        return []
    if len({len(o) for o in objectives}) > 1:
        raise ValueError("objective vectors differ in length")
    le = np.all(objs[:, None, :] <= objs[None, :, :], axis=-1)
    lt = np.any(objs[:, None, :] < objs[None, :, :], axis=-1)
    dom = le & lt  # dom[p, q]: p dominates q
    counts = dom.sum(axis=0)
    fronts = []
    current = [int(i) for i in np.flatnonzero(counts == 0)]
    while current:
        fronts.append(current)
        nxt = []
        for p in current:
            for q in np.flatnonzero(dom[p]):
                counts[q] -= 1
                if counts[q] == 0:
                    nxt.append(int(q))
        current = sorted(nxt)
    return fronts


def nondominated_sort(pop: list) -> list[list]:
    """Partition ``pop`` into fronts; sets ``rank`` on Individuals."""
    fronts = sort_fronts([_objectives(p) for p in pop])
    out = []
    for k, idx in enumerate(fronts):
        members = [pop[i] for i in idx]
        for m in members:
            if isinstance(m, Individual):
                m.rank = k
        out.append(members)
    return out


def crowding_distances(objectives) -> np.ndarray:
    objs = np.asarray(objectives, dtype=float)
    n = len(objs)
    dist = np.zeros(n)
    if n <= 2:
        dist[:] = math.inf
        return dist
    for m in range(objs.shape[1]):
        order = np.argsort(objs[:, m], kind="stable")
        col = objs[order, m]
        dist[order[0]] = dist[order[-1]] = math.inf
        if not (np.isfinite(col[0]) and np.isfinite(col[-1])) or col[-1] == col[0]:
            continue
        dist[order[1:-1]] += (col[2:] - col[:-2]) / (col[-1] - col[0])
    return dist


def crowding_distance(front: list) -> list:
    if not front:
        raise ValueError("front is empty")
    d = crowding_distances([_objectives(p) for p in front])
    for ind, v in zip(front, d):
        ind.crowding = float(v)
    return front


# ------------------------------------------------------------------ operators

def _better(a: Individual, b: Individual) -> bool:
    return (a.rank, -a.crowding) < (b.rank, -b.crowding)


def select(pop: list, k: int, tournament_size: int, rng: np.random.Generator) -> list:
    """k tournament winners; entrants drawn with replacement."""
    if not pop:
        raise ValueError("population is empty")
    out = []
    for _ in range(k):
        entrants = rng.integers(0, len(pop), size=tournament_size)
        best = pop[int(entrants[0])]
        for j in entrants[1:]:
            if _better(pop[int(j)], best):
                best = pop[int(j)]
        out.append(best)
    return out


def _sbx_pair(x1, x2, lo, hi, rng, eta=SBX_ETA):
    if abs(x1 - x2) < 1e-14:
        return x1, x2
    u = rng.random()
    beta = (2 * u) ** (1 / (eta + 1)) if u <= 0.5 else (1 / (2 * (1 - u))) ** (1 / (eta + 1))
    c1 = 0.5 * ((1 + beta) * x1 + (1 - beta) * x2)
    c2 = 0.5 * ((1 - beta) * x1 + (1 + beta) * x2)
    return min(max(c1, lo), hi), min(max(c2, lo), hi)


def _clamp_to(chrom: WalkerChromosome, config: GaConfig) -> WalkerChromosome:
    chrom = clamp(chrom)
    vals = {}
    for gene in GENES:
        lo, hi = config.gene_bounds(gene)
        if gene == "phasing":
            hi = min(hi, phasing_upper(chrom))
        v = getattr(chrom, gene)
        vals[gene] = min(max(v, lo), hi)
    return replace(chrom, **vals)


def crossover(p1: WalkerChromosome, p2: WalkerChromosome, rng: np.random.Generator,
              config: GaConfig) -> tuple[WalkerChromosome, WalkerChromosome]:
    """SBX on (a, e, i); single-point exchange on (P, F, n)."""
    if rng.random() >= config.p_crossover or p1 == p2:
        return p1, p2
    c1, c2 = {}, {}
    for gene in CONTINUOUS_GENES:
        lo, hi = config.gene_bounds(gene)
        c1[gene], c2[gene] = _sbx_pair(getattr(p1, gene), getattr(p2, gene), lo, hi, rng)
    cut = int(rng.integers(1, len(INTEGER_GENES)))
    for k, gene in enumerate(INTEGER_GENES):
        first, second = (p1, p2) if k < cut else (p2, p1)
        c1[gene] = getattr(first, gene)
        c2[gene] = getattr(second, gene)
    return _clamp_to(replace(p1, **c1), config), _clamp_to(replace(p1, **c2), config)


def _poly_mutate(x, lo, hi, rng, eta=PM_ETA):
    if hi <= lo:
        return lo
    d1, d2 = (x - lo) / (hi - lo), (hi - x) / (hi - lo)
    u = rng.random()
    mpow = 1.0 / (eta + 1.0)
    if u < 0.5:
        q = (2 * u + (1 - 2 * u) * (1 - d1) ** (eta + 1)) ** mpow - 1
    else:
        q = 1 - (2 * (1 - u) + 2 * (u - 0.5) * (1 - d2) ** (eta + 1)) ** mpow
    return min(max(x + q * (hi - lo), lo), hi)


def mutate(chrom: WalkerChromosome, rng: np.random.Generator, config: GaConfig) -> WalkerChromosome:
    vals = {}
    for gene in GENES:
        if rng.random() >= config.p_mutation:
            continue
        lo, hi = config.gene_bounds(gene)
        if gene in CONTINUOUS_GENES:
            vals[gene] = _poly_mutate(getattr(chrom, gene), lo, hi, rng)
        else:
            if gene == "phasing":
                hi = min(hi, phasing_upper(chrom))
            vals[gene] = int(rng.integers(int(lo), int(hi) + 1))
    if not vals:
        return chrom
    return _clamp_to(replace(chrom, **vals), config)


def random_chromosome(rng: np.random.Generator, config: GaConfig) -> WalkerChromosome:
    vals = {}
    for gene in GENES:
        lo, hi = config.gene_bounds(gene)
        if gene in CONTINUOUS_GENES:
            vals[gene] = float(rng.uniform(lo, hi))
        else:
            vals[gene] = int(rng.integers(int(lo), int(hi) + 1))
    chrom = WalkerChromosome(**vals, allow_phasing_up_to_planes=config.allow_phasing_up_to_planes)
    return _clamp_to(chrom, config)


# ------------------------------------------------------------------ loop

@dataclass
class GenerationStats:
    generation: int
    best_fitness: float
    mean_fitness: float
    front0_size: int
    population_hash: str


@dataclass
class RunResult:
    archive: list  # front-0 Individuals of the final population
    best: Individual
    stats: list
    population: list
    config: GaConfig

    def to_dict(self) -> dict:
        return {
            "seed": self.config.seed,
            "best": _ind_to_dict(self.best),
            "archive": [_ind_to_dict(i) for i in self.archive],
            "stats": [s.__dict__ for s in self.stats],
        }


def _num(v: float):
    return v if math.isfinite(v) else "inf"


def _ind_to_dict(ind: Individual) -> dict:
    return {
        "genes": ind.genes.to_dict(),
        "objectives": [_num(v) for v in ind.objectives],
        "fitness": _num(ind.fitness),
        "rank": ind.rank,
        "crowding": _num(ind.crowding),
    }


def _ind_from_dict(d: dict, config: GaConfig) -> Individual:
    f = lambda v: math.inf if v == "inf" else float(v)  # noqa: E731
    return Individual(
        WalkerChromosome.from_dict(d["genes"], config.allow_phasing_up_to_planes),
        tuple(f(v) for v in d["objectives"]), f(d["fitness"]), int(d["rank"]), f(d["crowding"]),
    )


def population_hash(pop: list) -> str:
    h = hashlib.sha256()
    for ind in pop:
        h.update(repr(ind.key()).encode())
    return h.hexdigest()[:16]


def _interpret(result, mode: str) -> tuple[tuple, float]:
    if hasattr(result, "objectives") and hasattr(result, "fitness"):
        scalar = float(result.fitness)
        vec = tuple(float(v) for v in result.objectives())
    elif np.isscalar(result):
        scalar = float(result)
        vec = (scalar,)
    else:
        vec = tuple(float(v) for v in result)
        scalar = math.fsum(vec) if all(map(math.isfinite, vec)) else math.inf
    if not math.isfinite(scalar):
        scalar = math.inf
        vec = (math.inf,) * len(vec)
    return ((scalar,) if mode == "scalar" else vec), scalar


class _Evaluator:
    def __init__(self, fn: Callable, mode: str, executor=None):
        self.fn = fn
        self.mode = mode
        self.executor = executor
        self.cache: dict = {}

    def _call(self, chrom):
        try:
            return self.fn(chrom)
        except Exception as exc:  # noqa: BLE001 - re-raised with context
            raise EvaluatorFailure(chrom, exc) from exc

    def __call__(self, chroms: list) -> list[Individual]:
        todo = []
        for c in chroms:
            if c.genes() not in self.cache and c.genes() not in [t.genes() for t in todo]:
                todo.append(c)
        mapper = self.executor.map if self.executor is not None else map
        for c, res in zip(todo, mapper(self._call, todo)):
            self.cache[c.genes()] = _interpret(res, self.mode)
        out = []
        for c in chroms:
            vec, scalar = self.cache[c.genes()]
            out.append(Individual(c, vec, scalar))
        return out


def _rank_and_crowd(pop: list) -> list[list]:
    fronts = nondominated_sort(pop)
    for front in fronts:
        crowding_distance(front)
    return fronts


def _truncate(merged: list, size: int) -> list:
    fronts = _rank_and_crowd(merged)
    out = []
    for front in fronts:
        if len(out) + len(front) <= size:
            out.extend(front)
            continue
        front = sorted(front, key=lambda ind: -ind.crowding)
        out.extend(front[: size - len(out)])
        break
    return out


def _stats(gen: int, pop: list, best: Individual) -> GenerationStats:
    finite = [i.fitness for i in pop if math.isfinite(i.fitness)]
    return GenerationStats(
        gen,
        best.fitness,
        float(np.mean(finite)) if finite else math.inf,
        sum(1 for i in pop if i.rank == 0),
        population_hash(pop),
    )


def _write_checkpoint(path, gen, pop, best, stats, rng, config):
    state = {
        "generation": gen,
        "config": config.to_dict(),
        "population": [_ind_to_dict(i) for i in pop],
        "best": _ind_to_dict(best),
        "stats": [s.__dict__ for s in stats],
        "rng_state": rng.bit_generator.state,
    }
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(state, default=_json_default))
    tmp.replace(path)


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    raise TypeError(type(o))


def _append_stats_csv(path, row: GenerationStats, header: bool):
    with open(path, "a", newline="") as fh:
        w = csv.writer(fh)
        if header:
            w.writerow(["generation", "best_fitness", "mean_fitness", "front0_size", "population_hash"])
        w.writerow([row.generation, row.best_fitness, row.mean_fitness, row.front0_size, row.population_hash])


def run(config: GaConfig, evaluator: Callable, executor=None, resume_from=None) -> RunResult:
    """Generational NSGA-II loop.

    ``evaluator`` maps a WalkerChromosome to a coverage report (anything
    with ``fitness`` and ``objectives()``), a scalar, or an objective
    tuple. All random draws happen here, never inside evaluation, so a
    parallel ``executor`` cannot change the trajectory.
    """
    rng = np.random.default_rng(config.seed)
    evaluate = _Evaluator(evaluator, config.mode, executor)

    if resume_from is not None:
        state = json.loads(Path(resume_from).read_text())
        rng.bit_generator.state = state["rng_state"]
        pop = [_ind_from_dict(d, config) for d in state["population"]]
        best = _ind_from_dict(state["best"], config)
        stats = [GenerationStats(**s) for s in state["stats"]]
        start = int(state["generation"]) + 1
        for ind in pop:
            evaluate.cache[ind.key()] = (ind.objectives, ind.fitness)
        _rank_and_crowd(pop)
    else:
        pop = evaluate([random_chromosome(rng, config) for _ in range(config.population)])
        _rank_and_crowd(pop)
        best = min(pop, key=lambda i: i.fitness)
        stats = [_stats(0, pop, best)]
        start = 1
        if config.stats_path:
            Path(config.stats_path).unlink(missing_ok=True)
            _append_stats_csv(config.stats_path, stats[0], header=True)

    for gen in range(start, config.generations + 1):
        parents = select(pop, config.population, config.tournament_size, rng)
        children = []
        for k in range(0, len(parents), 2):
            c1, c2 = crossover(parents[k].genes, parents[k + 1].genes, rng, config)
            children.append(mutate(c1, rng, config))
            children.append(mutate(c2, rng, config))
        offspring = evaluate(children)
        pop = _truncate(pop + offspring, config.population)
        gen_best = min(pop, key=lambda i: i.fitness)
        if gen_best.fitness < best.fitness:
            best = gen_best
        stats.append(_stats(gen, pop, best))
        if config.stats_path:
            _append_stats_csv(config.stats_path, stats[-1], header=False)
        if config.checkpoint_every and config.checkpoint_path and gen % config.checkpoint_every == 0:
            _write_checkpoint(config.checkpoint_path, gen, pop, best, stats, rng, config)

    archive = [i for i in _rank_and_crowd(pop)[0]]
    return RunResult(archive, best, stats, pop, config)
