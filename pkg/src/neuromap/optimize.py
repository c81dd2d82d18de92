"""Integer-genome search over mappings and architecture parameters.

A genome is (n_cores, axis) per layer plus optional global menu genes
(NPEs, weight bit-width, memory, clock, flit width, frame rate, mesh
scheme). Decoding never clamps, so encode(decode(g)) == g; structurally
impossible genomes surface as constraint violations during evaluation,
not as decode errors. Constraint handling is feasibility-first: any
memory-bound violator ranks below every feasible candidate.

The NPE count scales per-op energy and static power linearly (the base
config expresses per-lane costs), so more NPEs buy time, not free energy.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .configio import get_float, get_int, parse_blocks_file
from .fidelity import FidelityError, from_values, xcorr_score
from .mesh import MAX_STRIP_DEFAULT, SCHEMES, compress, place
from .partition import (
    AXES,
    LayerSplit,
    PartitionError,
    PartitionSpec,
    build_mapping,
)
from .simcost import CostReport, HardwareConfig, SimError, simulate
from .workload import EventTrace, NetworkModel

PENALTY_BASE = 1e18
STRUCTURAL_VIOLATION = 1e12

OBJECTIVE_NAMES = ("energy", "latency", "area", "fidelity_penalty")


class OptimizeError(ValueError):
    pass


@dataclass(frozen=True)
class GenomeSpace:
    """Bounds and menus defining the integer search space."""

    n_layers: int
    c_max: int = 16
    axes_menu: tuple[str, ...] = AXES
    npes_menu: tuple[int, ...] | None = None
    bw_weights_menu: tuple[int, ...] | None = None
    mem_menu: tuple[int, ...] | None = None
    clock_menu: tuple[float, ...] | None = None
    flit_menu: tuple[int, ...] | None = None
    fps_menu: tuple[float, ...] | None = None
    scheme_menu: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.n_layers < 1 or self.c_max < 1:
            raise OptimizeError("n_layers and c_max must be >= 1")
        if not self.axes_menu or any(a not in AXES for a in self.axes_menu):
            raise OptimizeError(f"axes_menu entries must be among {AXES}")
        for name in ("axes_menu", "npes_menu", "bw_weights_menu", "mem_menu",
                     "clock_menu", "flit_menu", "fps_menu", "scheme_menu"):
            menu = getattr(self, name)
            if menu is not None and len(set(menu)) != len(menu):
                raise OptimizeError(f"{name} entries must be unique")

    def _menus(self) -> list[tuple[str, tuple]]:
        out = []
        for name in ("npes_menu", "bw_weights_menu", "mem_menu", "clock_menu",
                     "flit_menu", "fps_menu", "scheme_menu"):
            menu = getattr(self, name)
            if menu is not None:
                out.append((name, menu))
        return out

    @property
    def n_genes(self) -> int:
        return 2 * self.n_layers + len(self._menus())

    def gene_names(self) -> list[str]:
        names = []
        for i in range(self.n_layers):
            names += [f"cores_l{i}", f"axis_l{i}"]
        names += [name.removesuffix("_menu") for (name, _) in self._menus()]
        return names

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = [], []
        for _ in range(self.n_layers):
            lo += [1, 0]
            hi += [self.c_max, len(self.axes_menu) - 1]
        for (_, menu) in self._menus():
            lo.append(0)
            hi.append(len(menu) - 1)
        return np.array(lo, dtype=np.int64), np.array(hi, dtype=np.int64)

    def sample(self, rng: np.random.Generator) -> tuple[int, ...]:
        lo, hi = self.bounds()
        return tuple(int(v) for v in rng.integers(lo, hi + 1))

    def validate_genome(self, genome) -> None:
        lo, hi = self.bounds()
        if len(genome) != self.n_genes:
            raise OptimizeError(f"genome has {len(genome)} genes, "
                                f"space needs {self.n_genes}")
        for g, a, b in zip(genome, lo, hi):
            if not (a <= g <= b):
                raise OptimizeError(f"gene {g} outside [{a}, {b}]")


def decode(genome, model: NetworkModel, base_hw: HardwareConfig,
           space: GenomeSpace, default_scheme: str = "strict-area"):
    """(PartitionSpec, HardwareConfig, scheme, fps_override).

    fps_override is None unless the space carries an fps gene. Clock menu
    values multiply every base time constant. NPE count scales e_npe_op
    and p_static_core relative to the base's per-lane figures.
    """
    space.validate_genome(genome)
    splits = []
    for i in range(space.n_layers):
        n_cores = int(genome[2 * i])
        axis = space.axes_menu[int(genome[2 * i + 1])]
        splits.append(LayerSplit(n_cores=n_cores, axis=axis))
    spec = PartitionSpec(tuple(splits))
    hw = base_hw
    scheme = default_scheme
    fps_override = None
    pos = 2 * space.n_layers
    for (name, menu) in space._menus():
        value = menu[int(genome[pos])]
        pos += 1
        if name == "npes_menu":
            hw = replace(hw, npes_per_core=int(value),
                         e_npe_op=base_hw.e_npe_op * int(value),
                         p_static_core=base_hw.p_static_core * int(value))
        elif name == "bw_weights_menu":
            pass  # applied to the model below
        elif name == "mem_menu":
            hw = replace(hw, mem_per_core=int(value))
        elif name == "clock_menu":
            hw = replace(hw.scaled_times(float(value)), clock_period=float(value))
        elif name == "flit_menu":
            hw = replace(hw, flit_bits=int(value))
        elif name == "fps_menu":
            fps_override = float(value)
        elif name == "scheme_menu":
            scheme = str(value)
    return spec, hw, scheme, fps_override


def decode_model(genome, model: NetworkModel, space: GenomeSpace) -> NetworkModel:
    """Model with the genome's weight bit-width applied, if that gene exists."""
    pos = 2 * space.n_layers
    for (name, menu) in space._menus():
        if name == "bw_weights_menu":
            bw = int(menu[int(genome[pos])])
            return replace(model, bitwidths=replace(model.bitwidths, weights=bw))
        pos += 1
    return model


def encode(spec: PartitionSpec, hw: HardwareConfig, scheme: str,
           fps_override: float | None, base_hw: HardwareConfig,
           space: GenomeSpace, model: NetworkModel | None = None) -> tuple[int, ...]:
    """Inverse of decode for genomes within bounds."""
    genes: list[int] = []
    for split in spec.splits:
        genes.append(split.n_cores)
        genes.append(space.axes_menu.index(split.axis))
    for (name, menu) in space._menus():
        if name == "npes_menu":
            genes.append(menu.index(hw.npes_per_core))
        elif name == "bw_weights_menu":
            if model is None:
                raise OptimizeError("encoding a bw_weights gene needs the model")
            genes.append(menu.index(model.bitwidths.weights))
        elif name == "mem_menu":
            genes.append(menu.index(hw.mem_per_core))
        elif name == "clock_menu":
            genes.append(menu.index(hw.clock_period))
        elif name == "flit_menu":
            genes.append(menu.index(hw.flit_bits))
        elif name == "fps_menu":
            genes.append(menu.index(fps_override))
        elif name == "scheme_menu":
            genes.append(menu.index(scheme))
    return tuple(genes)


def retime_trace(trace: EventTrace, fps: float) -> EventTrace:
    """Same event content on a new frame grid (fps == 0 -> ordinals)."""
    events = []
    for k, burst in enumerate(trace.frames()):
        t = k / fps if fps > 0 else float(k)
        for (_, nid, bits) in burst:
            events.append((t, nid, bits))
    return EventTrace(events=tuple(events), fps=fps, n_frames=trace.n_frames)


@dataclass(frozen=True)
class Objectives:
    energy: float
    latency: float
    area: float
    fidelity_penalty: float

    def as_tuple(self, names) -> tuple[float, ...]:
        return tuple(getattr(self, n) for n in names)


@dataclass(frozen=True)
class EvalContext:
    model: NetworkModel
    trace: EventTrace
    base_hw: HardwareConfig
    space: GenomeSpace
    scheme: str = "strict-area"
    max_strip: int = MAX_STRIP_DEFAULT
    objective_names: tuple[str, ...] = ("energy", "latency")
    reference: tuple[float, ...] | None = None
    signal_dt: float = 1.0
    shift_weight: float = 1e-3

    def __post_init__(self):
        for n in self.objective_names:
            if n not in OBJECTIVE_NAMES:
                raise OptimizeError(f"unknown objective {n!r}")


@dataclass(frozen=True)
class EvalResult:
    genome: tuple[int, ...]
    objectives: Objectives
    violation: float
    n_cores: int
    mesh_shape: tuple[int, int]
    error: str | None = None

    @property
    def feasible(self) -> bool:
        return self.violation == 0.0


def _penalty_result(genome, violation: float, error: str | None = None) -> EvalResult:
    v = PENALTY_BASE + violation
    return EvalResult(genome=tuple(genome),
                      objectives=Objectives(v, v, v, v),
                      violation=violation, n_cores=0, mesh_shape=(0, 0),
                      error=error)


def fidelity_penalty_of(end_signal, ctx: EvalContext) -> float:
    if ctx.reference is None:
        return 0.0
    values = [v for (_, v) in end_signal]
    try:
        peak, shift_ms = xcorr_score(from_values(values, ctx.signal_dt),
                                     from_values(ctx.reference, ctx.signal_dt))
    except FidelityError:
        return 1.0
    return (1.0 - peak) + ctx.shift_weight * abs(shift_ms)


def evaluate(genome, ctx: EvalContext) -> EvalResult:
    """decode -> map -> compress -> place -> simulate -> score.

    Infeasible or failing candidates come back as penalty objectives with
    a positive violation; they never raise.
    """
    model = decode_model(genome, ctx.model, ctx.space)
    spec, hw, scheme, fps_override = decode(genome, model, ctx.base_hw,
                                            ctx.space, ctx.scheme)
    try:
        mapping = build_mapping(model, spec, m_max=hw.mem_per_core,
                                enforce_cap=False)
    except PartitionError as exc:
        return _penalty_result(genome, STRUCTURAL_VIOLATION, str(exc))
    worst = max(mapping.memory_by_core().values())
    violation = max(0.0, float(worst - hw.mem_per_core))
    if violation > 0.0:
        return _penalty_result(genome, violation)
    trace = ctx.trace
    if fps_override is not None and fps_override != trace.fps:
        trace = retime_trace(trace, fps_override)
    n = mapping.n_cores_total
    shape = compress(n, scheme, ctx.max_strip)
    placement = place(n, shape)
    try:
        report = simulate(model, mapping, placement, hw, trace)
    except SimError as exc:
        return _penalty_result(genome, STRUCTURAL_VIOLATION, str(exc))
    obj = Objectives(
        energy=report.total_energy,
        latency=report.latency_end_to_end,
        area=float(shape[0] * shape[1]),
        fidelity_penalty=fidelity_penalty_of(report.end_signal, ctx),
    )
    return EvalResult(genome=tuple(genome), objectives=obj, violation=0.0,
                      n_cores=n, mesh_shape=shape)


def simulate_genome(genome, ctx: EvalContext) -> CostReport:
    """Full CostReport for one genome (for snapshot materialization)."""
    model = decode_model(genome, ctx.model, ctx.space)
    spec, hw, scheme, fps_override = decode(genome, model, ctx.base_hw,
                                            ctx.space, ctx.scheme)
    mapping = build_mapping(model, spec, m_max=hw.mem_per_core)
    trace = ctx.trace
    if fps_override is not None and fps_override != trace.fps:
        trace = retime_trace(trace, fps_override)
    n = mapping.n_cores_total
    placement = place(n, compress(n, scheme, ctx.max_strip))
    return simulate(model, mapping, placement, hw, trace)


_WORKER_CTX: EvalContext | None = None


def _init_worker(ctx: EvalContext) -> None:
    global _WORKER_CTX
    _WORKER_CTX = ctx


def _eval_in_worker(genome) -> EvalResult:
    try:
        return evaluate(genome, _WORKER_CTX)
    except Exception as exc:  # defensive: a buggy candidate must not kill the batch
        return _penalty_result(genome, STRUCTURAL_VIOLATION,
                               f"{type(exc).__name__}: {exc}")


def evaluate_batch(genomes, ctx: EvalContext, workers: int = 1) -> list[EvalResult]:
    """Order-preserving batch evaluation, identical for any worker count."""
    if workers < 1:
        raise OptimizeError("workers must be >= 1")
    genomes = [tuple(g) for g in genomes]
    if not genomes:
        return []
    if workers == 1:
        return [_eval_in_worker_local(g, ctx) for g in genomes]
    with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker,
                             initargs=(ctx,)) as pool:
        return list(pool.map(_eval_in_worker, genomes, chunksize=8))


def _eval_in_worker_local(genome, ctx) -> EvalResult:
    try:
        return evaluate(genome, ctx)
    except Exception as exc:
        return _penalty_result(genome, STRUCTURAL_VIOLATION,
                               f"{type(exc).__name__}: {exc}")


# --- integer variation operators ---

def _reflect(x: float, lo: int, hi: int) -> int:
    """Round to int and fold back into [lo, hi] by boundary reflection."""
    v = int(round(x))
    if hi <= lo:
        return lo
    span = hi - lo
    d = (v - lo) % (2 * span)
    if d > span:
        d = 2 * span - d
    return lo + d


def sbx_crossover(a, b, lo, hi, eta: float, rng: np.random.Generator,
                  p_var: float = 0.5) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Simulated binary crossover in real space, rounded and reflected."""
    c1, c2 = list(a), list(b)
    for i in range(len(a)):
        if rng.random() > p_var or a[i] == b[i]:
            continue
        x1, x2 = sorted((float(a[i]), float(b[i])))
        u = rng.random()
        beta = (2 * u) ** (1 / (eta + 1)) if u <= 0.5 else \
            (1 / (2 * (1 - u))) ** (1 / (eta + 1))
        y1 = 0.5 * ((x1 + x2) - beta * (x2 - x1))
        y2 = 0.5 * ((x1 + x2) + beta * (x2 - x1))
        if rng.random() < 0.5:
            y1, y2 = y2, y1
        c1[i] = _reflect(y1, int(lo[i]), int(hi[i]))
        c2[i] = _reflect(y2, int(lo[i]), int(hi[i]))
    return tuple(c1), tuple(c2)


def polynomial_mutation(g, lo, hi, eta: float, rng: np.random.Generator,
                        p_gene: float | None = None) -> tuple[int, ...]:
    """Polynomial mutation in real space, rounded and reflected."""
    out = list(g)
    p = (1.0 / len(g)) if p_gene is None else p_gene
    for i in range(len(g)):
        if rng.random() > p or hi[i] <= lo[i]:
            continue
        span = float(hi[i] - lo[i])
        u = rng.random()
        if u < 0.5:
            delta = (2 * u) ** (1 / (eta + 1)) - 1
        else:
            delta = 1 - (2 * (1 - u)) ** (1 / (eta + 1))
        out[i] = _reflect(float(g[i]) + delta * span, int(lo[i]), int(hi[i]))
    return tuple(out)


# --- ranking helpers ---

def scalarize(res: EvalResult, names, weights: dict[str, float]) -> float:
    vec = res.objectives.as_tuple(names)
    return sum(weights.get(n, 0.0) * v for n, v in zip(names, vec))


def rank_key(res: EvalResult, names, weights) -> tuple[float, float]:
    """Feasibility-first total order for single-objective selection."""
    return (res.violation, scalarize(res, names, weights))


def dominates(a: EvalResult, b: EvalResult, names) -> bool:
    """Feasibility-first Pareto dominance."""
    if a.violation == 0.0 and b.violation > 0.0:
        return True
    if a.violation > 0.0:
        return b.violation > 0.0 and a.violation < b.violation
    va = a.objectives.as_tuple(names)
    vb = b.objectives.as_tuple(names)
    return all(x <= y for x, y in zip(va, vb)) and any(
        x < y for x, y in zip(va, vb))


class ParetoArchive:
    """Elitist archive of mutually non-dominated results."""

    def __init__(self, names):
        self.names = tuple(names)
        self.members: list[EvalResult] = []

    def add(self, res: EvalResult) -> bool:
        if any(m.genome == res.genome for m in self.members):
            return False
        if any(dominates(m, res, self.names) for m in self.members):
            return False
        self.members = [m for m in self.members
                        if not dominates(res, m, self.names)]
        self.members.append(res)
        return True

    def update(self, results) -> None:
        for r in results:
            self.add(r)

    def check_invariant(self) -> None:
        for i, a in enumerate(self.members):
            for b in self.members[i + 1:]:
                if dominates(a, b, self.names) or dominates(b, a, self.names):
                    raise AssertionError("archive holds a dominated member")

    def front(self) -> list[EvalResult]:
        return sorted(self.members,
                      key=lambda r: r.objectives.as_tuple(self.names))


def hypervolume_2d(points, ref: tuple[float, float]) -> float:
    """Dominated area between a 2D minimization front and a reference point."""
    pts = sorted(p for p in points if p[0] < ref[0] and p[1] < ref[1])
    hv = 0.0
    prev_y = ref[1]
    for (x, y) in pts:
        if y < prev_y:
            hv += (ref[0] - x) * (prev_y - y)
            prev_y = y
    return hv


def non_dominated_sort(results, names) -> list[list[int]]:
    """Indices grouped into fronts, best first."""
    n = len(results)
    dominated_by: list[list[int]] = [[] for _ in range(n)]
    count = [0] * n
    for i in range(n):
        for j in range(i + 1, n):
            if dominates(results[i], results[j], names):
                dominated_by[i].append(j)
                count[j] += 1
            elif dominates(results[j], results[i], names):
                dominated_by[j].append(i)
                count[i] += 1
    fronts = [[i for i in range(n) if count[i] == 0]]
    while fronts[-1]:
        nxt = []
        for i in fronts[-1]:
            for j in dominated_by[i]:
                count[j] -= 1
                if count[j] == 0:
                    nxt.append(j)
        fronts.append(nxt)
    fronts.pop()
    return fronts


def crowding_distance(results, idxs, names) -> dict[int, float]:
    dist = {i: 0.0 for i in idxs}
    k = len(names)
    for m in range(k):
        ordered = sorted(idxs, key=lambda i: results[i].objectives.as_tuple(names)[m])
        vals = [results[i].objectives.as_tuple(names)[m] for i in ordered]
        span = vals[-1] - vals[0]
        dist[ordered[0]] = math.inf
        dist[ordered[-1]] = math.inf
        if span <= 0:
            continue
        for p in range(1, len(ordered) - 1):
            dist[ordered[p]] += (vals[p + 1] - vals[p - 1]) / span
    return dist


# --- algorithm parameter bundle ---

@dataclass(frozen=True)
class AlgoParams:
    algo: str = "nsga2"
    population: int = 40
    generations: int = 30
    offspring: int = 10
    eta_crossover: float = 3.0
    eta_mutation: float = 3.0
    p_crossover: float = 0.9
    p_mutation: float | None = None  # None -> 1/n_genes
    omega: float = 0.7
    c1: float = 1.5
    c2: float = 1.5
    weights: dict[str, float] = field(default_factory=lambda: {"energy": 1.0})

    def validate(self) -> None:
        if self.algo not in ("ga", "nsga2", "pso"):
            raise OptimizeError(f"unknown algorithm {self.algo!r}")
        if self.population < 1 or self.generations < 0:
            raise OptimizeError("population >= 1 and generations >= 0 required")
        if self.offspring < 1:
            raise OptimizeError("offspring must be >= 1")


def load_algo_params(path) -> AlgoParams:
    blocks = parse_blocks_file(path)
    fields_ = None
    for section, f in blocks:
        if section == "algorithm":
            fields_ = f
            break
    if fields_ is None:
        raise OptimizeError(f"{path}: missing [algorithm] section")
    weights = {}
    for key, raw in fields_.items():
        if key.startswith("weight_"):
            weights[key.removeprefix("weight_")] = float(raw)
    kwargs = dict(
        algo=fields_.get("algo", "nsga2"),
        population=get_int(fields_, "population", default=40, source=str(path)),
        generations=get_int(fields_, "generations", default=30, source=str(path)),
        offspring=get_int(fields_, "offspring", default=10, source=str(path)),
        eta_crossover=get_float(fields_, "eta_crossover", default=3.0, source=str(path)),
        eta_mutation=get_float(fields_, "eta_mutation", default=3.0, source=str(path)),
        p_crossover=get_float(fields_, "p_crossover", default=0.9, source=str(path)),
        omega=get_float(fields_, "omega", default=0.7, source=str(path)),
        c1=get_float(fields_, "c1", default=1.5, source=str(path)),
        c2=get_float(fields_, "c2", default=1.5, source=str(path)),
    )
    if "p_mutation" in fields_:
        kwargs["p_mutation"] = get_float(fields_, "p_mutation", source=str(path))
    if weights:
        kwargs["weights"] = weights
    params = AlgoParams(**kwargs)
    params.validate()
    return params


# --- search loops ---

def _tournament(rng, pop_results, names, weights) -> EvalResult:
    i, j = rng.integers(0, len(pop_results), size=2)
    a, b = pop_results[int(i)], pop_results[int(j)]
    return a if rank_key(a, names, weights) <= rank_key(b, names, weights) else b


def run_ga(ctx: EvalContext, params: AlgoParams, seed: int, workers: int = 1,
           on_generation=None) -> tuple[EvalResult, list[float]]:
    """Elitist generational GA on the scalarized objective.

    Returns (best result, best-so-far history per generation).
    """
    params.validate()
    rng = np.random.default_rng(seed)
    lo, hi = ctx.space.bounds()
    names, weights = ctx.objective_names, params.weights
    pop = [ctx.space.sample(rng) for _ in range(params.population)]
    results = evaluate_batch(pop, ctx, workers)
    best = min(results, key=lambda r: rank_key(r, names, weights))
    history = [scalarize(best, names, weights)]
    if on_generation:
        on_generation(0, results, best)
    for gen in range(1, params.generations + 1):
        offspring = []
        while len(offspring) < params.population:
            p1 = _tournament(rng, results, names, weights)
            p2 = _tournament(rng, results, names, weights)
            if rng.random() < params.p_crossover:
                c1, c2 = sbx_crossover(p1.genome, p2.genome, lo, hi,
                                       params.eta_crossover, rng)
            else:
                c1, c2 = p1.genome, p2.genome
            offspring.append(polynomial_mutation(c1, lo, hi, params.eta_mutation,
                                                 rng, params.p_mutation))
            if len(offspring) < params.population:
                offspring.append(polynomial_mutation(c2, lo, hi,
                                                     params.eta_mutation, rng,
                                                     params.p_mutation))
        child_results = evaluate_batch(offspring, ctx, workers)
        merged = results + child_results
        merged.sort(key=lambda r: rank_key(r, names, weights))
        results = merged[:params.population]
        gen_best = results[0]
        if rank_key(gen_best, names, weights) < rank_key(best, names, weights):
            best = gen_best
        history.append(scalarize(best, names, weights))
        if on_generation:
            on_generation(gen, child_results, best)
    return best, history


def run_nsga2(ctx: EvalContext, params: AlgoParams, seed: int, workers: int = 1,
              on_generation=None) -> tuple[ParetoArchive, list[float]]:
    """(mu=population, lambda=offspring) NSGA-II with an elitist archive.

    Returns (archive, hypervolume history). The hypervolume reference is
    fixed from the first generation's worst feasible corner, so the
    elitist archive makes the history non-decreasing.
    """
    params.validate()
    if len(ctx.objective_names) < 2:
        raise OptimizeError("nsga2 needs at least 2 objectives")
    rng = np.random.default_rng(seed)
    lo, hi = ctx.space.bounds()
    names = ctx.objective_names
    weights = params.weights
    pop = [ctx.space.sample(rng) for _ in range(params.population)]
    results = evaluate_batch(pop, ctx, workers)
    archive = ParetoArchive(names)
    archive.update(r for r in results if r.feasible)
    feas = [r.objectives.as_tuple(names)[:2] for r in results if r.feasible]
    if feas:
        ref = (max(v[0] for v in feas) * 1.1 + 1.0,
               max(v[1] for v in feas) * 1.1 + 1.0)
    else:
        ref = (PENALTY_BASE, PENALTY_BASE)
    history = [hypervolume_2d([r.objectives.as_tuple(names)[:2]
                               for r in archive.members], ref)]
    if on_generation:
        on_generation(0, results, archive)

    def survival(cands: list[EvalResult]) -> list[EvalResult]:
        fronts = non_dominated_sort(cands, names)
        keep: list[EvalResult] = []
        for front in fronts:
            if len(keep) + len(front) <= params.population:
                keep.extend(cands[i] for i in front)
            else:
                dist = crowding_distance(cands, front, names)
                ranked = sorted(front, key=lambda i: -dist[i])
                keep.extend(cands[i] for i in
                            ranked[:params.population - len(keep)])
                break
        return keep

    for gen in range(1, params.generations + 1):
        offspring = []
        while len(offspring) < params.offspring:
            p1 = _tournament(rng, results, names, weights)
            p2 = _tournament(rng, results, names, weights)
            if rng.random() < params.p_crossover:
                c1, c2 = sbx_crossover(p1.genome, p2.genome, lo, hi,
                                       params.eta_crossover, rng)
            else:
                c1, c2 = p1.genome, p2.genome
            offspring.append(polynomial_mutation(c1, lo, hi, params.eta_mutation,
                                                 rng, params.p_mutation))
            if len(offspring) < params.offspring:
                offspring.append(polynomial_mutation(c2, lo, hi,
                                                     params.eta_mutation, rng,
                                                     params.p_mutation))
        child_results = evaluate_batch(offspring, ctx, workers)
        archive.update(r for r in child_results if r.feasible)
        archive.check_invariant()
        results = survival(results + child_results)
        history.append(hypervolume_2d([r.objectives.as_tuple(names)[:2]
                                       for r in archive.members], ref))
        if on_generation:
            on_generation(gen, child_results, archive)
    return archive, history


def run_pso(ctx: EvalContext, params: AlgoParams, seed: int, workers: int = 1,
            on_generation=None) -> tuple[EvalResult, list[float]]:
    """Integer PSO: real-valued velocities, positions rounded and reflected."""
    params.validate()
    rng = np.random.default_rng(seed)
    lo, hi = ctx.space.bounds()
    names, weights = ctx.objective_names, params.weights
    n = params.population
    dim = ctx.space.n_genes
    pos = np.stack([np.array(ctx.space.sample(rng)) for _ in range(n)])
    vel = np.zeros((n, dim), dtype=np.float64)
    results = evaluate_batch([tuple(int(v) for v in p) for p in pos], ctx, workers)
    pbest = list(results)
    gbest = min(results, key=lambda r: rank_key(r, names, weights))
    history = [scalarize(gbest, names, weights)]
    if on_generation:
        on_generation(0, results, gbest)
    for gen in range(1, params.generations + 1):
        r1 = rng.random((n, dim))
        r2 = rng.random((n, dim))
        pb = np.stack([np.array(p.genome) for p in pbest]).astype(np.float64)
        gb = np.array(gbest.genome, dtype=np.float64)
        vel = (params.omega * vel + params.c1 * r1 * (pb - pos)
               + params.c2 * r2 * (gb - pos))
        raw = pos + vel
        new_pos = np.empty_like(pos)
        for i in range(n):
            for d in range(dim):
                new_pos[i, d] = _reflect(float(raw[i, d]), int(lo[d]), int(hi[d]))
        pos = new_pos
        results = evaluate_batch([tuple(int(v) for v in p) for p in pos],
                                 ctx, workers)
        for i, r in enumerate(results):
            if rank_key(r, names, weights) < rank_key(pbest[i], names, weights):
                pbest[i] = r
        cand = min(results, key=lambda r: rank_key(r, names, weights))
        if rank_key(cand, names, weights) < rank_key(gbest, names, weights):
            gbest = cand
        history.append(scalarize(gbest, names, weights))
        if on_generation:
            on_generation(gen, results, gbest)
    return gbest, history
