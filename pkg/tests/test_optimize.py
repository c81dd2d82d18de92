import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from neuromap.mesh import compress, place
from neuromap.optimize import (
    PENALTY_BASE,
    STRUCTURAL_VIOLATION,
    AlgoParams,
    EvalContext,
    EvalResult,
    GenomeSpace,
    Objectives,
    OptimizeError,
    ParetoArchive,
    _reflect,
    crowding_distance,
    decode,
    decode_model,
    dominates,
    encode,
    evaluate,
    evaluate_batch,
    hypervolume_2d,
    load_algo_params,
    non_dominated_sort,
    polynomial_mutation,
    rank_key,
    retime_trace,
    run_ga,
    run_nsga2,
    run_pso,
    sbx_crossover,
    scalarize,
    simulate_genome,
)
from neuromap.partition import build_mapping
from neuromap.simcost import HardwareConfig, simulate
from neuromap.workload import EventTrace, Layer, NetworkModel, synth_trace


def toy_model(width2=5):
    layers = (
        Layer(id=0, kind="conv", channels=4, height=2, width=3, weights=0,
              biases=0, is_snn=True, avg_event_rate=0.8),
        Layer(id=1, kind="conv", channels=4, height=2, width=3, weights=96,
              biases=4, is_snn=True, avg_event_rate=0.5),
        Layer(id=2, kind="dense", channels=1, height=1, width=width2,
              weights=24 * width2, biases=width2, is_snn=True,
              avg_event_rate=0.5),
    )
    return NetworkModel(name="toy", layers=layers, edges=((0, 1), (1, 2)))


HW = HardwareConfig(npes_per_core=2, e_npe_op=1.0, e_ctrl_event=2.0,
                    e_hop_per_flit=0.5, e_inject=1.0, p_static_core=3.0,
                    t_npe_op=1.0, t_hop=1.0, t_inject=1.0)


@pytest.fixture(scope="module")
def ctx():
    m = toy_model()
    tr = synth_trace(m, n_frames=3, fps=0, seed=1)
    return EvalContext(model=m, trace=tr, base_hw=HW,
                       space=GenomeSpace(n_layers=3, c_max=4))


def full_space(n_layers=3, c_max=4):
    return GenomeSpace(
        n_layers=n_layers, c_max=c_max,
        npes_menu=(1, 2, 4), bw_weights_menu=(4, 8, 16),
        mem_menu=(10_000, 8 * 2**20), clock_menu=(1.0, 2.0),
        flit_menu=(16, 32), fps_menu=(0.0, 30.0),
        scheme_menu=("strict-area", "loose-area", "strict-square"))


# --- genome space ---

def test_gene_count_and_bounds():
    space = full_space()
    assert space.n_genes == 2 * 3 + 7
    lo, hi = space.bounds()
    assert list(lo[:6]) == [1, 0, 1, 0, 1, 0]
    assert list(hi[:6]) == [4, 3, 4, 3, 4, 3]
    assert list(hi[6:]) == [2, 2, 1, 1, 1, 1, 2]
    names = space.gene_names()
    assert names[:2] == ["cores_l0", "axis_l0"]
    assert names[6:] == ["npes", "bw_weights", "mem", "clock", "flit",
                         "fps", "scheme"]


def test_sample_within_bounds():
    space = full_space()
    rng = np.random.default_rng(3)
    lo, hi = space.bounds()
    for _ in range(200):
        g = space.sample(rng)
        space.validate_genome(g)
        assert all(a <= v <= b for v, a, b in zip(g, lo, hi))


def test_space_rejects_duplicate_menu_entries():
    with pytest.raises(OptimizeError):
        GenomeSpace(n_layers=1, npes_menu=(2, 2))


def test_space_rejects_unknown_axis():
    with pytest.raises(OptimizeError):
        GenomeSpace(n_layers=1, axes_menu=("layer", "depth"))


def test_validate_genome_rejects_bad_length_and_range():
    space = GenomeSpace(n_layers=2, c_max=4)
    with pytest.raises(OptimizeError):
        space.validate_genome((1, 0, 1))
    with pytest.raises(OptimizeError):
        space.validate_genome((5, 0, 1, 0))
    with pytest.raises(OptimizeError):
        space.validate_genome((1, 4, 1, 0))


# --- decode / encode ---

def test_encode_decode_round_trip_1000_random_genomes():
    m = toy_model()
    space = full_space()
    rng = np.random.default_rng(0)
    for _ in range(1000):
        g = space.sample(rng)
        mm = decode_model(g, m, space)
        spec, hw, scheme, fps = decode(g, mm, HW, space)
        assert encode(spec, hw, scheme, fps, HW, space, model=mm) == g


def test_decode_semantics():
    m = toy_model()
    space = full_space()
    g = (2, 1, 3, 2, 1, 0,   # per-layer genes
         2,  # npes -> 4
         0,  # bw_weights -> 4
         1,  # mem -> 8 MiB
         1,  # clock -> 2.0
         0,  # flit -> 16
         1,  # fps -> 30.0
         1)  # scheme -> loose-area
    mm = decode_model(g, m, space)
    assert mm.bitwidths.weights == 4
    spec, hw, scheme, fps = decode(g, mm, HW, space)
    assert [s.n_cores for s in spec.splits] == [2, 3, 1]
    assert [s.axis for s in spec.splits] == ["channel", "height", "layer"]
    assert hw.npes_per_core == 4
    assert hw.e_npe_op == HW.e_npe_op * 4
    assert hw.p_static_core == HW.p_static_core * 4
    assert hw.mem_per_core == 8 * 2**20
    assert hw.clock_period == 2.0
    assert hw.t_npe_op == HW.t_npe_op * 2.0
    assert hw.t_hop == HW.t_hop * 2.0
    assert hw.t_inject == HW.t_inject * 2.0
    assert hw.flit_bits == 16
    assert fps == 30.0
    assert scheme == "loose-area"


def test_decode_defaults_without_menus():
    m = toy_model()
    space = GenomeSpace(n_layers=3, c_max=4)
    spec, hw, scheme, fps = decode((1, 0, 1, 0, 1, 0), m, HW, space,
                                   default_scheme="strict-square")
    assert hw == HW
    assert scheme == "strict-square"
    assert fps is None
    assert decode_model((1, 0, 1, 0, 1, 0), m, space) is m


def test_decode_restricted_axes_menu():
    m = toy_model()
    space = GenomeSpace(n_layers=3, c_max=2, axes_menu=("channel", "width"))
    spec, _, _, _ = decode((2, 1, 1, 0, 1, 0), m, HW, space)
    assert spec.splits[0].axis == "width"
    assert spec.splits[1].axis == "channel"


# --- variation operators ---

@given(st.integers(min_value=-10**9, max_value=10**9),
       st.integers(min_value=-50, max_value=50),
       st.integers(min_value=0, max_value=60))
def test_reflect_stays_in_bounds(x, lo, span):
    hi = lo + span
    v = _reflect(float(x), lo, hi)
    assert lo <= v <= hi


def test_reflect_identity_inside_bounds():
    for v in range(1, 9):
        assert _reflect(float(v), 1, 8) == v
    assert _reflect(0.0, 1, 8) == 2
    assert _reflect(9.0, 1, 8) == 7
    assert _reflect(5.0, 3, 3) == 3


@given(st.lists(st.integers(min_value=1, max_value=8), min_size=4, max_size=4),
       st.lists(st.integers(min_value=1, max_value=8), min_size=4, max_size=4),
       st.integers(min_value=0, max_value=2**31 - 1))
@settings(max_examples=100)
def test_sbx_children_within_bounds(a, b, seed):
    lo = np.array([1, 1, 1, 1])
    hi = np.array([8, 8, 8, 8])
    rng = np.random.default_rng(seed)
    c1, c2 = sbx_crossover(tuple(a), tuple(b), lo, hi, eta=3.0, rng=rng)
    for child in (c1, c2):
        assert all(1 <= v <= 8 for v in child)


def test_sbx_identical_parents_pass_through():
    lo = np.array([1, 0])
    hi = np.array([8, 3])
    rng = np.random.default_rng(0)
    c1, c2 = sbx_crossover((3, 2), (3, 2), lo, hi, eta=3.0, rng=rng)
    assert c1 == (3, 2) and c2 == (3, 2)


@given(st.lists(st.integers(min_value=1, max_value=8), min_size=5, max_size=5),
       st.integers(min_value=0, max_value=2**31 - 1))
@settings(max_examples=100)
def test_mutation_within_bounds(g, seed):
    lo = np.array([1] * 5)
    hi = np.array([8] * 5)
    rng = np.random.default_rng(seed)
    out = polynomial_mutation(tuple(g), lo, hi, eta=3.0, rng=rng, p_gene=1.0)
    assert all(1 <= v <= 8 for v in out)


def test_operators_deterministic_per_seed():
    lo = np.array([1] * 6)
    hi = np.array([9] * 6)
    a, b = (1, 5, 9, 2, 4, 7), (9, 3, 1, 8, 6, 2)
    out1 = sbx_crossover(a, b, lo, hi, 3.0, np.random.default_rng(42))
    out2 = sbx_crossover(a, b, lo, hi, 3.0, np.random.default_rng(42))
    assert out1 == out2
    m1 = polynomial_mutation(a, lo, hi, 3.0, np.random.default_rng(7), 1.0)
    m2 = polynomial_mutation(a, lo, hi, 3.0, np.random.default_rng(7), 1.0)
    assert m1 == m2


# --- evaluation ---

def test_evaluate_matches_direct_pipeline(ctx):
    g = (2, 1, 2, 2, 1, 0)
    res = evaluate(g, ctx)
    assert res.feasible
    spec, hw, scheme, _ = decode(g, ctx.model, ctx.base_hw, ctx.space)
    mapping = build_mapping(ctx.model, spec, m_max=hw.mem_per_core)
    placement = place(mapping.n_cores_total,
                      compress(mapping.n_cores_total, scheme))
    report = simulate(ctx.model, mapping, placement, hw, ctx.trace)
    assert res.objectives.energy == report.total_energy
    assert res.objectives.latency == report.latency_end_to_end
    assert res.n_cores == mapping.n_cores_total
    assert res.objectives.area == float(placement.rows * placement.cols)
    assert simulate_genome(g, ctx) == report


def test_evaluate_memory_violation(ctx):
    space = GenomeSpace(n_layers=3, c_max=4, mem_menu=(3000, 8 * 2**20))
    small_ctx = EvalContext(model=ctx.model, trace=ctx.trace, base_hw=HW,
                            space=space)
    res = evaluate((1, 0, 1, 0, 1, 0, 0), small_ctx)
    assert res.violation > 0
    assert res.objectives.energy >= PENALTY_BASE
    assert res.objectives.energy == PENALTY_BASE + res.violation
    # violation equals the worst core's overshoot in bits
    spec, hw, _, _ = decode((1, 0, 1, 0, 1, 0, 0), ctx.model, HW, space)
    mapping = build_mapping(ctx.model, spec, m_max=hw.mem_per_core,
                            enforce_cap=False)
    worst = max(mapping.memory_by_core().values())
    assert res.violation == float(worst - 3000)


def test_evaluate_structural_failure_is_penalty_not_crash():
    m = toy_model(width2=5)
    tr = synth_trace(m, n_frames=2, fps=0, seed=0)
    space = GenomeSpace(n_layers=3, c_max=8)
    ctx = EvalContext(model=m, trace=tr, base_hw=HW, space=space)
    # 8 width-wise parts of a 5-wide dense layer cannot be built
    res = evaluate((1, 0, 1, 0, 8, 3), ctx)
    assert res.violation == STRUCTURAL_VIOLATION
    assert res.error is not None
    assert not res.feasible


def test_evaluate_sim_error_is_penalty(ctx):
    bad_trace = EventTrace(events=((0.0, 999, 16),), fps=0.0, n_frames=1)
    bad_ctx = EvalContext(model=ctx.model, trace=bad_trace, base_hw=HW,
                          space=ctx.space)
    res = evaluate((1, 0, 1, 0, 1, 0), bad_ctx)
    assert res.violation == STRUCTURAL_VIOLATION
    assert res.error is not None


def test_evaluate_never_raises_across_space(ctx):
    rng = np.random.default_rng(5)
    space = full_space()
    full_ctx = EvalContext(model=ctx.model, trace=ctx.trace, base_hw=HW,
                           space=space)
    for _ in range(60):
        res = evaluate(space.sample(rng), full_ctx)
        assert isinstance(res, EvalResult)


def test_fidelity_penalty_objective(ctx):
    base = evaluate((1, 0, 1, 0, 1, 0), ctx)
    ref_report = simulate_genome((1, 0, 1, 0, 1, 0), ctx)
    ref_values = tuple(v for (_, v) in ref_report.end_signal)
    fctx = EvalContext(model=ctx.model, trace=ctx.trace, base_hw=HW,
                       space=ctx.space, reference=ref_values, signal_dt=1.0,
                       objective_names=("energy", "fidelity_penalty"))
    same = evaluate((1, 0, 1, 0, 1, 0), fctx)
    assert abs(same.objectives.fidelity_penalty) < 1e-9
    assert same.objectives.energy == base.objectives.energy
    # a mismatched reference costs fidelity
    shifted = tuple([0.0, 0.0] + list(ref_values))
    fctx2 = EvalContext(model=ctx.model, trace=ctx.trace, base_hw=HW,
                        space=ctx.space, reference=shifted, signal_dt=1.0,
                        objective_names=("energy", "fidelity_penalty"))
    moved = evaluate((1, 0, 1, 0, 1, 0), fctx2)
    assert moved.objectives.fidelity_penalty > 0


def test_unknown_objective_rejected(ctx):
    with pytest.raises(OptimizeError):
        EvalContext(model=ctx.model, trace=ctx.trace, base_hw=HW,
                    space=ctx.space, objective_names=("energy", "power"))


def test_retime_trace_preserves_content():
    m = toy_model()
    tr = synth_trace(m, n_frames=4, fps=30.0, seed=2)
    re0 = retime_trace(tr, 0.0)
    assert re0.fps == 0.0
    assert len(re0.events) == len(tr.events)
    assert [e[1:] for e in re0.events] == [e[1:] for e in tr.events]
    bursts = re0.frames()
    assert [b[0][0] for b in bursts] == list(map(float, range(len(bursts))))
    re2 = retime_trace(re0, 30.0)
    assert [e[1:] for e in re2.events] == [e[1:] for e in tr.events]
    assert re2.frames()[1][0][0] == pytest.approx(1 / 30.0)


# --- batch evaluation ---

def test_batch_empty(ctx):
    assert evaluate_batch([], ctx, workers=1) == []
    assert evaluate_batch([], ctx, workers=4) == []


def test_batch_order_preserving(ctx):
    rng = np.random.default_rng(11)
    genomes = [ctx.space.sample(rng) for _ in range(16)]
    batch = evaluate_batch(genomes, ctx, workers=1)
    assert [r.genome for r in batch] == genomes
    assert batch == [evaluate(g, ctx) for g in genomes]


def test_batch_workers_1_vs_8_identical(ctx):
    rng = np.random.default_rng(12)
    genomes = [ctx.space.sample(rng) for _ in range(24)]
    seq = evaluate_batch(genomes, ctx, workers=1)
    par = evaluate_batch(genomes, ctx, workers=8)
    assert seq == par


def test_batch_rejects_bad_worker_count(ctx):
    with pytest.raises(OptimizeError):
        evaluate_batch([(1, 0, 1, 0, 1, 0)], ctx, workers=0)


# --- ranking, dominance, archive, hypervolume ---

def _mk(energy, latency, violation=0.0, genome=None):
    if genome is None:
        genome = (int(energy * 10) % 97, int(latency * 10) % 89)
    return EvalResult(genome=tuple(genome),
                      objectives=Objectives(energy, latency, 1.0, 0.0),
                      violation=violation, n_cores=1, mesh_shape=(1, 1))


NAMES = ("energy", "latency")


def test_feasibility_first_dominance():
    feas_bad = _mk(1e9, 1e9)
    infeas_good = _mk(1.0, 1.0, violation=5.0)
    assert dominates(feas_bad, infeas_good, NAMES)
    assert not dominates(infeas_good, feas_bad, NAMES)
    worse_violation = _mk(1.0, 1.0, violation=9.0)
    assert dominates(infeas_good, worse_violation, NAMES)
    assert not dominates(worse_violation, infeas_good, NAMES)


def test_pareto_dominance_rules():
    a, b = _mk(1.0, 2.0), _mk(2.0, 1.0)
    assert not dominates(a, b, NAMES) and not dominates(b, a, NAMES)
    c = _mk(1.0, 1.0)
    assert dominates(c, a, NAMES) and dominates(c, b, NAMES)
    twin = _mk(1.0, 2.0)
    assert not dominates(a, twin, NAMES) and not dominates(twin, a, NAMES)


def test_rank_key_orders_feasible_first():
    feas = _mk(100.0, 100.0)
    infeas = _mk(0.0, 0.0, violation=1.0)
    w = {"energy": 1.0}
    assert rank_key(feas, NAMES, w) < rank_key(infeas, NAMES, w)
    assert scalarize(feas, NAMES, {"energy": 1.0, "latency": 0.5}) == 150.0


def test_archive_prunes_dominated_and_dedups():
    arch = ParetoArchive(NAMES)
    assert arch.add(_mk(3.0, 3.0, genome=(1,)))
    assert arch.add(_mk(1.0, 4.0, genome=(2,)))
    assert not arch.add(_mk(3.0, 3.0, genome=(1,)))  # duplicate genome
    assert not arch.add(_mk(4.0, 4.0, genome=(3,)))  # dominated
    assert arch.add(_mk(2.0, 2.0, genome=(4,)))       # kills (3,3)
    genomes = {m.genome for m in arch.members}
    assert genomes == {(2,), (4,)}
    arch.check_invariant()
    front = arch.front()
    assert front[0].objectives.energy <= front[-1].objectives.energy


def test_archive_infeasible_only_keeps_least_violating():
    arch = ParetoArchive(NAMES)
    arch.add(_mk(1.0, 1.0, violation=9.0, genome=(1,)))
    arch.add(_mk(5.0, 5.0, violation=2.0, genome=(2,)))
    assert [m.genome for m in arch.members] == [(2,)]
    arch.add(_mk(7.0, 7.0, genome=(3,)))
    assert [m.genome for m in arch.members] == [(3,)]


def test_hypervolume_hand_case():
    pts = [(1.0, 3.0), (2.0, 2.0), (3.0, 1.0)]
    assert hypervolume_2d(pts, (4.0, 4.0)) == pytest.approx(6.0)
    # points at or beyond the reference contribute nothing
    assert hypervolume_2d(pts + [(4.0, 0.5), (0.5, 4.0)], (4.0, 4.0)) == \
        pytest.approx(6.0)
    # a strictly interior extension grows the area by its own rectangle
    assert hypervolume_2d(pts + [(3.5, 0.5)], (4.0, 4.0)) == pytest.approx(6.25)
    assert hypervolume_2d([], (1.0, 1.0)) == 0.0
    # dominated points add nothing
    assert hypervolume_2d(pts + [(2.5, 2.5)], (4.0, 4.0)) == pytest.approx(6.0)


def test_non_dominated_sort_fronts():
    res = [_mk(1.0, 3.0), _mk(3.0, 1.0), _mk(2.0, 2.0),
           _mk(3.0, 3.0), _mk(4.0, 4.0)]
    fronts = non_dominated_sort(res, NAMES)
    assert sorted(fronts[0]) == [0, 1, 2]
    assert fronts[1] == [3]
    assert fronts[2] == [4]


def test_crowding_distance_boundaries_infinite():
    res = [_mk(1.0, 4.0), _mk(2.0, 3.0), _mk(3.0, 2.0), _mk(4.0, 1.0)]
    dist = crowding_distance(res, [0, 1, 2, 3], NAMES)
    assert dist[0] == np.inf and dist[3] == np.inf
    assert 0 < dist[1] < np.inf and 0 < dist[2] < np.inf


# --- search loops against exhaustive enumeration ---

@pytest.fixture(scope="module")
def small_ctx():
    """256-genome space, fully enumerable."""
    m = toy_model()
    layers = (m.layers[0], m.layers[1])
    m2 = NetworkModel(name="toy2", layers=layers, edges=((0, 1),))
    tr = synth_trace(m2, n_frames=2, fps=0, seed=3)
    return EvalContext(model=m2, trace=tr, base_hw=HW,
                       space=GenomeSpace(n_layers=2, c_max=4))


@pytest.fixture(scope="module")
def enum_results(small_ctx):
    lo, hi = small_ctx.space.bounds()
    ranges = [range(int(a), int(b) + 1) for a, b in zip(lo, hi)]
    genomes = [tuple(g) for g in itertools.product(*ranges)]
    assert len(genomes) == 256
    return evaluate_batch(genomes, small_ctx, workers=8)


def test_ga_finds_enumerated_optimum_seeds_0_to_4(small_ctx, enum_results):
    w = {"energy": 1.0}
    target = min(scalarize(r, small_ctx.objective_names, w)
                 for r in enum_results if r.feasible)
    params = AlgoParams(algo="ga", population=10, generations=50, weights=w)
    for seed in range(5):
        best, hist = run_ga(small_ctx, params, seed=seed)
        assert hist == sorted(hist, reverse=True) or all(
            a >= b for a, b in zip(hist, hist[1:]))
        assert hist[-1] == pytest.approx(target)


def test_pso_finds_enumerated_optimum(small_ctx, enum_results):
    w = {"energy": 1.0}
    target = min(scalarize(r, small_ctx.objective_names, w)
                 for r in enum_results if r.feasible)
    params = AlgoParams(algo="pso", population=10, generations=60, weights=w)
    for seed in range(3):
        best, hist = run_pso(small_ctx, params, seed=seed)
        assert all(a >= b for a, b in zip(hist, hist[1:]))
        assert hist[-1] == pytest.approx(target)


def test_nsga2_recovers_true_front(small_ctx, enum_results):
    truth = ParetoArchive(NAMES)
    truth.update(r for r in enum_results if r.feasible)
    true_pts = [r.objectives.as_tuple(NAMES) for r in truth.members]
    ref = (max(p[0] for p in true_pts) * 1.1 + 1.0,
           max(p[1] for p in true_pts) * 1.1 + 1.0)
    true_hv = hypervolume_2d(true_pts, ref)

    params = AlgoParams(algo="nsga2", population=16, generations=40,
                        offspring=8)
    archive, hv_hist = run_nsga2(small_ctx, params, seed=0)
    assert all(b >= a - 1e-12 for a, b in zip(hv_hist, hv_hist[1:]))
    got_pts = [r.objectives.as_tuple(NAMES) for r in archive.members]
    assert hypervolume_2d(got_pts, ref) >= 0.95 * true_hv
    # archive members genuinely belong to the global front
    true_set = {r.genome for r in truth.members}
    by_genome = {r.genome: r for r in enum_results}
    for m in archive.members:
        assert not any(dominates(by_genome[g], m, NAMES) for g in true_set)


def test_nsga2_requires_two_objectives(small_ctx):
    params = AlgoParams(algo="nsga2", population=8, generations=2)
    ctx1 = EvalContext(model=small_ctx.model, trace=small_ctx.trace,
                       base_hw=HW, space=small_ctx.space,
                       objective_names=("energy",))
    with pytest.raises(OptimizeError):
        run_nsga2(ctx1, params, seed=0)


def test_single_feasible_genome_gives_archive_of_one():
    m = toy_model()
    tr = synth_trace(m, n_frames=2, fps=0, seed=4)
    space = GenomeSpace(n_layers=3, c_max=1, axes_menu=("layer",))
    assert space.bounds()[0].tolist() == space.bounds()[1].tolist()
    ctx = EvalContext(model=m, trace=tr, base_hw=HW, space=space)
    params = AlgoParams(algo="nsga2", population=4, generations=3, offspring=2)
    archive, _ = run_nsga2(ctx, params, seed=0)
    assert len(archive.members) == 1
    assert archive.members[0].genome == (1, 0, 1, 0, 1, 0)


def test_runs_deterministic_per_seed(small_ctx):
    params = AlgoParams(algo="ga", population=8, generations=5,
                        weights={"energy": 1.0})
    b1, h1 = run_ga(small_ctx, params, seed=9)
    b2, h2 = run_ga(small_ctx, params, seed=9)
    assert b1 == b2 and h1 == h2
    pa = AlgoParams(algo="nsga2", population=8, generations=5, offspring=4)
    a1, v1 = run_nsga2(small_ctx, pa, seed=9)
    a2, v2 = run_nsga2(small_ctx, pa, seed=9)
    assert [m.genome for m in a1.members] == [m.genome for m in a2.members]
    assert v1 == v2


def test_on_generation_callback_sees_every_generation(small_ctx):
    seen = []
    params = AlgoParams(algo="ga", population=6, generations=4,
                        weights={"energy": 1.0})
    run_ga(small_ctx, params, seed=0,
           on_generation=lambda gen, results, best: seen.append(
               (gen, len(results))))
    assert [g for (g, _) in seen] == [0, 1, 2, 3, 4]
    assert seen[0][1] == 6


# --- parameter files ---

def test_load_algo_params_round_trip(tmp_path):
    p = tmp_path / "ga.prm"
    p.write_text("[algorithm]\n"
                 "algo = ga\n"
                 "population = 12\n"
                 "generations = 7\n"
                 "offspring = 5\n"
                 "eta_crossover = 2.5\n"
                 "p_mutation = 0.2\n"
                 "weight_energy = 1.0\n"
                 "weight_latency = 0.25\n")
    params = load_algo_params(p)
    assert params.algo == "ga"
    assert params.population == 12
    assert params.generations == 7
    assert params.offspring == 5
    assert params.eta_crossover == 2.5
    assert params.p_mutation == 0.2
    assert params.weights == {"energy": 1.0, "latency": 0.25}


def test_load_algo_params_missing_section(tmp_path):
    p = tmp_path / "bad.prm"
    p.write_text("[hardware]\nnpes_per_core = 4\n")
    with pytest.raises(OptimizeError):
        load_algo_params(p)


def test_algo_params_validation():
    with pytest.raises(OptimizeError):
        AlgoParams(algo="sa").validate()
    with pytest.raises(OptimizeError):
        AlgoParams(population=0).validate()
