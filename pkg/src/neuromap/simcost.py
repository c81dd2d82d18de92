"""Event-driven cost simulator for a mapped network on a mesh.

Semantics, in brief: each layer partition fires once per frame, after one
bundle (data or bare completion marker) has arrived from every upstream
partition. Bundles carry a multiplicity (number of neuron events) and every
cost scales linearly with it. Work per consumed event is the receiving
partition's neuron count (dense fan-in estimate), spread over the core's
NPEs. Routing is deterministic XY (column first); multicast pays each tree
link once, duplicating only at branch routers. Links and cores serialize:
a link is busy multiplicity x t_hop per bundle, a core multiplicity x
ceil(work/npes) x t_npe_op. Markers ride for free energy-wise but take one
bundle slot of time on the wire.

Frame admission: fps > 0 injects frames at their trace timestamps, so a
frame can overtake the previous one inside the pipeline and blend into the
accumulators (signal interleaving). fps == 0 injects the next frame only
when the event queue has drained, which makes the output value sequence
independent of hardware timing.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, fields, replace

import numpy as np

from .configio import format_blocks, get_float, get_int, parse_blocks_file
from .mesh import MeshPlacement
from .partition import Mapping, flat_slices
from .workload import EventTrace, NetworkModel, firing_mask


class SimError(ValueError):
    """Raised for malformed simulation inputs."""


class CongestionError(SimError):
    """A link or core inbox exceeded the configured queue depth."""


@dataclass(frozen=True)
class HardwareConfig:
    npes_per_core: int = 8
    mem_per_core: int = 8 * 2**20
    clock_period: float = 1.0
    flit_bits: int = 32
    e_npe_op: float = 1.0
    e_ctrl_event: float = 1.0
    e_hop_per_flit: float = 1.0
    e_inject: float = 1.0
    p_static_core: float = 0.0
    t_npe_op: float = 1.0
    t_hop: float = 1.0
    t_inject: float = 1.0
    queue_depth: int = 1024

    def validate(self) -> None:
        if self.npes_per_core < 1:
            raise SimError("npes_per_core must be >= 1")
        if self.flit_bits < 1:
            raise SimError("flit_bits must be >= 1")
        if self.queue_depth < 1:
            raise SimError("queue_depth must be >= 1")
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, (int, float)) and v < 0:
                raise SimError(f"{f.name} must be >= 0")

    def scaled_times(self, factor: float) -> "HardwareConfig":
        """Copy with every time constant multiplied by factor."""
        return replace(self, t_npe_op=self.t_npe_op * factor,
                       t_hop=self.t_hop * factor,
                       t_inject=self.t_inject * factor)


def load_hw_config(path) -> HardwareConfig:
    blocks = parse_blocks_file(path)
    hw_fields = None
    for section, f in blocks:
        if section == "hardware":
            hw_fields = f
            break
    if hw_fields is None:
        raise SimError(f"{path}: missing [hardware] section")
    kwargs = {}
    defaults = HardwareConfig()
    for f in fields(HardwareConfig):
        if f.name not in hw_fields:
            continue
        if isinstance(getattr(defaults, f.name), bool):
            raise AssertionError("no bool fields expected")
        if isinstance(getattr(defaults, f.name), int):
            kwargs[f.name] = get_int(hw_fields, f.name, source=str(path))
        else:
            kwargs[f.name] = get_float(hw_fields, f.name, source=str(path))
    hw = HardwareConfig(**kwargs)
    hw.validate()
    return hw


def save_hw_config(hw: HardwareConfig, path) -> None:
    body = {f.name: (repr(getattr(hw, f.name)) if isinstance(getattr(hw, f.name), float)
                     else getattr(hw, f.name))
            for f in fields(HardwareConfig)}
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_blocks([("hardware", body)]))


Link = tuple[tuple[int, int], tuple[int, int]]


@dataclass(frozen=True)
class CostReport:
    energy_per_core: dict[int, float]
    energy_interconnect: dict[Link, float]
    total_energy: float
    latency_end_to_end: float
    throughput: float
    congestion: dict[Link, int]
    end_signal: tuple[tuple[float, float], ...]
    events_processed: int
    duration: float
    static_energy: float
    # (time, "core"|"link", key, energy) for time-resolved snapshots;
    # static power is not logged, snapshot() accrues it analytically
    cost_log: tuple[tuple[float, str, object, float], ...]


# firing-plan cache: per (layer, frame) prefix sums of the firing mask,
# shared across simulations of the same model; worker processes each build
# their own copy
_PLAN_CACHE: dict[tuple, np.ndarray] = {}
_PLAN_CACHE_CAP = 8192


def clear_plan_cache() -> None:
    _PLAN_CACHE.clear()


def _firing_prefix(layer, frame: int) -> np.ndarray:
    key = (layer.id, layer.neurons, layer.avg_event_rate, frame)
    hit = _PLAN_CACHE.get(key)
    if hit is not None:
        return hit
    mask = firing_mask(layer, frame)
    prefix = np.zeros(layer.neurons + 1, dtype=np.int64)
    np.cumsum(mask, out=prefix[1:])
    if len(_PLAN_CACHE) >= _PLAN_CACHE_CAP:
        _PLAN_CACHE.clear()
    _PLAN_CACHE[key] = prefix
    return prefix


def _route_xy(src: tuple[int, int], dst: tuple[int, int]) -> list[tuple[int, int]]:
    """Router coordinates visited from src to dst, column dimension first."""
    r, c = src
    path = [(r, c)]
    step = 1 if dst[1] > c else -1
    while c != dst[1]:
        c += step
        path.append((r, c))
    step = 1 if dst[0] > r else -1
    while r != dst[0]:
        r += step
        path.append((r, c))
    return path


class _Port:
    """Serializing resource (link or core inbox) with queue-depth tracking."""

    __slots__ = ("busy_until", "pending_done", "max_depth")

    def __init__(self):
        self.busy_until = 0.0
        self.pending_done: list[float] = []
        self.max_depth = 0

    def acquire(self, t_in: float, service: float) -> tuple[float, float]:
        """Returns (start, done); records queue depth at admission."""
        self.pending_done = [d for d in self.pending_done if d > t_in]
        depth = len(self.pending_done) + 1
        if depth > self.max_depth:
            self.max_depth = depth
        start = max(t_in, self.busy_until)
        done = start + service
        self.busy_until = done
        self.pending_done.append(done)
        return start, done


class _PartState:
    __slots__ = ("acc", "fire_index", "markers")

    def __init__(self):
        self.acc = 0.0
        self.fire_index = 0
        self.markers: dict[int, int] = {}


def simulate(model: NetworkModel, mapping: Mapping, placement: MeshPlacement,
             hw: HardwareConfig, trace: EventTrace) -> CostReport:
    hw.validate()
    if placement.n_cores < mapping.n_cores_total:
        raise SimError("placement has fewer slots than mapped cores")
    for core_id, bits in mapping.memory_by_core().items():
        if bits > hw.mem_per_core:
            raise SimError(f"core {core_id} needs {bits} bits, cap is {hw.mem_per_core}")

    n_inputs = model.input_layer.neurons
    for (_, nid, _) in trace.events:
        if not (0 <= nid < n_inputs):
            raise SimError(f"trace event references input neuron {nid}, "
                           f"layer 0 has {n_inputs}")

    assigns = mapping.assignments
    by_layer: dict[int, list[int]] = {}
    for i, a in enumerate(assigns):
        by_layer.setdefault(a.layer_id, []).append(i)
    for lst in by_layer.values():
        lst.sort(key=lambda i: (assigns[i].range_start, assigns[i].core_id))

    downstream: list[list[int]] = [[] for _ in assigns]
    upstream: list[list[int]] = [[] for _ in assigns]
    for lid, idxs in by_layer.items():
        succ_parts = [j for s in model.successors(lid) for j in by_layer[s]]
        pred_parts = [j for p in model.predecessors(lid) for j in by_layer[p]]
        for i in idxs:
            downstream[i] = succ_parts
            upstream[i] = pred_parts
    pred_neurons = [sum(model.layers[p].neurons for p in model.predecessors(l.id))
                    for l in model.layers]
    slices = [flat_slices(model.layers[a.layer_id], a.axis, a.range_start, a.range_end)
              for a in assigns]
    work_ops = [math.ceil(a.n_npc / hw.npes_per_core) for a in assigns]
    output_lid = model.output_layer.id

    # frame slot -> per input partition (event multiplicity, flit total);
    # fps > 0 assigns bursts to their nearest grid slot so empty frames
    # keep later ones aligned, fps == 0 numbers bursts in order
    input_parts = by_layer[0]

    def burst_load(burst) -> dict[int, tuple[int, int]]:
        load: dict[int, tuple[int, int]] = {}
        for i in input_parts:
            mult = 0
            flits = 0
            spans = slices[i]
            for (_, nid, bits) in burst:
                if any(s <= nid < e for (s, e) in spans):
                    mult += 1
                    flits += math.ceil(bits / hw.flit_bits)
            load[i] = (mult, flits)
        return load

    empty_load = {i: (0, 0) for i in input_parts}
    frame_loads: list[dict[int, tuple[int, int]]] = [empty_load] * trace.n_frames
    frame_times: list[float] = [(f / trace.fps if trace.fps > 0 else float(f))
                                for f in range(trace.n_frames)]
    for pos, burst in enumerate(trace.frames()):
        t = burst[0][0]
        slot = round(t * trace.fps) if trace.fps > 0 else pos
        if not (0 <= slot < trace.n_frames):
            raise SimError(f"trace burst at t={t} falls outside the "
                           f"{trace.n_frames}-frame grid")
        if frame_loads[slot] is not empty_load:
            raise SimError(f"two trace bursts map to frame slot {slot}")
        frame_loads[slot] = burst_load(burst)
        frame_times[slot] = t

    flits_per_event = math.ceil(model.bitwidths.outputs / hw.flit_bits)

    links: dict[Link, _Port] = {}
    cores: dict[int, _Port] = {c: _Port() for c in mapping.layers_per_core}
    states = [_PartState() for _ in assigns]

    energy_core: dict[int, float] = {c: 0.0 for c in cores}
    energy_link: dict[Link, float] = {}
    cost_log: list[tuple[float, str, object, float]] = []
    end_signal: list[tuple[float, float]] = []
    events_processed = 0
    last_output = 0.0
    sim_now = 0.0

    heap: list = []
    seq = 0

    def push(t: float, src_core: int, kind: str, payload) -> None:
        nonlocal seq
        heapq.heappush(heap, (t, src_core, seq, kind, payload))
        seq += 1

    def port(link: Link) -> _Port:
        p = links.get(link)
        if p is None:
            p = _Port()
            links[link] = p
        return p

    def charge_link(t: float, link: Link, e: float) -> None:
        energy_link[link] = energy_link.get(link, 0.0) + e
        cost_log.append((t, "link", link, e))

    def emit(src_idx: int, src_core: int, t_emit: float, mult: int,
             value: float, flits_total: int) -> None:
        """Send one bundle from src_core to every downstream partition."""
        nonlocal sim_now
        dst_idxs = downstream[src_idx]
        local = [j for j in dst_idxs if assigns[j].core_id == src_core]
        remote = [j for j in dst_idxs if assigns[j].core_id != src_core]
        for j in local:
            push(t_emit, src_core, "deliver", (src_idx, j, mult, value))
        if not remote:
            return
        src_xy = placement.coords[src_core]
        # one injection serializes the whole multicast bundle
        inj: Link = (src_xy, src_xy)
        p = port(inj)
        _, done = p.acquire(t_emit, max(1, mult) * hw.t_inject)
        if p.max_depth > hw.queue_depth:
            raise CongestionError(f"injection port {src_xy} exceeded depth "
                                  f"{hw.queue_depth}")
        if mult > 0:
            charge_link(done, inj, mult * hw.e_inject)
        # multicast tree: XY routes to every remote core, edges deduplicated,
        # so a branch router feeds all its child edges from one arrival
        arrival: dict[tuple[int, int], float] = {src_xy: done}
        edges_seen: set[Link] = set()
        ordered_edges: list[Link] = []
        for j in sorted(remote, key=lambda j: (assigns[j].layer_id,
                                               assigns[j].range_start,
                                               assigns[j].core_id)):
            path = _route_xy(src_xy, placement.coords[assigns[j].core_id])
            for u, v in zip(path, path[1:]):
                if (u, v) not in edges_seen:
                    edges_seen.add((u, v))
                    ordered_edges.append((u, v))
        for (u, v) in ordered_edges:
            p = port((u, v))
            _, done_edge = p.acquire(arrival[u], max(1, mult) * hw.t_hop)
            if p.max_depth > hw.queue_depth:
                raise CongestionError(f"link {u}->{v} exceeded depth {hw.queue_depth}")
            if mult > 0:
                charge_link(done_edge, (u, v), flits_total * hw.e_hop_per_flit)
            arrival[v] = done_edge
            sim_now = max(sim_now, done_edge)
        for j in remote:
            xy = placement.coords[assigns[j].core_id]
            push(arrival[xy], src_core, "deliver", (src_idx, j, mult, value))

    def fire(idx: int, t: float) -> None:
        nonlocal last_output
        a = assigns[idx]
        st = states[idx]
        layer = model.layers[a.layer_id]
        f = st.fire_index
        st.fire_index += 1
        if a.layer_id == 0:
            mult, flits_total = frame_loads[f][idx]
            value = 1.0
            if a.layer_id == output_lid:
                end_signal.append((t, mult / layer.neurons if layer.neurons else 0.0))
                last_output = max(last_output, t)
                return
        else:
            prefix = _firing_prefix(layer, f)
            mult = int(sum(prefix[e] - prefix[s] for (s, e) in slices[idx]))
            flits_total = mult * flits_per_event
            denom = pred_neurons[a.layer_id]
            value = st.acc / denom if denom else 0.0
            st.acc = 0.0
            if a.layer_id == output_lid:
                end_signal.append((t, value))
                last_output = max(last_output, t)
                return
        emit(idx, a.core_id, t, mult, value, flits_total)

    def deliver(t: float, payload) -> None:
        nonlocal sim_now, events_processed
        src_idx, idx, mult, value = payload
        a = assigns[idx]
        st = states[idx]
        core = cores[a.core_id]
        service = mult * work_ops[idx] * hw.t_npe_op
        _, done = core.acquire(t, service)
        if core.max_depth > hw.queue_depth:
            raise CongestionError(f"core {a.core_id} inbox exceeded depth "
                                  f"{hw.queue_depth}")
        if mult > 0:
            e = mult * (hw.e_ctrl_event + work_ops[idx] * hw.e_npe_op)
            energy_core[a.core_id] += e
            cost_log.append((done, "core", a.core_id, e))
            st.acc += value * mult
            events_processed += mult
        sim_now = max(sim_now, done)
        st.markers[src_idx] = st.markers.get(src_idx, 0) + 1
        # fire once per complete marker set: one bundle from every upstream
        # partition; skewed fast senders bank extra markers without firing
        while all(st.markers.get(u, 0) >= 1 for u in upstream[idx]):
            for u in upstream[idx]:
                st.markers[u] -= 1
            fire(idx, done)

    next_frame = 0
    n_frames = trace.n_frames
    fps = trace.fps

    if fps > 0:
        for f in range(n_frames):
            push(frame_times[f], -1, "frame", f)
        next_frame = n_frames
    else:
        push(0.0, -1, "frame", 0)
        next_frame = 1

    while heap or next_frame < n_frames:
        if not heap:
            push(sim_now, -1, "frame", next_frame)
            next_frame += 1
            continue
        t, _, _, kind, payload = heapq.heappop(heap)
        sim_now = max(sim_now, t)
        if kind == "frame":
            for i in input_parts:
                fire(i, t)
        else:
            deliver(t, payload)

    duration = sim_now
    static = hw.p_static_core * duration
    static_total = static * len(cores)
    for c in energy_core:
        energy_core[c] += static
    total = sum(energy_core.values()) + sum(energy_link.values())
    first_t = frame_times[0] if fps > 0 else 0.0
    latency = max(0.0, last_output - first_t)
    throughput = n_frames / latency if latency > 0 else 0.0
    congestion = {lk: p.max_depth for lk, p in links.items()}
    return CostReport(
        energy_per_core=energy_core,
        energy_interconnect=energy_link,
        total_energy=total,
        latency_end_to_end=latency,
        throughput=throughput,
        congestion=congestion,
        end_signal=tuple(end_signal),
        events_processed=events_processed,
        duration=duration,
        static_energy=static_total,
        cost_log=tuple(cost_log),
    )


def snapshot(report: CostReport, every: float):
    """Cumulative per-core and per-link energy at sample instants.

    Returns (times, core_rows, link_rows) where rows map key -> list of
    cumulative energies aligned with times. The final sample sits at the
    report duration and matches the report totals (static power accrues
    linearly between samples).
    """
    if every <= 0:
        raise SimError("snapshot interval must be > 0")
    duration = report.duration
    times = [i * every for i in range(int(duration // every) + 1)]
    if not times or times[-1] < duration:
        times.append(duration)
    core_keys = sorted(report.energy_per_core)
    link_keys = sorted(report.energy_interconnect)
    static_rate = ((report.static_energy / len(core_keys) / duration)
                   if (core_keys and duration > 0) else 0.0)
    core_rows = {k: [] for k in core_keys}
    link_rows = {k: [] for k in link_keys}
    log = sorted(report.cost_log, key=lambda e: e[0])
    pos = 0
    acc_core = {k: 0.0 for k in core_keys}
    acc_link = {k: 0.0 for k in link_keys}
    for t in times:
        while pos < len(log) and log[pos][0] <= t:
            _, kind, key, e = log[pos]
            if kind == "core":
                acc_core[key] += e
            else:
                acc_link[key] += e
            pos += 1
        for k in core_keys:
            core_rows[k].append(acc_core[k] + static_rate * t)
        for k in link_keys:
            link_rows[k].append(acc_link[k])
    return times, core_rows, link_rows


def link_label(link: Link) -> str:
    (r0, c0), (r1, c1) = link
    return f"{r0}.{c0}-{r1}.{c1}"


def write_run_files(report: CostReport, outdir, settings: dict | None = None,
                    snapshot_every: float | None = None) -> None:
    """Write the per-run file set: summary, snapshots, end signal, settings."""
    import os
    os.makedirs(outdir, exist_ok=True)
    every = snapshot_every
    if every is None:
        every = report.duration / 50 if report.duration > 0 else 1.0
        every = max(every, 1e-12)
    times, core_rows, link_rows = snapshot(report, every)

    with open(os.path.join(outdir, "summary.txt"), "w", encoding="utf-8") as fh:
        fh.write(f"total_energy = {report.total_energy!r}\n")
        fh.write(f"static_energy = {report.static_energy!r}\n")
        fh.write(f"latency_end_to_end = {report.latency_end_to_end!r}\n")
        fh.write(f"throughput = {report.throughput!r}\n")
        fh.write(f"duration = {report.duration!r}\n")
        fh.write(f"events_processed = {report.events_processed}\n")
        fh.write(f"n_cores = {len(report.energy_per_core)}\n")
        fh.write(f"n_links = {len(report.energy_interconnect)}\n")
        fh.write(f"max_congestion = "
                 f"{max(report.congestion.values(), default=0)}\n")

    core_keys = sorted(report.energy_per_core)
    with open(os.path.join(outdir, "snapshots_cores.csv"), "w", encoding="utf-8") as fh:
        fh.write("time," + ",".join(f"core_{k}" for k in core_keys) + "\n")
        for i, t in enumerate(times):
            row = ",".join(repr(core_rows[k][i]) for k in core_keys)
            fh.write(f"{t!r},{row}\n")

    link_keys = sorted(report.energy_interconnect)
    with open(os.path.join(outdir, "snapshots_interconnects.csv"), "w",
              encoding="utf-8") as fh:
        fh.write("time," + ",".join(link_label(k) for k in link_keys) + "\n")
        for i, t in enumerate(times):
            row = ",".join(repr(link_rows[k][i]) for k in link_keys)
            fh.write(f"{t!r},{row}\n")

    with open(os.path.join(outdir, "output_snapshot.csv"), "w", encoding="utf-8") as fh:
        fh.write("timestamp,value\n")
        for (t, v) in report.end_signal:
            fh.write(f"{t!r},{v!r}\n")

    with open(os.path.join(outdir, "gui_setting.csv"), "w", encoding="utf-8") as fh:
        fh.write("key,value\n")
        for k in sorted((settings or {})):
            fh.write(f"{k},{settings[k]}\n")
