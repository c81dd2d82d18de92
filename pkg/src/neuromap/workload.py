"""Neural-network workload model: layer graph, event rates, trace synthesis.

Layers are conv-shaped (channels x height x width); dense layers use the
degenerate shape channels=1, height=1, width=neurons so every partition
axis is defined for every layer. Flat neuron indices are channel-major:
flat = (channel * height + row) * width + col.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace

import numpy as np

from .configio import (
    ConfigFormatError,
    format_blocks,
    get_bool,
    get_float,
    get_int,
    parse_blocks_file,
)

ALLOWED_BITWIDTHS = (4, 8, 16)


class WorkloadError(ValueError):
    """Raised when a workload description violates a model invariant."""


@dataclass(frozen=True)
class Layer:
    id: int
    kind: str                  # "dense" | "conv"
    channels: int
    height: int
    width: int
    weights: int
    biases: int
    is_snn: bool
    avg_event_rate: float

    @property
    def neurons(self) -> int:
        return self.channels * self.height * self.width

    @property
    def thresholds(self) -> int:
        return self.neurons if self.is_snn else 0

    def axis_extent(self, axis: str) -> int:
        if axis == "layer":
            return self.neurons
        if axis == "channel":
            return self.channels
        if axis == "height":
            return self.height
        if axis == "width":
            return self.width
        raise ValueError(f"unknown partition axis {axis!r}")

    def validate(self) -> None:
        if self.kind not in ("dense", "conv"):
            raise WorkloadError(f"layer {self.id}: kind must be dense or conv, got {self.kind!r}")
        if min(self.channels, self.height, self.width) < 1:
            raise WorkloadError(f"layer {self.id}: channels/height/width must be >= 1")
        if self.kind == "dense" and (self.channels != 1 or self.height != 1):
            raise WorkloadError(f"layer {self.id}: dense layers must have channels=1, height=1")
        if self.weights < 0 or self.biases < 0:
            raise WorkloadError(f"layer {self.id}: weights/biases must be >= 0")
        if self.avg_event_rate < 0:
            raise WorkloadError(f"layer {self.id}: avg_event_rate must be >= 0")
        if self.is_snn and self.avg_event_rate > 1.0:
            raise WorkloadError(
                f"layer {self.id}: binary-spike layers need avg_event_rate <= 1, "
                f"got {self.avg_event_rate}"
            )


@dataclass(frozen=True)
class Bitwidths:
    states: int = 16
    outputs: int = 16
    weights: int = 8

    def validate(self) -> None:
        for name, value in (("states", self.states), ("outputs", self.outputs), ("weights", self.weights)):
            if value not in ALLOWED_BITWIDTHS:
                raise WorkloadError(f"bw_{name} must be one of {ALLOWED_BITWIDTHS}, got {value}")


@dataclass(frozen=True)
class NetworkModel:
    name: str
    layers: tuple[Layer, ...]
    edges: tuple[tuple[int, int], ...]
    bitwidths: Bitwidths = Bitwidths()
    frame_rate_fps: int = 0

    def __post_init__(self):
        self.validate()

    @property
    def input_layer(self) -> Layer:
        return self.layers[0]

    @property
    def output_layer(self) -> Layer:
        sinks = [l for l in self.layers if not self.successors(l.id)]
        return sinks[0]

    def successors(self, layer_id: int) -> list[int]:
        return [d for (s, d) in self.edges if s == layer_id]

    def predecessors(self, layer_id: int) -> list[int]:
        return [s for (s, d) in self.edges if d == layer_id]

    def validate(self) -> None:
        if not self.layers:
            raise WorkloadError("model has no layers")
        for i, layer in enumerate(self.layers):
            if layer.id != i:
                raise WorkloadError(f"layer ids must be 0..n-1 in order, got {layer.id} at position {i}")
            layer.validate()
        self.bitwidths.validate()
        if self.frame_rate_fps < 0:
            raise WorkloadError("frame_rate_fps must be >= 0")
        n = len(self.layers)
        seen = set()
        for (s, d) in self.edges:
            if not (0 <= s < n and 0 <= d < n):
                raise WorkloadError(f"edge ({s},{d}) references an unknown layer")
            if s >= d:
                raise WorkloadError(f"edge ({s},{d}) must go from a lower to a higher layer id (DAG)")
            if (s, d) in seen:
                raise WorkloadError(f"duplicate edge ({s},{d})")
            seen.add((s, d))
        if n > 1:
            if self.predecessors(0):
                raise WorkloadError("layer 0 is the input source and cannot have predecessors")
            for layer in self.layers[1:]:
                if not self.predecessors(layer.id):
                    raise WorkloadError(f"layer {layer.id} is unreachable (no incoming edge)")
            sinks = [l.id for l in self.layers if not self.successors(l.id)]
            if len(sinks) != 1:
                raise WorkloadError(f"exactly one output layer required, found sinks {sinks}")


@dataclass(frozen=True)
class EventTrace:
    """Time-ordered input events. Equal timestamps form one frame burst.

    fps == 0 marks event-driven mode: timestamps are frame ordinals and the
    simulator injects each frame only once the pipeline has drained.
    """

    events: tuple[tuple[float, int, int], ...]  # (timestamp, neuron_id, payload_bits)
    fps: float
    n_frames: int

    def __post_init__(self):
        last = None
        for (t, _, _) in self.events:
            if last is not None and t < last:
                raise WorkloadError("trace timestamps must be non-decreasing")
            last = t

    def frames(self) -> list[list[tuple[float, int, int]]]:
        """Group events into frame bursts by equal timestamp."""
        out: list[list[tuple[float, int, int]]] = []
        current_t = None
        for ev in self.events:
            if current_t is None or ev[0] != current_t:
                out.append([])
                current_t = ev[0]
            out[-1].append(ev)
        return out


def _chain_edges(n_layers: int) -> tuple[tuple[int, int], ...]:
    return tuple((i, i + 1) for i in range(n_layers - 1))


def _layer_from_block(idx: int, fields: dict[str, str], source: str) -> Layer:
    kind = fields.get("kind", "dense").lower()
    if kind == "dense":
        neurons = get_int(fields, "neurons", source=source)
        channels, height, width = 1, 1, neurons
    else:
        channels = get_int(fields, "channels", source=source)
        height = get_int(fields, "height", source=source)
        width = get_int(fields, "width", source=source)
        declared = get_int(fields, "neurons", default=channels * height * width, source=source)
        if declared != channels * height * width:
            raise WorkloadError(
                f"layer {idx}: neurons={declared} but channels*height*width="
                f"{channels * height * width}"
            )
    return Layer(
        id=idx,
        kind=kind,
        channels=channels,
        height=height,
        width=width,
        weights=get_int(fields, "weights", default=0, source=source),
        biases=get_int(fields, "biases", default=0, source=source),
        is_snn=get_bool(fields, "snn", default=True, source=source),
        avg_event_rate=get_float(fields, "rate", default=0.0, source=source),
    )


def _parse_edges(raw: str) -> tuple[tuple[int, int], ...]:
    edges = []
    for part in raw.split(","):
        part = part.strip()
        if not part:
            continue
        if ">" not in part:
            raise ConfigFormatError(f"edge {part!r} must look like 'src>dst'")
        s, _, d = part.partition(">")
        edges.append((int(s), int(d)))
    return tuple(edges)


def load_network(path) -> NetworkModel:
    """Load and validate a workload description file."""
    blocks = parse_blocks_file(path)
    net_fields: dict[str, str] | None = None
    layers: list[Layer] = []
    for section, fields in blocks:
        if section == "network":
            if net_fields is not None:
                raise ConfigFormatError(f"{path}: multiple [network] sections")
            net_fields = fields
        elif section == "layer":
            layers.append(_layer_from_block(len(layers), fields, source=str(path)))
        else:
            raise ConfigFormatError(f"{path}: unknown section [{section}]")
    if net_fields is None:
        raise ConfigFormatError(f"{path}: missing [network] section")
    if not layers:
        raise ConfigFormatError(f"{path}: no [layer] blocks")
    edges_raw = net_fields.get("edges")
    edges = _parse_edges(edges_raw) if edges_raw else _chain_edges(len(layers))
    return NetworkModel(
        name=net_fields.get("name", "unnamed"),
        layers=tuple(layers),
        edges=edges,
        bitwidths=Bitwidths(
            states=get_int(net_fields, "bw_states", default=16, source=str(path)),
            outputs=get_int(net_fields, "bw_outputs", default=16, source=str(path)),
            weights=get_int(net_fields, "bw_weights", default=8, source=str(path)),
        ),
        frame_rate_fps=get_int(net_fields, "fps", default=0, source=str(path)),
    )


def save_network(model: NetworkModel, path) -> None:
    net: dict[str, object] = {
        "name": model.name,
        "fps": model.frame_rate_fps,
        "bw_states": model.bitwidths.states,
        "bw_outputs": model.bitwidths.outputs,
        "bw_weights": model.bitwidths.weights,
    }
    if model.edges != _chain_edges(len(model.layers)):
        net["edges"] = ",".join(f"{s}>{d}" for (s, d) in model.edges)
    blocks: list[tuple[str, dict[str, object]]] = [("network", net)]
    for layer in model.layers:
        fields: dict[str, object] = {"kind": layer.kind}
        if layer.kind == "dense":
            fields["neurons"] = layer.width
        else:
            fields["channels"] = layer.channels
            fields["height"] = layer.height
            fields["width"] = layer.width
        fields["weights"] = layer.weights
        fields["biases"] = layer.biases
        fields["rate"] = repr(layer.avg_event_rate)
        fields["snn"] = layer.is_snn
        blocks.append(("layer", fields))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_blocks(blocks))


def synth_trace(model: NetworkModel, n_frames: int, fps: float, seed: int) -> EventTrace:
    """Generate an input trace: per frame, each input neuron fires Bernoulli(rate).

    fps > 0 places frame bursts 1/fps time units apart; fps == 0 stamps frames
    with their ordinal (the simulator injects them on pipeline drain).
    """
    if n_frames < 1:
        raise ValueError("n_frames must be >= 1")
    if fps < 0:
        raise ValueError("fps must be >= 0")
    layer = model.input_layer
    rate = layer.avg_event_rate
    payload = model.bitwidths.outputs
    rng = np.random.default_rng(seed)
    events: list[tuple[float, int, int]] = []
    for f in range(n_frames):
        t = f / fps if fps > 0 else float(f)
        draws = rng.random(layer.neurons)
        for nid in np.flatnonzero(draws < rate):
            events.append((t, int(nid), payload))
    return EventTrace(events=tuple(events), fps=fps, n_frames=n_frames)


def save_trace(trace: EventTrace, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# fps={trace.fps!r} frames={trace.n_frames}\n")
        fh.write("timestamp,neuron_id,payload_bits\n")
        for (t, nid, bits) in trace.events:
            fh.write(f"{t!r},{nid},{bits}\n")


def load_trace(path) -> EventTrace:
    fps = None
    n_frames = None
    events: list[tuple[float, int, int]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for raw in fh:
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                for token in line[1:].split():
                    if token.startswith("fps="):
                        fps = float(token[4:])
                    elif token.startswith("frames="):
                        n_frames = int(token[7:])
                continue
            if line.startswith("timestamp"):
                continue
            t, nid, bits = line.split(",")
            events.append((float(t), int(nid), int(bits)))
    if fps is None:
        # infer: distinct timestamps spaced 1/fps apart, or slot-stamped (fps=0)
        stamps = sorted({t for (t, _, _) in events})
        if len(stamps) >= 2:
            spacing = stamps[1] - stamps[0]
            fps = 0.0 if spacing == 1.0 else 1.0 / spacing
        else:
            fps = 0.0
    if n_frames is None:
        n_frames = len({t for (t, _, _) in events})
    return EventTrace(events=tuple(events), fps=fps, n_frames=n_frames)


# Deterministic per-(layer, frame, neuron) firing draws shared by every
# simulation of the same model+trace, independent of mapping. splitmix64
# over a stable 64-bit key; python's hash() is salted and unusable here.

_MASK64 = (1 << 64) - 1


def _splitmix64(x: np.ndarray) -> np.ndarray:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def firing_mask(layer: Layer, frame: int, salt: int = 0) -> np.ndarray:
    """Boolean mask over the layer's flat neuron index: fires this frame?"""
    rate = layer.avg_event_rate
    n = layer.neurons
    if rate <= 0:
        return np.zeros(n, dtype=bool)
    if rate >= 1:
        return np.ones(n, dtype=bool)
    base = (salt * 0x1000003 + layer.id * 0x10001 + frame) & _MASK64
    keys = (np.arange(n, dtype=np.uint64) * np.uint64(0x2545F4914F6CDD1D) + np.uint64(base)) & np.uint64(_MASK64)
    u = _splitmix64(keys).astype(np.float64) / float(1 << 64)
    return u < rate


def model_digest(model: NetworkModel) -> str:
    """Stable short digest of a model, for parameter echoes."""
    h = hashlib.sha256()
    h.update(repr(model).encode())
    return h.hexdigest()[:12]


def pilotnet_like(rate: float = 0.002, is_snn: bool = True, fps: int = 0,
                  bitwidths: Bitwidths = Bitwidths()) -> NetworkModel:
    """Synthetic 10-layer conv+dense chain shaped like the public PilotNet
    driving network (Bojarski et al. 2016): 66x200x3 input, five conv
    stages, four dense stages down to a single output neuron.
    """
    shapes = [
        # (kind, channels, height, width, weights, biases)
        ("conv", 3, 66, 200, 0, 0),            # input planes
        ("conv", 24, 31, 98, 1800, 24),        # 5x5 stride 2
        ("conv", 36, 14, 47, 21600, 36),       # 5x5 stride 2
        ("conv", 48, 5, 22, 43200, 48),        # 5x5 stride 2
        ("conv", 64, 3, 20, 27648, 64),        # 3x3
        ("conv", 64, 1, 18, 36864, 64),        # 3x3
        ("dense", 1, 1, 100, 115200, 100),
        ("dense", 1, 1, 50, 5000, 50),
        ("dense", 1, 1, 10, 500, 10),
        ("dense", 1, 1, 1, 10, 1),
    ]
    layers = tuple(
        Layer(id=i, kind=k, channels=c, height=h, width=w, weights=wt, biases=b,
              is_snn=is_snn, avg_event_rate=rate)
        for i, (k, c, h, w, wt, b) in enumerate(shapes)
    )
    return NetworkModel(
        name="pilotnet_synth",
        layers=layers,
        edges=_chain_edges(len(layers)),
        bitwidths=bitwidths,
        frame_rate_fps=fps,
    )


def with_rate(model: NetworkModel, rate: float) -> NetworkModel:
    """Copy of the model with every layer's event rate replaced."""
    return replace(model, layers=tuple(replace(l, avg_event_rate=rate) for l in model.layers))
