"""
Graph states and adaptive measurement patterns.

Signals: the recorded outcome of measured vertex v is signal v. The Bell
parity bit of input vertex v is signal -(v+1). Domains are lists of signals
whose XOR drives an angle sign (s_domain), a pi shift (t_domain) or an output
byproduct (x_domains / z_domains).
"""
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Set, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator, model_validator

from Linalg_Core.Linalg_Core import (
    MAX_STATE_QUBITS,
    DensityOperator,
    KrausChannel,
    StateVector,
    X,
    Z,
    xy_ket,
)
from Utils.helpers import (
    DERIVED_TOL,
    CapacityError,
    DimensionError,
    PatternError,
    canonical_json,
)

Signal = int
Basis = str  # "XY" | "X" | "Z"

_PRUNE = 1e-26


def input_signal(vertex: int) -> Signal:
    """Signal id of the Bell parity bit recorded for an input vertex."""
    return -(vertex + 1)


def parity(signals: Mapping[Signal, int], domain: Iterable[Signal]) -> int:
    out = 0
    for sig in domain:
        out ^= signals[sig]
    return out


# ---------------- Graphs ----------------
class GraphSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    vertex_count: int
    edges: Tuple[Tuple[int, int], ...] = ()
    layer_of: Dict[int, int] = {}

    @field_validator("edges", mode="after")
    @classmethod
    def _normalize_edges(cls, edges):
        out = set()
        for i, j in edges:
            if i == j:
                raise PatternError(f"Self-loop on vertex {i}")
            out.add((min(i, j), max(i, j)))
        return tuple(sorted(out))

    @model_validator(mode="after")
    def _check_vertices(self):
        if self.vertex_count < 0:
            raise PatternError("vertex_count must be non-negative")
        for i, j in self.edges:
            if not (0 <= i < self.vertex_count and 0 <= j < self.vertex_count):
                raise PatternError(f"Edge ({i}, {j}) references a missing vertex")
        return self

    @classmethod
    def linear(cls, n: int) -> "GraphSpec":
        return cls(vertex_count=n, edges=tuple((i, i + 1) for i in range(n - 1)),
                   layer_of={i: i for i in range(n)})

    @classmethod
    def ladder(cls, columns: int, rungs: Optional[Iterable[int]] = None) -> "GraphSpec":
        """2 x columns ladder; vertex (row, col) is row * columns + col."""
        rungs = range(columns) if rungs is None else rungs
        edges = [(r * columns + c, r * columns + c + 1) for r in (0, 1) for c in range(columns - 1)]
        edges += [(c, columns + c) for c in rungs]
        return cls(vertex_count=2 * columns, edges=tuple(edges),
                   layer_of={r * columns + c: c for r in (0, 1) for c in range(columns)})

    def neighbours(self, v: int) -> Set[int]:
        return {j if i == v else i for i, j in self.edges if v in (i, j)}

    def last_layer(self) -> List[int]:
        if not self.layer_of:
            return list(range(self.vertex_count))
        top = max(self.layer_of.values())
        return sorted(v for v, layer in self.layer_of.items() if layer == top)

    def induced(self, keep: Sequence[int]) -> Tuple["GraphSpec", Dict[int, int]]:
        """Subgraph on `keep`, relabelled 0..len(keep)-1 in the given order."""
        index = {v: k for k, v in enumerate(keep)}
        edges = tuple((index[i], index[j]) for i, j in self.edges if i in index and j in index)
        return GraphSpec(vertex_count=len(keep), edges=edges), index

    def to_json(self) -> str:
        return canonical_json(self.model_dump(mode="json"))


# ---------------- Patterns ----------------
class MeasurementStep(BaseModel):
    model_config = ConfigDict(frozen=True)

    vertex: int
    basis: str = "XY"
    angle: float = 0.0
    s_domain: Tuple[int, ...] = ()
    t_domain: Tuple[int, ...] = ()

    @field_validator("basis")
    @classmethod
    def _known_basis(cls, basis: str) -> str:
        if basis not in ("XY", "X", "Z"):
            raise PatternError(f"Unknown measurement basis {basis!r}")
        return basis

    def effective_angle(self, signals: Mapping[Signal, int]) -> float:
        base = 0.0 if self.basis == "X" else self.angle
        sign = -1.0 if parity(signals, self.s_domain) else 1.0
        return sign * base + np.pi * parity(signals, self.t_domain)


class MeasurementPattern(BaseModel):
    model_config = ConfigDict(frozen=True)

    steps: Tuple[MeasurementStep, ...] = ()
    output_vertices: Tuple[int, ...] = ()
    input_vertices: Tuple[int, ...] = ()
    x_domains: Dict[int, Tuple[int, ...]] = {}
    z_domains: Dict[int, Tuple[int, ...]] = {}

    @model_validator(mode="after")
    def _check_order(self):
        measured: Set[int] = set()
        for step in self.steps:
            if step.vertex in measured:
                raise PatternError(f"Vertex {step.vertex} measured twice")
            if step.vertex in self.output_vertices:
                raise PatternError(f"Output vertex {step.vertex} is measured")
            for sig in step.s_domain + step.t_domain:
                self._check_signal(sig, measured)
            if step.vertex in self.input_vertices and (step.s_domain or step.t_domain):
                raise PatternError(f"Input vertex {step.vertex} cannot be adaptive")
            measured.add(step.vertex)
        for v in self.input_vertices:
            if v not in measured:
                raise PatternError(f"Input vertex {v} is never measured")
        for domains in (self.x_domains, self.z_domains):
            for v, dom in domains.items():
                if v not in self.output_vertices:
                    raise PatternError(f"Byproduct domain for non-output vertex {v}")
                for sig in dom:
                    self._check_signal(sig, measured)
        return self

    def _check_signal(self, sig: int, measured: Set[int]):
        if sig >= 0 and sig not in measured:
            raise PatternError(f"Signal {sig} is not an earlier outcome")
        if sig < 0 and (-sig - 1) not in self.input_vertices:
            raise PatternError(f"Signal {sig} is not an input parity")
        if sig < 0 and (-sig - 1) not in measured:
            raise PatternError(f"Parity signal {sig} used before its Bell measurement")

    @property
    def measured_vertices(self) -> List[int]:
        return [s.vertex for s in self.steps]

    def check_graph(self, graph: GraphSpec):
        """Raise PatternError unless this pattern runs on `graph`."""
        covered = set(self.measured_vertices) | set(self.output_vertices)
        if covered != set(range(graph.vertex_count)) or len(covered) != len(self.steps) + len(self.output_vertices):
            raise PatternError(
                f"Pattern covers {sorted(covered)} but graph has {graph.vertex_count} vertices"
            )
        done: Set[int] = set()
        for step in self.steps:
            if step.vertex in self.input_vertices and graph.neighbours(step.vertex) & done:
                raise PatternError(f"Input vertex {step.vertex} has a measured neighbour")
            done.add(step.vertex)

    def with_angle_offset(self, offset: float, vertices: Optional[Iterable[int]] = None) -> "MeasurementPattern":
        chosen = set(self.measured_vertices if vertices is None else vertices)
        steps = tuple(
            s.model_copy(update={"angle": s.angle + offset}) if s.vertex in chosen and s.basis == "XY" else s
            for s in self.steps
        )
        return self.model_copy(update={"steps": steps})

    def to_json(self) -> str:
        return canonical_json(self.model_dump(mode="json"))

    @classmethod
    def from_flow(cls, graph: GraphSpec, measurements: Sequence[Tuple[int, str, float]],
                  outputs: Sequence[int], flow: Mapping[int, int],
                  inputs: Sequence[int] = ()) -> "MeasurementPattern":
        """
        Static domain propagation for a measurement order with flow.

        An XY/X outcome s_i with successor f(i) puts X^{s_i} on f(i) and Z^{s_i}
        on N(f(i)) minus i; those vertices must be unmeasured or already
        Z-measured (a Z there is only a sign). A Z outcome puts Z^{s_i} on its
        unmeasured neighbours and is flipped by i's X frame.
        """
        xdom: Dict[int, Set[int]] = {v: set() for v in range(graph.vertex_count)}
        zdom: Dict[int, Set[int]] = {v: set() for v in range(graph.vertex_count)}
        measured: Set[int] = set()
        z_measured: Set[int] = set()
        steps = []
        for vertex, basis, angle in measurements:
            nbrs = graph.neighbours(vertex)
            if basis == "Z":
                steps.append(MeasurementStep(vertex=vertex, basis="Z", t_domain=tuple(sorted(xdom[vertex]))))
                measured.add(vertex)
                z_measured.add(vertex)
                for u in nbrs - measured:
                    zdom[u] ^= {vertex}
                continue
            steps.append(MeasurementStep(vertex=vertex, basis=basis, angle=angle,
                                         s_domain=tuple(sorted(xdom[vertex])),
                                         t_domain=tuple(sorted(zdom[vertex]))))
            measured.add(vertex)
            if vertex in inputs:
                for u in nbrs:
                    if u in measured:
                        raise PatternError(f"Input vertex {vertex} has a measured neighbour {u}")
                    zdom[u] ^= {input_signal(vertex)}
            succ = flow.get(vertex)
            if succ is None or succ not in nbrs or succ in measured:
                raise PatternError(f"Vertex {vertex} has no unmeasured flow successor")
            spill = graph.neighbours(succ) - {vertex}
            clash = spill & (measured - z_measured)
            if clash:
                raise PatternError(f"Flow of {vertex} touches measured vertices {sorted(clash)}")
            xdom[succ] ^= {vertex}
            for u in spill - measured:
                zdom[u] ^= {vertex}
        return cls(
            steps=tuple(steps),
            output_vertices=tuple(outputs),
            input_vertices=tuple(inputs),
            x_domains={v: tuple(sorted(xdom[v])) for v in outputs if xdom[v]},
            z_domains={v: tuple(sorted(zdom[v])) for v in outputs if zdom[v]},
        )


# ---------------- Byproduct frames ----------------
@dataclass(frozen=True)
class ByproductFrame:
    x: Tuple[int, ...]
    z: Tuple[int, ...]

    def __post_init__(self):
        if len(self.x) != len(self.z):
            raise DimensionError("Frame x and z parts differ in length")

    @classmethod
    def zero(cls, n: int) -> "ByproductFrame":
        return cls((0,) * n, (0,) * n)

    @classmethod
    def from_q(cls, q: Sequence[int]) -> "ByproductFrame":
        if len(q) % 2:
            raise DimensionError("q must have even length 2N")
        n = len(q) // 2
        return cls(tuple(int(b) for b in q[:n]), tuple(int(b) for b in q[n:]))

    @property
    def n(self) -> int:
        return len(self.x)

    @property
    def q(self) -> Tuple[int, ...]:
        return self.x + self.z

    def restricted(self, j: int) -> np.ndarray:
        """sigma_q restricted to site j: X^{x_j} Z^{z_j}."""
        op = np.eye(2, dtype=complex)
        if self.x[j]:
            op = op @ X
        if self.z[j]:
            op = op @ Z
        return op

    def operator(self) -> np.ndarray:
        out = np.ones((1, 1), dtype=complex)
        for j in range(self.n):
            out = np.kron(out, self.restricted(j))
        return out

    def combined(self, other: "ByproductFrame") -> "ByproductFrame":
        return ByproductFrame(tuple(a ^ b for a, b in zip(self.x, other.x)),
                              tuple(a ^ b for a, b in zip(self.z, other.z)))


def _apply_site(tensor: np.ndarray, axis: int, op: np.ndarray) -> np.ndarray:
    return np.moveaxis(np.tensordot(op, tensor, axes=([1], [axis])), 0, axis)


def correct_byproduct(state: Union[StateVector, DensityOperator],
                      frame: ByproductFrame) -> Union[StateVector, DensityOperator]:
    """Apply sigma_q^dagger site by site."""
    if frame.n != state.n:
        raise DimensionError(f"Frame length {frame.n} does not match {state.n} qubits")
    if isinstance(state, StateVector):
        t = state.tensor()
        for j in range(frame.n):
            t = _apply_site(t, j, frame.restricted(j).conj().T)
        return StateVector(t.reshape(-1))
    dag = frame.operator().conj().T
    return DensityOperator.from_matrix(dag @ state.matrix @ dag.conj().T)


# ---------------- States ----------------
def build_cluster(graph: GraphSpec) -> StateVector:
    n = graph.vertex_count
    if n > MAX_STATE_QUBITS:
        raise CapacityError(f"Graph of {n} vertices exceeds the {MAX_STATE_QUBITS}-qubit cap")
    if n == 0:
        return StateVector(np.ones(1, dtype=complex))
    bits = (np.arange(2**n)[:, None] >> (n - 1 - np.arange(n))[None, :]) & 1
    signs = np.ones(2**n)
    for i, j in graph.edges:
        signs = signs * np.where(bits[:, i] & bits[:, j], -1.0, 1.0)
    return StateVector(signs.astype(complex) / np.sqrt(2**n))


def basis_ket(basis: str, angle: float, bit: int) -> np.ndarray:
    if basis == "Z":
        return np.eye(2, dtype=complex)[bit]
    if basis == "X":
        return xy_ket(0.0, bit)
    if basis == "Y":
        return xy_ket(np.pi / 2, bit)
    return xy_ket(angle, bit)


def _site_branches(state: StateVector, vertex: int, basis: str, angle: float) -> List[np.ndarray]:
    if not 0 <= vertex < state.n:
        raise DimensionError(f"Qubit {vertex} outside a {state.n}-qubit state")
    t = state.tensor()
    return [np.tensordot(basis_ket(basis, angle, b).conj(), t, axes=([0], [vertex])) for b in (0, 1)]


def outcome_probabilities(state: StateVector, vertex: int, basis: str, angle: float = 0.0) -> np.ndarray:
    """Born probabilities of bits 0 and 1 for a measurement of qubit `vertex`."""
    return np.array([float(np.vdot(br, br).real) for br in _site_branches(state, vertex, basis, angle)])


def measure_site(state: StateVector, vertex: int, basis: str, angle: float = 0.0,
                 rng: Optional[np.random.Generator] = None,
                 forced: Optional[int] = None) -> Tuple[int, StateVector]:
    """Measure qubit `vertex`; returns the +1/-1 outcome and the renormalized rest."""
    branches = _site_branches(state, vertex, basis, angle)
    probs = np.array([float(np.vdot(br, br).real) for br in branches])
    if forced is not None:
        if forced not in (1, -1):
            raise PatternError(f"Forced outcome must be +1 or -1, got {forced!r}")
        bit = 0 if forced == 1 else 1
        if probs[bit] < 1e-15:
            raise PatternError(f"Forced outcome {forced} has zero probability")
    else:
        rng = rng or np.random.default_rng()
        bit = int(rng.random() >= probs[0] / probs.sum())
    post = branches[bit].reshape(-1) / np.sqrt(probs[bit])
    return (1 if bit == 0 else -1), StateVector(post)


# ---------------- Pattern execution ----------------
@dataclass
class _Register:
    """Batch-first tensor over labelled qubits. Label: vertex id or ("in", vertex)."""
    tensor: np.ndarray
    labels: List[object]

    def axis(self, label) -> int:
        return 1 + self.labels.index(label)

    def project(self, label, bra: np.ndarray) -> "_Register":
        ax = self.axis(label)
        t = np.tensordot(bra, self.tensor, axes=([0], [ax]))
        labels = [lab for lab in self.labels if lab != label]
        return _Register(t, labels)

    def project_pair(self, la, lb, bra: np.ndarray) -> "_Register":
        t = np.tensordot(bra, self.tensor, axes=([0, 1], [self.axis(la), self.axis(lb)]))
        labels = [lab for lab in self.labels if lab not in (la, lb)]
        return _Register(t, labels)

    def apply(self, label, op: np.ndarray) -> "_Register":
        return _Register(_apply_site(self.tensor, self.axis(label), op), list(self.labels))

    def weight(self) -> float:
        return float(np.vdot(self.tensor, self.tensor).real)


def _bell_bra(theta: float, m: int, f: int) -> np.ndarray:
    ket = np.zeros((2, 2), dtype=complex)
    phase = (-1) ** m * np.exp(1j * theta)
    if f == 0:
        ket[0, 0], ket[1, 1] = 1, phase
    else:
        ket[0, 1], ket[1, 0] = 1, phase
    return ket.conj() / np.sqrt(2)


def _step_branches(reg: _Register, step: MeasurementStep, signals: Dict[Signal, int],
                   inputs: Sequence[int]) -> List[Tuple[Dict[Signal, int], _Register]]:
    """Every outcome branch of one step (unnormalized)."""
    v = step.vertex
    out = []
    if v in inputs:
        theta = step.effective_angle(signals)
        for m in (0, 1):
            for f in (0, 1):
                sub = reg.project_pair(("in", v), v, _bell_bra(theta, m, f))
                out.append(({v: m, input_signal(v): f}, sub))
        return out
    if step.basis == "Z":
        flip = parity(signals, step.t_domain)
        for raw in (0, 1):
            sub = reg.project(v, np.eye(2, dtype=complex)[raw])
            out.append(({v: raw ^ flip}, sub))
        return out
    theta = step.effective_angle(signals)
    for bit in (0, 1):
        out.append(({v: bit}, reg.project(v, xy_ket(theta, bit).conj())))
    return out


def output_frame(pattern: MeasurementPattern, signals: Mapping[Signal, int]) -> ByproductFrame:
    return ByproductFrame(
        tuple(parity(signals, pattern.x_domains.get(o, ())) for o in pattern.output_vertices),
        tuple(parity(signals, pattern.z_domains.get(o, ())) for o in pattern.output_vertices),
    )


def _finish(reg: _Register, pattern: MeasurementPattern,
            signals: Mapping[Signal, int]) -> Tuple[np.ndarray, ByproductFrame]:
    order = [reg.labels.index(o) + 1 for o in pattern.output_vertices]
    return np.transpose(reg.tensor, [0] + order), output_frame(pattern, signals)


def _symbolic_prefix(pattern: MeasurementPattern) -> List[int]:
    """Leading Z steps: exact vertex deletions on a graph state."""
    out = []
    for step in pattern.steps:
        if step.basis != "Z" or step.vertex in pattern.input_vertices:
            break
        out.append(step.vertex)
    return out


def _initial_register(graph: GraphSpec, pattern: MeasurementPattern, deleted: Sequence[int],
                      deleted_bits: Mapping[int, int], input_columns: np.ndarray) -> _Register:
    keep = [v for v in range(graph.vertex_count) if v not in set(deleted)]
    k = len(pattern.input_vertices)
    if len(keep) + k > MAX_STATE_QUBITS:
        raise CapacityError(f"{len(keep) + k} live qubits exceed the {MAX_STATE_QUBITS}-qubit cap")
    sub, index = graph.induced(keep)
    cluster = build_cluster(sub).tensor() if keep else np.ones((), dtype=complex)
    for d in deleted:
        if deleted_bits.get(d, 0):
            for u in graph.neighbours(d):
                if u in index:
                    cluster = _apply_site(cluster, index[u], Z)
    # input_columns: (batch, 2^k)
    batch = input_columns.shape[0]
    ins = input_columns.reshape((batch,) + (2,) * k)
    t = np.multiply.outer(ins, cluster)
    labels: List[object] = [("in", v) for v in pattern.input_vertices] + keep
    return _Register(t, labels)


@dataclass
class PatternRun:
    output_state: StateVector
    frame: ByproductFrame
    outcomes: List[int]
    signals: Dict[Signal, int] = field(default_factory=dict)

    def corrected(self) -> StateVector:
        return correct_byproduct(self.output_state, self.frame)


def run_pattern(graph: GraphSpec, pattern: MeasurementPattern, seed: Optional[int] = None,
                forced: Optional[Mapping[Signal, int]] = None,
                input_state: Optional[StateVector] = None,
                rng: Optional[np.random.Generator] = None) -> PatternRun:
    """
    Execute `pattern` on the graph state of `graph`.

    Outcomes are sampled by the Born rule unless `forced` fixes a signal.
    Input vertices are fed `input_state` by a Bell measurement of the input
    qubit with the resource site.
    """
    pattern.check_graph(graph)
    forced = dict(forced or {})
    rng = rng or np.random.default_rng(seed)
    k = len(pattern.input_vertices)
    if k and (input_state is None or input_state.n != k):
        raise DimensionError(f"Pattern needs a {k}-qubit input state")
    if not k and input_state is not None:
        raise DimensionError("Pattern has no input vertices")

    signals: Dict[Signal, int] = {}
    deleted = _symbolic_prefix(pattern)
    for v in deleted:
        signals[v] = forced[v] if v in forced else int(rng.integers(2))
    columns = (input_state.amplitudes if k else np.ones(1, dtype=complex)).reshape(1, -1)
    reg = _initial_register(graph, pattern, deleted, signals, columns)
    reg = _sample_steps(reg, pattern, pattern.steps[len(deleted):], signals, rng, forced)

    t, frame = _finish(reg, pattern, signals)
    outcomes = [signals[s.vertex] for s in pattern.steps]
    return PatternRun(StateVector(t.reshape(-1)), frame, outcomes, signals)


def _sample_steps(reg: _Register, pattern: MeasurementPattern, steps: Sequence[MeasurementStep],
                  signals: Dict[Signal, int], rng: np.random.Generator,
                  forced: Mapping[Signal, int],
                  signal_map: Optional[Callable[[Dict[Signal, int]], Dict[Signal, int]]] = None) -> _Register:
    """Born-rule sampling of `steps`; `signals` is updated in place."""
    for step in steps:
        branches = _step_branches(reg, step, signals, pattern.input_vertices)
        total = reg.weight()
        weights = np.array([sub.weight() / total for _, sub in branches])
        keys = [sig for sig, _ in branches]
        wanted = {s: forced[s] for s in keys[0] if s in forced}
        if wanted:
            pool = [i for i, sig in enumerate(keys) if all(sig[s] == b for s, b in wanted.items())]
            if sum(weights[i] for i in pool) < 1e-15:
                raise PatternError(f"Forced outcome {wanted} has zero probability")
        else:
            pool = list(range(len(branches)))
        p = weights[pool] / weights[pool].sum()
        chosen = pool[int(rng.choice(len(pool), p=p))] if len(pool) > 1 else pool[0]
        sig, sub = branches[chosen]
        signals.update(signal_map(sig) if signal_map else sig)
        reg = _Register(sub.tensor / np.sqrt(sub.weight()), sub.labels)
    return reg


def run_on_received(pattern: MeasurementPattern, received: StateVector, site_count: int,
                    rng: np.random.Generator, input_state: Optional[StateVector] = None,
                    retained: int = 0,
                    signal_map: Optional[Callable[[Dict[Signal, int]], Dict[Signal, int]]] = None,
                    ) -> Tuple[StateVector, ByproductFrame, Dict[Signal, int]]:
    """
    Measure received qubits (optionally preceded by `retained` qubits that
    stay with the sender) and return the corrected joint state of the
    retained qubits and the outputs.
    """
    if received.n != retained + site_count:
        raise DimensionError(f"Received {received.n} qubits, expected {retained + site_count}")
    k = len(pattern.input_vertices)
    if k and (input_state is None or input_state.n != k):
        raise DimensionError(f"Pattern needs a {k}-qubit input state")
    if k + received.n > MAX_STATE_QUBITS:
        raise CapacityError(f"{k + received.n} qubits exceed the {MAX_STATE_QUBITS}-qubit cap")
    ins = input_state.tensor() if k else np.ones((), dtype=complex)
    t = np.multiply.outer(ins, received.tensor())[None]
    labels: List[object] = ([("in", v) for v in pattern.input_vertices]
                            + [("ret", i) for i in range(retained)] + list(range(site_count)))
    signals: Dict[Signal, int] = {}
    reg = _sample_steps(_Register(t, labels), pattern, pattern.steps, signals, rng, {}, signal_map)
    order = ([reg.labels.index(("ret", i)) + 1 for i in range(retained)]
             + [reg.labels.index(o) + 1 for o in pattern.output_vertices])
    out = np.transpose(reg.tensor, [0] + order)
    frame = output_frame(pattern, signals)
    for j in range(frame.n):
        out = _apply_site(out, 1 + retained + j, frame.restricted(j).conj().T)
    return StateVector(out.reshape(-1)), frame, signals


def _correct_batch(t: np.ndarray, frame: ByproductFrame) -> np.ndarray:
    for j in range(frame.n):
        t = _apply_site(t, j + 1, frame.restricted(j).conj().T)
    return t


def enumerate_branches(reg: _Register, pattern: MeasurementPattern, steps: Sequence[MeasurementStep],
                       signals: Dict[Signal, int],
                       signal_map: Optional[Callable[[Dict[Signal, int]], Dict[Signal, int]]] = None,
                       ) -> List[Tuple[Dict[Signal, int], np.ndarray]]:
    """
    Depth-first enumeration of every nonzero outcome branch.

    Returns (signals, K) with K of shape (2^outputs, batch): the corrected,
    unnormalized branch operator on the batch columns. `signal_map` rewrites
    what the device reports for freshly measured signals.
    """
    if not steps:
        t, frame = _finish(reg, pattern, signals)
        t = _correct_batch(t, frame)
        return [(dict(signals), t.reshape(t.shape[0], -1).T)]
    out = []
    for sig, sub in _step_branches(reg, steps[0], signals, pattern.input_vertices):
        if sub.weight() < _PRUNE:
            continue
        reported = signal_map(sig) if signal_map else sig
        out.extend(enumerate_branches(sub, pattern, steps[1:], {**signals, **reported}, signal_map))
    return out


def pattern_kraus(graph: GraphSpec, pattern: MeasurementPattern) -> KrausChannel:
    """Channel from the input qubits to the corrected outputs, resource = graph state."""
    pattern.check_graph(graph)
    k = len(pattern.input_vertices)
    deleted = _symbolic_prefix(pattern)
    # deleted outcomes only relabel frames, so the b=0 representative carries the full weight
    signals = {v: 0 for v in deleted}
    reg = _initial_register(graph, pattern, deleted, signals, np.eye(2**k, dtype=complex))
    ops = [K for _, K in enumerate_branches(reg, pattern, pattern.steps[len(deleted):], signals)]
    return KrausChannel(tuple(ops), 2**k, 2 ** len(pattern.output_vertices))


def ideal_map(graph: GraphSpec, pattern: MeasurementPattern) -> np.ndarray:
    """Isometry realised by the all-zero branch, renormalized."""
    pattern.check_graph(graph)
    k = len(pattern.input_vertices)
    deleted = _symbolic_prefix(pattern)
    signals = {v: 0 for v in deleted}
    reg = _initial_register(graph, pattern, deleted, signals, np.eye(2**k, dtype=complex))
    for step in pattern.steps[len(deleted):]:
        branches = _step_branches(reg, step, signals, pattern.input_vertices)
        sig, reg = next((s, r) for s, r in branches if all(b == 0 for b in s.values()))
        signals.update(sig)
    t, frame = _finish(reg, pattern, signals)
    K = _correct_batch(t, frame).reshape(t.shape[0], -1).T
    gram = K.conj().T @ K
    scale = gram[0, 0].real
    if scale < 1e-15:
        raise PatternError("All-zero branch has zero probability")
    V = K / np.sqrt(scale)
    if np.max(np.abs(V.conj().T @ V - np.eye(V.shape[1]))) > DERIVED_TOL:
        raise PatternError("Pattern is not deterministic: all-zero branch is not an isometry")
    return V


def alice_instrument(pattern: MeasurementPattern, site_count: int,
                     signal_map: Optional[Callable[[Dict[Signal, int]], Dict[Signal, int]]] = None,
                     ) -> List[Tuple[Dict[Signal, int], np.ndarray]]:
    """
    Measurement-only action on received qubits: branch operators from
    (input qubits (x) sites 0..site_count-1) to the corrected outputs.
    No entangling gate is applied; the graph only fixed the domains.
    """
    k = len(pattern.input_vertices)
    n = k + site_count
    if n > MAX_STATE_QUBITS:
        raise CapacityError(f"{n} qubits exceed the {MAX_STATE_QUBITS}-qubit cap")
    t = np.eye(2**n, dtype=complex).reshape((2**n,) + (2,) * n)
    labels: List[object] = [("in", v) for v in pattern.input_vertices] + list(range(site_count))
    return enumerate_branches(_Register(t, labels), pattern, pattern.steps, {}, signal_map)
