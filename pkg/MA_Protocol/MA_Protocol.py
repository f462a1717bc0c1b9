"""
Measuring-Alice delegated computation, with and without trap verification.

Bob prepares and sends; Alice only measures. The one-way channel below has
no operation that carries anything from Alice to Bob.
"""
import itertools
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from Linalg_Core.Linalg_Core import (
    DensityOperator,
    KrausChannel,
    StateVector,
    partial_trace_matrix,
    pauli_operator,
)
from MA_Protocol.devices import HONEST_DEVICE, DeviceBehavior
from MA_Protocol.layouts import (
    COMPUTATION,
    TRAP_X,
    TRAP_Z,
    PermutationTag,
    ResourceLayout,
    all_tags,
    build_psi_p,
    random_frame,
    sample_tag,
)
from MA_Protocol.transcript import Transcript
from MBQC_Engine.MBQC_Engine import (
    ByproductFrame,
    GraphSpec,
    MeasurementPattern,
    alice_instrument,
    build_cluster,
    ideal_map,
    measure_site,
    run_on_received,
    run_pattern,
)
from Utils.helpers import CapacityError, ProtocolError, log_message, rng_for

SitePaulis = Sequence[Mapping[str, float]]
LAYOUT_MAX_N = 6


# ---------------- Resource: one-way quantum channel ----------------
class OneWayChannel:
    """Bob -> Alice only. Every send is logged in order."""

    direction = ("bob", "alice")

    def __init__(self, transcript: Transcript, sender: str = "bob", receiver: str = "alice"):
        if (sender, receiver) != self.direction:
            raise ProtocolError(f"A one-way channel cannot carry {sender} -> {receiver}")
        self.transcript = transcript
        self.log: List[Dict[str, int]] = []

    def send(self, phase: int, site: int, note: str = ""):
        payload = {"phase": phase, "site": site, "note": note}
        self.log.append(payload)
        self.transcript.record("bob", "qubit", payload, alice_private=False)


# ---------------- Bob ----------------
@dataclass(frozen=True)
class BobImplementation:
    """
    What Bob does through his legal interface: prepare and send.

    `resource` is the joint state on (retained (x) sent sites) sent in the
    no-verification protocol; None means the honest |g>. In the verified
    protocol `site_kraus` and `replacement` describe his phase-two deviation.
    """
    name: str
    graph: GraphSpec
    resource: Optional[StateVector] = None
    retained_qubits: int = 0
    site_kraus: Tuple[Tuple[int, Tuple[np.ndarray, ...]], ...] = ()
    replacement: Optional[StateVector] = None
    description: str = ""

    def sent_state(self) -> StateVector:
        return self.resource if self.resource is not None else build_cluster(self.graph)

    @property
    def sent_qubits(self) -> int:
        return self.sent_state().n - self.retained_qubits

    def send(self, channel: OneWayChannel, phase: int, count: int):
        for site in range(count):
            channel.send(phase, site, self.name)

    def deviate(self, state: StateVector, rng: np.random.Generator) -> StateVector:
        """Phase-two action on the N position qubits he holds."""
        if self.replacement is not None:
            if self.replacement.n != state.n:
                raise ProtocolError(f"Bob sends {self.replacement.n} qubits, protocol expects {state.n}")
            return self.replacement
        t = state.tensor()
        for site, ops in self.site_kraus:
            branches = [np.moveaxis(np.tensordot(k, t, axes=([1], [site])), 0, site) for k in ops]
            weights = np.array([float(np.vdot(b, b).real) for b in branches])
            pick = int(rng.choice(len(ops), p=weights / weights.sum()))
            t = branches[pick] / np.sqrt(weights[pick])
        return StateVector(t.reshape(-1))


def bob_honest_noverify(graph: GraphSpec) -> BobImplementation:
    return BobImplementation(name="honest", graph=graph, description="prepares |g> and sends it site by site")


# ---------------- Alice, no verification ----------------
def alice_noverify_channel(program: MeasurementPattern, site_count: int,
                           device: DeviceBehavior = HONEST_DEVICE) -> KrausChannel:
    """pi_A as a channel from (rho_in (x) received sites) to rho_out."""
    k = len(program.input_vertices)
    d_in = 2 ** (k + site_count)
    d_out = 2 ** len(program.output_vertices)
    fixed = device.fixed_output()
    if fixed is not None:
        return KrausChannel.discard(d_in).then(KrausChannel.preparation(fixed))
    branches = alice_instrument(device.pattern_for(program), site_count, device.signal_map())
    return KrausChannel(tuple(K for _, K in branches), d_in, d_out)


def honest_noverify_channel(program: MeasurementPattern, graph: GraphSpec,
                            device: DeviceBehavior = HONEST_DEVICE) -> KrausChannel:
    """pi_A R pi_B: the open resource port closed with |g>."""
    k = len(program.input_vertices)
    feed = KrausChannel.identity(2**k).tensor(KrausChannel.preparation(build_cluster(graph)))
    return feed.then(alice_noverify_channel(program, graph.vertex_count, device))


def _check_program(program: MeasurementPattern, graph: GraphSpec, rho_in: Optional[StateVector]):
    program.check_graph(graph)
    k = len(program.input_vertices)
    if k and (rho_in is None or rho_in.n != k):
        raise ProtocolError(f"Program expects a {k}-qubit quantum input")
    if not k and rho_in is not None:
        raise ProtocolError("Program folds its input; no quantum input is accepted")


def _config(variant: str, rho_in: Optional[StateVector], program: MeasurementPattern,
            w: DeviceBehavior, bob: BobImplementation, extra: Optional[dict] = None) -> dict:
    return {
        "variant": variant,
        "input": None if rho_in is None else np.round(rho_in.amplitudes, 12).tolist(),
        "program": program.model_dump(mode="json"),
        "device": w.model_dump(mode="json"),
        "bob": bob.name,
        **(extra or {}),
    }


def run_noverify(rho_in: Optional[StateVector], program: MeasurementPattern, w: DeviceBehavior,
                 bob: BobImplementation, seed: int) -> Tuple[DensityOperator, Transcript]:
    _check_program(program, bob.graph, rho_in)
    transcript = Transcript("noverify", seed, _config("noverify", rho_in, program, w, bob))
    channel = OneWayChannel(transcript)
    state = bob.sent_state()
    sites = state.n - bob.retained_qubits
    if sites != bob.graph.vertex_count:
        raise ProtocolError(f"Bob sent {sites} qubits, the program measures {bob.graph.vertex_count}")
    bob.send(channel, phase=1, count=sites)

    transcript.record("alice", "program", program.model_dump(mode="json"), alice_private=True)
    fixed = w.fixed_output()
    if fixed is not None:
        rho_out = fixed.density()
    else:
        out, frame, signals = run_on_received(
            w.pattern_for(program), state, sites, rng_for(seed, 0), input_state=rho_in,
            retained=bob.retained_qubits, signal_map=w.signal_map(),
        )
        for step in program.steps:
            transcript.record("alice", "outcome", {"vertex": step.vertex, "bit": signals[step.vertex]},
                              alice_private=True)
        transcript.record("alice", "frame", list(frame.q), alice_private=True)
        dims = [2] * out.n
        keep = range(bob.retained_qubits, out.n)
        rho_out = DensityOperator.from_matrix(partial_trace_matrix(out.density().matrix, dims, keep))
    transcript.record("alice", "output", np.round(rho_out.matrix, 12).tolist(), alice_private=True)
    transcript.rho_out = rho_out
    log_message("debug", f"noverify run done with {len(transcript.events)} events")
    return rho_out, transcript


def bob_retained_state(program: MeasurementPattern, bob: BobImplementation,
                       device: DeviceBehavior = HONEST_DEVICE,
                       rho_in: Optional[StateVector] = None) -> DensityOperator:
    """Bob's retained register after Alice's whole instrument, averaged over her outcomes."""
    if bob.retained_qubits == 0:
        raise ProtocolError("Bob keeps no register")
    _check_program(program, bob.graph, rho_in)
    joint = bob.sent_state()
    d_ret = 2**bob.retained_qubits
    d_sites = 2 ** (joint.n - bob.retained_qubits)
    inp = rho_in.amplitudes if rho_in is not None else np.ones(1, dtype=complex)
    psi = np.multiply.outer(inp, joint.amplitudes.reshape(d_ret, d_sites))
    psi = np.transpose(psi, (1, 0, 2)).reshape(d_ret, -1)
    alice = alice_noverify_channel(program, bob.graph.vertex_count, device)
    reduced = np.zeros((d_ret, d_ret), dtype=complex)
    for K in alice.kraus_ops:
        out = psi @ K.T
        reduced += out @ out.conj().T
    return DensityOperator.from_matrix(reduced)


# ---------------- Alice, trap verification ----------------
@dataclass
class VerifyRun:
    rho_out: DensityOperator
    e: int
    transcript: Transcript
    tag: PermutationTag
    frame: ByproductFrame
    flagged: List[int] = field(default_factory=list)


def _apply_frame(state: StateVector, frame: ByproductFrame, dagger: bool) -> StateVector:
    t = state.tensor()
    for j in range(frame.n):
        op = frame.restricted(j)
        op = op.conj().T if dagger else op
        t = np.moveaxis(np.tensordot(op, t, axes=([1], [j])), 0, j)
    return StateVector(t.reshape(-1))


def _phase_one(tag: PermutationTag, g_graph: GraphSpec, mode: str, channel: OneWayChannel,
               transcript: Transcript, rng: np.random.Generator) -> Tuple[StateVector, ByproductFrame]:
    n = tag.n
    if mode == "auto":
        mode = "layout" if n <= LAYOUT_MAX_N else "reference"
    if mode == "layout":
        layout = ResourceLayout(n)
        for v in layout.sent_vertices:
            channel.send(1, v)
        run = run_pattern(layout.graph, layout.phase_one_pattern(tag), rng=rng)
        for vertex, bit in zip(layout.phase_one_pattern(tag).measured_vertices, run.outcomes):
            transcript.record("alice", "outcome", {"phase": 1, "vertex": vertex, "bit": bit}, alice_private=True)
        return run.output_state, run.frame
    if mode != "reference":
        raise ProtocolError(f"Unknown phase-one mode {mode!r}")
    # same send count as the layout; Alice draws q directly
    for v in range(n, 3 * n + n * (n - 1)):
        channel.send(1, v)
    frame = random_frame(tag, rng)
    return _apply_frame(build_psi_p(tag, g_graph, n), frame, dagger=False), frame


def run_verify(rho_in: Optional[StateVector], program: MeasurementPattern, w: DeviceBehavior,
               bob: BobImplementation, tag: Optional[PermutationTag] = None, code=None,
               seed: int = 0, phase_one: str = "auto") -> VerifyRun:
    """
    Two-phase verified run. Phase one leaves sigma_q |Psi_P> with Bob;
    phase two returns it, Alice undoes sigma_q site by site, tests every
    trap and runs the program on the computation positions.
    """
    if code is not None and getattr(code, "d", 1) != 1:
        raise ProtocolError("State-level runs carry no code; use d=1")
    g_graph = bob.graph
    n = 3 * g_graph.vertex_count
    _check_program(program, g_graph, rho_in)
    rng_alice, rng_bob = rng_for(seed, 0), rng_for(seed, 1)
    tag = tag or sample_tag(n, rng_alice)
    if tag.n != n:
        raise ProtocolError(f"Labelling covers {tag.n} positions, protocol has {n}")

    transcript = Transcript("verify", seed, _config("verify", rho_in, program, w, bob, {"N": n}))
    channel = OneWayChannel(transcript)
    transcript.record("alice", "permutation", list(tag.labels), alice_private=True)

    state, frame = _phase_one(tag, g_graph, phase_one, channel, transcript, rng_alice)
    transcript.record("alice", "frame", list(frame.q), alice_private=True)

    state = bob.deviate(state, rng_bob)
    if state.n != n:
        raise ProtocolError(f"Bob returned {state.n} qubits, expected {n}")
    bob.send(channel, phase=2, count=n)

    state = _apply_frame(state, frame, dagger=True)
    alive = list(range(n))
    flagged = []
    for j in tag.positions(TRAP_X) + tag.positions(TRAP_Z):
        basis = "X" if tag.labels[j] == TRAP_X else "Z"
        outcome, state = measure_site(state, alive.index(j), basis, rng=rng_alice)
        alive.remove(j)
        transcript.record("alice", "trap", {"position": j, "basis": basis, "outcome": outcome},
                          alice_private=True)
        if outcome == -1:
            flagged.append(j)

    fixed = w.fixed_output()
    if fixed is not None:
        rho_out = fixed.density()
    else:
        out, _, signals = run_on_received(w.pattern_for(program), state, g_graph.vertex_count, rng_alice,
                                          input_state=rho_in, signal_map=w.signal_map())
        for step in program.steps:
            transcript.record("alice", "outcome", {"phase": 2, "vertex": step.vertex,
                                                   "bit": signals[step.vertex]}, alice_private=True)
        rho_out = out.density()
    forced = w.forced_flag()
    e = forced if forced is not None else int(bool(flagged))
    transcript.record("alice", "output", {"rho": np.round(rho_out.matrix, 12).tolist(), "e": e},
                      alice_private=True)
    transcript.rho_out, transcript.e = rho_out, e
    return VerifyRun(rho_out, e, transcript, tag, frame, flagged)


# ---------------- Exact verified channel ----------------
def _choi(ops: Sequence[np.ndarray]) -> np.ndarray:
    vecs = [k.T.reshape(-1) for k in ops]
    return sum(np.outer(v, v.conj()) for v in vecs)


class VerifyTerms:
    """
    Per-labelling pieces of the verified protocol against per-site Pauli noise.

    Alice's phase-one frame is uniform on every component that affects her
    statistics, so a phase-two deviation acts through its Pauli twirl: each
    position independently suffers Pauli P with the given probability.
    """

    def __init__(self, program: MeasurementPattern, n: int, device: DeviceBehavior = HONEST_DEVICE,
                 graph: Optional[GraphSpec] = None):
        if n % 3:
            raise ProtocolError(f"N={n} is not a multiple of 3")
        self.program = program
        self.n = n
        self.k = n // 3
        self.device = device
        self.g_graph = graph or GraphSpec.linear(self.k)
        if self.g_graph.vertex_count != self.k:
            raise ProtocolError(f"N={n} needs a {self.k}-vertex graph, got {self.g_graph.vertex_count}")
        program.check_graph(self.g_graph)
        self.d_in = 2 ** len(program.input_vertices)
        self.d_out = 2 ** len(program.output_vertices)
        if self.d_in * self.d_out * 2 > 2**7:
            raise CapacityError("Verified channel exceeds the channel cap")
        self._g = build_cluster(self.g_graph).amplitudes
        self._branches = None
        self._cache: Dict[str, np.ndarray] = {}

    def ideal_choi(self) -> np.ndarray:
        return _choi([ideal_map(self.g_graph, self.program)])

    def branch_choi(self, paulis: str) -> np.ndarray:
        """Choi matrix of Alice's output when the computation sites carry `paulis`."""
        if paulis not in self._cache:
            fixed = self.device.fixed_output()
            if fixed is not None:
                rho = fixed.density().matrix
                self._cache[paulis] = np.kron(np.eye(self.d_in), rho)
            else:
                if self._branches is None:
                    pattern = self.device.pattern_for(self.program)
                    self._branches = alice_instrument(pattern, self.k, self.device.signal_map())
                col = (pauli_operator(paulis) @ self._g).reshape(-1, 1)
                feed = np.kron(np.eye(self.d_in), col)
                self._cache[paulis] = _choi([K @ feed for _, K in self._branches])
        return self._cache[paulis]

    def acceptance(self, tag: PermutationTag, site_paulis: SitePaulis) -> float:
        forced = self.device.forced_flag()
        if forced is not None:
            return 1.0 - forced
        p = 1.0
        for j in tag.positions(TRAP_X):
            p *= site_paulis[j].get("I", 0.0) + site_paulis[j].get("X", 0.0)
        for j in tag.positions(TRAP_Z):
            p *= site_paulis[j].get("I", 0.0) + site_paulis[j].get("Z", 0.0)
        return p

    def computation_terms(self, tag: PermutationTag, site_paulis: SitePaulis) -> Iterator[Tuple[str, float]]:
        comp = tag.positions(COMPUTATION)
        for combo in itertools.product("IXYZ", repeat=self.k):
            prob = 1.0
            for j, letter in zip(comp, combo):
                prob *= site_paulis[j].get(letter, 0.0)
            if prob > 0:
                yield "".join(combo), prob

    def blocks(self, mixture: Sequence[Tuple[float, SitePaulis]],
               tags: Optional[Sequence[PermutationTag]] = None) -> Tuple[np.ndarray, np.ndarray]:
        """(accepted, rejected) Choi blocks averaged over labellings and the mixture."""
        tags = list(all_tags(self.n)) if tags is None else list(tags)
        dim = self.d_in * self.d_out
        acc = np.zeros((dim, dim), dtype=complex)
        rej = np.zeros((dim, dim), dtype=complex)
        for weight, site_paulis in mixture:
            if len(site_paulis) != self.n:
                raise ProtocolError(f"Attack covers {len(site_paulis)} positions, protocol has {self.n}")
            for tag in tags:
                a = self.acceptance(tag, site_paulis)
                out = sum(p * self.branch_choi(s) for s, p in self.computation_terms(tag, site_paulis))
                acc += weight / len(tags) * a * out
                rej += weight / len(tags) * (1 - a) * out
        return acc, rej


def flagged_choi(acc: np.ndarray, rej: np.ndarray) -> np.ndarray:
    """Choi matrix over (input, output, flag) with e_0 = |0>, e_1 = |1>."""
    e0 = np.diag([1.0, 0.0]).astype(complex)
    e1 = np.diag([0.0, 1.0]).astype(complex)
    return np.kron(acc, e0) + np.kron(rej, e1)


def verify_channel(program: MeasurementPattern, n: int, mixture: Sequence[Tuple[float, SitePaulis]],
                   device: DeviceBehavior = HONEST_DEVICE,
                   tags: Optional[Sequence[PermutationTag]] = None,
                   graph: Optional[GraphSpec] = None) -> KrausChannel:
    """pi_A R with Bob's phase-two deviation, as a channel rho_in -> (rho_out, e)."""
    terms = VerifyTerms(program, n, device, graph)
    acc, rej = terms.blocks(mixture, tags)
    return KrausChannel.from_choi(flagged_choi(acc, rej), terms.d_in, 2 * terms.d_out)


def honest_site_paulis(n: int) -> List[Dict[str, float]]:
    return [{"I": 1.0} for _ in range(n)]
