"""
Real and ideal systems for both protocol variants, and the checks that
compare them.

Systems are channels. Classical ports ([U] and w) are fixed per channel;
suites iterate over their values.
"""
from dataclasses import dataclass, replace
from typing import Any, Dict, List, Literal, Optional, Sequence

import numpy as np
import scipy.linalg as spl
from pydantic import BaseModel, ConfigDict, Field

from Adversary_Models.Adversary_Models import (
    HONEST_STRATEGY,
    AdversaryStrategy,
    ProtocolConfig,
    delta_for_strategy,
)
from Linalg_Core.Linalg_Core import (
    DensityOperator,
    KrausChannel,
    StateVector,
    partial_trace_matrix,
    random_state,
)
from Linalg_Core.distances import DistanceReport, channel_distance, trace_norm, trace_norm_distance
from MA_Protocol.devices import HONEST_DEVICE, DeviceBehavior
from MA_Protocol.MA_Protocol import (
    BobImplementation,
    VerifyTerms,
    alice_noverify_channel,
    bob_retained_state,
    flagged_choi,
    honest_noverify_channel,
    run_noverify,
)
from MA_Protocol.transcript import bob_view
from MBQC_Engine.MBQC_Engine import GraphSpec, MeasurementPattern, build_cluster, ideal_map
from Utils.helpers import DERIVED_TOL, DecompositionError, DimensionError, log_message, short_hash

Variant = Literal["noverify", "verify"]
SECURITY_SLACK = 1e-6


class CheckReport(BaseModel):
    """Machine-readable result: {check, config_hash, seed, measured, bound, pass}."""
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    check: str
    config_hash: str
    seed: int
    measured: float
    bound: float
    passed: bool = Field(alias="pass")
    details: Dict[str, Any] = {}

    @classmethod
    def make(cls, check: str, config: Dict[str, Any], seed: int, measured: float, bound: float,
             tol: float = 0.0, **details) -> "CheckReport":
        return cls(check=check, config_hash=short_hash(config), seed=seed, measured=float(measured),
                   bound=float(bound), passed=bool(measured <= bound + tol), details=details)

    def to_json(self) -> Dict[str, Any]:
        return self.model_dump(by_alias=True)


# ---------------- Ideal functionality and simulator ----------------
@dataclass(frozen=True)
class IdealFunctionality:
    """
    S with switch f. With f=0 the filtered port does not exist: S feeds its
    inner honest pi_A the honest resource. With f=1 the port is open and
    whatever arrives there reaches the inner pi_A.
    """
    variant: Variant
    program: MeasurementPattern
    graph: GraphSpec
    device: DeviceBehavior = HONEST_DEVICE
    f: int = 0

    @property
    def sites(self) -> int:
        return self.graph.vertex_count

    @property
    def n(self) -> int:
        return 3 * self.graph.vertex_count

    def channel(self, forwarded: Any = None) -> KrausChannel:
        if self.f == 0 and forwarded is not None:
            raise DimensionError("S with f=0 has no filtered port")
        if self.variant == "noverify":
            return self._noverify(forwarded)
        mixture = HONEST_STRATEGY.site_mixture(self.n) if forwarded is None else forwarded
        return self._verify(mixture)

    def _noverify(self, forwarded: Optional[KrausChannel]) -> KrausChannel:
        k = len(self.program.input_vertices)
        inner = alice_noverify_channel(self.program, self.sites, self.device)
        if forwarded is None:
            if self.device.honest:
                return KrausChannel.unitary(ideal_map(self.graph, self.program))
            forwarded = KrausChannel.preparation(build_cluster(self.graph))
        return KrausChannel.identity(2**k).tensor(forwarded).then(inner)

    def _verify(self, mixture) -> KrausChannel:
        terms = VerifyTerms(self.program, self.n, self.device, self.graph)
        acc, rej = terms.blocks(mixture)
        if self.device.honest:
            acc = accepted_weight(acc, terms.d_in, terms.d_out) * terms.ideal_choi()
        return KrausChannel.from_choi(flagged_choi(acc, rej), terms.d_in, 2 * terms.d_out)


def accepted_weight(acc: np.ndarray, d_in: int, d_out: int) -> float:
    """Acceptance probability of an e=0 Choi block; it must not depend on the input."""
    marginal = partial_trace_matrix(acc, [d_in, d_out], [0])
    p0 = float(np.trace(marginal).real) / d_in
    if np.max(np.abs(marginal - p0 * np.eye(d_in))) > DERIVED_TOL:
        raise DecompositionError("Acceptance probability depends on the input")
    return p0


@dataclass(frozen=True)
class SimulatorSigma:
    """Sets f=1 and forwards the adversarial input unmodified."""
    variant: Variant

    def attach(self, ideal: IdealFunctionality, adversary: Any = None) -> KrausChannel:
        if ideal.variant != self.variant:
            raise DimensionError(f"{self.variant} simulator cannot attach to a {ideal.variant} functionality")
        opened = replace(ideal, f=1)
        if self.variant == "noverify":
            port = 2**ideal.sites
            if adversary is None:
                return opened.channel(KrausChannel.identity(port))
            return opened.channel(KrausChannel.preparation(adversary))
        strategy = adversary or HONEST_STRATEGY
        return opened.channel(strategy.site_mixture(ideal.n))


# ---------------- Distinguisher ----------------
@dataclass(frozen=True)
class DistinguisherConfig:
    """
    Joint distinguisher state D over D3 (x) D1 (x) D2: retained reference,
    input port, resource port. `d2_qubits` is 0 when the resource port is
    driven by a strategy instead of a state.
    """
    joint: StateVector
    d1_qubits: int
    d2_qubits: int = 0

    def __post_init__(self):
        if self.d1_qubits + self.d2_qubits > self.joint.n:
            raise DimensionError("D1 and D2 do not fit in the joint state")

    @property
    def d3_qubits(self) -> int:
        return self.joint.n - self.d1_qubits - self.d2_qubits

    @classmethod
    def product(cls, d1: Optional[StateVector], d2: Optional[StateVector] = None) -> "DistinguisherConfig":
        amps = np.ones(1, dtype=complex)
        for part in (d1, d2):
            if part is not None:
                amps = np.kron(amps, part.amplitudes)
        return cls(StateVector(amps), d1.n if d1 else 0, d2.n if d2 else 0)

    def apply(self, ch: KrausChannel) -> DensityOperator:
        """(I_D3 (x) ch)(D)."""
        d_ref = 2**self.d3_qubits
        if ch.dim_in * d_ref != self.joint.dim:
            raise DimensionError(f"Channel input {ch.dim_in} does not match D1 (x) D2")
        mat = self.joint.amplitudes.reshape(d_ref, ch.dim_in)
        out = np.zeros((d_ref * ch.dim_out,) * 2, dtype=complex)
        for k in ch.kraus_ops:
            v = (mat @ k.T).reshape(-1)
            out += np.outer(v, v.conj())
        return DensityOperator.from_matrix(out)

    def ideal_output(self, u: np.ndarray) -> DensityOperator:
        """(U_D1 (x) I_D3) Tr_D2(D) (.)^dagger, ordered D3 (x) output."""
        dims = [2**self.d3_qubits, 2**self.d1_qubits, 2**self.d2_qubits]
        rho = partial_trace_matrix(self.joint.density().matrix, dims, [0, 1])
        big = np.kron(np.eye(dims[0]), u)
        return DensityOperator.from_matrix(big @ rho @ big.conj().T)


# ---------------- Systems ----------------
def build_real_system(variant: Variant, program: MeasurementPattern, graph: GraphSpec,
                      bob: Optional[BobImplementation] = None,
                      strategy: Optional[AdversaryStrategy] = None,
                      device: DeviceBehavior = HONEST_DEVICE) -> KrausChannel:
    """
    pi_A R pi_B with an honest Bob, pi_A R with the adversary port open.

    noverify: `bob` closes the port with his sent state (his retained
    register is traced out); no bob leaves the port open.
    verify: `strategy` is Bob's phase-two deviation, honest by default.
    """
    if variant == "noverify":
        if bob is None:
            return alice_noverify_channel(program, graph.vertex_count, device)
        if bob.resource is None and bob.retained_qubits == 0:
            return honest_noverify_channel(program, graph, device)
        sent = bob.sent_state()
        dims = [2**bob.retained_qubits, 2 ** (sent.n - bob.retained_qubits)]
        reduced = partial_trace_matrix(sent.density().matrix, dims, [1])
        feed = KrausChannel.preparation(DensityOperator.from_matrix(reduced))
        k = len(program.input_vertices)
        return KrausChannel.identity(2**k).tensor(feed).then(
            alice_noverify_channel(program, graph.vertex_count, device))
    n = 3 * graph.vertex_count
    terms = VerifyTerms(program, n, device, graph)
    acc, rej = terms.blocks((strategy or HONEST_STRATEGY).site_mixture(n))
    return KrausChannel.from_choi(flagged_choi(acc, rej), terms.d_in, 2 * terms.d_out)


def build_ideal_system(variant: Variant, program: MeasurementPattern, graph: GraphSpec,
                       sigma: Optional[SimulatorSigma] = None, adversary: Any = None,
                       device: DeviceBehavior = HONEST_DEVICE) -> KrausChannel:
    """S_{f=0} without a simulator, S sigma with one."""
    ideal = IdealFunctionality(variant, program, graph, device)
    if sigma is None:
        return ideal.channel()
    return sigma.attach(ideal, adversary)


# ---------------- Checks ----------------
def check_correctness(variant: Variant, program: MeasurementPattern, graph: GraphSpec,
                      device: DeviceBehavior = HONEST_DEVICE, seed: int = 0) -> DistanceReport:
    real = build_real_system(variant, program, graph, device=device,
                             bob=BobImplementation("honest", graph) if variant == "noverify" else None)
    ideal = build_ideal_system(variant, program, graph, device=device)
    return channel_distance(real, ideal, seed=seed)


def adversarial_family(graph: GraphSpec, count: int, rng: np.random.Generator,
                       max_reference: int = 2) -> List[StateVector]:
    """
    The honest resource followed by random states on the resource sites, some
    of them entangled with up to `max_reference` extra qubits.
    """
    sites = graph.vertex_count
    family = [build_cluster(graph)]
    for i in range(count - 1):
        family.append(random_state(sites + i % (max_reference + 1), rng))
    return family


def check_blindness_noverify(program: MeasurementPattern, graph: GraphSpec,
                             family: Sequence[StateVector] = (),
                             device: DeviceBehavior = HONEST_DEVICE,
                             rho_in: Optional[StateVector] = None, seed: int = 0) -> DistanceReport:
    """
    pi_A R against S sigma: as channels (probe dimension doubled) and on
    each adversarial state of `family`. A family state wider than the
    resource is entangled with a reference kept by the distinguisher.
    """
    real = build_real_system("noverify", program, graph, device=device)
    sigma = SimulatorSigma("noverify")
    ideal_open = build_ideal_system("noverify", program, graph, sigma=sigma, device=device)
    worst = channel_distance(real, ideal_open, probe_dim=2 * real.dim_in, seed=seed)
    sites = graph.vertex_count
    for g_prime in family:
        if g_prime.n < sites:
            raise DimensionError(f"Adversarial state has {g_prime.n} qubits, resource has {sites}")
        # reorder D2 (reference (x) sites) so the reference sits in front as D3
        ref = g_prime.n - sites
        d1 = rho_in.amplitudes if rho_in is not None else np.ones(1, dtype=complex)
        joint = np.multiply.outer(d1, g_prime.amplitudes.reshape(2**ref, 2**sites))
        joint = np.transpose(joint, (1, 0, 2)).reshape(-1)
        dist = DistinguisherConfig(StateVector(joint), rho_in.n if rho_in is not None else 0, sites)
        report = trace_norm_distance(dist.apply(real), dist.apply(ideal_open))
        if report.raw_trace_norm > worst.raw_trace_norm:
            worst = report
    return worst


def check_bob_view_blindness(programs: Sequence[MeasurementPattern], bob: BobImplementation,
                             device: DeviceBehavior = HONEST_DEVICE,
                             rho_in: Optional[StateVector] = None, seed: int = 0) -> DistanceReport:
    """Bob's retained state and BobView must not depend on the program."""
    views, states = [], []
    for program in programs:
        _, transcript = run_noverify(rho_in, program, device, bob, seed)
        views.append(bob_view(transcript))
        if bob.retained_qubits:
            states.append(bob_retained_state(program, bob, device, rho_in))
    if any(v != views[0] for v in views[1:]):
        return DistanceReport.from_raw(2.0, "exact_state")
    worst = DistanceReport.from_raw(0.0, "exact_state")
    for other in states[1:]:
        report = trace_norm_distance(states[0], other)
        if report.raw_trace_norm > worst.raw_trace_norm:
            worst = report
    return worst


# ---------------- Flag decomposition ----------------
@dataclass(frozen=True)
class FlaggedOutputDecomposition:
    """rho = alpha eta (x) e1 + delta eta_error (x) e0 + (1 - alpha - delta) ideal (x) e0."""
    alpha: float
    delta: float
    eta: Optional[DensityOperator]
    eta_error: Optional[DensityOperator]
    ideal_branch: DensityOperator
    reconstruction_error: float

    def __post_init__(self):
        if not -DERIVED_TOL <= self.alpha <= 1 + DERIVED_TOL:
            raise DecompositionError(f"alpha={self.alpha} outside [0, 1]")
        if self.delta < -DERIVED_TOL or self.alpha + self.delta > 1 + DERIVED_TOL:
            raise DecompositionError(f"alpha={self.alpha}, delta={self.delta} do not fit in one")

    @property
    def ideal_weight(self) -> float:
        return 1.0 - self.alpha - self.delta


def _psd_split(block: np.ndarray, ideal: np.ndarray) -> float:
    """Largest c with block - c * ideal >= 0 (0 when ideal leaves block's support)."""
    w, v = spl.eigh((block + block.conj().T) / 2)
    keep = w > DERIVED_TOL * max(1.0, float(np.max(np.abs(w))))
    if not np.any(keep):
        return 0.0
    support = v[:, keep]
    leak = ideal - support @ (support.conj().T @ ideal @ support) @ support.conj().T
    if np.max(np.abs(leak)) > DERIVED_TOL:
        return 0.0
    inv_sqrt = support @ np.diag(1 / np.sqrt(w[keep])) @ support.conj().T
    top = float(np.max(spl.eigvalsh(inv_sqrt @ ideal @ inv_sqrt)))
    return min(1.0 / top, float(np.trace(block).real)) if top > 0 else 0.0


def decompose_flagged_output(rho_flagged: DensityOperator, ideal: DensityOperator) -> FlaggedOutputDecomposition:
    """
    Split a (system (x) flag) output into its e1 weight, its ideal e0 part
    and the residual error part. A residual that is not a state raises.
    """
    d = rho_flagged.dim // 2
    if ideal.dim != d:
        raise DimensionError(f"Ideal output has dim {ideal.dim}, flagged output carries {d}")
    blocks = rho_flagged.matrix.reshape(d, 2, d, 2)
    b0, b1 = blocks[:, 0, :, 0], blocks[:, 1, :, 1]
    alpha = float(np.trace(b1).real)
    c = _psd_split(b0, ideal.matrix)
    delta = max(float(np.trace(b0).real) - c, 0.0)
    residual = b0 - c * ideal.matrix
    if float(np.min(spl.eigvalsh((residual + residual.conj().T) / 2))) < -DERIVED_TOL:
        raise DecompositionError("Residual e0 weight is negative")
    eta = DensityOperator.from_matrix(b1 / alpha) if alpha > DERIVED_TOL else None
    eta_error = DensityOperator.from_matrix(residual / delta) if delta > DERIVED_TOL else None
    if delta <= DERIVED_TOL:
        delta = 0.0
    if alpha <= DERIVED_TOL:
        alpha = 0.0

    rebuilt = np.zeros_like(blocks)
    rebuilt[:, 1, :, 1] = b1 if eta is None else alpha * eta.matrix
    rebuilt[:, 0, :, 0] = c * ideal.matrix + (residual if eta_error is None else delta * eta_error.matrix)
    error = trace_norm(rebuilt.reshape(2 * d, 2 * d) - rho_flagged.matrix) / 2
    if error > DERIVED_TOL:
        raise DecompositionError(f"Reconstruction error {error:.2e}")
    return FlaggedOutputDecomposition(alpha, delta, eta, eta_error, ideal, float(error))


# ---------------- Security of the verified variant ----------------
class SecurityRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    strategy: str
    device: str
    measured: float
    delta: float
    bound: float
    passed: bool
    alpha_real: float
    alpha_ideal: float
    decomposed_delta: float


class SecurityResult(BaseModel):
    rows: List[SecurityRow]

    @property
    def worst_distance(self) -> float:
        return max((r.measured for r in self.rows), default=0.0)

    @property
    def two_delta_bound(self) -> float:
        return max((r.bound for r in self.rows), default=0.0)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)


def check_security_verify(strategies: Sequence[AdversaryStrategy], program: MeasurementPattern,
                          graph: GraphSpec, devices: Sequence[DeviceBehavior] = (HONEST_DEVICE,),
                          distinguishers: Sequence[DistinguisherConfig] = (), seed: int = 0) -> SecurityResult:
    """
    pi_A R against S sigma per strategy and device. Honest devices must stay
    within 2 delta on the raw trace norm; cheating devices must match exactly.
    """
    n = 3 * graph.vertex_count
    sigma = SimulatorSigma("verify")
    u = ideal_map(graph, program)
    if not distinguishers:
        k = len(program.input_vertices)
        plus = StateVector(np.ones(2**k, dtype=complex) / np.sqrt(2**k)) if k else None
        distinguishers = [DistinguisherConfig.product(plus)]
    rows = []
    for device in devices:
        for strategy in strategies:
            real = build_real_system("verify", program, graph, strategy=strategy, device=device)
            ideal = build_ideal_system("verify", program, graph, sigma=sigma, adversary=strategy, device=device)
            report = channel_distance(real, ideal, seed=seed)
            if device.honest:
                exact = strategy.kind != "pauli_attack"
                config = ProtocolConfig(n=n, program=program if exact else None, graph=graph if exact else None)
                delta = delta_for_strategy(strategy, config)
                bound, tol = 2 * delta, SECURITY_SLACK
            else:
                delta, bound, tol = 0.0, 0.0, DERIVED_TOL
            alpha_real = alpha_ideal = decomposed = 0.0
            if device.honest:
                for dist in distinguishers:
                    target = dist.ideal_output(u)
                    real_split = decompose_flagged_output(dist.apply(real), target)
                    ideal_split = decompose_flagged_output(dist.apply(ideal), target)
                    alpha_real = max(alpha_real, real_split.alpha)
                    alpha_ideal = max(alpha_ideal, ideal_split.alpha)
                    decomposed = max(decomposed, real_split.delta)
            passed = report.raw_trace_norm <= bound + tol
            if not passed:
                log_message("warn", f"{strategy.description or strategy.kind} / {device.kind}: "
                                    f"{report.raw_trace_norm:.3e} > {bound:.3e}")
            rows.append(SecurityRow(
                strategy=strategy.description or strategy.kind, device=device.kind,
                measured=report.raw_trace_norm, delta=delta, bound=bound, passed=passed,
                alpha_real=alpha_real, alpha_ideal=alpha_ideal, decomposed_delta=decomposed,
            ))
    return SecurityResult(rows=rows)
