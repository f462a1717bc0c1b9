"""
Malicious-Bob strategies, cheating devices and the acceptance-of-wrong-output
probability delta.

Every strategy acts only through Bob's legal interface: he prepares what he
sends, possibly after acting on what he holds.
"""
import json
from typing import Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from Adversary_Models.oracles import (
    AttackOutcome,
    CodeConfig,
    attack_outcome,
    pauli_bound,
    undetected_error_prob_bruteforce,
    undetected_error_prob_montecarlo,
)
from Linalg_Core.Linalg_Core import PAULIS, StateVector, random_state
from Linalg_Core.distances import trace_norm
from MA_Protocol.devices import DeviceBehavior
from MA_Protocol.layouts import PermutationTag, all_tags
from MA_Protocol.MA_Protocol import BobImplementation, VerifyTerms
from MBQC_Engine.MBQC_Engine import GraphSpec, MeasurementPattern
from MBQC_Engine.compiler import wire_pattern
from Utils.helpers import (
    CHANNEL_TOL,
    DERIVED_TOL,
    CapacityError,
    ConfigError,
    ProtocolError,
    rng_for,
)

__all__ = [
    "AdversaryStrategy", "AttackOutcome", "CodeConfig", "HONEST_STRATEGY", "ProtocolConfig", "attack_outcome",
    "cheating_device", "delta_for_strategy", "exact_delta", "load_attack", "pauli_bound",
    "pauli_twirl", "strategy_library", "undetected_error_prob_bruteforce",
    "undetected_error_prob_montecarlo",
]

StrategyKind = Literal["wrong_resource", "pauli_attack", "channel_attack", "adaptive"]
Matrix = Tuple[Tuple[Tuple[float, float], ...], ...]
EXACT_MAX_N = 9


def pauli_twirl(kraus_ops: Sequence[np.ndarray]) -> Dict[str, float]:
    """Pauli probabilities of the twirled single-qubit channel."""
    probs = {p: float(sum(abs(np.trace(m.conj().T @ k) / 2) ** 2 for k in kraus_ops))
             for p, m in PAULIS.items()}
    return {p: v for p, v in probs.items() if v > 1e-15}


def _to_matrix(m: Matrix) -> np.ndarray:
    return np.array([[complex(re, im) for re, im in row] for row in m], dtype=complex)


def _from_matrix(m: np.ndarray) -> Matrix:
    return tuple(tuple((float(z.real), float(z.imag)) for z in row) for row in np.asarray(m))


class AdversaryStrategy(BaseModel):
    """
    A malicious Bob, as stored in attack files:
    {kind, sites, paulis | kraus, seed}.

    wrong_resource sends `state` (bit string, random when empty) instead of
    what he holds; pauli_attack applies paulis[i] at sites[i]; channel_attack
    applies the single-qubit `kraus` channel at every listed site; adaptive
    draws one of `branches` with its weight.
    """
    model_config = ConfigDict(frozen=True)

    kind: StrategyKind
    sites: Tuple[int, ...] = ()
    paulis: Tuple[str, ...] = ()
    kraus: Tuple[Matrix, ...] = ()
    state: str = ""
    branches: Tuple[Tuple[float, "AdversaryStrategy"], ...] = ()
    seed: int = 0
    description: str = ""

    @model_validator(mode="after")
    def _consistent(self):
        if len(set(self.sites)) != len(self.sites) or any(s < 0 for s in self.sites):
            raise ProtocolError(f"Invalid attack support {self.sites}")
        if self.kind == "pauli_attack":
            if len(self.paulis) != len(self.sites) or set(self.paulis) - set("IXYZ"):
                raise ProtocolError("pauli_attack needs one Pauli letter per site")
        if self.kind == "channel_attack":
            ops = self.kraus_ops
            if not ops or any(k.shape != (2, 2) for k in ops):
                raise ProtocolError("channel_attack needs 2x2 Kraus matrices")
            if np.max(np.abs(sum(k.conj().T @ k for k in ops) - np.eye(2))) > CHANNEL_TOL:
                raise ProtocolError("channel_attack Kraus operators are not trace preserving")
        if self.kind == "adaptive":
            if not self.branches or abs(sum(w for w, _ in self.branches) - 1) > CHANNEL_TOL:
                raise ProtocolError("adaptive strategy needs branch weights summing to 1")
        if self.state and set(self.state) - set("01+-"):
            raise ProtocolError(f"Unknown replacement state {self.state!r}")
        return self

    @classmethod
    def from_kraus(cls, ops: Sequence[np.ndarray], sites: Sequence[int], **kw) -> "AdversaryStrategy":
        return cls(kind="channel_attack", sites=tuple(sites), kraus=tuple(_from_matrix(k) for k in ops), **kw)

    @property
    def kraus_ops(self) -> List[np.ndarray]:
        return [_to_matrix(k) for k in self.kraus]

    def check_support(self, n: int):
        if any(s >= n for s in self.sites):
            raise ProtocolError(f"Attack sites {self.sites} outside {n} positions")
        if self.state and len(self.state) != n:
            raise ProtocolError(f"Replacement state covers {len(self.state)} positions, protocol has {n}")
        for _, branch in self.branches:
            branch.check_support(n)

    def pauli_map(self, n: int) -> str:
        if self.kind != "pauli_attack":
            raise ProtocolError(f"{self.kind} is not a Pauli strategy")
        self.check_support(n)
        letters = ["I"] * n
        for site, p in zip(self.sites, self.paulis):
            letters[site] = p
        return "".join(letters)

    def site_mixture(self, n: int) -> List[Tuple[float, List[Dict[str, float]]]]:
        """Twirled per-position Pauli probabilities, as a weighted mixture."""
        self.check_support(n)
        if self.kind == "wrong_resource":
            return [(1.0, [{p: 0.25 for p in "IXYZ"} for _ in range(n)])]
        if self.kind == "adaptive":
            return [(w * w2, table) for w, branch in self.branches for w2, table in branch.site_mixture(n)]
        table: List[Dict[str, float]] = [{"I": 1.0} for _ in range(n)]
        if self.kind == "pauli_attack":
            for site, p in zip(self.sites, self.paulis):
                table[site] = {p: 1.0}
        else:
            twirled = pauli_twirl(self.kraus_ops)
            for site in self.sites:
                table[site] = dict(twirled)
        return [(1.0, table)]

    def as_bob(self, g_graph: GraphSpec, rng: Optional[np.random.Generator] = None) -> BobImplementation:
        """The verified-protocol Bob realising this strategy."""
        n = 3 * g_graph.vertex_count
        self.check_support(n)
        rng = rng or rng_for(self.seed, 2)
        if self.kind == "adaptive":
            weights = np.array([w for w, _ in self.branches])
            pick = int(rng.choice(len(self.branches), p=weights / weights.sum()))
            return self.branches[pick][1].as_bob(g_graph, rng)
        if self.kind == "wrong_resource":
            state = StateVector.from_bits(self.state) if self.state else random_state(n, rng_for(self.seed, 3))
            return BobImplementation(name=self.kind, graph=g_graph, replacement=state,
                                     description=self.description or "sends G' instead of the prepared state")
        if self.kind == "pauli_attack":
            site_kraus = tuple((s, (PAULIS[p],)) for s, p in zip(self.sites, self.paulis))
        else:
            ops = tuple(self.kraus_ops)
            site_kraus = tuple((s, ops) for s in self.sites)
        return BobImplementation(name=self.kind, graph=g_graph, site_kraus=site_kraus,
                                 description=self.description)


AdversaryStrategy.model_rebuild()
HONEST_STRATEGY = AdversaryStrategy(kind="pauli_attack", description="honest")


def load_attack(path: str) -> AdversaryStrategy:
    try:
        with open(path, "r", encoding="utf-8") as f:
            return AdversaryStrategy.model_validate(json.load(f))
    except (OSError, ValueError, ProtocolError) as exc:
        raise ConfigError(f"Cannot read attack file {path}: {exc}") from exc


def strategy_library(n: int) -> List[AdversaryStrategy]:
    """Representative strategies at N positions, the honest one first."""
    p = 0.3
    damping = [np.array([[1, 0], [0, np.sqrt(1 - p)]], dtype=complex),
               np.array([[0, np.sqrt(p)], [0, 0]], dtype=complex)]
    depolarize = [PAULIS[q] / 2 for q in "IXYZ"]
    single_x = AdversaryStrategy(kind="pauli_attack", sites=(0,), paulis=("X",), description="X on position 0")
    single_z = AdversaryStrategy(kind="pauli_attack", sites=(n - 1,), paulis=("Z",), description="Z on the last position")
    return [
        HONEST_STRATEGY,
        single_x,
        single_z,
        AdversaryStrategy(kind="pauli_attack", sites=(0, 1), paulis=("Y", "X"), description="Y, X on positions 0, 1"),
        AdversaryStrategy.from_kraus(damping, sites=(1,), description="amplitude damping on position 1"),
        AdversaryStrategy.from_kraus(depolarize, sites=tuple(range(n)), description="full depolarizing"),
        AdversaryStrategy(kind="wrong_resource", state="0" * n, description="all-zero G'"),
        AdversaryStrategy(kind="adaptive", branches=((0.5, single_x), (0.5, single_z)),
                          description="coin flip between two Pauli attacks"),
    ]


# ---------------- delta ----------------
def default_program(k: int) -> MeasurementPattern:
    """Zero-angle K-site wire; K=1 just returns |+>."""
    return wire_pattern([0.0] * (k - 1))[1]


def _choi_state(choi: np.ndarray, d_in: int) -> np.ndarray:
    return choi / d_in


def exact_delta(terms: VerifyTerms, mixture, tags: Optional[Sequence[PermutationTag]] = None) -> float:
    """Pr[e=0 and Alice's output channel differs from the ideal one by more than 1e-9]."""
    tags = list(all_tags(terms.n)) if tags is None else list(tags)
    ideal = _choi_state(terms.ideal_choi(), terms.d_in)
    wrong: Dict[str, bool] = {}
    delta = 0.0
    for weight, site_paulis in mixture:
        for tag in tags:
            a = terms.acceptance(tag, site_paulis)
            if a == 0:
                continue
            for paulis, prob in terms.computation_terms(tag, site_paulis):
                if paulis not in wrong:
                    gap = trace_norm(_choi_state(terms.branch_choi(paulis), terms.d_in) - ideal) / 2
                    wrong[paulis] = gap > DERIVED_TOL
                if wrong[paulis]:
                    delta += weight / len(tags) * a * prob
    return float(delta)


class ProtocolConfig(BaseModel):
    """
    What delta depends on besides Bob's strategy.

    Without a program, Pauli strategies go to the combinatorial oracle and
    the rest are evaluated on a zero-angle wire.
    """
    model_config = ConfigDict(frozen=True)

    n: int
    code: CodeConfig = CodeConfig()
    program: Optional[MeasurementPattern] = None
    graph: Optional[GraphSpec] = None
    tags: Optional[Tuple[PermutationTag, ...]] = None

    @model_validator(mode="after")
    def _consistent(self):
        if self.n <= 0 or self.n % 3:
            raise ProtocolError(f"N={self.n} is not a positive multiple of 3")
        if self.graph is not None and self.program is None:
            raise ProtocolError("A graph needs the program that runs on it")
        return self


def delta_for_strategy(strategy: AdversaryStrategy, config: ProtocolConfig) -> float:
    """Probability that Alice accepts a wrong output."""
    n, code = config.n, config.code
    strategy.check_support(n)
    if strategy.kind == "pauli_attack" and (config.program is None or code.d > 1):
        return float(undetected_error_prob_bruteforce(n, code, strategy.pauli_map(n)))
    if code.d != 1 or n > EXACT_MAX_N:
        raise CapacityError(f"Exact evaluation runs only at d=1 and N <= {EXACT_MAX_N}")
    terms = VerifyTerms(config.program or default_program(n // 3), n, graph=config.graph)
    return exact_delta(terms, strategy.site_mixture(n), config.tags)


# ---------------- Cheating devices ----------------
def cheating_device(kind: str, **params) -> DeviceBehavior:
    """A w != 0 device. The honest device is only reachable as HONEST_DEVICE."""
    if kind == "honest":
        raise ProtocolError("The honest device is not a cheating device; use HONEST_DEVICE")
    try:
        return DeviceBehavior(kind=kind, **params)
    except ValueError as exc:
        raise ProtocolError(f"Unknown device behaviour {kind!r}: {exc}") from exc


def scripted_devices() -> List[DeviceBehavior]:
    return [
        cheating_device("angle_offset", offset=0.7),
        cheating_device("outcome_flip", flip_vertices=(0,)),
        cheating_device("always_accept", output_state="1"),
    ]
