"""
Secret position labellings and the phase-one resource layout.
"""
import itertools
from functools import lru_cache
from math import comb
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from Linalg_Core.Linalg_Core import KET0, PLUS, StateVector
from MBQC_Engine.MBQC_Engine import (
    ByproductFrame,
    GraphSpec,
    MeasurementPattern,
    build_cluster,
)
from Utils.helpers import DimensionError, InvariantError

COMPUTATION = "computation"
TRAP_X = "trapX"  # |+>, tested with X
TRAP_Z = "trapZ"  # |0>, tested with Z
LABELS = (COMPUTATION, TRAP_X, TRAP_Z)


class PermutationTag(BaseModel):
    """
    Position labelling for |Psi_P> = P(|g> (x) |+>^{N/3} (x) |0>^{N/3}).

    Sources 0..K-1 are the |g> sites, K..2K-1 the |+> traps and 2K..3K-1
    the |0> traps; each class fills its positions in increasing order.
    """
    model_config = ConfigDict(frozen=True)

    labels: Tuple[str, ...]

    @model_validator(mode="after")
    def _balanced(self):
        n = len(self.labels)
        if n == 0 or n % 3:
            raise InvariantError(f"N={n} is not a positive multiple of 3")
        for label in LABELS:
            if self.labels.count(label) != n // 3:
                raise InvariantError(f"Expected {n // 3} positions labelled {label}")
        return self

    @property
    def n(self) -> int:
        return len(self.labels)

    def positions(self, label: str) -> List[int]:
        return [j for j, lab in enumerate(self.labels) if lab == label]

    @property
    def permutation(self) -> List[int]:
        """permutation[source] = position."""
        return self.positions(COMPUTATION) + self.positions(TRAP_X) + self.positions(TRAP_Z)

    @classmethod
    def from_permutation(cls, perm: Sequence[int]) -> "PermutationTag":
        n = len(perm)
        if n % 3 or sorted(perm) != list(range(n)):
            raise InvariantError(f"{list(perm)} is not a permutation of {n} positions")
        k = n // 3
        comp = list(perm[:k])
        if comp != sorted(comp):
            raise InvariantError("Permutation does not keep the order of the |g> sites")
        labels = [""] * n
        for src, pos in enumerate(perm):
            labels[pos] = LABELS[src // k]
        return cls(labels=tuple(labels))


def tag_count(n: int) -> int:
    k = n // 3
    return comb(n, k) * comb(n - k, k)


def all_tags(n: int) -> Iterator[PermutationTag]:
    if n % 3:
        raise InvariantError(f"N={n} is not a multiple of 3")
    k = n // 3
    for comp in itertools.combinations(range(n), k):
        rest = [j for j in range(n) if j not in comp]
        for trap_x in itertools.combinations(rest, k):
            labels = [TRAP_Z] * n
            for j in comp:
                labels[j] = COMPUTATION
            for j in trap_x:
                labels[j] = TRAP_X
            yield PermutationTag(labels=tuple(labels))


@lru_cache(maxsize=8)
def label_matrix(n: int) -> np.ndarray:
    """All labellings as an int8 array (0 computation, 1 trapX, 2 trapZ)."""
    code = {lab: i for i, lab in enumerate(LABELS)}
    rows = [[code[lab] for lab in tag.labels] for tag in all_tags(n)]
    out = np.array(rows, dtype=np.int8)
    out.setflags(write=False)
    return out


def sample_tag(n: int, rng: np.random.Generator) -> PermutationTag:
    """Uniform labelling: each position draws a label with weight equal to its remaining count."""
    if n % 3:
        raise InvariantError(f"N={n} is not a multiple of 3")
    remaining = [n // 3] * 3
    labels = []
    for _ in range(n):
        counts = np.array(remaining, dtype=float)
        choice = int(rng.choice(3, p=counts / counts.sum()))
        remaining[choice] -= 1
        labels.append(LABELS[choice])
    return PermutationTag(labels=tuple(labels))


def build_psi_p(tag: PermutationTag, g_graph: GraphSpec, n: int) -> StateVector:
    if tag.n != n:
        raise DimensionError(f"Labelling has {tag.n} positions, expected {n}")
    if n % 3 or g_graph.vertex_count != n // 3:
        raise DimensionError(f"|g> must have N/3 = {n // 3} vertices, got {g_graph.vertex_count}")
    k = n // 3
    t = build_cluster(g_graph).tensor() if k else np.ones((), dtype=complex)
    for ket in [PLUS] * k + [KET0] * k:
        t = np.multiply.outer(t, ket)
    perm = tag.permutation
    source_at = [0] * n
    for src, pos in enumerate(perm):
        source_at[pos] = src
    return StateVector(np.transpose(t, source_at).reshape(-1))


def random_frame(tag: PermutationTag, rng: np.random.Generator) -> ByproductFrame:
    """q as the phase-one layout distributes it: x is never set on |+> traps."""
    x = tuple(0 if lab == TRAP_X else int(rng.integers(2)) for lab in tag.labels)
    z = tuple(int(b) for b in rng.integers(2, size=tag.n))
    return ByproductFrame(x, z)


class ResourceLayout:
    """
    Phase-one graph |G> for N positions.

    Position j is vertex j. Each position has a pendant wire a_j - b_j - p_j,
    and every pair j < k is joined by a bridge p_j - m_jk - m'_jk - p_k.
    """

    def __init__(self, n: int):
        if n % 3 or n <= 0:
            raise InvariantError(f"N={n} is not a positive multiple of 3")
        self.n = n
        self.pairs = list(itertools.combinations(range(n), 2))
        edges = []
        for j in range(n):
            edges += [(self.a(j), self.b(j)), (self.b(j), j)]
        for j, k in self.pairs:
            m, mp = self.bridge(j, k)
            edges += [(j, m), (m, mp), (mp, k)]
        self.graph = GraphSpec(vertex_count=3 * n + 2 * len(self.pairs), edges=tuple(edges))

    def a(self, j: int) -> int:
        return self.n + 2 * j

    def b(self, j: int) -> int:
        return self.n + 2 * j + 1

    def bridge(self, j: int, k: int) -> Tuple[int, int]:
        t = self.pairs.index((min(j, k), max(j, k)))
        return 3 * self.n + 2 * t, 3 * self.n + 2 * t + 1

    @property
    def sent_vertices(self) -> List[int]:
        """Vertices Bob sends in phase one (everything but the positions)."""
        return list(range(self.n, self.graph.vertex_count))

    def phase_one_pattern(self, tag: PermutationTag) -> MeasurementPattern:
        comp = tag.positions(COMPUTATION)
        chain = list(zip(comp, comp[1:]))
        kept_bridges = {v for j, k in chain for v in self.bridge(j, k)}
        first = comp[0]

        deletions = []
        for j in range(self.n):
            if j != first:
                deletions.append(self.a(j))
            if tag.labels[j] == TRAP_X or (tag.labels[j] == COMPUTATION and j != first):
                deletions.append(self.b(j))
        for j, k in self.pairs:
            deletions += [v for v in self.bridge(j, k) if v not in kept_bridges]

        measurements = [(v, "Z", 0.0) for v in deletions]
        flow: Dict[int, int] = {self.a(first): self.b(first), self.b(first): first}
        measurements += [(self.a(first), "X", 0.0), (self.b(first), "X", 0.0)]
        for j in tag.positions(TRAP_Z):
            measurements.append((self.b(j), "X", 0.0))
            flow[self.b(j)] = j
        for j, k in chain:
            m, mp = self.bridge(j, k)
            measurements += [(m, "X", 0.0), (mp, "X", 0.0)]
            flow[m], flow[mp] = mp, k
        return MeasurementPattern.from_flow(self.graph, measurements, outputs=list(range(self.n)), flow=flow)

    def live_qubits(self, tag: PermutationTag) -> int:
        pattern = self.phase_one_pattern(tag)
        deleted = sum(1 for s in pattern.steps if s.basis == "Z")
        return self.graph.vertex_count - deleted
