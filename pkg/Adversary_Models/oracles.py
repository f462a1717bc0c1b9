"""
Pauli-level oracles for undetected logical errors under hidden traps.

An attack is a Pauli per position. X-type errors (X, Y) flip the Z test of a
|0> trap, Z-type errors (Z, Y) flip the X test of a |+> trap. The logical
qubit flips when at least d of its computation positions are hit.
"""
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from typing import Mapping, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator

from MA_Protocol.layouts import LABELS, PermutationTag, label_matrix, tag_count
from Utils.helpers import InvariantError, ProtocolError, log_message, seed_children, worker_count

PauliAttack = Union[str, Mapping[int, str]]
BRUTE_FORCE_MAX_N = 12
MIN_TRIALS = 1000
SHARD_TRIALS = 20000


def pauli_bound(d: int) -> float:
    return (2 / 3) ** (d / 3)


class CodeConfig(BaseModel):
    """
    Abstract distance-d code on the computation positions.

    `logical_map` indexes computation positions in increasing order; empty
    means all of them.
    """
    model_config = ConfigDict(frozen=True)

    d: int = 1
    logical_map: Tuple[int, ...] = ()

    @field_validator("d")
    @classmethod
    def _odd_positive(cls, d: int) -> int:
        if d < 1 or d % 2 == 0:
            raise InvariantError(f"Code distance must be odd and positive, got {d}")
        return d

    def resolved(self, k: int) -> Tuple[int, ...]:
        logical = self.logical_map or tuple(range(k))
        if any(i < 0 or i >= k for i in logical):
            raise InvariantError(f"Logical map {logical} outside {k} computation positions")
        if len(set(logical)) < self.d:
            raise InvariantError(f"Distance {self.d} needs at least {self.d} logical positions")
        return tuple(sorted(set(logical)))


class AttackOutcome(BaseModel):
    model_config = ConfigDict(frozen=True)

    logical_flipped: bool
    any_trap_flagged: bool

    @property
    def undetected(self) -> bool:
        return self.logical_flipped and not self.any_trap_flagged


# ---------------- Helpers ----------------
def attack_string(n: int, attack: PauliAttack) -> str:
    if isinstance(attack, str):
        letters = attack
    else:
        letters = ["I"] * n
        for site, p in attack.items():
            if not 0 <= site < n:
                raise ProtocolError(f"Attack site {site} outside {n} positions")
            letters[site] = p
        letters = "".join(letters)
    if len(letters) != n or set(letters) - set("IXYZ"):
        raise ProtocolError(f"Invalid attack {letters!r} for {n} positions")
    return letters


def _masks(letters: str) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    arr = np.array(list(letters))
    return arr != "I", np.isin(arr, ["X", "Y"]), np.isin(arr, ["Z", "Y"])


def _flags_and_flips(labels: np.ndarray, letters: str, code: CodeConfig) -> Tuple[np.ndarray, np.ndarray]:
    """Row-wise (any trap flagged, logical flipped) for a block of labellings."""
    hit, x_type, z_type = _masks(letters)
    flagged = np.any(((labels == 2) & x_type) | ((labels == 1) & z_type), axis=1)
    comp = labels == 0
    comp_index = np.cumsum(comp, axis=1) - 1
    logical = comp & np.isin(comp_index, code.resolved(labels.shape[1] // 3))
    flipped = np.sum(logical & hit, axis=1) >= code.d
    return flagged, flipped


def _undetected(labels: np.ndarray, letters: str, code: CodeConfig) -> np.ndarray:
    flagged, flipped = _flags_and_flips(labels, letters, code)
    return flipped & ~flagged


def attack_outcome(tag: PermutationTag, code: CodeConfig, attack: PauliAttack) -> AttackOutcome:
    row = np.array([[LABELS.index(lab) for lab in tag.labels]], dtype=np.int8)
    flagged, flipped = _flags_and_flips(row, attack_string(tag.n, attack), code)
    return AttackOutcome(logical_flipped=bool(flipped[0]), any_trap_flagged=bool(flagged[0]))


# ---------------- Oracles ----------------
def undetected_error_prob_bruteforce(n: int, code: CodeConfig, attack: PauliAttack) -> Fraction:
    """Exact probability over uniform labellings that the logical flips and no trap fires."""
    if n % 3 or n <= 0:
        raise InvariantError(f"N={n} is not a positive multiple of 3")
    if n > BRUTE_FORCE_MAX_N:
        raise InvariantError(f"Exhaustive enumeration is capped at N={BRUTE_FORCE_MAX_N}")
    letters = attack_string(n, attack)
    if set(letters) == {"I"}:
        return Fraction(0)
    count = int(np.sum(_undetected(label_matrix(n), letters, code)))
    return Fraction(count, tag_count(n))


def _shard(n: int, code: CodeConfig, letters: str, trials: int, seq: np.random.SeedSequence) -> int:
    rng = np.random.default_rng(seq)
    k = n // 3
    base = np.repeat(np.arange(3, dtype=np.int8), k)
    labels = rng.permuted(np.tile(base, (trials, 1)), axis=1)
    return int(np.sum(_undetected(labels, letters, code)))


def undetected_error_prob_montecarlo(n: int, code: CodeConfig, attack: PauliAttack, trials: int,
                                     seed: int, workers: Optional[int] = None) -> Tuple[float, float]:
    """(estimate, binomial stderr). Shards use child seeds, so the worker count never matters."""
    if trials < MIN_TRIALS:
        raise InvariantError(f"Monte Carlo needs at least {MIN_TRIALS} trials, got {trials}")
    if n % 3 or n <= 0:
        raise InvariantError(f"N={n} is not a positive multiple of 3")
    letters = attack_string(n, attack)
    if set(letters) == {"I"}:
        return 0.0, 0.0
    sizes = [SHARD_TRIALS] * (trials // SHARD_TRIALS)
    if trials % SHARD_TRIALS:
        sizes.append(trials % SHARD_TRIALS)
    children = seed_children(seed, len(sizes))
    with ThreadPoolExecutor(max_workers=workers or worker_count()) as pool:
        counts = list(pool.map(lambda job: _shard(n, code, letters, *job), zip(sizes, children)))
    p = sum(counts) / trials
    stderr = float(np.sqrt(p * (1 - p) / trials))
    log_message("debug", f"Monte Carlo N={n} d={code.d} {letters}: {p:.5f} +/- {stderr:.5f}")
    return p, stderr
