"""
Serial and parallel composition of approximate constructions on random
single-qubit channels.

A construction is (pi, R, S, sigma) with measured eps = d(pi R, S sigma).
Simulators are random unitaries V; S is built as a mixture of pi R V^dagger
with a random channel, so S sigma is a controlled distance from pi R.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
from pydantic import BaseModel
from tqdm import tqdm

from Linalg_Core.Linalg_Core import KrausChannel, random_channel, random_unitary
from Linalg_Core.distances import channel_distance
from Utils.helpers import DERIVED_TOL, log_message, progress_disabled, seed_children, worker_count

RESTARTS = 8
ITERATIONS = 100


@dataclass(frozen=True)
class Construction:
    pi: KrausChannel
    resource: KrausChannel
    ideal: KrausChannel
    sigma: KrausChannel

    @property
    def real(self) -> KrausChannel:
        return self.resource.then(self.pi)

    @property
    def simulated(self) -> KrausChannel:
        return self.sigma.then(self.ideal)


def _approximate(target: KrausChannel, sigma_u: np.ndarray, rng: np.random.Generator,
                 exact: bool) -> KrausChannel:
    """An ideal resource S with S sigma close to `target` (equal when exact)."""
    undo = KrausChannel.unitary(sigma_u.conj().T)
    base = undo.then(target)
    if exact:
        return base
    weight = float(rng.uniform(0.0, 0.3))
    return KrausChannel.mixture([base, random_channel(2, rng)], [1 - weight, weight])


def random_construction(rng: np.random.Generator, exact: bool = False) -> Construction:
    resource = random_channel(2, rng)
    pi = random_channel(2, rng)
    v = random_unitary(2, rng)
    return Construction(pi, resource, _approximate(resource.then(pi), v, rng, exact), KrausChannel.unitary(v))


def _distance(a: KrausChannel, b: KrausChannel, seed: int) -> float:
    return channel_distance(a, b, restarts=RESTARTS, iterations=ITERATIONS, seed=seed).half_trace_distance


class CompositionCase(BaseModel):
    index: int
    eps: float
    eps_prime: float
    composed: float
    margin: float
    passed: bool


class CompositionResult(BaseModel):
    check: str
    seed: int
    cases: List[CompositionCase]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.cases)

    @property
    def worst_margin(self) -> float:
        return min((c.margin for c in self.cases), default=0.0)

    @property
    def failures(self) -> List[CompositionCase]:
        return [c for c in self.cases if not c.passed]


def _serial_case(index: int, seq: np.random.SeedSequence, exact: bool, identity_outer: bool) -> CompositionCase:
    rng = np.random.default_rng(seq)
    seed = int(seq.generate_state(1)[0])
    first = random_construction(rng, exact)
    # second construction uses S as its resource
    pi2 = KrausChannel.identity(2) if identity_outer else random_channel(2, rng)
    v2 = random_unitary(2, rng)
    ideal2 = _approximate(first.ideal.then(pi2), v2, rng, exact or identity_outer)
    second = Construction(pi2, first.ideal, ideal2, KrausChannel.unitary(v2))

    eps = _distance(first.real, first.simulated, seed)
    eps2 = _distance(second.real, second.simulated, seed)
    composed_real = first.real.then(pi2)
    composed_ideal = first.sigma.then(second.sigma).then(ideal2)
    composed = _distance(composed_real, composed_ideal, seed)
    margin = eps + eps2 + DERIVED_TOL - composed
    return CompositionCase(index=index, eps=eps, eps_prime=eps2, composed=composed, margin=margin, passed=margin >= 0)


def _parallel_case(index: int, seq: np.random.SeedSequence, exact: bool, identity_outer: bool) -> CompositionCase:
    rng = np.random.default_rng(seq)
    seed = int(seq.generate_state(1)[0])
    left = random_construction(rng, exact)
    right = random_construction(rng, exact or identity_outer)
    eps = _distance(left.real, left.simulated, seed)
    eps2 = _distance(right.real, right.simulated, seed)
    composed = _distance(left.real.tensor(right.real), left.simulated.tensor(right.simulated), seed)
    margin = eps + eps2 + DERIVED_TOL - composed
    return CompositionCase(index=index, eps=eps, eps_prime=eps2, composed=composed, margin=margin, passed=margin >= 0)


def _run(check: str, case, trials: int, seed: int, exact: bool, identity_outer: bool,
         workers: Optional[int]) -> CompositionResult:
    children = seed_children(seed, trials)
    with ThreadPoolExecutor(max_workers=workers or worker_count()) as pool:
        futures = [pool.submit(case, i, seq, exact, identity_outer) for i, seq in enumerate(children)]
        cases = [f.result() for f in tqdm(futures, desc=check, disable=progress_disabled(), leave=False)]
    result = CompositionResult(check=check, seed=seed, cases=cases)
    for bad in result.failures:
        log_message("error", f"{check} case {bad.index} (seed {seed}): composed {bad.composed:.3e} "
                             f"> {bad.eps:.3e} + {bad.eps_prime:.3e}")
    return result


def serial_composition_check(trials: int = 200, seed: int = 0, exact: bool = False,
                             identity_outer: bool = False, workers: Optional[int] = None) -> CompositionResult:
    """d(pi' pi R, T sigma' sigma) <= eps + eps' on random triples."""
    return _run("serial_composition", _serial_case, trials, seed, exact, identity_outer, workers)


def parallel_composition_check(trials: int = 200, seed: int = 0, exact: bool = False,
                               identity_outer: bool = False, workers: Optional[int] = None) -> CompositionResult:
    """d(pi R (x) pi' R', S sigma (x) S' sigma') <= eps + eps' on random pairs."""
    return _run("parallel_composition", _parallel_case, trials, seed, exact, identity_outer, workers)
