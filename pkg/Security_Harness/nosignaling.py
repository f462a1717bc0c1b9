"""
Empirical no-signaling test: Bob's outcome statistics must not depend on
Alice's setting. Alice measures her half of the shared state first; Bob
then measures what her measurement left behind.
"""
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel
from scipy.stats import chi2, chi2_contingency, ncx2

from Linalg_Core.Linalg_Core import StateVector
from MBQC_Engine.MBQC_Engine import measure_site, outcome_probabilities
from Utils.helpers import InvariantError, log_message, seed_children, worker_count

Backend = Literal["quantum", "planted"]
MIN_TRIALS = 10_000
MIN_EXPECTED = 5.0
PLANTED_BIAS = 0.05


def bell_pair() -> StateVector:
    return StateVector(np.array([1, 0, 0, 1], dtype=complex) / np.sqrt(2))


def _after_alice(state: StateVector, x: str) -> List[Tuple[float, Optional[StateVector]]]:
    """(probability, Bob's qubit) for each of Alice's outcome bits under setting x."""
    if state.n != 2:
        raise InvariantError("The shared state must have two qubits")
    branches = []
    for bit, p in enumerate(outcome_probabilities(state, 0, x)):
        rest = measure_site(state, 0, x, forced=1 - 2 * bit)[1] if p > 1e-15 else None
        branches.append((float(p), rest))
    return branches


def _bob_conditional(rest: StateVector, y: str, backend: Backend, x_index: int) -> np.ndarray:
    """P(b | a, x, y). The planted device sometimes outputs a bit keyed to Alice's setting."""
    cond = outcome_probabilities(rest, 0, y)
    if backend == "planted":
        leak = np.eye(2)[0 if x_index % 2 else 1]
        cond = (1 - 2 * PLANTED_BIAS) * cond + 2 * PLANTED_BIAS * leak
    return cond


def joint_probabilities(state: StateVector, x: str, y: str, backend: Backend = "quantum",
                        x_index: int = 0) -> np.ndarray:
    """P(a, b | x, y) for Alice on qubit 0 followed by Bob on qubit 1."""
    probs = np.zeros((2, 2))
    for a, (p, rest) in enumerate(_after_alice(state, x)):
        if rest is not None:
            probs[a] = p * _bob_conditional(rest, y, backend, x_index)
    return probs


def bob_marginal(state: StateVector, x: str, y: str, backend: Backend = "quantum",
                 x_index: int = 0) -> np.ndarray:
    """P(b | x, y)."""
    return joint_probabilities(state, x, y, backend, x_index).sum(axis=0)


def sample_bob_counts(state: StateVector, x: str, y: str, trials: int, rng: np.random.Generator,
                      backend: Backend = "quantum", x_index: int = 0) -> np.ndarray:
    """Bob's outcome counts over `trials` rounds of Alice-then-Bob measurements."""
    branches = _after_alice(state, x)
    alice_counts = rng.multinomial(trials, [p for p, _ in branches])
    counts = np.zeros(2, dtype=np.int64)
    for (_, rest), count in zip(branches, alice_counts):
        if count:
            counts += rng.multinomial(count, _bob_conditional(rest, y, backend, x_index))
    return counts


def _merge_sparse(table: np.ndarray) -> np.ndarray:
    """Merge outcome columns whose expected counts fall below 5."""
    table = table[:, table.sum(axis=0) > 0]
    while table.shape[1] > 1:
        expected = np.outer(table.sum(axis=1), table.sum(axis=0)) / table.sum()
        low = np.where(expected.min(axis=0) < MIN_EXPECTED)[0]
        if not low.size:
            break
        j = int(low[0])
        other = j - 1 if j > 0 else j + 1
        table[:, other] += table[:, j]
        table = np.delete(table, j, axis=1)
    return table


def homogeneity_pvalue(table: np.ndarray) -> float:
    table = _merge_sparse(np.asarray(table, dtype=float))
    if table.shape[1] < 2 or table.shape[0] < 2:
        return 1.0
    _, p, _, _ = chi2_contingency(table, correction=False)
    return float(p)


def nosignaling_test(shared_state: StateVector, x_settings: Sequence[str], y_settings: Sequence[str],
                     trials: int, seed: int, backend: Backend = "quantum") -> Dict[str, float]:
    """p-value of the homogeneity test of P(b | x, y) across x, per Bob setting y."""
    if trials < MIN_TRIALS:
        raise InvariantError(f"No-signaling test needs at least {MIN_TRIALS} trials, got {trials}")
    rng = np.random.default_rng(seed)
    out = {}
    for y in y_settings:
        rows = [sample_bob_counts(shared_state, x, y, trials, rng, backend, i) for i, x in enumerate(x_settings)]
        out[y] = homogeneity_pvalue(np.array(rows))
    return out


class BatchSummary(BaseModel):
    batches: int
    rejections: int
    alpha: float
    analytic_power: Optional[float] = None

    @property
    def observed_power(self) -> float:
        return self.rejections / self.batches if self.batches else 0.0


def nosignaling_batches(batches: int = 50, trials: int = 100_000, seed: int = 0, alpha: float = 0.01,
                        backend: Backend = "quantum", shared_state: Optional[StateVector] = None,
                        settings: Tuple[str, ...] = ("X", "Z"), workers: Optional[int] = None) -> BatchSummary:
    """Independent batches; a batch rejects when any Bob setting rejects at alpha / #settings."""
    state = shared_state or bell_pair()
    children = seed_children(seed, batches)

    def one(seq: np.random.SeedSequence) -> bool:
        pvalues = nosignaling_test(state, settings, settings, trials, int(seq.generate_state(1)[0]), backend)
        return min(pvalues.values()) < alpha / len(pvalues)

    with ThreadPoolExecutor(max_workers=workers or worker_count()) as pool:
        rejected = list(pool.map(one, children))
    power = planted_power(state, settings, trials, alpha / len(settings)) if backend == "planted" else None
    summary = BatchSummary(batches=batches, rejections=sum(rejected), alpha=alpha, analytic_power=power)
    log_message("check", f"no-signaling [{backend}]: {summary.rejections}/{batches} batches rejected")
    return summary


def planted_power(state: StateVector, settings: Sequence[str], trials: int, alpha: float = 0.01) -> float:
    """Analytic power of one Bob setting's chi-square test against the planted leak."""
    y = settings[0]
    rows = np.array([bob_marginal(state, x, y, "planted", i) for i, x in enumerate(settings)])
    joint = rows / len(settings)
    expected = np.outer(joint.sum(axis=1), joint.sum(axis=0))
    mask = expected > 0
    noncentrality = trials * len(settings) * float(np.sum((joint[mask] - expected[mask]) ** 2 / expected[mask]))
    df = (len(settings) - 1) * (rows.shape[1] - 1)
    critical = chi2.ppf(1 - alpha, df)
    return float(ncx2.sf(critical, df, noncentrality))
