from typing import Literal, Optional

import numpy as np
import scipy.linalg as spl
from pydantic import BaseModel, ConfigDict, model_validator

from Linalg_Core.Linalg_Core import DensityOperator, KrausChannel
from Utils.helpers import STRUCT_TOL, DimensionError, InvariantError, log_message, rng_for

# Pure-probe ascent only below this joint (probe x system) dimension.
SEARCH_MAX_DIM = 256

DistanceMethod = Literal["exact_state", "choi_bound", "entangled_probe_search"]


class DistanceReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    half_trace_distance: float
    raw_trace_norm: float
    method: DistanceMethod

    @model_validator(mode="after")
    def _check_halves(self):
        if abs(self.raw_trace_norm - 2 * self.half_trace_distance) > STRUCT_TOL:
            raise InvariantError("raw_trace_norm must be twice half_trace_distance")
        if not 0.0 <= self.half_trace_distance <= 1.0:
            raise InvariantError(f"half trace distance {self.half_trace_distance} outside [0, 1]")
        return self

    @classmethod
    def from_raw(cls, raw: float, method: DistanceMethod) -> "DistanceReport":
        raw = float(min(max(raw, 0.0), 2.0))
        return cls(half_trace_distance=raw / 2, raw_trace_norm=raw, method=method)


def trace_norm(m: np.ndarray) -> float:
    """Trace norm of a Hermitian matrix."""
    return float(np.sum(np.abs(spl.eigvalsh((m + m.conj().T) / 2))))


def trace_norm_distance(a: DensityOperator, b: DensityOperator) -> DistanceReport:
    if a.dim != b.dim:
        raise DimensionError(f"Cannot compare states of dimension {a.dim} and {b.dim}")
    return DistanceReport.from_raw(trace_norm(a.matrix - b.matrix), "exact_state")


# ---------------- Channel distance ----------------
def _extended_output(ch: KrausChannel, psi: np.ndarray, probe_dim: int) -> np.ndarray:
    """(I_probe (x) ch)(|psi><psi|) for psi on probe (x) input."""
    mat = psi.reshape(probe_dim, ch.dim_in)
    out = np.zeros((probe_dim * ch.dim_out,) * 2, dtype=complex)
    for k in ch.kraus_ops:
        v = (mat @ k.T).reshape(-1)
        out += np.outer(v, v.conj())
    return out


def _extended_adjoint(ch: KrausChannel, w: np.ndarray, probe_dim: int) -> np.ndarray:
    eye = np.eye(probe_dim, dtype=complex)
    out = np.zeros((probe_dim * ch.dim_in,) * 2, dtype=complex)
    for k in ch.kraus_ops:
        big = np.kron(eye, k)
        out += big.conj().T @ w @ big
    return out


def _probe_gap(ch1: KrausChannel, ch2: KrausChannel, psi: np.ndarray, probe_dim: int) -> np.ndarray:
    return _extended_output(ch1, psi, probe_dim) - _extended_output(ch2, psi, probe_dim)


def max_entangled_probe(probe_dim: int, dim_in: int) -> np.ndarray:
    r = min(probe_dim, dim_in)
    psi = np.zeros(probe_dim * dim_in, dtype=complex)
    for i in range(r):
        psi[i * dim_in + i] = 1.0
    return psi / np.sqrt(r)


def _ascend(ch1: KrausChannel, ch2: KrausChannel, psi: np.ndarray, probe_dim: int,
            iterations: int) -> float:
    best = trace_norm(_probe_gap(ch1, ch2, psi, probe_dim))
    for _ in range(iterations):
        gap = _probe_gap(ch1, ch2, psi, probe_dim)
        w, v = spl.eigh((gap + gap.conj().T) / 2)
        sign_op = (v * np.sign(w)) @ v.conj().T
        pulled = _extended_adjoint(ch1, sign_op, probe_dim) - _extended_adjoint(ch2, sign_op, probe_dim)
        ew, ev = spl.eigh((pulled + pulled.conj().T) / 2)
        psi = ev[:, -1]
        value = trace_norm(_probe_gap(ch1, ch2, psi, probe_dim))
        if value <= best + 1e-13:
            best = max(best, value)
            break
        best = value
    return best


def channel_distance(ch1: KrausChannel, ch2: KrausChannel, probe_dim: Optional[int] = None,
                     restarts: int = 3, iterations: int = 40, seed: int = 0) -> DistanceReport:
    """
    Lower bound on the stabilized distance between two channels.

    The maximally entangled probe gives a certified bound; pure probes on
    probe (x) input are then refined by alternating sign-operator and
    top-eigenvector steps. The result never falls below the entangled bound.
    """
    if (ch1.dim_in, ch1.dim_out) != (ch2.dim_in, ch2.dim_out):
        raise DimensionError("Channels have different input/output dimensions")
    probe_dim = ch1.dim_in if probe_dim is None else probe_dim
    if probe_dim < 1:
        raise DimensionError("probe_dim must be at least 1")

    if ch1 is ch2 or (len(ch1.kraus_ops) == len(ch2.kraus_ops)
                      and all(np.array_equal(a, b) for a, b in zip(ch1.kraus_ops, ch2.kraus_ops))):
        return DistanceReport.from_raw(0.0, "choi_bound")

    psi0 = max_entangled_probe(probe_dim, ch1.dim_in)
    bound = trace_norm(_probe_gap(ch1, ch2, psi0, probe_dim))
    joint = probe_dim * max(ch1.dim_in, ch1.dim_out)
    if joint > SEARCH_MAX_DIM or bound >= 2.0 - 1e-12:
        return DistanceReport.from_raw(bound, "choi_bound")

    best = _ascend(ch1, ch2, psi0, probe_dim, iterations)
    rng = rng_for(seed, 11)
    for _ in range(restarts):
        start = rng.standard_normal(psi0.shape) + 1j * rng.standard_normal(psi0.shape)
        best = max(best, _ascend(ch1, ch2, start / np.linalg.norm(start), probe_dim, iterations))
    if best > bound + 1e-12:
        log_message("debug", f"Probe search raised channel distance {bound:.3e} -> {best:.3e}")
        return DistanceReport.from_raw(best, "entangled_probe_search")
    return DistanceReport.from_raw(bound, "choi_bound")
