"""
Exact dense linear algebra for small quantum systems.

Qubit 0 is the most significant tensor factor everywhere in the package:
an n-qubit array reshaped to (2,)*n has axis k for qubit k.
"""
import string
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg as spl

from Utils.helpers import (
    CHANNEL_TOL,
    PSD_TOL,
    STRUCT_TOL,
    CapacityError,
    DimensionError,
    InvariantError,
)

MAX_STATE_QUBITS = 12
MAX_CHANNEL_QUBITS = 7
_PSD_EIGH_MAX_DIM = 256

# ---- Single-qubit constants ----
I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
PAULIS = {"I": I2, "X": X, "Y": Y, "Z": Z}

KET0 = np.array([1, 0], dtype=complex)
KET1 = np.array([0, 1], dtype=complex)
PLUS = np.array([1, 1], dtype=complex) / np.sqrt(2)
MINUS = np.array([1, -1], dtype=complex) / np.sqrt(2)


def _qubits_for(dim: int) -> int:
    n = int(dim).bit_length() - 1
    if dim < 1 or (1 << n) != dim:
        raise DimensionError(f"Dimension {dim} is not a power of two")
    return n


def phase_gate(theta: float) -> np.ndarray:
    """diag(1, e^{-i theta})"""
    return np.array([[1, 0], [0, np.exp(-1j * theta)]], dtype=complex)


def xy_ket(theta: float, outcome_bit: int) -> np.ndarray:
    """(|0> + (-1)^s e^{i theta}|1>)/sqrt(2)"""
    sign = -1.0 if outcome_bit else 1.0
    return np.array([1, sign * np.exp(1j * theta)], dtype=complex) / np.sqrt(2)


def kron_all(ops: Iterable[np.ndarray]) -> np.ndarray:
    out = None
    for op in ops:
        out = op if out is None else np.kron(out, op)
    if out is None:
        return np.ones((1, 1), dtype=complex)
    return out


def pauli_operator(label: str) -> np.ndarray:
    """Tensor product of single-qubit Paulis, e.g. 'IXZ'."""
    try:
        return kron_all(PAULIS[c] for c in label.upper())
    except KeyError as e:
        raise InvariantError(f"Unknown Pauli letter {e}") from e


def _is_psd(m: np.ndarray) -> bool:
    """Smallest eigenvalue >= -PSD_TOL; large matrices try a shifted Cholesky first."""
    if m.shape[0] > _PSD_EIGH_MAX_DIM:
        try:
            spl.cholesky(m + PSD_TOL * np.eye(m.shape[0]), lower=True, check_finite=False)
            return True
        except spl.LinAlgError:
            pass
    return spl.eigvalsh(m, subset_by_index=[0, 0])[0] >= -PSD_TOL


# ---------------- Domain types ----------------
@dataclass(frozen=True, eq=False)
class StateVector:
    amplitudes: np.ndarray

    def __post_init__(self):
        amp = np.array(self.amplitudes, dtype=complex).reshape(-1)
        n = _qubits_for(amp.shape[0])
        if n > MAX_STATE_QUBITS:
            raise CapacityError(f"{n} qubits exceeds the state cap of {MAX_STATE_QUBITS}")
        norm = float(np.vdot(amp, amp).real)
        if abs(norm - 1.0) > STRUCT_TOL:
            raise InvariantError(f"State norm {norm!r} differs from 1")
        amp.setflags(write=False)
        object.__setattr__(self, "amplitudes", amp)

    @property
    def n(self) -> int:
        return _qubits_for(self.amplitudes.shape[0])

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]

    @classmethod
    def normalized(cls, amplitudes: np.ndarray) -> "StateVector":
        amp = np.asarray(amplitudes, dtype=complex).reshape(-1)
        norm = np.linalg.norm(amp)
        if norm < 1e-15:
            raise InvariantError("Cannot normalize a zero vector")
        return cls(amp / norm)

    @classmethod
    def from_bits(cls, bits: str) -> "StateVector":
        kets = {"0": KET0, "1": KET1, "+": PLUS, "-": MINUS}
        vec = np.ones(1, dtype=complex)
        for b in bits:
            vec = np.kron(vec, kets[b])
        return cls(vec)

    def tensor(self) -> np.ndarray:
        return self.amplitudes.reshape((2,) * self.n)

    def density(self) -> "DensityOperator":
        return DensityOperator.from_matrix(np.outer(self.amplitudes, self.amplitudes.conj()))

    def fidelity(self, other: "StateVector") -> float:
        if other.dim != self.dim:
            raise DimensionError("Fidelity between states of different dimension")
        return float(abs(np.vdot(self.amplitudes, other.amplitudes)) ** 2)


@dataclass(frozen=True, eq=False)
class DensityOperator:
    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionError(f"Density operator must be square, got {m.shape}")
        n = _qubits_for(m.shape[0])
        if n > MAX_STATE_QUBITS:
            raise CapacityError(f"{n} qubits exceeds the state cap of {MAX_STATE_QUBITS}")
        if np.max(np.abs(m - m.conj().T), initial=0.0) > STRUCT_TOL:
            raise InvariantError("Density operator is not Hermitian")
        tr = np.trace(m).real
        if abs(tr - 1.0) > STRUCT_TOL:
            raise InvariantError(f"Density operator trace {tr!r} differs from 1")
        if not _is_psd(m):
            raise InvariantError("Density operator is not positive semidefinite")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def n(self) -> int:
        return _qubits_for(self.matrix.shape[0])

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def from_matrix(cls, matrix: np.ndarray) -> "DensityOperator":
        """Hermitize and renormalize numerically drifted matrices (trace within CHANNEL_TOL)."""
        m = np.asarray(matrix, dtype=complex)
        m = (m + m.conj().T) / 2
        tr = np.trace(m).real
        if abs(tr - 1.0) > CHANNEL_TOL:
            raise InvariantError(f"Matrix trace {tr!r} is not 1")
        return cls(m / tr)

    @classmethod
    def maximally_mixed(cls, n: int) -> "DensityOperator":
        return cls(np.eye(2**n, dtype=complex) / 2**n)


@dataclass(frozen=True, eq=False)
class KrausChannel:
    kraus_ops: Tuple[np.ndarray, ...]
    dim_in: int
    dim_out: int

    def __post_init__(self):
        ops = []
        for k in self.kraus_ops:
            k = np.array(k, dtype=complex)
            if k.shape != (self.dim_out, self.dim_in):
                raise DimensionError(
                    f"Kraus operator shape {k.shape} != ({self.dim_out}, {self.dim_in})"
                )
            k.setflags(write=False)
            ops.append(k)
        if not ops:
            raise InvariantError("A channel needs at least one Kraus operator")
        for dim in (self.dim_in, self.dim_out):
            if dim > 1 and _qubits_for(dim) > MAX_CHANNEL_QUBITS:
                raise CapacityError(f"Channel dimension {dim} exceeds the channel cap")
        gram = sum(k.conj().T @ k for k in ops)
        if np.max(np.abs(gram - np.eye(self.dim_in))) > CHANNEL_TOL:
            raise InvariantError("Kraus family is not trace preserving")
        object.__setattr__(self, "kraus_ops", tuple(ops))

    # ---- constructors ----
    @classmethod
    def identity(cls, dim: int) -> "KrausChannel":
        return cls((np.eye(dim, dtype=complex),), dim, dim)

    @classmethod
    def unitary(cls, u: np.ndarray) -> "KrausChannel":
        u = np.asarray(u, dtype=complex)
        return cls((u,), u.shape[1], u.shape[0])

    @classmethod
    def preparation(cls, rho: Union[DensityOperator, StateVector]) -> "KrausChannel":
        """Channel from the trivial (1-dim) system onto rho."""
        if isinstance(rho, StateVector):
            return cls((rho.amplitudes.reshape(-1, 1),), 1, rho.dim)
        w, v = spl.eigh(rho.matrix)
        ops = [np.sqrt(lam) * v[:, [i]] for i, lam in enumerate(w) if lam > 1e-14]
        return cls._renormalized(ops, 1, rho.dim)

    @classmethod
    def discard(cls, dim: int) -> "KrausChannel":
        return cls(tuple(np.eye(dim, dtype=complex)[[i], :] for i in range(dim)), dim, 1)

    @classmethod
    def dephasing(cls, p: float = 1.0) -> "KrausChannel":
        return cls((np.sqrt(1 - p / 2) * I2, np.sqrt(p / 2) * Z), 2, 2)

    @classmethod
    def depolarizing(cls, p: float = 1.0) -> "KrausChannel":
        """Replace with I/2 with probability p."""
        ops = [np.sqrt(1 - 3 * p / 4) * I2] + [np.sqrt(p / 4) * P for P in (X, Y, Z)]
        return cls(tuple(ops), 2, 2)

    @classmethod
    def pauli_channel(cls, probs: dict) -> "KrausChannel":
        ops = [np.sqrt(p) * pauli_operator(label) for label, p in probs.items() if p > 0]
        dim = ops[0].shape[0]
        return cls(tuple(ops), dim, dim)

    @classmethod
    def mixture(cls, channels: Sequence["KrausChannel"], weights: Sequence[float]) -> "KrausChannel":
        first = channels[0]
        ops = []
        for ch, w in zip(channels, weights):
            if (ch.dim_in, ch.dim_out) != (first.dim_in, first.dim_out):
                raise DimensionError("Mixed channels must share dimensions")
            if w > 0:
                ops.extend(np.sqrt(w) * k for k in ch.kraus_ops)
        return cls(tuple(ops), first.dim_in, first.dim_out)

    @classmethod
    def from_choi(cls, choi: np.ndarray, dim_in: int, dim_out: int) -> "KrausChannel":
        """Choi matrix J = sum_ij |i><j| (x) E(|i><j|), input factor first."""
        choi = (choi + choi.conj().T) / 2
        w, v = spl.eigh(choi)
        ops = []
        for lam, vec in zip(w, v.T):
            if lam > 1e-13:
                ops.append(np.sqrt(lam) * vec.reshape(dim_in, dim_out).T)
        return cls._renormalized(ops, dim_in, dim_out)

    @classmethod
    def _renormalized(cls, ops: List[np.ndarray], dim_in: int, dim_out: int) -> "KrausChannel":
        # Small-eigenvalue truncation leaves sum K^dag K = G with G ~ I; whiten by G^{-1/2}.
        gram = sum(k.conj().T @ k for k in ops)
        w, v = spl.eigh((gram + gram.conj().T) / 2)
        if np.min(w) < 0.5:
            raise InvariantError("Kraus family is far from trace preserving")
        inv_sqrt = (v * (1 / np.sqrt(w))) @ v.conj().T
        return cls(tuple(k @ inv_sqrt for k in ops), dim_in, dim_out)

    # ---- algebra ----
    def apply_matrix(self, m: np.ndarray) -> np.ndarray:
        if m.shape != (self.dim_in, self.dim_in):
            raise DimensionError(f"Channel expects dim {self.dim_in}, got {m.shape}")
        return sum(k @ m @ k.conj().T for k in self.kraus_ops)

    def adjoint_apply(self, w: np.ndarray) -> np.ndarray:
        return sum(k.conj().T @ w @ k for k in self.kraus_ops)

    def then(self, other: "KrausChannel") -> "KrausChannel":
        """other after self."""
        if other.dim_in != self.dim_out:
            raise DimensionError("Cannot compose channels with mismatched dimensions")
        ops = [b @ a for b in other.kraus_ops for a in self.kraus_ops]
        return KrausChannel(tuple(_prune(ops)), self.dim_in, other.dim_out)

    def tensor(self, other: "KrausChannel") -> "KrausChannel":
        ops = [np.kron(a, b) for a in self.kraus_ops for b in other.kraus_ops]
        return KrausChannel(tuple(_prune(ops)), self.dim_in * other.dim_in, self.dim_out * other.dim_out)

    def choi(self) -> np.ndarray:
        vecs = [k.T.reshape(-1) for k in self.kraus_ops]
        return sum(np.outer(v, v.conj()) for v in vecs)

    def extended(self, probe_dim: int) -> "KrausChannel":
        """I_probe (x) self."""
        return KrausChannel.identity(probe_dim).tensor(self) if probe_dim > 1 else self


def _prune(ops: List[np.ndarray]) -> List[np.ndarray]:
    kept = [k for k in ops if np.max(np.abs(k)) > 1e-15]
    return kept or ops[:1]


# ---------------- Operations ----------------
StateOrOperator = Union[StateVector, DensityOperator, np.ndarray]


def tensor(a: StateOrOperator, b: StateOrOperator) -> StateOrOperator:
    if isinstance(a, StateVector) and isinstance(b, StateVector):
        return StateVector(np.kron(a.amplitudes, b.amplitudes))
    if isinstance(a, DensityOperator) and isinstance(b, DensityOperator):
        return DensityOperator(np.kron(a.matrix, b.matrix))
    if isinstance(a, np.ndarray) and isinstance(b, np.ndarray):
        if a.ndim != b.ndim:
            raise DimensionError("Cannot tensor a vector with a matrix")
        return np.kron(a, b)
    raise DimensionError(
        f"Cannot tensor a {type(a).__name__} with a {type(b).__name__}"
    )


def partial_trace_matrix(m: np.ndarray, dims: Sequence[int], keep: Iterable[int]) -> np.ndarray:
    dims = list(dims)
    n = len(dims)
    keep = sorted(set(keep))
    if any(k < 0 or k >= n for k in keep):
        raise DimensionError(f"Keep set {keep} out of range for {n} subsystems")
    if int(np.prod(dims)) != m.shape[0]:
        raise DimensionError(f"Subsystem dims {dims} do not multiply to {m.shape[0]}")
    if 2 * n > len(string.ascii_letters):
        raise CapacityError("Too many subsystems for partial trace")
    letters = string.ascii_letters
    rows = list(letters[:n])
    cols = list(letters[n:2 * n])
    for i in range(n):
        if i not in keep:
            cols[i] = rows[i]
    out = "".join(rows[i] for i in keep) + "".join(cols[i] for i in keep)
    reduced = np.einsum("".join(rows) + "".join(cols) + "->" + out, m.reshape(dims + dims))
    d = int(np.prod([dims[i] for i in keep])) if keep else 1
    return reduced.reshape(d, d)


def partial_trace(rho: DensityOperator, dims: Sequence[int], keep: Iterable[int]) -> DensityOperator:
    return DensityOperator.from_matrix(partial_trace_matrix(rho.matrix, dims, keep))


def apply_channel(ch: KrausChannel, rho: DensityOperator) -> DensityOperator:
    if rho.dim != ch.dim_in:
        raise DimensionError(f"Channel input dim {ch.dim_in} != state dim {rho.dim}")
    return DensityOperator.from_matrix(ch.apply_matrix(rho.matrix))


def apply_unitary(u: np.ndarray, rho: DensityOperator) -> DensityOperator:
    return DensityOperator.from_matrix(u @ rho.matrix @ u.conj().T)


def embed_operator(op: np.ndarray, qubits: Sequence[int], n: int) -> np.ndarray:
    """Full 2^n matrix acting as op on the listed qubits (in the listed order)."""
    k = len(qubits)
    t = op.reshape((2,) * (2 * k))
    full = np.eye(2**n, dtype=complex).reshape((2,) * (2 * n))
    # contract op's input legs with the identity's row legs on the chosen qubits
    full = np.tensordot(t, full, axes=(list(range(k, 2 * k)), list(qubits)))
    full = np.moveaxis(full, list(range(k)), list(qubits))
    return full.reshape(2**n, 2**n)


# ---------------- Random objects ----------------
def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_state(n: int, rng: np.random.Generator) -> StateVector:
    return StateVector.normalized(rng.standard_normal(2**n) + 1j * rng.standard_normal(2**n))


def random_density(n: int, rng: np.random.Generator, rank: Optional[int] = None) -> DensityOperator:
    dim = 2**n
    rank = rank or dim
    g = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
    m = g @ g.conj().T
    return DensityOperator.from_matrix(m / np.trace(m).real)


def random_channel(dim_in: int, rng: np.random.Generator, dim_out: Optional[int] = None,
                   rank: int = 2) -> KrausChannel:
    """Random CPTP map from a random Stinespring isometry."""
    dim_out = dim_out or dim_in
    iso = random_unitary(dim_out * rank, rng)[:, :dim_in] if dim_out * rank >= dim_in else None
    if iso is None:
        raise DimensionError("Kraus rank too small for an isometry")
    ops = [iso[r * dim_out:(r + 1) * dim_out, :] for r in range(rank)]
    return KrausChannel(tuple(ops), dim_in, dim_out)
