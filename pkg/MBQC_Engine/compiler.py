"""
Small compiler: single-qubit unitaries on wires, CZ through ladder rungs.

Every XY(theta) step on a wire applies J(theta) = H diag(1, e^{-i theta}).
"""
from typing import Optional, Sequence, Tuple

import numpy as np

from Linalg_Core.Linalg_Core import H, phase_gate
from MBQC_Engine.MBQC_Engine import GraphSpec, MeasurementPattern
from Utils.helpers import DimensionError

CZ = np.diag([1, 1, 1, -1]).astype(complex)


def wire_gate(theta: float) -> np.ndarray:
    return H @ phase_gate(theta)


def wire_unitary(angles: Sequence[float]) -> np.ndarray:
    u = np.eye(2, dtype=complex)
    for theta in angles:
        u = wire_gate(theta) @ u
    return u


def wire_pattern(angles: Sequence[float], quantum_input: bool = False) -> Tuple[GraphSpec, MeasurementPattern]:
    """Linear cluster of len(angles)+1 sites; the last site is the output."""
    n = len(angles) + 1
    graph = GraphSpec.linear(n)
    pattern = MeasurementPattern.from_flow(
        graph,
        [(i, "XY", float(theta)) for i, theta in enumerate(angles)],
        outputs=[n - 1],
        flow={i: i + 1 for i in range(n - 1)},
        inputs=[0] if quantum_input and n > 1 else [],
    )
    return graph, pattern


def euler_angles(u: np.ndarray) -> Tuple[float, float, float]:
    """Wire angles (t1, t2, t3) with u ~ J(0) J(t3) J(t2) J(t1) up to global phase."""
    u = np.asarray(u, dtype=complex)
    if u.shape != (2, 2):
        raise DimensionError("Only single-qubit unitaries compile onto a wire")
    v = u / np.sqrt(np.linalg.det(u))
    alpha, beta = v[0, 0], v[1, 0]
    b = 2 * np.arctan2(abs(beta), abs(alpha))
    arg_a = np.angle(alpha) if abs(alpha) > 1e-12 else 0.0
    arg_b = np.angle(beta) if abs(beta) > 1e-12 else 0.0
    a = -arg_a + arg_b + np.pi / 2
    c = -arg_a - arg_b - np.pi / 2
    return float(-c), float(-b), float(-a)


def compile_single_qubit(u: np.ndarray, quantum_input: bool = False) -> Tuple[GraphSpec, MeasurementPattern]:
    t1, t2, t3 = euler_angles(u)
    return wire_pattern([t1, t2, t3, 0.0], quantum_input=quantum_input)


def compile_state_preparation(u: np.ndarray, initial: str = "+") -> Tuple[GraphSpec, MeasurementPattern]:
    """Wire pattern producing u|initial> from the |+> of the first site."""
    fold = np.eye(2, dtype=complex) if initial == "+" else H
    return compile_single_qubit(np.asarray(u) @ fold)


def ladder_pattern(top: Sequence[float], bottom: Sequence[float],
                   rungs: Optional[Sequence[int]] = None,
                   quantum_input: bool = False) -> Tuple[GraphSpec, MeasurementPattern]:
    """
    Two wires measured column by column; a rung at column c applies CZ
    between the logical qubits while they sit on column c.
    """
    if len(top) != len(bottom):
        raise DimensionError("Both ladder rows need the same number of angles")
    cols = len(top) + 1
    if rungs is None:
        rungs = range(1 if quantum_input else 0, cols)
    graph = GraphSpec.ladder(cols, rungs)
    measurements = []
    for c in range(cols - 1):
        measurements.append((c, "XY", float(top[c])))
        measurements.append((cols + c, "XY", float(bottom[c])))
    flow = {r * cols + c: r * cols + c + 1 for r in (0, 1) for c in range(cols - 1)}
    pattern = MeasurementPattern.from_flow(
        graph, measurements, outputs=[cols - 1, 2 * cols - 1], flow=flow,
        inputs=[0, cols] if quantum_input else [],
    )
    return graph, pattern


def ladder_unitary(top: Sequence[float], bottom: Sequence[float],
                   rungs: Optional[Sequence[int]] = None, quantum_input: bool = False) -> np.ndarray:
    cols = len(top) + 1
    rungs = set(range(1 if quantum_input else 0, cols) if rungs is None else rungs)
    u = np.eye(4, dtype=complex)
    for c in range(cols):
        if c in rungs:
            u = CZ @ u
        if c < cols - 1:
            u = np.kron(wire_gate(top[c]), wire_gate(bottom[c])) @ u
    return u
