import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from Linalg_Core.Linalg_Core import H, KrausChannel, StateVector, X, Z, random_state, random_unitary
from Linalg_Core.distances import channel_distance
from MBQC_Engine.MBQC_Engine import (
    ByproductFrame,
    GraphSpec,
    MeasurementPattern,
    MeasurementStep,
    build_cluster,
    correct_byproduct,
    ideal_map,
    measure_site,
    pattern_kraus,
    run_pattern,
)
from MBQC_Engine.compiler import (
    compile_single_qubit,
    compile_state_preparation,
    ladder_pattern,
    ladder_unitary,
    wire_pattern,
    wire_unitary,
)
from Utils.helpers import CapacityError, DimensionError, PatternError

angles = st.floats(min_value=-np.pi, max_value=np.pi, allow_nan=False)


def _phase_distance(a: np.ndarray, b: np.ndarray) -> float:
    """1 - |<a,b>|/dim for equal-size unitaries; zero iff equal up to phase."""
    return 1.0 - abs(np.trace(a.conj().T @ b)) / a.shape[0]


# ---- Graphs ----
def test_edges_are_normalized_and_deduplicated():
    graph = GraphSpec(vertex_count=3, edges=((1, 0), (0, 1), (2, 1)))
    assert graph.edges == ((0, 1), (1, 2))


def test_edge_to_missing_vertex_rejected():
    with pytest.raises(PatternError):
        GraphSpec(vertex_count=2, edges=((0, 2),))


def test_self_loop_rejected():
    with pytest.raises(PatternError):
        GraphSpec(vertex_count=2, edges=((1, 1),))


def test_two_site_cluster_amplitudes():
    state = build_cluster(GraphSpec.linear(2))
    assert np.allclose(state.amplitudes, np.array([1, 1, 1, -1]) / 2)


def test_cluster_cap():
    with pytest.raises(CapacityError):
        build_cluster(GraphSpec.linear(13))


def test_ladder_layers():
    graph = GraphSpec.ladder(3)
    assert graph.vertex_count == 6
    assert graph.last_layer() == [2, 5]
    assert (0, 3) in graph.edges


# ---- Single-site measurement ----
def test_measure_plus_in_x_is_deterministic():
    outcome, rest = measure_site(StateVector.from_bits("+0"), 0, "X", rng=np.random.default_rng(0))
    assert outcome == 1
    assert np.allclose(rest.amplitudes, [1, 0])


def test_forced_zero_probability_outcome_rejected():
    with pytest.raises(PatternError):
        measure_site(StateVector.from_bits("0"), 0, "Z", forced=-1)


def test_measure_site_out_of_range():
    with pytest.raises(DimensionError):
        measure_site(StateVector.from_bits("0"), 1, "Z")


# ---- Pattern validation ----
def test_vertex_measured_twice_rejected():
    with pytest.raises(PatternError):
        MeasurementPattern(steps=(MeasurementStep(vertex=0), MeasurementStep(vertex=0)), output_vertices=(1,))


def test_signal_from_the_future_rejected():
    with pytest.raises(PatternError):
        MeasurementPattern(steps=(MeasurementStep(vertex=0, s_domain=(1,)), MeasurementStep(vertex=1)),
                           output_vertices=(2,))


def test_unknown_basis_rejected():
    with pytest.raises(PatternError):
        MeasurementStep(vertex=0, basis="W")


def test_pattern_must_cover_the_graph():
    _, pattern = wire_pattern([0.1, 0.2])
    with pytest.raises(PatternError):
        pattern.check_graph(GraphSpec.linear(4))


def test_flow_successor_must_be_a_neighbour():
    graph = GraphSpec.linear(3)
    with pytest.raises(PatternError):
        MeasurementPattern.from_flow(graph, [(0, "XY", 0.0), (1, "XY", 0.0)], outputs=[2], flow={0: 2, 1: 2})


def test_angle_offset_only_touches_chosen_vertices():
    _, pattern = wire_pattern([0.1, 0.2])
    shifted = pattern.with_angle_offset(0.5, vertices=[1])
    assert shifted.steps[0].angle == pytest.approx(0.1)
    assert shifted.steps[1].angle == pytest.approx(0.7)


# ---- Byproduct frames ----
def test_frame_from_q_splits_x_then_z():
    frame = ByproductFrame.from_q([1, 0, 0, 1])
    assert frame.x == (1, 0)
    assert frame.z == (0, 1)
    assert np.allclose(frame.restricted(0), X)
    assert np.allclose(frame.restricted(1), Z)


def test_odd_q_rejected():
    with pytest.raises(DimensionError):
        ByproductFrame.from_q([1, 0, 1])


def test_correction_undoes_the_frame():
    state = random_state(2, np.random.default_rng(4))
    frame = ByproductFrame.from_q([1, 1, 0, 1])
    dirty = StateVector(frame.operator() @ state.amplitudes)
    assert correct_byproduct(dirty, frame).fidelity(state) == pytest.approx(1.0, abs=1e-12)


# ---- Determinism ----
@settings(max_examples=15, deadline=None)
@given(thetas=st.lists(angles, min_size=1, max_size=4))
def test_every_branch_of_a_wire_gives_the_same_output(thetas):
    graph, pattern = wire_pattern(thetas)
    expected = StateVector.normalized(wire_unitary(thetas) @ np.ones(2))
    for bits in itertools.product((0, 1), repeat=len(thetas)):
        forced = dict(zip(pattern.measured_vertices, bits))
        run = run_pattern(graph, pattern, forced=forced)
        assert run.corrected().fidelity(expected) == pytest.approx(1.0, abs=1e-9)


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(min_value=0, max_value=2**32 - 1))
def test_quantum_input_wire_is_the_unitary_channel(seed):
    u = random_unitary(2, np.random.default_rng(seed))
    graph, pattern = compile_single_qubit(u, quantum_input=True)
    report = channel_distance(pattern_kraus(graph, pattern), KrausChannel.unitary(u), restarts=0)
    assert report.half_trace_distance <= 1e-9


def test_compiled_unitary_matches_the_ideal_map():
    u = random_unitary(2, np.random.default_rng(1))
    graph, pattern = compile_single_qubit(u, quantum_input=True)
    assert _phase_distance(ideal_map(graph, pattern), u) == pytest.approx(0.0, abs=1e-9)


def test_state_preparation_from_zero():
    graph, pattern = compile_state_preparation(H, initial="0")
    out = StateVector.normalized(ideal_map(graph, pattern)[:, 0])
    assert out.fidelity(StateVector.from_bits("+")) == pytest.approx(1.0, abs=1e-9)


def test_sampled_runs_are_seeded():
    graph, pattern = wire_pattern([0.3, 1.2, -0.4])
    a = run_pattern(graph, pattern, seed=9)
    b = run_pattern(graph, pattern, seed=9)
    assert a.outcomes == b.outcomes
    assert np.array_equal(a.output_state.amplitudes, b.output_state.amplitudes)


def test_leading_z_measurement_deletes_a_vertex():
    graph = GraphSpec.linear(3)
    pattern = MeasurementPattern.from_flow(graph, [(2, "Z", 0.0), (0, "X", 0.0)], outputs=[1], flow={0: 1})
    for bits in itertools.product((0, 1), repeat=2):
        run = run_pattern(graph, pattern, forced={2: bits[0], 0: bits[1]})
        assert run.corrected().fidelity(StateVector.from_bits("0")) == pytest.approx(1.0, abs=1e-9)


def test_ladder_realizes_the_entangling_circuit():
    top, bottom = [0.3, 0.0], [1.1, 0.0]
    graph, pattern = ladder_pattern(top, bottom, quantum_input=True)
    expected = ladder_unitary(top, bottom, quantum_input=True)
    assert _phase_distance(ideal_map(graph, pattern), expected) == pytest.approx(0.0, abs=1e-9)


def test_input_state_size_checked():
    graph, pattern = wire_pattern([0.2], quantum_input=True)
    with pytest.raises(DimensionError):
        run_pattern(graph, pattern, input_state=StateVector.from_bits("00"))


def test_hundred_random_patterns_on_a_five_site_wire():
    rng = np.random.default_rng(2024)
    for _ in range(100):
        thetas = rng.uniform(-np.pi, np.pi, size=4).tolist()
        graph, pattern = wire_pattern(thetas)
        assert graph.vertex_count == 5
        expected = StateVector.normalized(wire_unitary(thetas) @ np.ones(2))
        for bits in itertools.product((0, 1), repeat=4):
            run = run_pattern(graph, pattern, forced=dict(zip(pattern.measured_vertices, bits)))
            assert run.corrected().fidelity(expected) >= 1 - 1e-9


@pytest.mark.parametrize("basis,angle,qubit", [("XY", 0.7, 1), ("Z", 0.0, 2)])
def test_sampled_outcomes_follow_the_born_rule(basis, angle, qubit):
    state = random_state(3, np.random.default_rng(17))
    ket = np.array([1, np.exp(1j * angle)]) / np.sqrt(2) if basis == "XY" else np.array([1, 0])
    projector = [np.eye(2)] * 3
    projector[qubit] = np.outer(ket, ket.conj())
    born = float(np.vdot(state.amplitudes, np.kron(np.kron(*projector[:2]), projector[2]) @ state.amplitudes).real)

    rng = np.random.default_rng(99)
    trials = 10_000
    plus = sum(measure_site(state, qubit, basis, angle, rng=rng)[0] == 1 for _ in range(trials))
    stderr = np.sqrt(born * (1 - born) / trials)
    assert abs(plus / trials - born) <= 3 * stderr
