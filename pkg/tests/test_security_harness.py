import numpy as np
import pytest

from Adversary_Models.Adversary_Models import AdversaryStrategy, cheating_device, scripted_devices, strategy_library
from Linalg_Core.Linalg_Core import DensityOperator, StateVector, random_state
from MA_Protocol.MA_Protocol import BobImplementation, bob_honest_noverify
from MA_Protocol.devices import HONEST_DEVICE
from MBQC_Engine.MBQC_Engine import build_cluster
from MBQC_Engine.compiler import wire_pattern
from Security_Harness.Security_Harness import (
    CheckReport,
    DistinguisherConfig,
    IdealFunctionality,
    SimulatorSigma,
    accepted_weight,
    adversarial_family,
    build_ideal_system,
    build_real_system,
    check_blindness_noverify,
    check_bob_view_blindness,
    check_correctness,
    check_security_verify,
    decompose_flagged_output,
)
from Security_Harness.composition import parallel_composition_check, serial_composition_check
from Security_Harness.nosignaling import (
    bell_pair,
    bob_marginal,
    homogeneity_pvalue,
    joint_probabilities,
    nosignaling_batches,
    nosignaling_test,
    planted_power,
    sample_bob_counts,
)
from Utils.helpers import DecompositionError, DimensionError, InvariantError

PLUS = np.ones(2) / np.sqrt(2)
MINUS = np.array([1, -1]) / np.sqrt(2)


def _flagged(accepted: np.ndarray, rejected: np.ndarray) -> DensityOperator:
    return DensityOperator.from_matrix(np.kron(accepted, np.diag([1, 0])) + np.kron(rejected, np.diag([0, 1])))


# ---- Reports ----
def test_check_report_serializes_pass_by_alias():
    report = CheckReport.make("demo", {"a": 1}, seed=3, measured=0.1, bound=0.2)
    document = report.to_json()
    assert document["pass"] is True
    assert "passed" not in document
    assert len(document["config_hash"]) == 16


# ---- Correctness ----
@pytest.mark.parametrize("variant,angles", [("noverify", [0.3, 1.7]), ("verify", []), ("verify", [0.4])])
def test_honest_systems_match_their_ideal(variant, angles):
    graph, program = wire_pattern(angles)
    assert check_correctness(variant, program, graph).half_trace_distance <= 1e-9


@pytest.mark.parametrize("device", [cheating_device("angle_offset", offset=0.7),
                                    cheating_device("always_accept", output_state="1")])
def test_cheating_devices_are_their_own_ideal(device):
    graph, program = wire_pattern([0.3, 1.7])
    assert check_correctness("noverify", program, graph, device).half_trace_distance <= 1e-9


def test_quantum_input_correctness():
    graph, program = wire_pattern([0.2, 2.2], quantum_input=True)
    assert check_correctness("noverify", program, graph).half_trace_distance <= 1e-9


@pytest.mark.parametrize("device", scripted_devices(), ids=lambda d: d.kind)
def test_scripted_devices_in_the_verified_variant(device):
    graph, program = wire_pattern([0.8])
    assert check_correctness("verify", program, graph, device).half_trace_distance <= 1e-9


@pytest.mark.slow
@pytest.mark.parametrize("variant,sites", [("noverify", 6), ("verify", 2)])
def test_fifty_random_programs_per_variant(variant, sites):
    rng = np.random.default_rng(31)
    for i in range(50):
        thetas = rng.uniform(0, 2 * np.pi, size=sites - 1).tolist()
        graph, program = wire_pattern(thetas, quantum_input=i % 2 == 0)
        for device in [HONEST_DEVICE] + scripted_devices():
            assert check_correctness(variant, program, graph, device, seed=i).half_trace_distance <= 1e-9


# ---- Ideal functionality ----
def test_closed_port_refuses_forwarded_input():
    graph, program = wire_pattern([0.5])
    with pytest.raises(DimensionError):
        IdealFunctionality("noverify", program, graph).channel(forwarded=build_cluster(graph))


def test_simulator_must_match_the_variant():
    graph, program = wire_pattern([0.5])
    with pytest.raises(DimensionError):
        SimulatorSigma("verify").attach(IdealFunctionality("noverify", program, graph))


def test_acceptance_must_not_depend_on_the_input():
    acc = np.kron(np.diag([1.0, 0.0]), np.eye(2) / 2)
    with pytest.raises(DecompositionError):
        accepted_weight(acc, 2, 2)


def test_simulated_wrong_resource_equals_the_real_one():
    graph, program = wire_pattern([0.5, 1.0])
    g_prime = random_state(3, np.random.default_rng(0))
    real = build_real_system("noverify", program, graph,
                             bob=BobImplementation(name="liar", graph=graph, resource=g_prime))
    ideal = build_ideal_system("noverify", program, graph, sigma=SimulatorSigma("noverify"), adversary=g_prime)
    assert np.allclose(real.choi(), ideal.choi(), atol=1e-10)


# ---- Blindness ----
def test_noverify_blindness_against_entangled_families():
    rng = np.random.default_rng(5)
    graph, program = wire_pattern([0.9, -0.4])
    family = [build_cluster(graph), random_state(3, rng), random_state(4, rng)]
    assert check_blindness_noverify(program, graph, family, seed=1).half_trace_distance <= 1e-9


@pytest.mark.slow
def test_blindness_over_fifty_adversarial_states_and_scripted_devices():
    rng = np.random.default_rng(12)
    graph, program = wire_pattern([0.9, -0.4, 2.0])
    family = adversarial_family(graph, 50, rng)
    assert len(family) == 50 and max(s.n for s in family) == 6
    for device in [HONEST_DEVICE] + scripted_devices():
        assert check_blindness_noverify(program, graph, family, device, seed=2).half_trace_distance <= 1e-9


def test_family_state_must_cover_the_resource():
    graph, program = wire_pattern([0.9, -0.4])
    with pytest.raises(DimensionError):
        check_blindness_noverify(program, graph, [random_state(2, np.random.default_rng(0))])


def test_retained_register_reveals_nothing():
    rng = np.random.default_rng(8)
    graph, _ = wire_pattern([0.0, 0.0])
    cheater = BobImplementation(name="entangled", graph=graph, resource=random_state(4, rng), retained_qubits=1)
    for _ in range(20):
        pair = [wire_pattern(rng.uniform(0, 2 * np.pi, size=2).tolist())[1] for _ in range(2)]
        for bob in (bob_honest_noverify(graph), cheater):
            assert check_bob_view_blindness(pair, bob).raw_trace_norm <= 1e-9


# ---- Flag decomposition ----
def test_decomposition_of_a_flip_on_plus():
    # Z on position 0: rejected 1/3, wrongly accepted 1/3, correct 1/3
    accepted = (np.outer(PLUS, PLUS) + np.outer(MINUS, MINUS)) / 3
    rejected = np.outer(PLUS, PLUS) / 3
    split = decompose_flagged_output(_flagged(accepted, rejected), DensityOperator.from_matrix(np.outer(PLUS, PLUS)))
    assert split.alpha == pytest.approx(1 / 3, abs=1e-9)
    assert split.delta == pytest.approx(1 / 3, abs=1e-9)
    assert split.ideal_weight == pytest.approx(1 / 3, abs=1e-9)
    assert np.allclose(split.eta_error.matrix, np.outer(MINUS, MINUS), atol=1e-9)


def test_ideal_outside_the_accepted_support():
    accepted = np.diag([0.5, 0.0])
    rejected = np.diag([0.5, 0.0])
    split = decompose_flagged_output(_flagged(accepted, rejected), DensityOperator.from_matrix(np.diag([0.0, 1.0])))
    assert split.alpha == pytest.approx(0.5)
    assert split.delta == pytest.approx(0.5)


def test_always_rejecting_output():
    split = decompose_flagged_output(_flagged(np.zeros((2, 2)), np.eye(2) / 2),
                                     DensityOperator.from_matrix(np.outer(PLUS, PLUS)))
    assert split.alpha == pytest.approx(1.0)
    assert split.delta == 0.0
    assert split.eta_error is None


def test_decomposition_dimension_mismatch():
    with pytest.raises(DimensionError):
        decompose_flagged_output(_flagged(np.eye(2) / 2, np.zeros((2, 2))), DensityOperator.maximally_mixed(2))


def test_distinguisher_must_fit_the_joint_state():
    with pytest.raises(DimensionError):
        DistinguisherConfig(StateVector.from_bits("0"), d1_qubits=1, d2_qubits=1)


# ---- Security of the verified variant ----
def test_flip_on_plus_sits_exactly_at_twice_delta():
    graph, program = wire_pattern([])
    strategy = AdversaryStrategy(kind="pauli_attack", sites=(0,), paulis=("Z",))
    result = check_security_verify([strategy], program, graph)
    [row] = result.rows
    assert row.delta == pytest.approx(1 / 3)
    assert row.measured == pytest.approx(2 / 3, abs=1e-8)
    assert row.alpha_real == pytest.approx(1 / 3, abs=1e-9)
    assert row.decomposed_delta == pytest.approx(1 / 3, abs=1e-9)
    assert result.passed


@pytest.mark.slow
def test_strategy_library_stays_within_the_bound():
    graph, program = wire_pattern([])
    devices = [cheating_device("always_accept", output_state="1"), cheating_device("trap_blind")]
    result = check_security_verify(strategy_library(3), program, graph, [HONEST_DEVICE] + devices)
    assert result.passed
    assert result.worst_distance <= result.two_delta_bound + 1e-6


# ---- Composition ----
def test_serial_composition_holds():
    result = serial_composition_check(trials=4, seed=2, workers=2)
    assert result.passed
    assert len(result.cases) == 4


def test_parallel_composition_holds():
    assert parallel_composition_check(trials=4, seed=3, workers=2).passed


@pytest.mark.slow
@pytest.mark.parametrize("check", [serial_composition_check, parallel_composition_check])
def test_two_hundred_seeded_constructions_compose(check):
    result = check(trials=200, seed=11, workers=4)
    assert len(result.cases) == 200
    assert result.passed, [c.index for c in result.failures]


def test_exact_constructions_compose_exactly():
    result = serial_composition_check(trials=3, seed=4, exact=True, workers=1)
    assert all(c.eps <= 1e-9 and c.eps_prime <= 1e-9 and c.composed <= 1e-9 for c in result.cases)


# ---- No-signaling ----
def test_bell_marginals_are_uniform():
    for x in ("X", "Z"):
        assert np.allclose(bob_marginal(bell_pair(), x, "Z"), [0.5, 0.5])


def test_planted_backend_leaks_the_setting():
    assert not np.allclose(bob_marginal(bell_pair(), "X", "Z", "planted", 0),
                           bob_marginal(bell_pair(), "Z", "Z", "planted", 1))


def test_homogeneous_table_is_not_rejected():
    assert homogeneity_pvalue(np.array([[500, 500], [500, 500]])) == pytest.approx(1.0)


def test_sparse_columns_are_merged():
    assert homogeneity_pvalue(np.array([[1000, 1], [1000, 0]])) == 1.0


def test_too_few_trials():
    with pytest.raises(InvariantError):
        nosignaling_test(bell_pair(), ["X", "Z"], ["Z"], trials=100, seed=0)


def test_honest_batches_rarely_reject():
    summary = nosignaling_batches(batches=50, trials=100_000, seed=6, workers=2)
    assert summary.rejections <= 3


def test_planted_signal_is_detected():
    summary = nosignaling_batches(batches=50, trials=100_000, seed=7, backend="planted", workers=2)
    assert summary.analytic_power > 0.99
    assert summary.observed_power >= 0.99


def test_alice_then_bob_on_a_bell_pair_agree_in_the_same_basis():
    for x in ("X", "Z"):
        assert np.allclose(joint_probabilities(bell_pair(), x, x), np.eye(2) / 2)


def test_sampled_counts_cover_every_trial():
    counts = sample_bob_counts(bell_pair(), "X", "Z", 10_000, np.random.default_rng(1))
    assert counts.sum() == 10_000
    assert abs(counts[0] - 5_000) <= 3 * np.sqrt(10_000 / 4)


def test_planted_marginal_keeps_the_leak_size():
    leaked = bob_marginal(bell_pair(), "X", "Z", "planted", 0)
    assert np.allclose(leaked, [0.45, 0.55])


def test_planted_power_grows_with_trials():
    assert planted_power(bell_pair(), ("X", "Z"), 1_000) < planted_power(bell_pair(), ("X", "Z"), 100_000)
