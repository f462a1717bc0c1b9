import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from Linalg_Core.Linalg_Core import (
    DensityOperator,
    KrausChannel,
    StateVector,
    X,
    Z,
    apply_channel,
    partial_trace,
    random_channel,
    random_density,
    random_state,
    tensor,
)
from Linalg_Core.distances import DistanceReport, channel_distance, trace_norm_distance
from Utils.helpers import CapacityError, DimensionError, InvariantError

seeds = st.integers(min_value=0, max_value=2**32 - 1)


# ---- States ----
def test_from_bits_orders_qubit_zero_first():
    state = StateVector.from_bits("10")
    assert state.n == 2
    assert np.allclose(state.amplitudes, [0, 0, 1, 0])


def test_state_norm_is_enforced():
    with pytest.raises(InvariantError):
        StateVector(np.array([1, 1], dtype=complex))


def test_state_cap():
    with pytest.raises(CapacityError):
        StateVector.normalized(np.ones(2**13))


def test_non_power_of_two_rejected():
    with pytest.raises(DimensionError):
        StateVector.normalized(np.ones(3))


def test_partial_trace_of_bell_pair_is_maximally_mixed():
    bell = StateVector(np.array([1, 0, 0, 1], dtype=complex) / np.sqrt(2))
    reduced = partial_trace(bell.density(), [2, 2], [0])
    assert np.allclose(reduced.matrix, np.eye(2) / 2)


def test_tensor_rejects_mixed_kinds():
    with pytest.raises(DimensionError):
        tensor(StateVector.from_bits("0"), DensityOperator.maximally_mixed(1))


def test_large_density_must_be_positive():
    diag = np.zeros(2**9)
    diag[:2] = [1.5, -0.5]
    with pytest.raises(InvariantError):
        DensityOperator(np.diag(diag).astype(complex))


def test_large_pure_state_is_accepted():
    rho = random_state(10, np.random.default_rng(2)).density()
    assert rho.n == 10


def test_density_rejects_non_hermitian():
    with pytest.raises(InvariantError):
        DensityOperator(np.array([[1, 1], [0, 0]], dtype=complex))


# ---- Channels ----
def test_kraus_family_must_preserve_trace():
    with pytest.raises(InvariantError):
        KrausChannel((np.eye(2) * 0.5,), 2, 2)


def test_kraus_shape_checked():
    with pytest.raises(DimensionError):
        KrausChannel((np.eye(3),), 2, 2)


@settings(max_examples=20, deadline=None)
@given(seed=seeds)
def test_choi_reconstruction_gives_the_same_action(seed):
    rng = np.random.default_rng(seed)
    ch = random_channel(2, rng, rank=3)
    rebuilt = KrausChannel.from_choi(ch.choi(), 2, 2)
    rho = random_density(1, rng)
    assert np.allclose(ch.apply_matrix(rho.matrix), rebuilt.apply_matrix(rho.matrix), atol=1e-10)


def test_then_applies_self_first():
    flip = KrausChannel.unitary(X)
    prep = KrausChannel.preparation(StateVector.from_bits("0"))
    out = prep.then(flip).apply_matrix(np.ones((1, 1), dtype=complex))
    assert np.allclose(out, np.diag([0, 1]))


def test_discard_and_prepare_replaces_state():
    ch = KrausChannel.discard(2).then(KrausChannel.preparation(StateVector.from_bits("1")))
    out = apply_channel(ch, DensityOperator.maximally_mixed(1))
    assert np.allclose(out.matrix, np.diag([0, 1]))


def test_full_dephasing_of_plus():
    out = apply_channel(KrausChannel.dephasing(1.0), StateVector.from_bits("+").density())
    assert np.allclose(out.matrix, np.eye(2) / 2)


def test_partial_trace_of_a_product_keeps_the_factor():
    rng = np.random.default_rng(0)
    rho, sigma = random_density(1, rng), random_density(1, rng)
    assert np.allclose(partial_trace(tensor(rho, sigma), [2, 2], [0]).matrix, rho.matrix)


def test_pauli_channel_mixture():
    ch = KrausChannel.pauli_channel({"I": 0.5, "Z": 0.5})
    out = ch.apply_matrix(StateVector.from_bits("+").density().matrix)
    assert np.allclose(out, np.eye(2) / 2)


# ---- Distances ----
def test_distance_report_halves_must_agree():
    with pytest.raises(InvariantError):
        DistanceReport(half_trace_distance=0.1, raw_trace_norm=0.5, method="exact_state")


def test_orthogonal_states_are_at_distance_one():
    report = trace_norm_distance(StateVector.from_bits("0").density(), StateVector.from_bits("1").density())
    assert report.half_trace_distance == pytest.approx(1.0)
    assert report.raw_trace_norm == pytest.approx(2.0)


def test_zero_against_plus():
    report = trace_norm_distance(StateVector.from_bits("0").density(), StateVector.from_bits("+").density())
    assert report.half_trace_distance == pytest.approx(1 / np.sqrt(2), abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(seed=seeds)
def test_trace_distance_metric_axioms(seed):
    rng = np.random.default_rng(seed)
    a, b, c = (random_density(2, rng) for _ in range(3))
    ab = trace_norm_distance(a, b).half_trace_distance
    assert trace_norm_distance(a, a).half_trace_distance == pytest.approx(0.0, abs=1e-12)
    assert ab == pytest.approx(trace_norm_distance(b, a).half_trace_distance, abs=1e-12)
    assert ab <= trace_norm_distance(a, c).half_trace_distance + trace_norm_distance(c, b).half_trace_distance + 1e-12


@settings(max_examples=30, deadline=None)
@given(seed=seeds)
def test_channels_never_increase_trace_distance(seed):
    rng = np.random.default_rng(seed)
    a, b = random_density(1, rng), random_density(1, rng)
    ch = random_channel(2, rng)
    before = trace_norm_distance(a, b).half_trace_distance
    after = trace_norm_distance(apply_channel(ch, a), apply_channel(ch, b)).half_trace_distance
    assert after <= before + 1e-12


def test_identical_channels_are_at_zero():
    ch = random_channel(2, np.random.default_rng(3))
    assert channel_distance(ch, ch).raw_trace_norm == 0.0


def test_identity_against_full_depolarizing():
    report = channel_distance(KrausChannel.identity(2), KrausChannel.depolarizing(1.0))
    assert report.half_trace_distance == pytest.approx(0.75, abs=1e-9)


def test_identity_against_z_flip_is_maximal():
    report = channel_distance(KrausChannel.identity(2), KrausChannel.unitary(Z))
    assert report.half_trace_distance == pytest.approx(1.0, abs=1e-9)


def test_refined_search_never_drops_below_choi_bound():
    rng = np.random.default_rng(11)
    a, b = random_channel(2, rng), random_channel(2, rng)
    choi_only = channel_distance(a, b, restarts=0, iterations=0)
    searched = channel_distance(a, b, restarts=4, iterations=50)
    assert searched.raw_trace_norm >= choi_only.raw_trace_norm - 1e-12


def test_channel_dimensions_must_match():
    with pytest.raises(DimensionError):
        channel_distance(KrausChannel.identity(2), KrausChannel.identity(4))


def test_random_state_is_reproducible():
    a = random_state(3, np.random.default_rng(5))
    b = random_state(3, np.random.default_rng(5))
    assert np.array_equal(a.amplitudes, b.amplitudes)
