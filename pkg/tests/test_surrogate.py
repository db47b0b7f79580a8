"""Surrogate graphs against direct propagation, finite differences, rebuilds."""

import numpy as np
import pytest

import majprop.instances as inst
from majprop import TruncationPolicy, expectation, fock_expectation
from majprop.engine import FermionicCircuit, Gate
from majprop.surrogate import (
    SurrogateGraph,
    UnsupportedPolicyError,
    build_surrogate,
    eval_energy,
    eval_energy_and_gradient,
    extend_surrogate,
)

N = 8
OCC = 0b00001111  # four modes filled
POLICY = TruncationPolicy(length_cutoff=4)


def _instance(rng, n_gates=12):
    h = inst.random_molecular_hamiltonian(N, rng)
    circuit = inst.random_circuit(N, n_gates, rng)
    return h, circuit


@pytest.mark.parametrize("picture", ["heisenberg", "schrodinger"])
def test_eval_matches_direct_propagation(rng, picture):
    h, circuit = _instance(rng)
    graph = build_surrogate(h, circuit, OCC, POLICY, picture)
    for _ in range(20):
        theta = rng.uniform(-np.pi, np.pi, circuit.n_slots)
        direct = expectation(h, circuit, OCC, POLICY, picture, params=theta)
        assert eval_energy(graph, theta) == pytest.approx(direct, abs=1e-12)


@pytest.mark.parametrize("picture", ["heisenberg", "schrodinger"])
def test_zero_angles_give_reference_energy(rng, picture):
    h, circuit = _instance(rng)
    graph = build_surrogate(h, circuit, OCC, POLICY, picture)
    e0 = fock_expectation(h, OCC)
    assert eval_energy(graph, np.zeros(circuit.n_slots)) == pytest.approx(e0, abs=1e-12)


def test_two_pi_periodicity(rng):
    h, circuit = _instance(rng, n_gates=6)
    graph = build_surrogate(h, circuit, OCC, POLICY)
    theta = rng.uniform(-np.pi, np.pi, circuit.n_slots)
    shift = theta + 2.0 * np.pi * rng.integers(-2, 3, theta.size)
    assert eval_energy(graph, shift) == pytest.approx(
        eval_energy(graph, theta), abs=1e-10
    )


@pytest.mark.parametrize("picture", ["heisenberg", "schrodinger"])
def test_gradient_matches_finite_differences(rng, picture):
    h, circuit = _instance(rng, n_gates=8)
    graph = build_surrogate(h, circuit, OCC, POLICY, picture)
    theta = rng.uniform(-np.pi, np.pi, circuit.n_slots)
    energy, grad = eval_energy_and_gradient(graph, theta)
    assert energy == pytest.approx(eval_energy(graph, theta), abs=1e-13)
    step = 1e-5
    for k in range(theta.size):
        plus, minus = theta.copy(), theta.copy()
        plus[k] += step
        minus[k] -= step
        fd = (eval_energy(graph, plus) - eval_energy(graph, minus)) / (2 * step)
        assert grad[k] == pytest.approx(fd, rel=1e-6, abs=1e-9)


def test_gradient_accumulates_over_shared_slots(rng):
    h = inst.random_molecular_hamiltonian(N, rng)
    g1 = int(inst.random_monomial_bits(N, 4, rng))
    g2 = int(inst.random_monomial_bits(N, 4, rng))
    gates = [Gate(g1, slot=0), Gate(g2, slot=0, sign=-1), Gate(g1, slot=1)]
    circuit = FermionicCircuit(N, gates, np.zeros(2))
    graph = build_surrogate(h, circuit, OCC, POLICY)
    theta = rng.uniform(-1.0, 1.0, 2)
    _, grad = eval_energy_and_gradient(graph, theta)
    step = 1e-5
    for k in range(2):
        plus, minus = theta.copy(), theta.copy()
        plus[k] += step
        minus[k] -= step
        fd = (eval_energy(graph, plus) - eval_energy(graph, minus)) / (2 * step)
        assert grad[k] == pytest.approx(fd, rel=1e-6, abs=1e-9)


@pytest.mark.parametrize("picture", ["heisenberg", "schrodinger"])
@pytest.mark.parametrize("where", ["front", "back"])
def test_extend_matches_rebuild(rng, picture, where):
    h, circuit = _instance(rng, n_gates=6)
    graph = build_surrogate(h, circuit, OCC, POLICY, picture)
    gate = Gate(int(inst.random_monomial_bits(N, 4, rng)), slot=circuit.n_slots)
    extended = extend_surrogate(graph, gate, where)

    reference = circuit.copy()
    reference.params = np.append(reference.params, 0.0)
    if where == "front":
        reference.insert_front([gate])
    else:
        reference.append_back([gate])
    rebuilt = build_surrogate(h, reference, OCC, POLICY, picture)

    assert np.array_equal(extended.final_keys, rebuilt.final_keys)
    for _ in range(5):
        theta = rng.uniform(-np.pi, np.pi, circuit.n_slots + 1)
        assert eval_energy(extended, theta) == pytest.approx(
            eval_energy(rebuilt, theta), abs=1e-12
        )
    # the extended graph keeps working as a base for further extensions
    gate2 = Gate(int(inst.random_monomial_bits(N, 4, rng)), slot=circuit.n_slots + 1)
    again = extend_surrogate(extended, gate2, where)
    assert len(again.steps) == len(circuit.gates) + 2


def test_build_ignores_stored_angles(rng):
    h, circuit = _instance(rng, n_gates=6)
    other = circuit.copy()
    other.params = rng.uniform(-np.pi, np.pi, other.n_slots)
    g1 = build_surrogate(h, circuit, OCC, POLICY)
    g2 = build_surrogate(h, other, OCC, POLICY)
    assert np.array_equal(g1.final_keys, g2.final_keys)
    theta = rng.uniform(-np.pi, np.pi, circuit.n_slots)
    assert eval_energy(g1, theta) == eval_energy(g2, theta)


def test_coefficient_policies_are_rejected(rng):
    h, circuit = _instance(rng, n_gates=2)
    for bad in (
        TruncationPolicy(length_cutoff=4, coeff_truncate_tau=1e-8),
        TruncationPolicy(coeff_accept_tau=1e-2),
    ):
        with pytest.raises(UnsupportedPolicyError):
            build_surrogate(h, circuit, OCC, bad)


@pytest.mark.parametrize("picture", ["heisenberg", "schrodinger"])
def test_empty_circuit_evaluates_reference(rng, picture):
    h = inst.random_molecular_hamiltonian(N, rng)
    circuit = FermionicCircuit(N, [], np.zeros(0))
    graph = build_surrogate(h, circuit, OCC, POLICY, picture)
    assert eval_energy(graph, np.zeros(0)) == pytest.approx(
        fock_expectation(h, OCC), abs=1e-12
    )


def test_missing_parameter_slot_raises(rng):
    h, circuit = _instance(rng, n_gates=3)
    graph = build_surrogate(h, circuit, OCC, POLICY)
    with pytest.raises(ValueError, match="slot"):
        eval_energy(graph, np.zeros(circuit.n_slots - 1))


def test_stats_summary(rng):
    h, circuit = _instance(rng, n_gates=5)
    graph = build_surrogate(h, circuit, OCC, POLICY)
    stats = graph.stats()
    assert stats["gates"] == 5
    assert stats["final_layer"] <= stats["max_layer"]
    assert stats["total_edges"] > 0
    assert isinstance(graph, SurrogateGraph)


@pytest.mark.parametrize("picture", ["heisenberg", "schrodinger"])
def test_repeated_evaluation_compiles_without_drift(rng, picture):
    h, circuit = _instance(rng)
    graph = build_surrogate(h, circuit, OCC, POLICY, picture)
    fresh = build_surrogate(h, circuit, OCC, POLICY, picture)
    assert graph._compiled is None
    for call in range(8):
        theta = rng.uniform(-np.pi, np.pi, circuit.n_slots)
        energy, grad = eval_energy_and_gradient(graph, theta)
        assert eval_energy(graph, theta) == pytest.approx(energy, abs=1e-13)
        ref_energy, ref_grad = eval_energy_and_gradient(fresh, theta)
        fresh._evals = 0  # hold the reference graph on the recording pass
        fresh._compiled = None
        assert energy == pytest.approx(ref_energy, abs=1e-13)
        np.testing.assert_allclose(grad, ref_grad, atol=1e-13)
    assert graph._compiled is not None
