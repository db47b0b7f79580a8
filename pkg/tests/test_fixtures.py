"""Shipped hydrogen-chain fixtures agree with their frozen reference energies."""

import json
from pathlib import Path

import pytest

from majprop.engine import expectation
from majprop.hamiltonian import build_majorana_hamiltonian
from majprop.integrals import aufbau_occupation, hartree_fock_energy, parse_fcidump
from majprop.oracle import eigensolve_sector

FIXTURES = Path(__file__).parent / "fixtures"


def _load(name):
    tensors = parse_fcidump((FIXTURES / f"{name}.fcidump").read_text())
    sidecar = json.loads((FIXTURES / f"{name}.json").read_text())
    return tensors, sidecar


@pytest.mark.parametrize(
    "name", ["h2_sto3g", "h4_chain_r15", "h4_chain_r20", "h4_chain_r25"]
)
def test_fixture_hartree_fock_energy(name):
    t, ref = _load(name)
    assert t.n_spatial == ref["n_spatial"]
    assert t.n_electrons == ref["n_electrons"]
    h = build_majorana_hamiltonian(t)
    occ = aufbau_occupation(t.n_electrons)
    assert expectation(h, occupation=occ) == pytest.approx(ref["e_hf"], abs=1e-8)
    assert hartree_fock_energy(t) == pytest.approx(ref["e_hf"], abs=1e-8)


@pytest.mark.parametrize(
    "name", ["h2_sto3g", "h4_chain_r15", "h4_chain_r20", "h4_chain_r25"]
)
def test_fixture_ground_energy(name):
    t, ref = _load(name)
    h = build_majorana_hamiltonian(t)
    w, _, _ = eigensolve_sector(h, n_particles=t.n_electrons)
    assert w[0] == pytest.approx(ref["e_fci"], abs=1e-8)
