import itertools
import math

import numpy as np
import pytest
from scipy.linalg import expm

from conftest import kron_string
from ionvqe.circuit import (
    AddressedPi,
    Circuit,
    Gate,
    GlobalMS,
    Idle,
    RotXY,
    RotZ,
    SubsetMS,
    ansatz_circuit,
    compile_pauli_exponential,
    equal_up_to_phase,
    exponential_matrix,
    gate_matrix,
    measurement_prefix,
    refocus_ms,
    unitary_of,
)
from ionvqe.pauli import PauliString


def _xx_sum(qubits, n):
    out = np.zeros((1 << n, 1 << n), dtype=complex)
    for i, j in itertools.combinations(qubits, 2):
        out += kron_string(PauliString([(i, "X"), (j, "X")]), n)
    return out


def test_gate_definitions():
    n = 3
    phi = 0.37
    np.testing.assert_allclose(gate_matrix(GlobalMS(phi), n), expm(-0.5j * phi * _xx_sum(range(3), n)),
                               atol=1e-12)
    np.testing.assert_allclose(gate_matrix(SubsetMS([0, 2], phi), n),
                               expm(-0.5j * phi * _xx_sum([0, 2], n)), atol=1e-12)
    z1 = kron_string(PauliString.parse("Z1"), n)
    np.testing.assert_allclose(gate_matrix(RotZ(1, phi), n), expm(-0.5j * phi * z1), atol=1e-12)
    np.testing.assert_allclose(gate_matrix(AddressedPi(1), n), -1j * z1, atol=1e-12)
    x0, y0 = kron_string(PauliString.parse("X0"), n), kron_string(PauliString.parse("Y0"), n)
    np.testing.assert_allclose(gate_matrix(RotXY(0, phi, 0.4), n),
                               expm(-0.5j * phi * (math.cos(0.4) * x0 + math.sin(0.4) * y0)), atol=1e-12)
    np.testing.assert_allclose(gate_matrix(Idle(1e-3), n), np.eye(8), atol=0)


def test_global_rotation_acts_on_every_qubit():
    u = gate_matrix(RotXY(None, math.pi, 0.0), 2)
    np.testing.assert_allclose(u, -kron_string(PauliString.parse("X0 X1"), 2), atol=1e-12)


def test_gate_validation():
    with pytest.raises(ValueError):
        Gate("CNOT")
    with pytest.raises(ValueError):
        SubsetMS([1], 0.1)
    with pytest.raises(ValueError):
        Circuit(2, (RotZ(2, 0.1),))


def test_composition_order():
    c1 = Circuit(2, (RotXY(0, 0.3), GlobalMS(0.2)))
    c2 = Circuit(2, (RotZ(1, 0.5),), global_phase=0.1)
    np.testing.assert_allclose(unitary_of(c1.then(c2)), unitary_of(c2) @ unitary_of(c1), atol=1e-12)


@pytest.mark.parametrize("g", ["X0", "Y1", "Z0", "X0 Y1", "Y0 X1", "Z0 Z1", "X0 Y1 Z2", "Y0 X1 X2 X3",
                               "Z0 Z1 Z2 Z3", "X1 Y3"])
def test_compile_matches_exponential(g):
    p = PauliString.parse(g)
    n = max(p.max_qubit() + 1, 2)
    for th in (0.0, 0.3, -1.2, 2.9):
        c = compile_pauli_exponential(th, p, n)
        err, _ = equal_up_to_phase(unitary_of(c), expm(-1j * th * kron_string(p, n)))
        assert err < 1e-10


def test_compile_every_pivot_and_refocus():
    p = PauliString.parse("X0 Y1 Z2")
    target = exponential_matrix(0.8, p, 3)
    for pivot in p.qubits:
        c = compile_pauli_exponential(0.8, p, 3, pivot=pivot)
        assert equal_up_to_phase(unitary_of(c), target)[0] < 1e-10
    q = PauliString.parse("X0 Y2")
    c = compile_pauli_exponential(0.8, q, 3, refocus=True)
    assert c.count("SubsetMS") == 0 and c.count("GlobalMS") == 4
    assert equal_up_to_phase(unitary_of(c), exponential_matrix(0.8, q, 3))[0] < 1e-10


def test_compile_rejects_identity_and_oversize():
    with pytest.raises(ValueError):
        compile_pauli_exponential(0.1, PauliString(), 2)
    with pytest.raises(ValueError):
        compile_pauli_exponential(0.1, "X3", 2)
    with pytest.raises(ValueError):
        compile_pauli_exponential(0.1, "X0 X1", 2, pivot=3)


@pytest.mark.parametrize("subset", [(0, 1), (0, 2), (1, 2)])
def test_refocus_equals_direct_subset(subset):
    phi = 0.9
    c = refocus_ms(subset, phi, 3)
    assert [g.variant for g in c.gates] == ["AddressedPi", "GlobalMS", "AddressedPi", "GlobalMS"]
    np.testing.assert_allclose(unitary_of(c), gate_matrix(SubsetMS(subset, phi), 3), atol=1e-10)


def test_refocus_leaves_excluded_qubit_unentangled(rng):
    c = refocus_ms((0, 1), 0.7, 3)
    u = unitary_of(c)
    for _ in range(5):
        qs = [rng.normal(size=2) + 1j * rng.normal(size=2) for _ in range(3)]
        qs = [q / np.linalg.norm(q) for q in qs]
        psi = np.kron(qs[2], np.kron(qs[1], qs[0]))
        out = (u @ psi).reshape(2, 4)  # qubit 2 is the leading index
        rho2 = out @ out.conj().T
        target = np.outer(qs[2], qs[2].conj())
        assert 0.5 * np.abs(np.linalg.eigvalsh(rho2 - target)).sum() < 1e-10


def test_refocus_arguments():
    assert refocus_ms((0, 1), 0.2, 2).gates == (GlobalMS(0.2),)
    with pytest.raises(ValueError):
        refocus_ms((0, 1), 0.2, 4)
    with pytest.raises(ValueError):
        refocus_ms((0,), 0.2, 3)


def test_measurement_prefix_rotates_axis_to_z():
    for axis in "XYZ":
        p = PauliString([(0, axis)])
        u = unitary_of(measurement_prefix(p, 1))
        np.testing.assert_allclose(u @ kron_string(p, 1) @ u.conj().T, kron_string(PauliString.parse("Z0"), 1),
                                   atol=1e-12)
    with pytest.raises(ValueError):
        measurement_prefix(["Q"])


def test_ansatz_circuit_matches_spec_state(lih_spec):
    c = ansatz_circuit(lih_spec, [0.4, -1.1])
    psi = unitary_of(c)[:, int(lih_spec.reference, 2)]
    assert equal_up_to_phase(psi, lih_spec.state([0.4, -1.1]))[0] < 1e-10
    with pytest.raises(ValueError):
        ansatz_circuit(lih_spec, [0.4])


def test_circuit_json_round_trip(tmp_path):
    c = Circuit(3, (GlobalMS(0.5), SubsetMS([0, 2], -0.1), RotXY(None, 0.2, 0.3), AddressedPi(1),
                    Idle(0.002), RotZ(2, 1.0)), global_phase=math.pi)
    c.save(tmp_path / "c.json")
    assert Circuit.load(tmp_path / "c.json") == c
