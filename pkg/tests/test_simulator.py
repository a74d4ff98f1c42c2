import math

import numpy as np
import pytest

from conftest import kron_string
from ionvqe.circuit import Circuit, GlobalMS, Idle, RotXY, RotZ, SubsetMS, ansatz_circuit, unitary_of
from ionvqe.kernels import collective_dephase, dephase
from ionvqe.pauli import DenseLimitError, PauliString
from ionvqe.simulator import (
    NoiseModel,
    QuantumState,
    apply_noise,
    dephasing_kraus,
    depolarize,
    depolarizing_kraus,
    make_rng,
    run,
    run_density,
    run_statevector,
    sample,
)


def _random_rho(rng, n):
    a = rng.normal(size=(1 << n, 1 << n)) + 1j * rng.normal(size=(1 << n, 1 << n))
    r = a @ a.conj().T
    return np.ascontiguousarray(r / np.trace(r))


def test_rng_streams_are_reproducible_and_distinct():
    a = make_rng(7, 1, 2).random(4)
    np.testing.assert_array_equal(a, make_rng(7, 1, 2).random(4))
    assert not np.allclose(a, make_rng(7, 1, 3).random(4))
    assert not np.allclose(a, make_rng(7, 2, 2).random(4))


def test_basis_state_convention():
    s = QuantumState.basis("01")
    assert s.vector[1] == 1
    assert s.expectation(PauliString.parse("Z0")) == -1
    assert s.expectation(PauliString.parse("Z1")) == 1
    with pytest.raises(ValueError):
        QuantumState.basis("01", 3)
    with pytest.raises(ValueError):
        QuantumState(2)


def test_statevector_matches_unitary(rng):
    c = Circuit(3, (RotXY(0, 0.3, 0.2), GlobalMS(0.7), RotZ(2, -0.4), SubsetMS([1, 2], 0.5)),
                global_phase=0.25)
    psi0 = rng.normal(size=8) + 1j * rng.normal(size=8)
    psi0 /= np.linalg.norm(psi0)
    out = run_statevector(c, psi0)
    np.testing.assert_allclose(out.vector, unitary_of(c) @ psi0, atol=1e-12)


def test_density_without_noise_matches_statevector(lih_spec):
    c = ansatz_circuit(lih_spec, [0.4, 1.3])
    pure = run_statevector(c, lih_spec.reference)
    mixed = run_density(c, lih_spec.reference, NoiseModel.off())
    np.testing.assert_allclose(mixed.rho, pure.density(), atol=1e-12)


def test_noise_parameters():
    nm = NoiseModel(T2=0.04, ms_fidelity=0.99)
    assert nm.p_d(100e-6) == pytest.approx(1 - math.exp(-100e-6 / 0.04))
    assert nm.sigma2(100e-6) == pytest.approx(2 * 100e-6 / 0.04)
    assert nm.p_ms(2) == pytest.approx(0.01 * 15 / 14)
    assert nm.duration(GlobalMS(0.1)) == 100e-6
    assert nm.duration(RotXY(None, 0.1)) == 10e-6
    assert nm.duration(RotZ(0, 0.1)) == 20e-6
    assert nm.duration(Idle(0.02)) == 0.02


@pytest.mark.parametrize("kw", [{"dephasing": "loud"}, {"T2": 0}, {"ms_fidelity": 0}, {"ms_fidelity": 0.05}])
def test_noise_model_validation(kw):
    with pytest.raises(ValueError):
        NoiseModel(**kw)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_kraus_sets_are_complete(k):
    for ops in (dephasing_kraus(0.2), depolarizing_kraus(k, 0.3)):
        d = ops[0].shape[0]
        total = sum(K.conj().T @ K for K in ops)
        np.testing.assert_allclose(total, np.eye(d), atol=1e-12)


def test_depolarize_matches_kraus_sum(rng):
    rho = _random_rho(rng, 2)
    ops = depolarizing_kraus(2, 0.1)
    expected = sum(K @ rho @ K.conj().T for K in ops)
    np.testing.assert_allclose(depolarize(rho, [0, 1], 0.1), expected, atol=1e-12)


def test_dephase_matches_kraus_on_one_qubit(rng):
    rho = _random_rho(rng, 2)
    z1 = kron_string(PauliString.parse("Z1"), 2)
    expected = 0.8 * rho + 0.2 * z1 @ rho @ z1
    np.testing.assert_allclose(dephase(rho, 1, 0.2), expected, atol=1e-12)


def test_collective_dephasing_closed_form(rng):
    n, s2 = 3, 0.3
    rho = _random_rho(rng, n)
    out = collective_dephase(rho, n, s2)
    w = np.array([n - 2 * bin(k).count("1") for k in range(1 << n)])
    factor = np.exp(-s2 * (w[:, None] - w[None, :]) ** 2 / 8)
    np.testing.assert_allclose(out, rho * factor, atol=1e-12)
    # equal-weight superpositions are untouched
    psi = np.zeros(8, dtype=complex)
    psi[0b001] = psi[0b010] = 1 / math.sqrt(2)
    r = np.outer(psi, psi.conj())
    np.testing.assert_allclose(collective_dephase(r, n, 5.0), r, atol=1e-14)


@pytest.mark.parametrize("mode", ["iid", "collective"])
def test_channels_preserve_trace_and_positivity(lih_spec, mode):
    noise = NoiseModel(ms_fidelity=0.95, dephasing=mode)
    st = run_density(ansatz_circuit(lih_spec, [0.9, 2.1], refocus=True), lih_spec.reference, noise)
    st.validate()
    assert abs(np.trace(st.rho) - 1) < 1e-12
    assert st.fidelity(lih_spec.state([0.9, 2.1])) < 1


def test_apply_noise_only_for_ms_depolarizing(rng):
    rho = _random_rho(rng, 2)
    nm = NoiseModel(dephasing="off", ms_fidelity=0.9)
    np.testing.assert_array_equal(apply_noise(rho, RotZ(0, 0.1), nm, 2), rho)
    assert not np.allclose(apply_noise(rho, GlobalMS(0.1), nm, 2), rho)


def test_run_picks_backend(lih_spec):
    c = ansatz_circuit(lih_spec, [0.1, 0.2])
    assert run(c, lih_spec.reference).is_pure
    assert not run(c, lih_spec.reference, NoiseModel()).is_pure


def test_density_limit():
    with pytest.raises(DenseLimitError):
        run_density(Circuit(9), 0)


def test_sampling_is_deterministic():
    st = QuantumState(2, vector=np.full(4, 0.5, dtype=complex))
    a = sample(st, 1000, seed=3, stream=1, index=2)
    assert a == sample(st, 1000, seed=3, stream=1, index=2)
    assert sum(a.values()) == 1000
    assert a != sample(st, 1000, seed=4, stream=1, index=2)
    with pytest.raises(ValueError):
        sample(st, 0, 0)
