import math

import numpy as np
import pytest

from ionvqe.optimizer import annealed_nelder_mead, vqe_run
from ionvqe.pauli import PauliString
from ionvqe.pipeline import (
    ScanConfig,
    check_compatible,
    fit_location,
    fit_scan,
    fit_trace,
    frame_rotate,
    grid_axis,
    ground_energies,
    noisy_minimum,
    qubit_reference,
    scan,
    trace_points,
    transform_table,
)
from ionvqe.simulator import NoiseModel, QuantumState
from ionvqe.surface import FitError, exact_ground_energy
from ionvqe.tables import TableError


def test_qubit_reference():
    assert qubit_reference("0011", "jw") == "0011"
    assert qubit_reference("0011", "bk") == "0001"
    with pytest.raises(ValueError):
        qubit_reference("0011", "parity")


def test_transform_reproduces_bundled_tables(h2_fermionic, h2_bk, h2_tapered, h2_jw):
    sub = h2_fermionic.select([0.75, 2.0])
    for mapping, taper, ref in (("jw", False, h2_jw), ("bk", False, h2_bk), ("bk", True, h2_tapered)):
        out, tmap = transform_table(sub, mapping, taper=taper)
        assert (tmap is not None) == taper
        assert out.reference == ref.reference
        for g in out.geometries:
            assert g.operator.allclose(ref.at(g.R).operator, atol=1e-12)


def test_transform_errors(h2_fermionic, h2_bk, caplog):
    with pytest.raises(TableError):
        transform_table(h2_bk, "bk")
    # every JW qubit carries X or Y somewhere, so tapering is a logged no-op
    out, tmap = transform_table(h2_fermionic.select([0.75]), "jw", taper=True)
    assert tmap is None and out.n_qubits == 4 and "nothing tapered" in caplog.text
    with pytest.raises(TableError):
        transform_table(h2_fermionic, "bk", occupation="011")


def test_frame_rotation_preserves_energies(h2_tapered, h2_spec):
    h = h2_tapered.at(0.9).hamiltonian()
    h2, spec2 = frame_rotate(h, h2_spec, "X1")
    assert spec2.reference == "11"
    for th in np.linspace(-1, 2, 7):
        a = QuantumState(2, vector=h2_spec.state([th])).expectation(h)
        b = QuantumState(2, vector=spec2.state([th])).expectation(h2)
        assert a == pytest.approx(b, abs=1e-12)
    with pytest.raises(ValueError):
        frame_rotate(h, h2_spec, "Z1")


def test_grid_axis():
    assert grid_axis(0, 0.3, 0.1) == (0.0, 0.1, 0.2, 0.3)
    assert grid_axis(0, 0.35, 0.1) == (0.0, 0.1, 0.2, 0.3)
    with pytest.raises(ValueError):
        grid_axis(0, 1, 0)
    with pytest.raises(ValueError):
        grid_axis(1, 0, 0.1)


def test_scan_dimension_mismatch(h2_tapered, h2_spec):
    h = h2_tapered.at(0.75).hamiltonian()
    with pytest.raises(ValueError, match="axes"):
        scan(h, h2_spec, ScanConfig((grid_axis(0, 1, 0.5), grid_axis(0, 1, 0.5))))


def test_h2_scan_sinusoid_and_variational_bound(h2_tapered, h2_spec):
    g = h2_tapered.at(0.75)
    h = g.hamiltonian()
    grid = scan(h, h2_spec, ScanConfig((grid_axis(0, 3.1, 0.1),)), g.R)
    e0 = exact_ground_energy(h)
    assert grid.energy.min() >= e0 - 1e-9
    assert fit_scan(grid).E_min == pytest.approx(e0, abs=1e-9)
    with pytest.raises(FitError):
        fit_scan(grid, "quad2d")
    gp = fit_scan(grid, "gpr", n_restarts=1)
    assert gp.method == "gpr" and abs(gp.E_min - e0) < 1e-3


def test_lih_scan_quad2d(lih_table, lih_spec):
    g = lih_table.at(1.6)
    cfg = ScanConfig((grid_axis(2.5, 3.5, 0.1), grid_axis(2.6, 3.6, 0.1)))
    grid = scan(g.hamiltonian(), lih_spec, cfg, g.R)
    assert set(grid.expectations) == {str(p) for p in g.hamiltonian().terms if not p.is_identity()}
    p = fit_scan(grid)
    assert p.method == "quad2d"
    assert abs(p.E_min - exact_ground_energy(g.hamiltonian(), 3)) < 1.6e-3
    with pytest.raises(FitError):
        fit_scan(grid, "sinusoid")


def test_shot_scan_is_seeded(h2_tapered, h2_spec):
    h = h2_tapered.at(0.75).hamiltonian()
    cfg = ScanConfig((grid_axis(0, 1, 0.25),), shots=100, seed=4)
    a, b = scan(h, h2_spec, cfg), scan(h, h2_spec, cfg)
    np.testing.assert_array_equal(a.energy, b.energy)
    assert np.all(a.std > 0)


def test_trace_fits(lih_table, lih_spec):
    h = lih_table.at(1.6).hamiltonian()
    tr = vqe_run(h, lih_spec, shots=500, optimizer="anneal", seed=3, theta0=[2.5, 3.5])
    theta, energy, std = trace_points(tr)
    assert theta.shape == (len(tr.evaluations), 2)
    assert len(trace_points(tr, "sampling")[0]) == len(tr.sampling)
    p = fit_trace(tr, "quad2d", 1.6)
    assert p.method == "vqe+quad2d" and abs(p.E_min - exact_ground_energy(h, 3)) < 0.02
    a, b = fit_location(tr)
    assert abs(a - 2.99) < 0.3 and abs(b - 3.12) < 0.3
    assert fit_trace(tr, "vqe", 1.6).E_min == tr.final_energy()
    with pytest.raises(FitError):
        fit_trace(tr, "sinusoid")
    with pytest.raises(FitError):
        fit_trace(tr, "spline")


def test_noisy_minimum(h2_tapered, h2_spec):
    h = h2_tapered.at(0.75).hamiltonian()
    th, e = noisy_minimum(h, h2_spec)
    assert e == pytest.approx(exact_ground_energy(h), abs=1e-9)
    _, e_noisy = noisy_minimum(h, h2_spec, NoiseModel(ms_fidelity=0.99))
    assert e_noisy > e


def test_check_compatible(h2_fermionic, h2_tapered, lih_spec, h2_spec):
    check_compatible(h2_tapered, h2_spec)
    with pytest.raises(TableError):
        check_compatible(h2_fermionic, h2_spec)
    with pytest.raises(ValueError):
        check_compatible(h2_tapered, lih_spec)
    assert set(ground_energies(h2_tapered.select([0.75]))) == {0.75}
