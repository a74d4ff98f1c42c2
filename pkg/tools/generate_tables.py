"""Generate the bundled coefficient tables, amplitude files and ansatz files.

Requires pyscf (offline oracle only; not a runtime dependency):

    python tools/generate_tables.py [--out src/ionvqe/data]

Produces

* ``h2_sto3g_{fermionic,jw,bk,bk_tapered}.json``: H2/STO-3G, R = 0.30..3.00 step 0.05;
* ``lih_sto6g_fermionic.json``: LiH/STO-6G natural-orbital integrals at R = 1.6;
* ``lih_sto6g_bk_3q.json``: 3-qubit effective LiH Hamiltonian, R = 0.9..3.5 step 0.1;
* ``{h2,lih}_cisd_amplitudes.json``: CISD amplitudes for the UCCSD operator pool;
* ``h2_{jw,bk,bk_tapered}_ansatz.json`` and ``lih_3q_ansatz.json``.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from pyscf import ao2mo, fci, gto, scf

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "src"))

from ionvqe.ansatz import (  # noqa: E402
    AnsatzEntry,
    AnsatzSpec,
    reduce_on_reference,
    save_amplitudes,
    screen,
    subterm_approximation,
    uccsd_generators,
)
from ionvqe.fermion import (  # noqa: E402
    FermionSum,
    bravyi_kitaev,
    jordan_wigner,
    occupation_to_bk,
    project_onto_support,
)
from ionvqe.pauli import PauliSum, to_sparse  # noqa: E402
from ionvqe.pipeline import transform_table  # noqa: E402
from ionvqe.tables import CoefficientTable, Geometry  # noqa: E402

log = logging.getLogger("generate_tables")

H2_R = [round(0.30 + 0.05 * k, 2) for k in range(55)]
LIH_R = [round(0.9 + 0.1 * k, 1) for k in range(27)]
LIH_SUPPORT = (2, 4, 6)
PROVENANCE = "pyscf {ver}: RHF then {what}; spin-orbital p = 2*spatial + spin (odd = up)"


def spin_orbital_integrals(h1: np.ndarray, eri: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Spatial integrals (chemists' ``eri``) to spin-orbital ``h_pq`` and ``h_pqrs``.

    ``h_pqrs = (ps|qr)`` so that ``H = sum h_pq a^_p a_q + 1/2 sum h_pqrs a^_p a^_q a_r a_s``.
    """
    n = h1.shape[0]
    spin = np.arange(2 * n) % 2
    sp = np.arange(2 * n) // 2
    one = np.where(spin[:, None] == spin[None, :], h1[np.ix_(sp, sp)], 0.0)
    full = eri[np.ix_(sp, sp, sp, sp)]  # (ps|qr) indexed [p, s, q, r]
    two = np.transpose(full, (0, 2, 3, 1)).copy()  # -> [p, q, r, s]
    mask = (spin[:, None, None, None] == spin[None, None, None, :]) & (
        spin[None, :, None, None] == spin[None, None, :, None]
    )
    two[~mask] = 0.0
    return one, two


def _fix_phases(c: np.ndarray) -> np.ndarray:
    """Make the largest-magnitude AO coefficient of every orbital positive."""
    c = c.copy()
    for j in range(c.shape[1]):
        k = int(np.argmax(np.abs(c[:, j])))
        if c[k, j] < 0:
            c[:, j] *= -1
    return c


def _align_degenerate(c: np.ndarray, occ: np.ndarray, mol, tol: float = 1e-6) -> np.ndarray:
    """Rotate degenerate orbital pairs so the first has no p_y component."""
    c = c.copy()
    py = [i for i, lab in enumerate(mol.ao_labels()) if lab.strip().endswith("py")]
    j = 0
    while j < c.shape[1] - 1:
        if abs(occ[j] - occ[j + 1]) < tol and py:
            u, v = c[:, j].copy(), c[:, j + 1].copy()
            a = float(u[py] @ u[py]) ** 0.5
            phi = np.arctan2(u[py[0]], v[py[0]]) if a > 0 else 0.0
            c[:, j] = np.cos(phi) * u - np.sin(phi) * v
            c[:, j + 1] = np.sin(phi) * u + np.cos(phi) * v
            j += 2
        else:
            j += 1
    return c


def h2_geometry(R: float):
    mol = gto.M(atom=f"H 0 0 0; H 0 0 {R}", basis="sto-3g", verbose=0)
    mf = scf.RHF(mol).run(conv_tol=1e-12)
    c = _fix_phases(mf.mo_coeff)
    h1 = c.T @ mf.get_hcore() @ c
    eri = ao2mo.restore(1, ao2mo.full(mol, c), mol.nao)
    e_fci = fci.FCI(mol, c).kernel()[0]
    return mol.energy_nuc(), h1, eri, float(e_fci)


def lih_geometry(R: float):
    """LiH/STO-6G integrals in the FCI natural-orbital basis."""
    mol = gto.M(atom=f"Li 0 0 0; H 0 0 {R}", basis="sto-6g", verbose=0)
    mf = scf.RHF(mol).run(conv_tol=1e-12)
    solver = fci.FCI(mf)
    e_fci, civ = solver.kernel()
    dm_mo = solver.make_rdm1(civ, mol.nao, mol.nelec)
    occ, u = np.linalg.eigh(dm_mo)
    order = np.argsort(-occ, kind="stable")
    occ, u = occ[order], u[:, order]
    c = mf.mo_coeff @ u
    c = _fix_phases(_align_degenerate(c, occ, mol))
    h1 = c.T @ mf.get_hcore() @ c
    eri = ao2mo.restore(1, ao2mo.full(mol, c), mol.nao)
    return mol.energy_nuc(), h1, eri, float(e_fci), occ


def fermion_hamiltonian(h1: np.ndarray, eri: np.ndarray) -> FermionSum:
    one, two = spin_orbital_integrals(h1, eri)
    one[np.abs(one) < 1e-12] = 0.0
    two[np.abs(two) < 1e-12] = 0.0
    return FermionSum.from_integrals(one, two)


def cisd_amplitudes(h_jw: PauliSum, n_modes: int, n_elec: int, ops) -> list[float]:
    """Intermediate-normalized CISD amplitude of each excitation.

    The JW Hamiltonian is restricted to the reference plus all single and
    double excitations of it and diagonalized; the amplitude of ``T`` is
    ``<T ref|psi> / <ref|psi>``.
    """
    from scipy.sparse.linalg import eigsh

    occ = "0" * (n_modes - n_elec) + "1" * n_elec
    ref = int(occ, 2)
    dets = [ref]
    vecs = {}
    for op in uccsd_generators(n_elec, n_modes - n_elec):
        t = jordan_wigner(op.excitation())
        v = to_sparse(t, n_modes) @ _basis(ref, n_modes)
        k = int(np.flatnonzero(np.abs(v) > 0.5)[0])
        dets.append(k)
        vecs[(op.occupied, op.virtual)] = (k, v[k])
    dets = sorted(set(dets))
    h = to_sparse(h_jw, n_modes).tocsr()[dets][:, dets].toarray()
    w, v = np.linalg.eigh(h)
    psi = dict(zip(dets, v[:, 0]))
    c0 = psi[ref]
    out = []
    for op in ops:
        k, sign = vecs[(op.occupied, op.virtual)]
        out.append(float(np.real(np.conj(sign) * psi[k] / c0)))
    return out


def _basis(k: int, n: int) -> np.ndarray:
    v = np.zeros(1 << n, dtype=complex)
    v[k] = 1.0
    return v


def build_h2(out: Path) -> None:
    import pyscf

    geoms, e_fci = [], {}
    for R in H2_R:
        enuc, h1, eri, e = h2_geometry(R)
        geoms.append(Geometry(R, float(enuc), fermion_hamiltonian(h1, eri)))
        e_fci[repr(R)] = e
    meta = {
        "provenance": PROVENANCE.format(ver=pyscf.__version__, what="canonical orbitals"),
        "fci_energy": e_fci,
    }
    ftab = CoefficientTable("H2", "sto-3g", "fermionic", tuple(geoms), 4, "0011", meta)
    ftab.save(out / "h2_sto3g_fermionic.json")
    for mapping, taper, name in (("jw", False, "jw"), ("bk", False, "bk"), ("bk", True, "bk_tapered")):
        qt, _ = transform_table(ftab, mapping, taper=taper)
        qt.save(out / f"h2_sto3g_{name}.json")
        log.info("H2 %s: %d qubits, %d terms", name, qt.n_qubits, len(qt.structure()))

    # CISD amplitudes at the equilibrium geometry and the screened ansatz
    g = ftab.at(0.75)
    ops = uccsd_generators(2, 2)
    amps = cisd_amplitudes(jordan_wigner(g.operator).real(), 4, 2, ops)
    save_amplitudes(out / "h2_cisd_amplitudes.json", ops, amps)
    (double,) = screen(ops, amps, 1e-6)
    jw_e = reduce_on_reference(double.qubit_exponent("jw", 4), "0011", symbol="theta")
    AnsatzSpec((jw_e,), "0011", "jw").save(out / "h2_jw_ansatz.json")
    bk_ref = occupation_to_bk("0011")
    bk_exp = double.qubit_exponent("bk", 4)
    bk_e = reduce_on_reference(bk_exp, bk_ref, symbol="theta")
    AnsatzSpec((bk_e,), bk_ref, "bk").save(out / "h2_bk_ansatz.json")
    tapered = CoefficientTable.load(out / "h2_sto3g_bk_tapered.json")
    from ionvqe.fermion import TaperingMap

    tmap = TaperingMap.from_json(tapered.metadata["tapering"])
    tp_e = reduce_on_reference(tmap.apply(bk_exp), tapered.reference, symbol="theta")
    AnsatzSpec((tp_e,), tapered.reference, "bk_tapered").save(out / "h2_bk_tapered_ansatz.json")


def build_lih(out: Path) -> None:
    import pyscf

    ref12 = occupation_to_bk("0" * 8 + "1" * 4)
    geoms, meta_fci, meta_noon, meta_terms, meta_e3 = [], {}, {}, {}, {}
    f16 = None
    for R in LIH_R:
        enuc, h1, eri, e, noon = lih_geometry(R)
        fs = fermion_hamiltonian(h1, eri)
        hb = bravyi_kitaev(fs, 12).real()
        h3, tmap, ref3 = project_onto_support(hb, LIH_SUPPORT, ref12)
        geoms.append(Geometry(R, float(enuc), h3))
        meta_fci[repr(R)] = e
        meta_noon[repr(R)] = [float(v) for v in noon]
        meta_terms[repr(R)] = len(hb)
        meta_e3[repr(R)] = float(np.linalg.eigvalsh(_dense(h3, 3))[0] + enuc)
        if abs(R - 1.6) < 1e-9:
            f16 = (enuc, fs, hb)
        log.info("LiH R=%.1f: %d BK terms, %d projected terms", R, len(hb), len(h3))
    meta = {
        "provenance": PROVENANCE.format(
            ver=pyscf.__version__,
            what="FCI natural orbitals; BK on 12 modes projected onto qubits 2,4,6 "
            "with the others frozen in the Hartree-Fock state",
        ),
        "support": list(LIH_SUPPORT),
        "full_reference": ref12,
        "tapering": tmap.to_json(),
        "fci_energy": meta_fci,
        "natural_occupations": meta_noon,
        "bk_term_count": meta_terms,
        "projected_ground_energy": meta_e3,
    }
    CoefficientTable("LiH", "sto-6g", "bk", tuple(geoms), 3, ref3, meta).save(
        out / "lih_sto6g_bk_3q.json"
    )

    enuc, fs, hb = f16
    ftab = CoefficientTable(
        "LiH", "sto-6g", "fermionic", (Geometry(1.6, float(enuc), fs),), 12, "0" * 8 + "1" * 4,
        {"provenance": meta["provenance"].split(";")[0] + "; FCI natural orbitals"},
    )
    ftab.save(out / "lih_sto6g_fermionic.json")

    ops = uccsd_generators(4, 8)
    amps = cisd_amplitudes(jordan_wigner(fs).real(), 12, 4, ops)
    save_amplitudes(out / "lih_cisd_amplitudes.json", ops, amps)
    doubles = [(o, a) for o, a in zip(ops, amps) if o.kind == "double"]
    chosen = screen([o for o, _ in doubles], [a for _, a in doubles], 1e-3, max_count=2)
    entries = []
    for sym, op in zip(("alpha", "beta"), chosen):
        e = subterm_approximation(op.qubit_exponent("bk", 12), symbol=sym)
        if not set(e.generator.qubits) <= set(LIH_SUPPORT):
            raise RuntimeError(f"{op.descriptor()}: kept term {e.generator} leaves the support")
        entries.append(AnsatzEntry(sym, e.generator.relabel(tmap.relabel), e.scale, True))
        log.info("LiH %s: %s -> %s", sym, op.descriptor(), e.generator)
    spec = AnsatzSpec(tuple(entries), ref3, "bk", {"operators": [o.descriptor() for o in chosen]})
    spec.save(out / "lih_3q_ansatz.json")


def _dense(h: PauliSum, n: int) -> np.ndarray:
    from ionvqe.pauli import to_matrix

    return to_matrix(h, n)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=ROOT / "src" / "ionvqe" / "data")
    ap.add_argument("--only", choices=("h2", "lih"), default=None)
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    args.out.mkdir(parents=True, exist_ok=True)
    if args.only in (None, "h2"):
        build_h2(args.out)
    if args.only in (None, "lih"):
        build_lih(args.out)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
