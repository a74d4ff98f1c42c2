"""Compiled versus numpy kernels.

    python benchmarks/bench_kernels.py [--repeat 20] [--json out.json]

Times each kernel on random inputs for every available backend and prints
the speed-up of the compiled one. End-to-end timings (a noisy 3-qubit LiH
circuit and a 2-qubit H2 energy estimate) run once per backend in a
subprocess, since the backend is chosen at import.
"""
from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import timeit

import numpy as np

from ionvqe.kernels import backends


def _cases(rng):
    n_state, n_rho = 12, 7
    dim, dim_r = 1 << n_state, 1 << n_rho
    psi = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    psi /= np.linalg.norm(psi)
    a = rng.normal(size=(dim_r, dim_r)) + 1j * rng.normal(size=(dim_r, dim_r))
    rho = a @ a.conj().T
    rho /= np.trace(rho)
    rho = np.ascontiguousarray(rho)
    xs = np.array([int(v) for v in rng.integers(0, dim_r, 15)], dtype=np.int64)
    zs = np.array([int(v) for v in rng.integers(0, dim_r, 15)], dtype=np.int64)
    w = np.full(15, 0.01)
    outcomes = np.arange(dim_r, dtype=np.int64)
    counts = rng.integers(0, 50, dim_r).astype(np.int64)
    zmasks = np.array([int(v) for v in rng.integers(1, dim_r, 20)], dtype=np.int64)
    x, z = 0b101101001011, 0b110010101101
    return {
        "apply_pauli (12q)": lambda k: k.apply_pauli(psi, x, z, 2),
        "expval_pauli_state (12q)": lambda k: k.expval_pauli_state(psi, x, z, 2),
        "expval_pauli_density (7q)": lambda k: k.expval_pauli_density(rho, 0b1011001, 0b0110011, 1),
        "pauli_channel 15 terms (7q)": lambda k: k.pauli_channel(rho, xs, zs, w),
        "dephase (7q)": lambda k: k.dephase(rho, 3, 0.1),
        "collective_dephase (7q)": lambda k: k.collective_dephase(rho, n_rho, 0.01),
        "parity_expectations 20 masks": lambda k: k.parity_expectations(outcomes, counts, zmasks),
    }


_E2E = r"""
import json, timeit
import numpy as np
from ionvqe import BACKEND
from ionvqe.ansatz import AnsatzSpec
from ionvqe.circuit import ansatz_circuit
from ionvqe.estimator import estimate
from ionvqe.simulator import NoiseModel, run
from ionvqe.tables import bundled_path, load_bundled
lih = load_bundled("lih_sto6g_bk_3q").at(1.6).hamiltonian()
ls = AnsatzSpec.load(bundled_path("lih_3q_ansatz.json"))
h2 = load_bundled("h2_sto3g_bk_tapered").at(0.75).hamiltonian()
hs = AnsatzSpec.load(bundled_path("h2_bk_tapered_ansatz.json"))
noise = NoiseModel(ms_fidelity=0.97)
def lih_noisy():
    st = run(ansatz_circuit(ls, [3.0, 3.1]), ls.reference, noise)
    estimate(st, lih, 500, 0)
def h2_shots():
    st = run(ansatz_circuit(hs, [0.1]), hs.reference)
    estimate(st, h2, 1000, 0)
out = {"backend": BACKEND}
for name, fn in (("LiH noisy evaluation", lih_noisy), ("H2 1000-shot estimate", h2_shots)):
    out[name] = min(timeit.repeat(fn, number=20, repeat=REPEAT)) / 20
print(json.dumps(out))
"""


def end_to_end(repeat: int) -> list[dict]:
    rows = []
    for pure in ("0", "1"):
        env = dict(os.environ, IONVQE_PURE_PYTHON=pure)
        code = _E2E.replace("REPEAT", str(max(1, repeat // 4)))
        res = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True,
                             text=True, check=True)
        rows.append(json.loads(res.stdout))
    return rows


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--json", help="write the timings here")
    args = ap.parse_args(argv)
    impls = backends()
    rng = np.random.default_rng(0)
    cases = _cases(rng)
    results: dict = {"kernels": {}, "backends": sorted(impls)}
    names = sorted(impls)
    print(f"{'kernel':32s}" + "".join(f"{n:>14s}" for n in names) + "   speed-up")
    for label, fn in cases.items():
        times = {}
        for name in names:
            k = impls[name]
            fn(k)
            times[name] = min(timeit.repeat(lambda: fn(k), number=5, repeat=args.repeat)) / 5
        results["kernels"][label] = times
        speed = times["python"] / times["cython"] if "cython" in times else float("nan")
        print(f"{label:32s}" + "".join(f"{times[n] * 1e6:12.1f}us" for n in names)
              + f"   {speed:8.1f}x")
    if "cython" not in impls:
        print("compiled extension not built; only the numpy fallback was timed")
    else:
        rows = end_to_end(args.repeat)
        results["end_to_end"] = rows
        print()
        for r in rows:
            print(f"end-to-end [{r['backend']}]: " + ", ".join(
                f"{k} {v * 1e3:.2f} ms" for k, v in r.items() if k != "backend"))
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(results, fh, indent=1, sort_keys=True)
    return 0


if __name__ == "__main__":
    sys.exit(main())
