"""Shared fixtures and independent dense oracles."""
from __future__ import annotations

import functools
import math

import numpy as np
import pytest

from ionvqe.ansatz import AnsatzSpec
from ionvqe.fermion import FermionSum
from ionvqe.pauli import PauliString, PauliSum
from ionvqe.tables import bundled_path, load_bundled

_SINGLE = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def kron_string(p: PauliString, n: int) -> np.ndarray:
    """Dense matrix of ``p`` by explicit Kronecker products (qubit n-1 leftmost)."""
    out = np.eye(1, dtype=complex)
    for q in reversed(range(n)):
        out = np.kron(out, _SINGLE[p.axis(q)])
    return out


def kron_sum(h: PauliSum, n: int) -> np.ndarray:
    out = np.zeros((1 << n, 1 << n), dtype=complex)
    for p, c in h.items():
        out += c * kron_string(p, n)
    return out


@functools.lru_cache(maxsize=None)
def _annihilators(n: int) -> tuple[np.ndarray, ...]:
    """``a_p`` in the occupation basis from the anticommutation sign rule."""
    dim = 1 << n
    ops = []
    for p in range(n):
        a = np.zeros((dim, dim))
        for k in range(dim):
            if (k >> p) & 1:
                sign = (-1) ** bin(k & ((1 << p) - 1)).count("1")
                a[k ^ (1 << p), k] = sign
        ops.append(a)
    return tuple(ops)


def fermion_matrix(s: FermionSum, n: int) -> np.ndarray:
    """Dense matrix of a FermionSum built without any qubit mapping."""
    ann = _annihilators(n)
    dim = 1 << n
    out = np.zeros((dim, dim), dtype=complex)
    for lad, c in s.terms.items():
        m = np.eye(dim, dtype=complex)
        for p, dag in lad:
            m = m @ (ann[p].T if dag else ann[p])
        out += c * m
    return out


def random_hermitian_fermion(rng: np.random.Generator, n: int, n_terms: int = 6) -> FermionSum:
    """Random Hermitian sum of one- and two-body monomials on ``n`` modes."""
    terms = {}
    for _ in range(n_terms):
        body = rng.integers(1, 3)
        if body == 1 or n < 2:
            lad = ((int(rng.integers(n)), True), (int(rng.integers(n)), False))
        else:
            p, q = rng.choice(n, 2, replace=False)
            r, s = rng.choice(n, 2, replace=False)
            lad = ((int(p), True), (int(q), True), (int(r), False), (int(s), False))
        terms[lad] = terms.get(lad, 0) + complex(rng.normal(), rng.normal())
    f = FermionSum(terms)
    return f + f.dagger()


def phase_distance(a: np.ndarray, b: np.ndarray) -> float:
    """``min_gamma |a - e^{i gamma} b|``."""
    ip = np.vdot(b, a)
    g = np.angle(ip) if abs(ip) > 0 else 0.0
    return float(np.linalg.norm(a - np.exp(1j * g) * b))


@pytest.fixture(scope="session")
def h2_bk():
    return load_bundled("h2_sto3g_bk")


@pytest.fixture(scope="session")
def h2_jw():
    return load_bundled("h2_sto3g_jw")


@pytest.fixture(scope="session")
def h2_tapered():
    return load_bundled("h2_sto3g_bk_tapered")


@pytest.fixture(scope="session")
def h2_fermionic():
    return load_bundled("h2_sto3g_fermionic")


@pytest.fixture(scope="session")
def lih_table():
    return load_bundled("lih_sto6g_bk_3q")


@pytest.fixture(scope="session")
def h2_spec():
    return AnsatzSpec.load(bundled_path("h2_bk_tapered_ansatz.json"))


@pytest.fixture(scope="session")
def lih_spec():
    return AnsatzSpec.load(bundled_path("lih_3q_ansatz.json"))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


TWO_PI = 2 * math.pi


_ACCEPTANCE: list[str] = []


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL line for the criterion run by the requesting test."""
    def run(label: str, check):
        try:
            detail = check()
        except BaseException:
            line = f"FAIL {label}"
            print(line)
            _ACCEPTANCE.append(line)
            raise
        line = f"PASS {label}" + (f" ({detail})" if detail else "")
        print(line)
        _ACCEPTANCE.append(line)
    return run


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)
