"""Fermionic operators and fermion-to-qubit mappings.

Mode ``p`` is spin-orbital ``p``; odd modes are spin-up, even modes
spin-down, counting from 0. Occupied modes are qubit state ``|1>``.

Bravyi-Kitaev convention
------------------------
Qubit ``j`` stores the parity of the modes in the Fenwick range
``(j + 1 - lowbit(j + 1), j]`` where ``lowbit(m) = m & -m``. Even qubits
therefore hold a single occupation and odd qubits hold partial parities
(qubit 1 = n0+n1, qubit 3 = n0+...+n3, qubit 5 = n4+n5, ...). Writing this
as a GF(2) matrix ``beta`` with ``b = beta @ n``, the three sets used by the
mapping are

* update set ``U(j) = {k != j : beta[k, j] = 1}``: qubits whose stored
  parity changes when mode ``j`` flips (they receive ``X``);
* parity set ``P(j)``: qubits whose XOR equals ``n_0 + ... + n_{j-1}``,
  i.e. the support of ``p_j @ inv(beta)`` with ``p_j`` the indicator of
  modes below ``j``;
* flip set ``F(j)``: qubits whose XOR together with ``b_j`` gives ``n_j``,
  i.e. row ``j`` of ``inv(beta)`` without ``j`` itself.

With ``R(j) = P(j) xor F(j)``,

    a_j^dag = 1/2 X_{U(j)} (X_j Z_{P(j)} - i Y_j Z_{R(j)}).

Jordan-Wigner is the special case ``beta = I``.
"""
from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Mapping, Sequence

import numpy as np

from .pauli import PRUNE_TOL, PauliString, PauliSum

log = logging.getLogger(__name__)

Ladder = tuple[tuple[int, bool], ...]

_LADDER_TOKEN = re.compile(r"^(\d+)(\^?)$")


def parse_ladder(text: str) -> Ladder:
    """Parse ``"2^ 3^ 1 0"`` into ``((2, True), (3, True), (1, False), (0, False))``."""
    out = []
    for tok in text.split():
        m = _LADDER_TOKEN.match(tok)
        if not m:
            raise ValueError(f"bad ladder token {tok!r} in {text!r}")
        out.append((int(m.group(1)), bool(m.group(2))))
    return tuple(out)


def format_ladder(ladder: Ladder) -> str:
    return " ".join(f"{p}^" if d else str(p) for p, d in ladder)


def _canonical_key(op: tuple[int, bool]) -> tuple[int, int]:
    # daggered block first, descending modes in each block
    p, d = op
    return (0 if d else 1, -p)


@lru_cache(maxsize=65536)
def _normal_order_ladder(ladder: Ladder) -> tuple[tuple[Ladder, int], ...]:
    """Normal-order a monomial; returns ``((ladder, integer coefficient), ...)``."""
    for i in range(len(ladder) - 1):
        a, b = ladder[i], ladder[i + 1]
        if _canonical_key(a) <= _canonical_key(b):
            if a == b:
                return ()  # a a = 0 and a^ a^ = 0
            continue
        swapped = ladder[:i] + (b, a) + ladder[i + 2 :]
        acc: dict[Ladder, int] = {}
        for lad, c in _normal_order_ladder(swapped):
            acc[lad] = acc.get(lad, 0) - c
        if a[0] == b[0] and not a[1] and b[1]:
            # a_p a_p^dag = 1 - a_p^dag a_p
            for lad, c in _normal_order_ladder(ladder[:i] + ladder[i + 2 :]):
                acc[lad] = acc.get(lad, 0) + c
        return tuple((lad, c) for lad, c in acc.items() if c != 0)
    return ((ladder, 1),)


@dataclass(frozen=True)
class FermionTerm:
    ladder: Ladder
    coeff: complex

    def __str__(self) -> str:
        return f"{self.coeff:.12g} [{format_ladder(self.ladder)}]"


class FermionSum:
    """Sum of ladder-operator monomials, kept in normal-ordered form."""

    __slots__ = ("_terms",)

    def __init__(self, terms=None, *, ordered: bool = True, tol: float = PRUNE_TOL):
        acc: dict[Ladder, complex] = {}
        if terms is not None:
            items = terms.items() if isinstance(terms, Mapping) else terms
            for lad, c in items:
                if isinstance(lad, str):
                    lad = parse_ladder(lad)
                lad = tuple((int(p), bool(d)) for p, d in lad)
                if ordered:
                    for nl, k in _normal_order_ladder(lad):
                        acc[nl] = acc.get(nl, 0) + k * complex(c)
                else:
                    acc[lad] = acc.get(lad, 0) + complex(c)
        self._terms = {k: v for k, v in acc.items() if abs(v) >= tol}

    @classmethod
    def from_integrals(
        cls, one_body: np.ndarray, two_body: np.ndarray, constant: float = 0.0
    ) -> "FermionSum":
        """Build ``sum h_pq a^_p a_q + 1/2 sum h_pqrs a^_p a^_q a_r a_s``."""
        n = one_body.shape[0]
        terms: dict[Ladder, complex] = {}
        if constant:
            terms[()] = constant
        for p in range(n):
            for q in range(n):
                if one_body[p, q] != 0:
                    terms[((p, True), (q, False))] = one_body[p, q]
        nz = np.argwhere(np.abs(two_body) > 0)
        for p, q, r, s in nz:
            lad = ((int(p), True), (int(q), True), (int(r), False), (int(s), False))
            terms[lad] = terms.get(lad, 0) + 0.5 * two_body[p, q, r, s]
        return cls(terms)

    @property
    def terms(self) -> dict[Ladder, complex]:
        return dict(self._terms)

    def items(self):
        return sorted(self._terms.items(), key=lambda kv: (len(kv[0]), kv[0]))

    def __iter__(self):
        return (FermionTerm(l, c) for l, c in self.items())

    def __len__(self) -> int:
        return len(self._terms)

    def n_modes(self) -> int:
        return max((p for lad in self._terms for p, _ in lad), default=-1) + 1

    def is_normal_ordered(self) -> bool:
        return all(_normal_order_ladder(l) == ((l, 1),) or l == () for l in self._terms)

    def __add__(self, other: "FermionSum") -> "FermionSum":
        acc = dict(self._terms)
        for l, c in other._terms.items():
            acc[l] = acc.get(l, 0) + c
        return FermionSum(acc, ordered=False)

    def __sub__(self, other: "FermionSum") -> "FermionSum":
        return self + other * -1

    def __mul__(self, x) -> "FermionSum":
        if isinstance(x, FermionSum):
            acc: dict[Ladder, complex] = {}
            for l1, c1 in self._terms.items():
                for l2, c2 in x._terms.items():
                    acc[l1 + l2] = acc.get(l1 + l2, 0) + c1 * c2
            return FermionSum(acc)
        return FermionSum({l: c * x for l, c in self._terms.items()}, ordered=False)

    __rmul__ = __mul__

    def dagger(self) -> "FermionSum":
        return FermionSum(
            {tuple((p, not d) for p, d in reversed(l)): np.conj(c) for l, c in self._terms.items()}
        )

    def __eq__(self, other) -> bool:
        return isinstance(other, FermionSum) and self._terms == other._terms

    def __str__(self) -> str:
        return " + ".join(str(FermionTerm(l, c)) for l, c in self.items()) or "0"


def normal_order(s: FermionSum) -> FermionSum:
    """Canonical normal-ordered form of ``s``."""
    return FermionSum(s.terms, ordered=True)


def number_operator(n_modes: int) -> FermionSum:
    return FermionSum({((p, True), (p, False)): 1.0 for p in range(n_modes)})


# --- Bravyi-Kitaev set construction -------------------------------------------------


def bk_matrix(n: int) -> np.ndarray:
    """GF(2) matrix with ``b = beta @ n`` for the Fenwick-tree encoding."""
    beta = np.zeros((n, n), dtype=np.uint8)
    for j in range(n):
        m = j + 1
        lo = m - (m & -m)
        beta[j, lo : j + 1] = 1
    return beta


def _gf2_inv(a: np.ndarray) -> np.ndarray:
    n = a.shape[0]
    m = np.concatenate([a.copy() % 2, np.eye(n, dtype=np.uint8)], axis=1)
    for col in range(n):
        piv = next(r for r in range(col, n) if m[r, col])
        m[[col, piv]] = m[[piv, col]]
        for r in range(n):
            if r != col and m[r, col]:
                m[r] ^= m[col]
    return m[:, n:]


@lru_cache(maxsize=64)
def bk_sets(n: int) -> tuple[tuple[frozenset, frozenset, frozenset], ...]:
    """``(U(j), P(j), F(j))`` for every mode ``j`` of an ``n``-mode register."""
    beta = bk_matrix(n)
    inv = _gf2_inv(beta)
    out = []
    for j in range(n):
        update = frozenset(int(k) for k in range(n) if k != j and beta[k, j])
        prefix = np.zeros(n, dtype=np.uint8)
        prefix[:j] = 1
        parity_vec = (prefix @ inv) % 2
        parity = frozenset(int(k) for k in np.flatnonzero(parity_vec))
        flip = frozenset(int(k) for k in np.flatnonzero(inv[j]) if k != j)
        out.append((update, parity, flip))
    return tuple(out)


def _ladder_pauli(j: int, dagger: bool, update, parity, remainder) -> PauliSum:
    xs = [(k, "X") for k in update]
    c = PauliString(xs + [(j, "X")] + [(k, "Z") for k in parity])
    d = PauliString(xs + [(j, "Y")] + [(k, "Z") for k in remainder])
    return PauliSum({c: 0.5, d: (-0.5j if dagger else 0.5j)})


def _transform(s: FermionSum, ladder_map) -> PauliSum:
    cache: dict[tuple[int, bool], PauliSum] = {}
    acc: dict[PauliString, complex] = {}
    for ladder, coeff in s.terms.items():
        prod = PauliSum.identity(1.0)
        for op in ladder:
            if op not in cache:
                cache[op] = ladder_map(*op)
            prod = prod * cache[op]
        for p, c in prod.terms.items():
            acc[p] = acc.get(p, 0) + c * coeff
    return PauliSum(acc)


def jordan_wigner(s: FermionSum) -> PauliSum:
    """``a_p^dag -> (X_p - i Y_p)/2 Z_{p-1}...Z_0``."""

    def lad(j, dagger):
        z = range(j)
        return _ladder_pauli(j, dagger, (), z, z)

    return _transform(s, lad)


def bravyi_kitaev(s: FermionSum, n_modes: int | None = None) -> PauliSum:
    """Bravyi-Kitaev transform on ``n_modes`` qubits (see module docs)."""
    if n_modes is None:
        n_modes = s.n_modes()
    if s.n_modes() > n_modes:
        raise ValueError(f"operator uses {s.n_modes()} modes but n_modes={n_modes}")
    sets = bk_sets(n_modes)

    def lad(j, dagger):
        update, parity, flip = sets[j]
        return _ladder_pauli(j, dagger, update, parity, parity ^ flip)

    return _transform(s, lad)


def occupation_to_bk(bits: str) -> str:
    """Map an occupation-number ket label to its BK label (same length)."""
    n = len(bits)
    occ = np.array([int(b) for b in reversed(bits)], dtype=np.uint8)
    b = (bk_matrix(n) @ occ) % 2
    return "".join(str(int(v)) for v in reversed(b))


# --- tapering ---------------------------------------------------------------------


@dataclass(frozen=True)
class TaperingMap:
    """Removed qubits with their substituted Z eigenvalue, and compact relabeling."""

    removed: dict[int, int] = field(default_factory=dict)
    relabel: dict[int, int] = field(default_factory=dict)

    def __post_init__(self):
        if set(self.removed) & set(self.relabel):
            raise ValueError("removed and retained qubit sets overlap")
        if any(v not in (1, -1) for v in self.removed.values()):
            raise ValueError("substituted eigenvalues must be +1 or -1")

    @property
    def n_original(self) -> int:
        return len(self.removed) + len(self.relabel)

    def is_empty(self) -> bool:
        return not self.removed

    def apply(self, h: PauliSum, *, project: bool = False) -> PauliSum:
        """Substitute removed qubits' eigenvalues and relabel.

        With ``project=True`` terms carrying X or Y on a removed qubit are
        dropped (their expectation in the removed qubits' basis state is 0);
        otherwise such terms are an error.
        """
        acc: dict[PauliString, complex] = {}
        for p, c in h.terms.items():
            sign = 1
            kept = []
            skip = False
            for q, a in p.ops:
                if q in self.removed:
                    if a != "Z":
                        if project:
                            skip = True
                            break
                        raise ValueError(f"term {p} acts with {a} on removed qubit {q}")
                    sign *= self.removed[q]
                else:
                    kept.append((self.relabel[q], a))
            if skip:
                continue
            key = PauliString(kept)
            acc[key] = acc.get(key, 0) + sign * c
        return PauliSum(acc)

    def reduce_bits(self, bits: str) -> str:
        n = len(bits)
        vals = {q: bits[n - 1 - q] for q in range(n)}
        m = len(self.relabel)
        out = ["0"] * m
        for q, k in self.relabel.items():
            out[m - 1 - k] = vals[q]
        return "".join(out)

    def expand_bits(self, bits: str) -> str:
        """Inverse of :meth:`reduce_bits` (removed qubits get their reference value)."""
        n = self.n_original
        m = len(bits)
        out = ["0"] * n
        for q, v in self.removed.items():
            out[n - 1 - q] = "0" if v == 1 else "1"
        for q, k in self.relabel.items():
            out[n - 1 - q] = bits[m - 1 - k]
        return "".join(out)

    def to_json(self) -> dict:
        return {
            "removed": {str(k): v for k, v in sorted(self.removed.items())},
            "relabel": {str(k): v for k, v in sorted(self.relabel.items())},
        }

    @classmethod
    def from_json(cls, d: Mapping) -> "TaperingMap":
        return cls(
            removed={int(k): int(v) for k, v in d.get("removed", {}).items()},
            relabel={int(k): int(v) for k, v in d.get("relabel", {}).items()},
        )


def _ref_eigen(reference: str, q: int) -> int:
    return 1 if reference[len(reference) - 1 - q] == "0" else -1


def _make_map(reference: str, removed: Sequence[int]) -> TaperingMap:
    n = len(reference)
    kept = [q for q in range(n) if q not in set(removed)]
    return TaperingMap(
        removed={q: _ref_eigen(reference, q) for q in sorted(removed)},
        relabel={q: i for i, q in enumerate(kept)},
    )


def taper_candidates(h: PauliSum, n_qubits: int) -> list[int]:
    """Qubits on which every term acts with I or Z only."""
    bad = {q for p in h for q, a in p.ops if a != "Z"}
    return [q for q in range(n_qubits) if q not in bad]


def taper_qubits(h: PauliSum, reference: str) -> tuple[PauliSum, TaperingMap, str]:
    """Remove every I/Z-only qubit by substituting its eigenvalue under ``reference``.

    Returns the reduced Hamiltonian, the map, and the reduced reference. When
    no qubit qualifies the input is returned with an empty map.
    """
    n = len(reference)
    if h.n_qubits() > n:
        raise ValueError(f"reference has {n} qubits, Hamiltonian needs {h.n_qubits()}")
    cands = taper_candidates(h, n)
    if not cands:
        log.warning("no qubit acts with only I/Z; nothing tapered")
        return h, TaperingMap(relabel={q: q for q in range(n)}), reference
    tmap = _make_map(reference, cands)
    return tmap.apply(h), tmap, tmap.reduce_bits(reference)


def project_onto_support(
    h: PauliSum, support: Iterable[int], reference: str
) -> tuple[PauliSum, TaperingMap, str]:
    """Effective Hamiltonian on ``support`` with all other qubits frozen in ``reference``.

    Exact for states of the form ``|reference outside support> (x) |psi>``;
    terms moving population outside the support are dropped.
    """
    support = set(support)
    n = len(reference)
    tmap = _make_map(reference, [q for q in range(n) if q not in support])
    return tmap.apply(h, project=True), tmap, tmap.reduce_bits(reference)
