"""Pauli strings, weighted Pauli sums and their dense matrices.

Qubit ``q`` is bit ``q`` of a computational-basis index, so a ket label such
as ``|0011>`` is read with qubit 0 rightmost and ``int("0011", 2)`` is its
index. Dense matrices are built in that convention (qubit ``n-1`` is the
leftmost Kronecker factor).
"""
from __future__ import annotations

import re
from typing import Iterable, Iterator, Mapping

import numpy as np

PRUNE_TOL = 1e-10
DENSE_LIMIT = 12

AXES = ("X", "Y", "Z")

# (a, b) -> (phase, product) for single-qubit Paulis a*b
_MUL = {
    ("X", "X"): (1, None),
    ("Y", "Y"): (1, None),
    ("Z", "Z"): (1, None),
    ("X", "Y"): (1j, "Z"),
    ("Y", "X"): (-1j, "Z"),
    ("Y", "Z"): (1j, "X"),
    ("Z", "Y"): (-1j, "X"),
    ("Z", "X"): (1j, "Y"),
    ("X", "Z"): (-1j, "Y"),
}

_TOKEN = re.compile(r"^([XYZxyz])(\d+)$")


class DenseLimitError(ValueError):
    """Raised when a dense representation would exceed the qubit limit."""


def check_dense(n_qubits: int, limit: int = DENSE_LIMIT) -> None:
    if n_qubits > limit:
        raise DenseLimitError(
            f"{n_qubits} qubits exceeds the dense limit of {limit}; refusing to build"
        )


class PauliString:
    """Tensor product of single-qubit Paulis, identity on unlisted qubits.

    Immutable and hashable. ``ops`` is stored sorted by qubit index.
    """

    __slots__ = ("_ops", "_hash")

    def __init__(self, ops: Mapping[int, str] | Iterable[tuple[int, str]] = ()):
        items = ops.items() if isinstance(ops, Mapping) else ops
        d: dict[int, str] = {}
        for q, a in items:
            q = int(q)
            a = a.upper()
            if q < 0:
                raise ValueError(f"negative qubit index {q}")
            if a == "I":
                continue
            if a not in AXES:
                raise ValueError(f"unknown Pauli axis {a!r}")
            if q in d:
                raise ValueError(f"qubit {q} listed twice")
            d[q] = a
        self._ops = tuple(sorted(d.items()))
        self._hash = hash(self._ops)

    @classmethod
    def parse(cls, text: str) -> "PauliString":
        """Parse ``"X0 Z1 Y2"``; the empty string (or ``"I"``) is the identity."""
        text = text.strip()
        if text in ("", "I"):
            return cls()
        ops = []
        for tok in text.split():
            m = _TOKEN.match(tok)
            if not m:
                raise ValueError(f"bad Pauli token {tok!r} in {text!r}")
            ops.append((int(m.group(2)), m.group(1)))
        return cls(ops)

    @property
    def ops(self) -> tuple[tuple[int, str], ...]:
        return self._ops

    def as_dict(self) -> dict[int, str]:
        return dict(self._ops)

    @property
    def qubits(self) -> tuple[int, ...]:
        return tuple(q for q, _ in self._ops)

    def axis(self, q: int) -> str:
        for qq, a in self._ops:
            if qq == q:
                return a
        return "I"

    def weight(self) -> int:
        return len(self._ops)

    def is_identity(self) -> bool:
        return not self._ops

    def max_qubit(self) -> int:
        return self._ops[-1][0] if self._ops else -1

    def masks(self) -> tuple[int, int]:
        """Return ``(x_mask, z_mask)`` with Y setting both bits."""
        x = z = 0
        for q, a in self._ops:
            if a in "XY":
                x |= 1 << q
            if a in "YZ":
                z |= 1 << q
        return x, z

    def n_y(self) -> int:
        return sum(1 for _, a in self._ops if a == "Y")

    def relabel(self, mapping: Mapping[int, int]) -> "PauliString":
        return PauliString((mapping[q], a) for q, a in self._ops)

    def __eq__(self, other) -> bool:
        return isinstance(other, PauliString) and self._ops == other._ops

    def __lt__(self, other: "PauliString") -> bool:
        return self._ops < other._ops

    def __hash__(self) -> int:
        return self._hash

    def __iter__(self) -> Iterator[tuple[int, str]]:
        return iter(self._ops)

    def __len__(self) -> int:
        return len(self._ops)

    def __str__(self) -> str:
        return " ".join(f"{a}{q}" for q, a in self._ops)

    def __repr__(self) -> str:
        return f"PauliString({str(self)!r})"


def multiply(p: PauliString, q: PauliString) -> tuple[complex, PauliString]:
    """Return ``(phase, r)`` with ``phase * r == p @ q`` as matrices."""
    phase: complex = 1
    out = dict(p.ops)
    for qubit, b in q.ops:
        a = out.get(qubit)
        if a is None:
            out[qubit] = b
            continue
        ph, c = _MUL[(a, b)]
        phase *= ph
        if c is None:
            del out[qubit]
        else:
            out[qubit] = c
    return complex(phase), PauliString(out)


def commutes(p: PauliString, q: PauliString) -> bool:
    """True iff ``pq == qp``: an even number of clashing qubits."""
    qd = q.as_dict()
    clashes = 0
    for qubit, a in p.ops:
        b = qd.get(qubit)
        if b is not None and b != a:
            clashes += 1
    return clashes % 2 == 0


def qubitwise_commutes(p: PauliString, q: PauliString) -> bool:
    qd = q.as_dict()
    return all(qd.get(qubit, a) == a for qubit, a in p.ops)


def _prune(terms: dict, tol: float) -> dict:
    return {k: v for k, v in terms.items() if abs(v) >= tol}


class PauliSum:
    """Weighted sum of Pauli strings with complex coefficients.

    Coefficients below ``PRUNE_TOL`` in magnitude are dropped after every
    arithmetic operation. Instances are treated as immutable.
    """

    __slots__ = ("_terms",)

    def __init__(self, terms=None, *, tol: float = PRUNE_TOL):
        acc: dict[PauliString, complex] = {}
        if terms is not None:
            items = terms.items() if isinstance(terms, Mapping) else terms
            for key, c in items:
                if isinstance(key, str):
                    key = PauliString.parse(key)
                elif not isinstance(key, PauliString):
                    key = PauliString(key)
                acc[key] = acc.get(key, 0) + complex(c)
        self._terms = _prune(acc, tol)

    @classmethod
    def from_string(cls, p: PauliString | str, coeff: complex = 1.0) -> "PauliSum":
        return cls({p: coeff})

    @classmethod
    def identity(cls, coeff: complex = 1.0) -> "PauliSum":
        return cls({PauliString(): coeff})

    @property
    def terms(self) -> dict[PauliString, complex]:
        return dict(self._terms)

    def items(self):
        """Terms in canonical order."""
        return sorted(self._terms.items(), key=lambda kv: kv[0].ops)

    def strings(self) -> list[PauliString]:
        return [p for p, _ in self.items()]

    def coeff(self, p: PauliString | str) -> complex:
        if isinstance(p, str):
            p = PauliString.parse(p)
        return self._terms.get(p, 0j)

    def constant(self) -> complex:
        return self._terms.get(PauliString(), 0j)

    def n_qubits(self) -> int:
        return max((p.max_qubit() for p in self._terms), default=-1) + 1

    def __len__(self) -> int:
        return len(self._terms)

    def __iter__(self):
        return iter(self.strings())

    def __contains__(self, p) -> bool:
        if isinstance(p, str):
            p = PauliString.parse(p)
        return p in self._terms

    def __add__(self, other) -> "PauliSum":
        if isinstance(other, (int, float, complex)):
            other = PauliSum.identity(other)
        acc = dict(self._terms)
        for p, c in other._terms.items():
            acc[p] = acc.get(p, 0) + c
        return PauliSum(acc)

    __radd__ = __add__

    def __neg__(self) -> "PauliSum":
        return PauliSum({p: -c for p, c in self._terms.items()})

    def __sub__(self, other) -> "PauliSum":
        return self + (-other if isinstance(other, PauliSum) else -complex(other))

    def __rsub__(self, other) -> "PauliSum":
        return (-self) + other

    def __mul__(self, other) -> "PauliSum":
        if isinstance(other, (int, float, complex, np.number)):
            return PauliSum({p: c * other for p, c in self._terms.items()})
        if isinstance(other, PauliString):
            other = PauliSum.from_string(other)
        acc: dict[PauliString, complex] = {}
        for p, a in self._terms.items():
            for q, b in other._terms.items():
                ph, r = multiply(p, q)
                acc[r] = acc.get(r, 0) + ph * a * b
        return PauliSum(acc)

    def __rmul__(self, other) -> "PauliSum":
        if isinstance(other, (int, float, complex, np.number)):
            return self * other
        return NotImplemented

    def __truediv__(self, x) -> "PauliSum":
        return self * (1.0 / x)

    def __eq__(self, other) -> bool:
        return isinstance(other, PauliSum) and self._terms == other._terms

    def __hash__(self):
        return hash(frozenset(self._terms.items()))

    def allclose(self, other: "PauliSum", atol: float = 1e-12) -> bool:
        keys = set(self._terms) | set(other._terms)
        return all(abs(self.coeff(k) - other.coeff(k)) <= atol for k in keys)

    def dagger(self) -> "PauliSum":
        return PauliSum({p: np.conj(c) for p, c in self._terms.items()})

    def is_hermitian(self, tol: float = 1e-10) -> bool:
        return all(abs(c.imag) <= tol for c in self._terms.values())

    def real(self, tol: float = 1e-10) -> "PauliSum":
        """Drop imaginary parts, which must be below ``tol``."""
        bad = [p for p, c in self._terms.items() if abs(c.imag) > tol]
        if bad:
            raise ValueError(f"non-Hermitian terms: {', '.join(map(str, bad[:4]))}")
        return PauliSum({p: c.real for p, c in self._terms.items()})

    def relabel(self, mapping: Mapping[int, int]) -> "PauliSum":
        return PauliSum((p.relabel(mapping), c) for p, c in self._terms.items())

    def __str__(self) -> str:
        if not self._terms:
            return "0"
        parts = []
        for p, c in self.items():
            cs = f"{c.real:+.12g}" if c.imag == 0 else f"({c:.12g})"
            parts.append(f"{cs} [{p}]")
        return " ".join(parts)

    def __repr__(self) -> str:
        return f"PauliSum({str(self)})"


def pauli_string_matrix(p: PauliString, n_qubits: int) -> np.ndarray:
    """Dense matrix of one Pauli string (bitmask construction)."""
    check_dense(n_qubits)
    if p.max_qubit() >= n_qubits:
        raise ValueError(f"{p} does not fit in {n_qubits} qubits")
    dim = 1 << n_qubits
    x, z = p.masks()
    k = np.arange(dim)
    signs = 1 - 2 * (_popcount(k & z) & 1)
    m = np.zeros((dim, dim), dtype=complex)
    m[k ^ x, k] = (1j ** p.n_y()) * signs
    return m


def _popcount(a: np.ndarray) -> np.ndarray:
    a = a.astype(np.int64)
    out = np.zeros_like(a)
    while np.any(a):
        out += a & 1
        a = a >> 1
    return out


def to_matrix(h: PauliSum | PauliString, n_qubits: int) -> np.ndarray:
    """Dense ``2**n x 2**n`` matrix of a Pauli sum."""
    if isinstance(h, PauliString):
        h = PauliSum.from_string(h)
    check_dense(n_qubits)
    if h.n_qubits() > n_qubits:
        raise ValueError(f"operator acts on {h.n_qubits()} qubits, more than {n_qubits}")
    dim = 1 << n_qubits
    k = np.arange(dim)
    m = np.zeros((dim, dim), dtype=complex)
    for p, c in h.items():
        x, z = p.masks()
        signs = 1 - 2 * (_popcount(k & z) & 1)
        m[k ^ x, k] += c * (1j ** p.n_y()) * signs
    return m


def to_sparse(h: PauliSum, n_qubits: int):
    """``scipy.sparse`` CSR matrix of ``h``; not subject to the dense limit."""
    from scipy import sparse

    dim = 1 << n_qubits
    k = np.arange(dim)
    rows, cols, vals = [], [], []
    for p, c in h.items():
        x, z = p.masks()
        signs = 1 - 2 * (_popcount(k & z) & 1)
        rows.append(k ^ x)
        cols.append(k)
        vals.append(c * (1j ** p.n_y()) * signs)
    if not rows:
        return sparse.csr_matrix((dim, dim), dtype=complex)
    return sparse.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(dim, dim)
    )


def conjugate_frame(h: PauliSum, frame: PauliString) -> PauliSum:
    """Return ``frame . h . frame``: terms anticommuting with the frame flip sign."""
    return PauliSum({p: (c if commutes(p, frame) else -c) for p, c in h.terms.items()})
