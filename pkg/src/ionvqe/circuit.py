"""Trapped-ion gate set, circuits, and compilation of Pauli exponentials.

Gate conventions (``a`` an angle in radians):

* ``GlobalMS(phi)``: ``exp(-i phi/2 sum_{i<j} X_i X_j)`` over all qubits;
* ``SubsetMS(qubits, phi)``: the same sum restricted to ``qubits``;
* ``RotZ(q, a)``: ``exp(-i a/2 Z_q)``;
* ``RotXY(q, a, phase)``: ``exp(-i a/2 (cos(phase) X_q + sin(phase) Y_q))``;
  ``q=None`` applies it to every qubit (a global rotation);
* ``AddressedPi(q)``: ``RotZ(q, pi) = -i Z_q``;
* ``Idle(t)``: identity lasting ``t`` seconds (only seen by the noise model).

Compilation of ``exp(-i theta G)`` on support ``S`` picks a pivot ``p`` in
``S``. Conjugating ``Z_p`` with ``M = SubsetMS(S, pi/2)`` gives
``+-Y_p X_rest`` when ``|S|`` is even and ``+-Z_p X_rest`` when it is odd, so

    exp(-i theta sigma Q) = M exp(-i theta Z_p) M^dag

and single-qubit Clifford rotations ``C`` carry ``Q`` onto ``G``. The circuit
is ``C^dag``, ``MS(-pi/2)``, ``RotZ(p, 2 sigma theta)``, ``MS(pi/2)``, ``C``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .pauli import DENSE_LIMIT, PauliString, check_dense, multiply, pauli_string_matrix

VARIANTS = ("GlobalMS", "SubsetMS", "RotZ", "RotXY", "AddressedPi", "Idle")
MS_VARIANTS = ("GlobalMS", "SubsetMS")

_I2 = np.eye(2, dtype=complex)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_Z = np.array([[1, 0], [0, -1]], dtype=complex)
_PAULI = {"X": _X, "Y": _Y, "Z": _Z}


@dataclass(frozen=True)
class Gate:
    """One gate. ``qubits`` is empty for gates acting on the whole register."""

    variant: str
    qubits: tuple[int, ...] = ()
    angle: float = 0.0
    phase: float = 0.0
    duration: float | None = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown gate variant {self.variant!r}")
        qs = tuple(int(q) for q in self.qubits)
        if self.variant == "SubsetMS":
            qs = tuple(sorted(set(qs)))
            if len(qs) < 2:
                raise ValueError("SubsetMS needs at least two qubits")
        elif self.variant in ("RotZ", "AddressedPi") and len(qs) != 1:
            raise ValueError(f"{self.variant} acts on exactly one qubit")
        elif self.variant == "RotXY" and len(qs) > 1:
            raise ValueError("RotXY acts on one qubit or, with no qubit, on all")
        elif self.variant in ("GlobalMS", "Idle") and qs:
            raise ValueError(f"{self.variant} acts on the whole register")
        object.__setattr__(self, "qubits", qs)
        object.__setattr__(self, "angle", float(self.angle))
        object.__setattr__(self, "phase", float(self.phase))

    @property
    def is_global(self) -> bool:
        return not self.qubits

    def support(self, n_qubits: int) -> tuple[int, ...]:
        return self.qubits or tuple(range(n_qubits))

    def to_json(self) -> dict:
        d = {"variant": self.variant, "qubits": list(self.qubits), "angle": self.angle}
        if self.variant == "RotXY":
            d["phase"] = self.phase
        if self.duration is not None:
            d["duration"] = self.duration
        return d

    @classmethod
    def from_json(cls, d: dict) -> "Gate":
        return cls(
            variant=d["variant"],
            qubits=tuple(d.get("qubits", ())),
            angle=float(d.get("angle", 0.0)),
            phase=float(d.get("phase", 0.0)),
            duration=d.get("duration"),
        )


def GlobalMS(phi: float) -> Gate:
    return Gate("GlobalMS", (), phi)


def SubsetMS(qubits: Iterable[int], phi: float) -> Gate:
    return Gate("SubsetMS", tuple(qubits), phi)


def RotZ(qubit: int, angle: float) -> Gate:
    return Gate("RotZ", (qubit,), angle)


def RotXY(qubit: int | None, angle: float, phase: float = 0.0) -> Gate:
    return Gate("RotXY", () if qubit is None else (qubit,), angle, phase)


def AddressedPi(qubit: int) -> Gate:
    return Gate("AddressedPi", (qubit,), math.pi)


def Idle(duration: float) -> Gate:
    return Gate("Idle", (), 0.0, duration=duration)


@dataclass(frozen=True)
class Circuit:
    n_qubits: int
    gates: tuple[Gate, ...] = ()
    global_phase: float = 0.0
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        if self.n_qubits < 1:
            raise ValueError("a circuit needs at least one qubit")
        for g in self.gates:
            if any(q >= self.n_qubits for q in g.qubits):
                raise ValueError(f"{g.variant} on {g.qubits} exceeds {self.n_qubits} qubits")

    def __len__(self) -> int:
        return len(self.gates)

    def __iter__(self):
        return iter(self.gates)

    def then(self, other: "Circuit") -> "Circuit":
        """``self`` followed by ``other``."""
        if other.n_qubits != self.n_qubits:
            raise ValueError("qubit counts differ")
        return Circuit(
            self.n_qubits, self.gates + other.gates, self.global_phase + other.global_phase
        )

    def count(self, variant: str) -> int:
        return sum(g.variant == variant for g in self.gates)

    def to_json(self) -> dict:
        return {
            "n_qubits": self.n_qubits,
            "global_phase": self.global_phase,
            "gates": [g.to_json() for g in self.gates],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1) + "\n"

    @classmethod
    def from_json(cls, d: dict) -> "Circuit":
        return cls(
            int(d["n_qubits"]),
            tuple(Gate.from_json(g) for g in d["gates"]),
            float(d.get("global_phase", 0.0)),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def load(cls, path: str | Path) -> "Circuit":
        return cls.from_json(json.loads(Path(path).read_text()))


# --- gate matrices --------------------------------------------------------------------


def _rot(axis: np.ndarray, angle: float) -> np.ndarray:
    return math.cos(angle / 2) * _I2 - 1j * math.sin(angle / 2) * axis


def _ms_matrix(k: int, phi: float) -> np.ndarray:
    """``exp(-i phi/2 sum_{i<j} X_i X_j)`` on ``k`` qubits, built in the X eigenbasis."""
    dim = 1 << k
    pop = np.array([bin(b).count("1") for b in range(dim)])
    m = k - 2 * pop
    diag = np.exp(-0.5j * phi * (m * m - k) / 2)
    h = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
    hk = np.ones((1, 1), dtype=complex)
    for _ in range(k):
        hk = np.kron(hk, h)
    return hk @ (diag[:, None] * hk)


def gate_ops(g: Gate, n_qubits: int) -> list[tuple[np.ndarray, tuple[int, ...]]]:
    """Local matrices of ``g`` with the qubits they act on.

    Bit ``i`` of a local index belongs to ``qubits[i]``.
    """
    v = g.variant
    if v == "Idle":
        return []
    if v in MS_VARIANTS:
        qs = g.support(n_qubits)
        if len(qs) < 2:
            return []
        return [(_ms_matrix(len(qs), g.angle), qs)]
    if v in ("RotZ", "AddressedPi"):
        return [(_rot(_Z, g.angle), g.qubits)]
    axis = math.cos(g.phase) * _X + math.sin(g.phase) * _Y
    m = _rot(axis, g.angle)
    return [(m, (q,)) for q in g.support(n_qubits)]


def apply_local(mat: np.ndarray, qubits: Sequence[int], arr: np.ndarray, n: int) -> np.ndarray:
    """Apply a local matrix to the leading ``2**n`` axis of ``arr``."""
    k = len(qubits)
    rest = arr.shape[1:]
    t = arr.reshape((2,) * n + rest)
    axes = [n - 1 - q for q in reversed(qubits)]
    t = np.tensordot(mat.reshape((2,) * (2 * k)), t, axes=(list(range(k, 2 * k)), axes))
    t = np.moveaxis(t, list(range(k)), axes)
    return np.ascontiguousarray(t.reshape(arr.shape))


def gate_matrix(g: Gate, n_qubits: int) -> np.ndarray:
    """Dense unitary of one gate on the full register."""
    check_dense(n_qubits)
    u = np.eye(1 << n_qubits, dtype=complex)
    for m, qs in gate_ops(g, n_qubits):
        u = apply_local(m, qs, u, n_qubits)
    return u


def unitary_of(c: Circuit) -> np.ndarray:
    """Ordered product of gate unitaries (last gate leftmost) times ``exp(i global_phase)``."""
    check_dense(c.n_qubits, DENSE_LIMIT)
    u = np.eye(1 << c.n_qubits, dtype=complex)
    for g in c.gates:
        for m, qs in gate_ops(g, c.n_qubits):
            u = apply_local(m, qs, u, c.n_qubits)
    return np.exp(1j * c.global_phase) * u


def equal_up_to_phase(a: np.ndarray, b: np.ndarray) -> tuple[float, float]:
    """Fit ``gamma`` minimizing ``|a - e^{i gamma} b|``; return ``(error, gamma)``."""
    ip = np.vdot(b, a)
    gamma = float(np.angle(ip)) if abs(ip) > 0 else 0.0
    return float(np.linalg.norm(a - np.exp(1j * gamma) * b)), gamma


# --- compilation ----------------------------------------------------------------------

def _clifford_candidates(q: int):
    h = math.pi / 2
    return [
        RotZ(q, h),
        RotZ(q, -h),
        RotXY(q, h, 0.0),
        RotXY(q, -h, 0.0),
        RotXY(q, h, h),
        RotXY(q, -h, h),
    ]


def _conj_axis(g: Gate, axis: str) -> tuple[int, str]:
    """``C P C^dag = sign * P'`` for single-qubit gate ``C``; returns ``(sign, P')``."""
    c = gate_ops(g, g.qubits[0] + 1)[0][0]
    m = c @ _PAULI[axis] @ c.conj().T
    for a, p in _PAULI.items():
        for s in (1, -1):
            if np.allclose(m, s * p, atol=1e-12):
                return s, a
    raise AssertionError("not a Clifford")


def _axis_rotation(q: int, src: str, dst: str) -> tuple[Gate | None, int]:
    """Gate ``C`` on ``q`` with ``C src C^dag = sign * dst`` (``None`` if ``src == dst``)."""
    if src == dst:
        return None, 1
    for g in _clifford_candidates(q):
        s, a = _conj_axis(g, src)
        if a == dst:
            return g, s
    raise AssertionError(f"no rotation {src}->{dst}")


def _inverse(g: Gate) -> Gate:
    return replace(g, angle=-g.angle)


def _ms_conjugated_pivot(support: Sequence[int], pivot: int) -> tuple[int, PauliString]:
    """``M Z_p M^dag = sign * Q`` for ``M = SubsetMS(support, pi/2)``."""
    phase = 1 + 0j
    q = PauliString([(pivot, "Z")])
    for j in support:
        if j == pivot:
            continue
        # exp(-i pi/4 X_p X_j) Z_p exp(i pi/4 X_p X_j) = Z_p (i X_p X_j)
        ph, q = multiply(q, PauliString([(pivot, "X"), (j, "X")]))
        phase *= 1j * ph
    sign = int(round(phase.real))
    assert abs(phase.imag) < 1e-12 and abs(sign) == 1
    return sign, q


def _ms_gate(support: Sequence[int], phi: float, n_qubits: int, refocus: bool) -> list[Gate]:
    if len(support) == n_qubits:
        return [GlobalMS(phi)]
    if refocus and len(support) == n_qubits - 1:
        return list(refocus_ms(support, phi, n_qubits).gates)
    return [SubsetMS(support, phi)]


def compile_pauli_exponential(
    theta: float,
    generator: PauliString | str,
    n_qubits: int,
    *,
    pivot: int | None = None,
    refocus: bool = False,
) -> Circuit:
    """Circuit equal to ``exp(-i theta G)``.

    With ``refocus`` a subset MS on all but one qubit is built from global
    MS gates and addressed pi pulses (the sign flips cancel in pairs).
    """
    g = PauliString.parse(generator) if isinstance(generator, str) else generator
    if g.is_identity():
        raise ValueError("cannot compile the identity generator (a pure phase)")
    if g.max_qubit() >= n_qubits:
        raise ValueError(f"{g} does not fit in {n_qubits} qubits")
    support = g.qubits
    if len(support) == 1:
        (q, a), = g.ops
        if a == "Z":
            gate = RotZ(q, 2 * theta)
        else:
            gate = RotXY(q, 2 * theta, 0.0 if a == "X" else math.pi / 2)
        return Circuit(n_qubits, (gate,))

    q_axis = "Y" if len(support) % 2 == 0 else "Z"
    if pivot is None:
        # prefer a pivot whose axis already matches so no wrapper is needed there
        matching = [q for q in support if g.axis(q) == q_axis]
        pivot = matching[0] if matching else support[0]
    if pivot not in support:
        raise ValueError(f"pivot {pivot} not in the support of {g}")
    sigma, q_str = _ms_conjugated_pivot(support, pivot)

    wrap: list[Gate] = []
    for q in support:
        rot, s = _axis_rotation(q, q_str.axis(q), g.axis(q))
        sigma *= s
        if rot is not None:
            wrap.append(rot)

    gates = [_inverse(w) for w in wrap]
    gates += _ms_gate(support, -math.pi / 2, n_qubits, refocus)
    gates.append(RotZ(pivot, 2 * sigma * theta))
    gates += _ms_gate(support, math.pi / 2, n_qubits, refocus)
    gates += wrap
    # refocused MS halves each carry a global phase of pi; the pair cancels
    return Circuit(n_qubits, tuple(gates))


def refocus_ms(subset: Iterable[int], phi: float, n_qubits: int) -> Circuit:
    """``SubsetMS(subset, phi)`` from two global ``MS(phi/2)`` around addressed pi pulses.

    The pi pulse on the excluded qubit ``e`` flips the sign of every ``X_e X_j``
    term in the second half, so only pairs inside ``subset`` accumulate phase.
    The two pulses contribute ``(-i)^2 = -1``, recorded as a global phase.
    """
    subset = tuple(sorted(set(int(q) for q in subset)))
    if len(subset) < 2:
        raise ValueError("subset must contain at least two qubits")
    if any(q < 0 or q >= n_qubits for q in subset):
        raise ValueError(f"subset {subset} outside {n_qubits} qubits")
    excluded = [q for q in range(n_qubits) if q not in subset]
    if not excluded:
        return Circuit(n_qubits, (GlobalMS(phi),))
    if len(excluded) != 1:
        raise ValueError("refocusing decouples exactly one qubit from the register")
    e = excluded[0]
    gates = (AddressedPi(e), GlobalMS(phi / 2), AddressedPi(e), GlobalMS(phi / 2))
    return Circuit(n_qubits, gates, global_phase=math.pi)


def measurement_prefix(basis: PauliString | str | Sequence[str], n_qubits: int | None = None) -> Circuit:
    """Rotations taking each qubit's measurement axis onto Z.

    ``basis`` is a Pauli string (unlisted qubits measure Z) or a sequence of
    axes indexed by qubit. X uses a ``-pi/2`` rotation about y, Y a ``pi/2``
    rotation about x.
    """
    if isinstance(basis, str):
        basis = PauliString.parse(basis)
    if isinstance(basis, PauliString):
        axes = basis.as_dict()
        n = n_qubits if n_qubits is not None else basis.max_qubit() + 1
    else:
        axes = {q: a.upper() for q, a in enumerate(basis)}
        n = n_qubits if n_qubits is not None else len(axes)
    gates = []
    for q in sorted(axes):
        a = axes[q]
        if a == "X":
            gates.append(RotXY(q, -math.pi / 2, math.pi / 2))
        elif a == "Y":
            gates.append(RotXY(q, math.pi / 2, 0.0))
        elif a not in ("Z", "I"):
            raise ValueError(f"unknown measurement axis {a!r}")
    return Circuit(max(n, 1), tuple(gates))


def ansatz_circuit(spec, params: Sequence[float], *, refocus: bool = False) -> Circuit:
    """Circuit of an :class:`~ionvqe.ansatz.AnsatzSpec` at ``params`` (reference not included)."""
    if len(params) != spec.n_params:
        raise ValueError(f"expected {spec.n_params} parameters, got {len(params)}")
    c = Circuit(spec.n_qubits)
    for e, th in zip(spec.entries, params):
        c = c.then(
            compile_pauli_exponential(e.scale * float(th), e.generator, spec.n_qubits, refocus=refocus)
        )
    return c


def exponential_matrix(theta: float, g: PauliString, n_qubits: int) -> np.ndarray:
    """``exp(-i theta G) = cos(theta) I - i sin(theta) G``."""
    p = pauli_string_matrix(g, n_qubits)
    return math.cos(theta) * np.eye(1 << n_qubits) - 1j * math.sin(theta) * p
