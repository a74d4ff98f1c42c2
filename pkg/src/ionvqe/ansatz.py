"""UCCSD excitation operators and their reduction to single Pauli exponentials.

An :class:`AnsatzSpec` is an ordered list of entries ``(symbol, G, scale)``;
entry ``k`` applies ``exp(-i * scale * theta_k * G)`` and entries act on the
reference in list order.

Excitation operators are written in canonical order, virtual creators then
occupied annihilators, each block with descending mode index:
``T = a^_b a^_a a_j a_i`` for ``i < j`` occupied and ``a < b`` virtual.
The anti-Hermitian generator is ``T - T^dag`` and ``U = exp(theta (T - T^dag))``.
"""
from __future__ import annotations

import itertools
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .fermion import FermionSum, bravyi_kitaev, format_ladder, jordan_wigner, parse_ladder
from .pauli import PauliString, PauliSum, commutes

log = logging.getLogger(__name__)

FORMAT = "ionvqe.ansatz/1"


class ReductionError(ValueError):
    """The exponent cannot be replaced by one Pauli string on this reference."""


# --- excitation operators ----------------------------------------------------------


@dataclass(frozen=True)
class ExcitationOperator:
    """Single or double excitation from ``occupied`` to ``virtual`` modes."""

    occupied: tuple[int, ...]
    virtual: tuple[int, ...]
    symbol: str = ""

    def __post_init__(self):
        occ = tuple(sorted(int(i) for i in self.occupied))
        vir = tuple(sorted(int(a) for a in self.virtual))
        if len(occ) != len(vir) or len(occ) not in (1, 2):
            raise ValueError("an excitation moves one or two electrons")
        if len(set(occ)) != len(occ) or len(set(vir)) != len(vir) or set(occ) & set(vir):
            raise ValueError(f"repeated mode in excitation {occ} -> {vir}")
        object.__setattr__(self, "occupied", occ)
        object.__setattr__(self, "virtual", vir)
        if not self.symbol:
            sym = "t_" + "".join(map(str, occ)) + "_" + "".join(map(str, vir))
            object.__setattr__(self, "symbol", sym)

    @property
    def kind(self) -> str:
        return "single" if len(self.occupied) == 1 else "double"

    def ladder(self):
        return tuple((a, True) for a in reversed(self.virtual)) + tuple(
            (i, False) for i in reversed(self.occupied)
        )

    def descriptor(self) -> str:
        """Ladder string of ``T``, e.g. ``"3^ 2^ 1 0"``."""
        return format_ladder(self.ladder())

    @classmethod
    def from_descriptor(cls, text: str, symbol: str = "") -> "ExcitationOperator":
        lad = parse_ladder(text)
        vir = [p for p, d in lad if d]
        occ = [p for p, d in lad if not d]
        op = cls(tuple(occ), tuple(vir), symbol)
        if op.ladder() != lad:
            raise ValueError(f"{text!r} is not in canonical excitation order ({op.descriptor()!r})")
        return op

    def excitation(self) -> FermionSum:
        return FermionSum([(self.ladder(), 1.0)])

    def generator(self) -> FermionSum:
        """Anti-Hermitian ``T - T^dag``."""
        t = self.excitation()
        return t - t.dagger()

    def qubit_exponent(self, mapping: str, n_modes: int) -> PauliSum:
        """Qubit form of ``T - T^dag`` under ``"jw"`` or ``"bk"``."""
        if mapping == "jw":
            return jordan_wigner(self.generator())
        if mapping == "bk":
            return bravyi_kitaev(self.generator(), n_modes)
        raise ValueError(f"unknown mapping {mapping!r}")


def _spin(p: int) -> int:
    return p % 2


def uccsd_generators(
    n_occupied: int, n_virtual: int, *, spin_conserving: bool = False
) -> list[ExcitationOperator]:
    """All singles then all doubles from modes ``0..n_occupied-1`` to the rest.

    With ``spin_conserving`` only excitations preserving the number of
    spin-up and spin-down electrons are kept (odd modes are spin-up).
    """
    if n_occupied < 0 or n_virtual < 0:
        raise ValueError("counts must be non-negative")
    occ = range(n_occupied)
    vir = range(n_occupied, n_occupied + n_virtual)
    singles = [
        ExcitationOperator((i,), (a,))
        for i in occ
        for a in vir
        if not spin_conserving or _spin(i) == _spin(a)
    ]
    doubles = []
    for ij in itertools.combinations(occ, 2):
        for ab in itertools.combinations(vir, 2):
            if spin_conserving and sorted(map(_spin, ij)) != sorted(map(_spin, ab)):
                continue
            doubles.append(ExcitationOperator(ij, ab))
    return singles + doubles


def screen(
    ops: Sequence,
    amplitudes: Sequence[float],
    threshold: float,
    *,
    max_count: int | None = None,
    tie_tol: float = 1e-9,
) -> list:
    """Keep operators with ``|amplitude| >= threshold``, in their original order.

    ``max_count`` further keeps only the largest ``max_count`` survivors.
    Amplitudes equal to within ``tie_tol`` (relative to the largest) rank
    by position, so degenerate orbitals select deterministically.
    """
    if len(ops) != len(amplitudes):
        raise ValueError("amplitudes must align with operators")
    keep = [k for k, a in enumerate(amplitudes) if abs(a) >= threshold]
    if max_count is not None and len(keep) > max_count:
        quantum = tie_tol * max(abs(amplitudes[k]) for k in keep) or 1.0
        ranked = sorted(keep, key=lambda k: (-round(abs(amplitudes[k]) / quantum), k))
        keep = sorted(ranked[:max_count])
    return [ops[k] for k in keep]


# --- amplitude files ---------------------------------------------------------------


def save_amplitudes(path: str | Path, ops: Sequence[ExcitationOperator], amplitudes) -> None:
    rows = [{"operator": op.descriptor(), "amplitude": float(a) + 0.0} for op, a in zip(ops, amplitudes)]
    Path(path).write_text(json.dumps(rows, indent=1) + "\n")


def load_amplitudes(path: str | Path) -> list[tuple[ExcitationOperator, float]]:
    rows = json.loads(Path(path).read_text())
    if not isinstance(rows, list):
        raise ValueError(f"{path}: amplitude file must be a JSON list")
    out = []
    for k, r in enumerate(rows):
        try:
            out.append((ExcitationOperator.from_descriptor(r["operator"]), float(r["amplitude"])))
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"{path}: entry #{k}: {exc}") from exc
    return out


def align_amplitudes(ops: Sequence[ExcitationOperator], table) -> list[float]:
    """Amplitude for each operator from ``(op, amplitude)`` pairs; missing ones are 0."""
    lookup = {(o.occupied, o.virtual): a for o, a in table}
    return [lookup.get((o.occupied, o.virtual), 0.0) for o in ops]


# --- ansatz files --------------------------------------------------------------------


@dataclass(frozen=True)
class AnsatzEntry:
    """One factor ``exp(-i * scale * theta * generator)``."""

    symbol: str
    generator: PauliString
    scale: float = 1.0
    approximate: bool = False

    def to_json(self) -> dict:
        return {
            "symbol": self.symbol,
            "generator": str(self.generator),
            "scale": self.scale,
            "approximate": self.approximate,
        }

    @classmethod
    def from_json(cls, d: dict) -> "AnsatzEntry":
        return cls(
            symbol=str(d["symbol"]),
            generator=PauliString.parse(d["generator"]),
            scale=float(d.get("scale", 1.0)),
            approximate=bool(d.get("approximate", False)),
        )


@dataclass(frozen=True)
class AnsatzSpec:
    entries: tuple[AnsatzEntry, ...]
    reference: str
    mapping: str = ""
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        n = self.n_qubits
        if any(c not in "01" for c in self.reference):
            raise ValueError(f"reference {self.reference!r} is not a bit string")
        for e in self.entries:
            if e.generator.max_qubit() >= n:
                raise ValueError(f"generator {e.generator} does not fit in {n} qubits")
            if e.generator.masks()[0] == 0:
                raise ValueError(
                    f"generator {e.generator} has no X or Y and cannot change the reference"
                )

    @property
    def n_qubits(self) -> int:
        return len(self.reference)

    @property
    def n_params(self) -> int:
        return len(self.entries)

    @property
    def symbols(self) -> list[str]:
        return [e.symbol for e in self.entries]

    @property
    def approximate(self) -> bool:
        return any(e.approximate for e in self.entries)

    def reference_state(self) -> np.ndarray:
        psi = np.zeros(1 << self.n_qubits, dtype=complex)
        psi[int(self.reference, 2)] = 1.0
        return psi

    def state(self, params: Sequence[float]) -> np.ndarray:
        """Ideal statevector of the ansatz at ``params``."""
        if len(params) != self.n_params:
            raise ValueError(f"expected {self.n_params} parameters, got {len(params)}")
        psi = self.reference_state()
        for e, th in zip(self.entries, params):
            psi = apply_pauli_rotation(psi, e.generator, e.scale * float(th))
        return psi

    def to_json(self) -> dict:
        out = {
            "format": FORMAT,
            "reference": self.reference,
            "n_qubits": self.n_qubits,
            "mapping": self.mapping,
            "entries": [e.to_json() for e in self.entries],
        }
        out.update({k: v for k, v in self.metadata.items() if k not in out})
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1) + "\n"

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def from_json(cls, d: dict) -> "AnsatzSpec":
        known = {"format", "reference", "n_qubits", "mapping", "entries"}
        spec = cls(
            entries=tuple(AnsatzEntry.from_json(e) for e in d["entries"]),
            reference=d["reference"],
            mapping=d.get("mapping", ""),
            metadata={k: v for k, v in d.items() if k not in known},
        )
        if "n_qubits" in d and int(d["n_qubits"]) != spec.n_qubits:
            raise ValueError("n_qubits does not match the reference length")
        return spec

    @classmethod
    def load(cls, path: str | Path) -> "AnsatzSpec":
        return cls.from_json(json.loads(Path(path).read_text()))


def apply_pauli_rotation(psi: np.ndarray, g: PauliString, phi: float) -> np.ndarray:
    """``exp(-i phi G) psi = cos(phi) psi - i sin(phi) G psi``."""
    x, z = g.masks()
    gpsi = kernels.apply_pauli(np.ascontiguousarray(psi, dtype=complex), x, z, g.n_y())
    return np.cos(phi) * psi - 1j * np.sin(phi) * gpsi


# --- reduction ---------------------------------------------------------------------


def _hermitian_part(exponent: PauliSum) -> PauliSum:
    """``K = i A`` for anti-Hermitian ``A``, so ``exp(theta A) = exp(-i theta K)``."""
    try:
        return (exponent * 1j).real()
    except ValueError as exc:
        raise ReductionError(f"exponent is not anti-Hermitian: {exc}") from None


def _action(p: PauliString, k: int) -> tuple[int, complex]:
    """``P|k> = lam |k'>``; returns ``(k', lam)``."""
    x, z = p.masks()
    sign = -1 if bin(k & z).count("1") % 2 else 1
    return k ^ x, (1j ** p.n_y()) * sign


def _representative_key(item):
    p, c = item
    ys = tuple(q for q, a in p.ops if a == "Y")
    return (c < 0, p.weight(), len(ys), ys, p.ops)


def reduce_on_reference(
    exponent: PauliSum,
    reference: str,
    *,
    symbol: str = "theta",
    representative: PauliString | str | None = None,
    n_checks: int = 7,
    tol: float = 1e-10,
) -> AnsatzEntry:
    """Replace ``exp(theta A)`` by one Pauli exponential with the same action on ``reference``.

    ``A`` must be anti-Hermitian with pairwise commuting terms that all map
    the reference to the same other basis state. If every term then acts as
    ``+-G`` on that two-state subspace, ``exp(theta A)|ref>`` equals
    ``exp(-i scale theta G)|ref>`` with ``scale`` the signed sum of the
    coefficients of ``K = iA``. The equality is checked numerically against
    a sparse matrix exponential before returning.

    Without ``representative`` the generator is the term with positive
    ``K`` coefficient, lowest weight, fewest Y factors and Y on the lowest
    qubits, in that order of preference.
    """
    k_op = _hermitian_part(exponent)
    items = [(p, c.real) for p, c in k_op.items() if not p.is_identity()]
    if len(k_op) != len(items):
        raise ReductionError("exponent has an identity component (a pure phase)")
    if not items:
        raise ReductionError("exponent is zero")
    n = len(reference)
    if k_op.n_qubits() > n:
        raise ReductionError(f"exponent acts on {k_op.n_qubits()} qubits, reference has {n}")
    if len(items) == 1:
        p, c = items[0]
        return AnsatzEntry(symbol, p, c)

    for (p, _), (q, _) in itertools.combinations(items, 2):
        if not commutes(p, q):
            raise ReductionError(f"terms {p} and {q} do not commute")
    r = int(reference, 2)
    actions = {p: _action(p, r) for p, _ in items}
    targets = {t for t, _ in actions.values()}
    if len(targets) != 1:
        raise ReductionError(
            f"terms map the reference to {len(targets)} different basis states; "
            "use subterm_approximation instead"
        )
    if targets == {r}:
        raise ReductionError("exponent leaves the reference unchanged")

    if representative is None:
        g = min(items, key=_representative_key)[0]
    else:
        g = PauliString.parse(representative) if isinstance(representative, str) else representative
        if g not in actions:
            raise ReductionError(f"representative {g} is not a term of the exponent")
    lam_g = actions[g][1]
    scale = 0.0
    for p, c in items:
        s = actions[p][1] / lam_g
        if abs(s.imag) > tol or abs(abs(s.real) - 1) > tol:
            raise ReductionError(f"term {p} does not act as +-{g} on the reference")
        scale += round(s.real) * c

    _verify(exponent, AnsatzEntry(symbol, g, scale), reference, n_checks, tol)
    return AnsatzEntry(symbol, g, scale)


def _verify(exponent: PauliSum, entry: AnsatzEntry, reference: str, n_checks: int, tol: float):
    from scipy.sparse.linalg import expm_multiply

    from .pauli import to_sparse

    spec = AnsatzSpec((entry,), reference)
    a = to_sparse(exponent, spec.n_qubits).tocsc()
    psi0 = spec.reference_state()
    for th in np.linspace(0.1, 2 * np.pi - 0.1, n_checks):
        full = expm_multiply(th * a, psi0)
        err = np.linalg.norm(full - spec.state([th]))
        if err > max(tol, 1e-9):
            raise ReductionError(
                f"numerical check failed at theta={th:.4f}: |difference| = {err:.3e}"
            )


def subterm_approximation(
    exponent: PauliSum,
    keep: PauliString | str | int = "lowest_weight",
    *,
    symbol: str = "theta",
    normalize: bool = True,
) -> AnsatzEntry:
    """Keep one term of ``K = iA`` as the generator and drop the rest.

    ``keep`` is a Pauli string, an index into the canonical term order, or
    ``"lowest_weight"`` (ties go to the first in canonical order). With
    ``normalize`` the kept term's coefficient is absorbed into the free
    parameter; otherwise it becomes the entry's scale. A single-term
    exponent is returned exactly.
    """
    k_op = _hermitian_part(exponent)
    items = [(p, c.real) for p, c in k_op.items() if not p.is_identity()]
    if not items:
        raise ValueError("exponent has no non-identity term")
    if len(items) == 1:
        p, c = items[0]
        return AnsatzEntry(symbol, p, c)
    if isinstance(keep, (int, np.integer)) and not isinstance(keep, bool):
        p, c = items[int(keep)]
    elif keep == "lowest_weight":
        p, c = min(items, key=lambda it: (it[0].weight(), it[0].ops))
    else:
        p = PauliString.parse(keep) if isinstance(keep, str) else keep
        if p not in k_op:
            raise ValueError(f"{p} is not a term of the exponent")
        c = k_op.coeff(p).real
    return AnsatzEntry(symbol, p, 1.0 if normalize else c, approximate=True)


def build_spec(
    ops: Iterable[ExcitationOperator],
    exponents: Iterable[PauliSum],
    reference: str,
    *,
    mapping: str = "",
    approximate: bool = False,
) -> AnsatzSpec:
    """Reduce each exponent, falling back to the lowest-weight subterm when allowed."""
    entries = []
    for op, a in zip(ops, exponents):
        try:
            entries.append(reduce_on_reference(a, reference, symbol=op.symbol))
        except ReductionError as exc:
            if not approximate:
                raise
            log.info("%s: %s; keeping the lowest-weight subterm", op.descriptor(), exc)
            entries.append(subterm_approximation(a, symbol=op.symbol))
    return AnsatzSpec(tuple(entries), reference, mapping)
