"""Coefficient tables: per-geometry Hamiltonian coefficients on disk.

A table is JSON::

    {"format": "ionvqe.table/1", "molecule": "H2", "basis": "sto-3g",
     "mapping": "bk_tapered", "n_qubits": 2, "reference": "01",
     "geometries": [{"R": 0.75, "nuclear_repulsion": 0.705...,
                     "terms": [{"pauli": "Z0", "coeff": -0.2...}, ...]}, ...]}

Fermionic tables use ``"ladder": "1^ 0"`` instead of ``"pauli"`` and carry
``n_modes``. Complex coefficients are written as ``[re, im]``. Floats are
written with ``repr`` precision, which round-trips exactly.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Any

from .fermion import FermionSum, format_ladder, parse_ladder
from .pauli import PauliString, PauliSum

FORMAT = "ionvqe.table/1"
MAPPINGS = ("fermionic", "jw", "bk", "bk_tapered")


class TableError(ValueError):
    """Malformed coefficient table."""


@dataclass(frozen=True)
class Geometry:
    R: float
    nuclear_repulsion: float
    operator: PauliSum | FermionSum

    def hamiltonian(self) -> PauliSum:
        """Qubit Hamiltonian with the nuclear repulsion folded into the identity term."""
        if not isinstance(self.operator, PauliSum):
            raise TypeError("fermionic geometry has no qubit Hamiltonian; transform it first")
        return self.operator + self.nuclear_repulsion


@dataclass(frozen=True)
class CoefficientTable:
    molecule: str
    basis: str
    mapping: str
    geometries: tuple[Geometry, ...]
    n_qubits: int
    reference: str = ""
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.mapping not in MAPPINGS:
            raise TableError(f"unknown mapping {self.mapping!r}")
        if not self.geometries:
            raise TableError("table has no geometries")
        Rs = [g.R for g in self.geometries]
        if any(b <= a for a, b in zip(Rs, Rs[1:])):
            raise TableError("R values must be strictly increasing")
        if self.reference and len(self.reference) != self.n_qubits:
            raise TableError(f"reference {self.reference!r} does not have {self.n_qubits} qubits")

    @property
    def is_fermionic(self) -> bool:
        return self.mapping == "fermionic"

    @property
    def R_values(self) -> list[float]:
        return [g.R for g in self.geometries]

    def at(self, R: float, tol: float = 1e-9) -> Geometry:
        for g in self.geometries:
            if abs(g.R - R) <= tol:
                return g
        raise KeyError(f"no geometry at R={R}")

    def select(self, R_values) -> "CoefficientTable":
        return replace(self, geometries=tuple(self.at(R) for R in R_values))

    def structure(self) -> list:
        keys: set = set()
        for g in self.geometries:
            keys |= set(g.operator.terms)
        return sorted(keys, key=lambda k: k.ops if isinstance(k, PauliString) else (len(k), k))

    # --- serialization -----------------------------------------------------------

    def to_json(self) -> dict:
        out: dict[str, Any] = {
            "format": FORMAT,
            "molecule": self.molecule,
            "basis": self.basis,
            "mapping": self.mapping,
            ("n_modes" if self.is_fermionic else "n_qubits"): self.n_qubits,
            "reference": self.reference,
        }
        out.update({k: v for k, v in self.metadata.items() if k not in out})
        keys = self.structure()
        geoms = []
        for g in self.geometries:
            terms = g.operator.terms
            rows = []
            for k in keys:
                c = terms.get(k, 0.0)
                if self.is_fermionic:
                    rows.append({"ladder": format_ladder(k), "coeff": _enc(c)})
                else:
                    rows.append({"pauli": str(k), "coeff": _enc(c)})
            geoms.append({"R": g.R, "nuclear_repulsion": g.nuclear_repulsion, "terms": rows})
        out["geometries"] = geoms
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1) + "\n"

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def from_json(cls, d: dict, source: str = "<table>") -> "CoefficientTable":
        try:
            mapping = d["mapping"]
            fermionic = mapping == "fermionic"
            n = int(d["n_modes"] if fermionic else d["n_qubits"])
            geoms = []
            for i, g in enumerate(d["geometries"]):
                ctx = f"{source}: geometry #{i}"
                try:
                    if fermionic:
                        op = FermionSum(
                            [(parse_ladder(t["ladder"]), _dec(t["coeff"])) for t in g["terms"]]
                        )
                    else:
                        op = PauliSum(
                            [(PauliString.parse(t["pauli"]), _dec(t["coeff"])) for t in g["terms"]]
                        )
                except (KeyError, ValueError, TypeError) as exc:
                    raise TableError(f"{ctx}: {exc}") from exc
                geoms.append(Geometry(float(g["R"]), float(g["nuclear_repulsion"]), op))
        except KeyError as exc:
            raise TableError(f"{source}: missing field {exc}") from exc
        meta_keys = {"format", "molecule", "basis", "mapping", "n_qubits", "n_modes",
                     "reference", "geometries"}
        return cls(
            molecule=d.get("molecule", ""),
            basis=d.get("basis", ""),
            mapping=mapping,
            geometries=tuple(geoms),
            n_qubits=n,
            reference=d.get("reference", ""),
            metadata={k: v for k, v in d.items() if k not in meta_keys},
        )

    @classmethod
    def load(cls, path: str | Path) -> "CoefficientTable":
        text = Path(path).read_text()
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise TableError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
        return cls.from_json(d, source=str(path))


def _enc(c: complex):
    c = complex(c)
    return c.real if c.imag == 0 else [c.real, c.imag]


def _dec(v) -> complex:
    if isinstance(v, list):
        return complex(float(v[0]), float(v[1]))
    return float(v)


def bundled_path(name: str) -> Path:
    """Path of a data file shipped with the package."""
    return Path(str(resources.files("ionvqe") / "data" / name))


def load_bundled(name: str) -> CoefficientTable:
    if not name.endswith(".json"):
        name += ".json"
    return CoefficientTable.load(bundled_path(name))


def config_hash(obj: Any) -> str:
    blob = json.dumps(obj, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]
