"""Statevector and density-matrix execution with dephasing and MS depolarizing noise.

Noise is applied after every gate: dephasing on every qubit for the gate's
duration (independent or collective), then, after MS gates, depolarizing
noise on the gate's support.

Random numbers come from a counter-based Philox generator keyed by
``(seed, stream, index)`` so any single draw can be reproduced in isolation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import kernels
from .circuit import MS_VARIANTS, Circuit, Gate, apply_local, gate_ops
from .pauli import PauliString, PauliSum, check_dense

DENSITY_LIMIT = 8
DEPHASING_MODES = ("off", "iid", "collective")

DEFAULT_DURATIONS = {
    "ms": 100e-6,
    "global": 10e-6,
    "addressed": 20e-6,
}


def make_rng(seed: int, stream: int = 0, index: int = 0) -> np.random.Generator:
    """Independent generator for draw ``index`` of ``stream`` under ``seed``."""
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, int(stream), int(index)])
    return np.random.Generator(np.random.Philox(ss))


# --- states ---------------------------------------------------------------------------


@dataclass
class QuantumState:
    """Pure (``vector``) or mixed (``rho``) state of ``n_qubits`` qubits."""

    n_qubits: int
    vector: np.ndarray | None = None
    rho: np.ndarray | None = None

    def __post_init__(self):
        if (self.vector is None) == (self.rho is None):
            raise ValueError("give exactly one of vector or rho")
        dim = 1 << self.n_qubits
        arr = self.vector if self.vector is not None else self.rho
        if arr.shape[0] != dim:
            raise ValueError(f"state dimension {arr.shape[0]} does not match {self.n_qubits} qubits")

    @classmethod
    def basis(cls, label: str | int, n_qubits: int | None = None) -> "QuantumState":
        if isinstance(label, str):
            if n_qubits is None:
                n_qubits = len(label)
            elif len(label) != n_qubits:
                raise ValueError(f"basis label {label!r} does not have {n_qubits} qubits")
            label = int(label, 2)
        if n_qubits is None:
            raise ValueError("n_qubits is required for an integer basis label")
        v = np.zeros(1 << n_qubits, dtype=complex)
        v[label] = 1.0
        return cls(n_qubits, vector=v)

    @property
    def is_pure(self) -> bool:
        return self.vector is not None

    def density(self) -> np.ndarray:
        if self.rho is not None:
            return self.rho
        return np.outer(self.vector, self.vector.conj())

    def probabilities(self) -> np.ndarray:
        if self.vector is not None:
            p = np.abs(self.vector) ** 2
        else:
            p = np.real(np.diag(self.rho)).copy()
        p = np.clip(p, 0.0, None)
        return p / p.sum()

    def expectation(self, h: PauliSum | PauliString) -> float:
        if isinstance(h, PauliString):
            h = PauliSum.from_string(h)
        total = 0.0
        for p, c in h.items():
            x, z = p.masks()
            if self.vector is not None:
                v = kernels.expval_pauli_state(self.vector, x, z, p.n_y())
            else:
                v = kernels.expval_pauli_density(self.rho, x, z, p.n_y())
            total += (c * v).real
        return float(total)

    def fidelity(self, pure: np.ndarray) -> float:
        """``<phi| rho |phi>`` against a pure target."""
        if self.vector is not None:
            return float(abs(np.vdot(pure, self.vector)) ** 2)
        return float(np.real(np.vdot(pure, self.rho @ pure)))

    def validate(self, tol: float = 1e-12, psd_tol: float = 1e-10) -> None:
        if self.vector is not None:
            nrm = np.linalg.norm(self.vector)
            if abs(nrm - 1) > tol:
                raise ValueError(f"statevector norm {nrm} differs from 1")
            return
        r = self.rho
        if np.abs(r - r.conj().T).max() > tol:
            raise ValueError("density matrix is not Hermitian")
        tr = np.trace(r).real
        if abs(tr - 1) > tol:
            raise ValueError(f"density matrix trace {tr} differs from 1")
        ev = np.linalg.eigvalsh(r)
        if ev.min() < -psd_tol:
            raise ValueError(f"density matrix has eigenvalue {ev.min()}")


def _input_vector(inp, n: int) -> np.ndarray:
    if isinstance(inp, QuantumState):
        if inp.n_qubits != n:
            raise ValueError(f"input has {inp.n_qubits} qubits, circuit {n}")
        if inp.vector is None:
            raise ValueError("statevector simulation needs a pure input")
        return inp.vector.astype(complex, copy=True)
    if isinstance(inp, (str, int, np.integer)):
        return QuantumState.basis(inp, n).vector
    v = np.asarray(inp, dtype=complex)
    if v.shape != (1 << n,):
        raise ValueError(f"input vector has shape {v.shape}, expected ({1 << n},)")
    return v.copy()


def run_statevector(c: Circuit, inp: str | int | np.ndarray | QuantumState) -> QuantumState:
    """Noiseless execution from a basis label or vector."""
    check_dense(c.n_qubits)
    n = c.n_qubits
    psi = _input_vector(inp, n)
    for g in c.gates:
        for m, qs in gate_ops(g, n):
            psi = apply_local(m, qs, psi, n)
    psi = np.exp(1j * c.global_phase) * psi
    nrm = np.linalg.norm(psi)
    if abs(nrm - 1) > 1e-12:
        psi = psi / nrm
    return QuantumState(n, vector=psi)


# --- noise ----------------------------------------------------------------------------


@dataclass(frozen=True)
class NoiseModel:
    """Dephasing (``T2`` in seconds) plus depolarizing MS errors of fidelity ``ms_fidelity``."""

    T2: float = 0.040
    ms_fidelity: float = 1.0
    dephasing: str = "iid"
    durations: Mapping[str, float] = field(default_factory=lambda: dict(DEFAULT_DURATIONS))

    def __post_init__(self):
        if self.dephasing not in DEPHASING_MODES:
            raise ValueError(f"dephasing must be one of {DEPHASING_MODES}")
        if not self.T2 > 0:
            raise ValueError("T2 must be positive")
        if not 0 < self.ms_fidelity <= 1:
            raise ValueError("ms_fidelity must lie in (0, 1]")
        if self.p_ms(2) >= 1:
            raise ValueError(f"ms_fidelity {self.ms_fidelity} gives an error probability >= 1")
        d = dict(DEFAULT_DURATIONS)
        d.update(self.durations)
        if any(v < 0 for v in d.values()):
            raise ValueError("durations must be non-negative")
        object.__setattr__(self, "durations", d)

    @classmethod
    def off(cls) -> "NoiseModel":
        return cls(dephasing="off", ms_fidelity=1.0)

    @property
    def is_off(self) -> bool:
        return self.dephasing == "off" and self.ms_fidelity == 1.0

    def p_d(self, duration: float) -> float:
        """Independent dephasing probability ``1 - exp(-T_g / T2)``."""
        return 1.0 - math.exp(-duration / self.T2)

    def sigma2(self, duration: float) -> float:
        """Variance of the collective phase; single-qubit coherence decays as ``exp(-T_g/T2)``."""
        return 2.0 * duration / self.T2

    def p_ms(self, k: int) -> float:
        """Total Pauli-error probability of a ``k``-qubit MS gate.

        ``k = 2`` gives ``(1 - F) * 15/14``; larger ``k`` keeps the same
        form with ``4**k - 1`` error terms.
        """
        d2 = 4**k
        return (1.0 - self.ms_fidelity) * (d2 - 1) / (d2 - 2)

    def duration(self, g: Gate) -> float:
        if g.duration is not None:
            return g.duration
        if g.variant in MS_VARIANTS:
            return self.durations["ms"]
        if g.variant == "Idle":
            return 0.0
        if g.variant == "RotXY" and g.is_global:
            return self.durations["global"]
        return self.durations["addressed"]

    def to_json(self) -> dict:
        return {
            "T2": self.T2,
            "ms_fidelity": self.ms_fidelity,
            "dephasing": self.dephasing,
            "durations": dict(sorted(self.durations.items())),
        }


def _paulis_on(qubits: Sequence[int]) -> list[tuple[int, int]]:
    """``(x_mask, z_mask)`` of every non-identity Pauli on ``qubits``."""
    out = []
    for code in range(1, 4 ** len(qubits)):
        x = z = 0
        for i, q in enumerate(qubits):
            a = (code >> (2 * i)) & 3  # 1: X, 2: Z, 3: Y
            if a & 1:
                x |= 1 << q
            if a & 2:
                z |= 1 << q
        out.append((x, z))
    return out


def depolarize(rho: np.ndarray, qubits: Sequence[int], p: float) -> np.ndarray:
    """``(1 - p) rho + p/(4^k - 1) sum_P P rho P`` over non-identity Paulis on ``qubits``."""
    if p == 0:
        return rho
    paulis = _paulis_on(qubits)
    xs = [0] + [x for x, _ in paulis]
    zs = [0] + [z for _, z in paulis]
    w = [1.0 - p] + [p / len(paulis)] * len(paulis)
    return kernels.pauli_channel(rho, xs, zs, w)


def dephasing_kraus(p: float) -> list[np.ndarray]:
    return [math.sqrt(1 - p) * np.eye(2), math.sqrt(p) * np.diag([1.0, -1.0])]


def _from_masks(x: int, z: int, k: int) -> PauliString:
    axes = {(1, 0): "X", (0, 1): "Z", (1, 1): "Y"}
    return PauliString(
        (q, axes[((x >> q) & 1, (z >> q) & 1)]) for q in range(k) if ((x | z) >> q) & 1
    )


def depolarizing_kraus(k: int, p: float) -> list[np.ndarray]:
    from .pauli import pauli_string_matrix

    paulis = _paulis_on(range(k))
    ops = [math.sqrt(1 - p) * np.eye(1 << k, dtype=complex)]
    for x, z in paulis:
        ops.append(math.sqrt(p / len(paulis)) * pauli_string_matrix(_from_masks(x, z, k), k))
    return ops


def apply_noise(rho: np.ndarray, g: Gate, noise: NoiseModel, n: int) -> np.ndarray:
    t = noise.duration(g)
    if noise.dephasing == "iid" and t > 0:
        p = noise.p_d(t)
        for q in range(n):
            rho = kernels.dephase(rho, q, p)
    elif noise.dephasing == "collective" and t > 0:
        rho = kernels.collective_dephase(rho, n, noise.sigma2(t))
    if g.variant in MS_VARIANTS and noise.ms_fidelity < 1:
        qs = g.support(n)
        rho = depolarize(rho, qs, noise.p_ms(len(qs)))
    return rho


def run_density(
    c: Circuit, inp: str | int | np.ndarray | QuantumState, noise: NoiseModel | None = None
) -> QuantumState:
    """Density-matrix execution; each gate is followed by its noise channels."""
    n = c.n_qubits
    check_dense(n, DENSITY_LIMIT)
    noise = noise or NoiseModel.off()
    if isinstance(inp, QuantumState) and inp.rho is not None:
        rho = inp.rho.astype(complex, copy=True)
    else:
        v = _input_vector(inp, n)
        rho = np.outer(v, v.conj())
    for g in c.gates:
        for m, qs in gate_ops(g, n):
            rho = apply_local(m, qs, rho, n)
            rho = apply_local(m, qs, rho.conj().T, n).conj().T
        rho = np.ascontiguousarray(rho)
        if not noise.is_off:
            rho = apply_noise(rho, g, noise, n)
    return QuantumState(n, rho=rho)


def run(c: Circuit, inp, noise: NoiseModel | None = None) -> QuantumState:
    """Statevector when noiseless, density matrix otherwise."""
    if noise is None or noise.is_off:
        return run_statevector(c, inp)
    return run_density(c, inp, noise)


# --- sampling -------------------------------------------------------------------------


def sample(
    state: QuantumState, shots: int, seed: int, *, stream: int = 0, index: int = 0
) -> dict[str, int]:
    """Multinomial draw of ``shots`` computational-basis outcomes, keyed by bit string."""
    if shots < 1:
        raise ValueError("shots must be at least 1")
    p = state.probabilities()
    counts = make_rng(seed, stream, index).multinomial(shots, p)
    n = state.n_qubits
    return {format(k, f"0{n}b"): int(v) for k, v in enumerate(counts) if v}
