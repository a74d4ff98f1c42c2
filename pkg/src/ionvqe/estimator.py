"""Measurement planning and Hamiltonian averaging with projection-noise error bars.

Bit convention: outcome bit ``0`` is Z eigenvalue ``+1`` and ``1`` is ``-1``.
A term is estimated as the mean parity of the bits on its support in the
setting that serves it; the identity coefficient is added exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import kernels
from .circuit import measurement_prefix
from .pauli import PauliString, PauliSum
from .simulator import QuantumState, run_density, run_statevector, sample


@dataclass(frozen=True)
class MeasurementSetting:
    """Per-qubit measurement axes and the terms read out from them."""

    basis: PauliString
    terms: tuple[tuple[PauliString, float], ...]

    def __post_init__(self):
        for p, _ in self.terms:
            for q, a in p.ops:
                if self.basis.axis(q) != a:
                    raise ValueError(f"term {p} is not compatible with basis {self.basis}")

    @property
    def label(self) -> str:
        return str(self.basis)

    def coefficient_weight(self) -> float:
        return math.sqrt(sum(c * c for _, c in self.terms))


@dataclass(frozen=True)
class EnergyEstimate:
    value: float
    std: float
    expectations: dict = field(default_factory=dict)
    shots: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.std >= 0:
            raise ValueError("std must be non-negative")


def _coeffs(h: PauliSum) -> list[tuple[PauliString, float]]:
    return [(p, float(c.real)) for p, c in h.real().items()]


def plan_measurements(h: PauliSum, n_qubits: int | None = None) -> list[MeasurementSetting]:
    """Greedy first-fit of terms, by descending ``|c|``, into qubitwise-compatible settings.

    Qubits left unconstrained in a setting are measured in Z.
    """
    n = h.n_qubits() if n_qubits is None else n_qubits
    items = [(p, c) for p, c in _coeffs(h) if not p.is_identity()]
    items.sort(key=lambda it: -abs(it[1]))  # stable: ties keep canonical order
    groups: list[tuple[dict[int, str], list]] = []
    for p, c in items:
        for axes, members in groups:
            if all(axes.get(q, a) == a for q, a in p.ops):
                axes.update(p.as_dict())
                members.append((p, c))
                break
        else:
            groups.append((p.as_dict(), [(p, c)]))
    out = []
    for axes, members in groups:
        full = {q: axes.get(q, "Z") for q in range(n)}
        out.append(MeasurementSetting(PauliString(full), tuple(members)))
    return out


def allocate_shots(settings: Sequence[MeasurementSetting], shots: int, mode: str = "equal") -> list[int]:
    """Shots per setting: ``shots`` each, or the same total split by coefficient weight."""
    if mode == "equal":
        return [shots] * len(settings)
    if mode != "weighted":
        raise ValueError(f"unknown allocation mode {mode!r}")
    w = np.array([s.coefficient_weight() for s in settings])
    total = shots * len(settings)
    alloc = np.maximum(1, np.floor(total * w / w.sum())).astype(int)
    return [int(a) for a in alloc]


def _term_mask(p: PauliString) -> int:
    m = 0
    for q in p.qubits:
        m |= 1 << q
    return m


def _setting_stats(setting: MeasurementSetting, counts: Mapping[str, int]):
    """Per-term means, setting value mean and its per-shot variance, shot count."""
    keys = list(counts)
    outcomes = np.array([int(k, 2) for k in keys], dtype=np.int64)
    weights = np.array([counts[k] for k in keys], dtype=np.float64)
    r = weights.sum()
    if r <= 0:
        raise ValueError(f"setting {setting.label} has no shots")
    masks = [_term_mask(p) for p, _ in setting.terms]
    means = kernels.parity_expectations(outcomes, weights, masks)
    # per-outcome value of the setting's partial energy; its spread includes covariances
    vals = np.zeros(len(outcomes))
    for (p, c), m in zip(setting.terms, masks):
        par = np.array([bin(o & m).count("1") & 1 for o in outcomes])
        vals += c * (1 - 2 * par)
    mu = float((weights * vals).sum() / r)
    var = float((weights * (vals - mu) ** 2).sum() / r)
    return means, var, int(r)


def estimate_from_counts(
    h: PauliSum,
    settings: Sequence[MeasurementSetting],
    counts: Mapping[str, Mapping[str, int]],
) -> EnergyEstimate:
    """Energy and 1-sigma projection-noise error from per-setting count tables."""
    value = float(h.constant().real)
    var = 0.0
    exps: dict[str, float] = {}
    shots: dict[str, int] = {}
    for s in settings:
        if s.label not in counts:
            raise KeyError(f"no counts for measurement setting {s.label!r}")
        means, v, r = _setting_stats(s, counts[s.label])
        for (p, c), m in zip(s.terms, means):
            exps[str(p)] = float(m)
            value += c * float(m)
        var += v / r
        shots[s.label] = r
    return EnergyEstimate(value, math.sqrt(max(var, 0.0)), exps, shots)


def estimate_exact(state: QuantumState, h: PauliSum) -> EnergyEstimate:
    """Infinite-shot estimate: exact expectation, zero error."""
    exps = {str(p): state.expectation(p) for p, _ in _coeffs(h) if not p.is_identity()}
    return EnergyEstimate(state.expectation(h), 0.0, exps, {})


def rotated_state(state: QuantumState, setting: MeasurementSetting) -> QuantumState:
    c = measurement_prefix(setting.basis, state.n_qubits)
    if state.vector is not None:
        return run_statevector(c, state)
    return run_density(c, state)


def measure(
    state: QuantumState,
    settings: Sequence[MeasurementSetting],
    shots: int | Sequence[int],
    seed: int,
    *,
    stream: int = 0,
) -> dict[str, dict[str, int]]:
    """Sample every setting; setting ``k`` uses random draw ``(seed, stream, k)``."""
    per = [shots] * len(settings) if isinstance(shots, (int, np.integer)) else list(shots)
    out = {}
    for k, (s, r) in enumerate(zip(settings, per)):
        out[s.label] = sample(rotated_state(state, s), int(r), seed, stream=stream, index=k)
    return out


def estimate(
    state: QuantumState,
    h: PauliSum,
    shots: int | None = None,
    seed: int = 0,
    *,
    settings: Sequence[MeasurementSetting] | None = None,
    stream: int = 0,
    allocation: str = "equal",
) -> tuple[EnergyEstimate, dict]:
    """Estimate ``<H>`` on ``state``; ``shots=None`` is the exact infinite-shot mode.

    Returns the estimate and the count tables (empty in exact mode).
    """
    if shots is None:
        return estimate_exact(state, h), {}
    settings = settings if settings is not None else plan_measurements(h, state.n_qubits)
    alloc = allocate_shots(settings, shots, allocation)
    counts = measure(state, settings, alloc, seed, stream=stream)
    return estimate_from_counts(h, settings, counts), counts


def predicted_std(
    state: QuantumState,
    h: PauliSum,
    shots: int,
    settings: Sequence[MeasurementSetting] | None = None,
) -> float:
    """Exact 1-sigma projection noise of :func:`estimate` with ``shots`` per setting."""
    settings = settings if settings is not None else plan_measurements(h, state.n_qubits)
    n = state.n_qubits
    outcomes = np.arange(1 << n)
    var = 0.0
    for s in settings:
        probs = rotated_state(state, s).probabilities()
        vals = np.zeros(1 << n)
        for p, c in s.terms:
            m = _term_mask(p)
            vals += c * (1 - 2 * (np.array([bin(o & m).count("1") for o in outcomes]) & 1))
        mu = probs @ vals
        var += float(probs @ (vals - mu) ** 2) / shots
    return math.sqrt(var)


def shots_for_accuracy(
    h: PauliSum, target: float, expectations: Mapping[str, float] | None = None
) -> int:
    """Smallest ``r`` with ``sqrt(sum_l c_l^2 (1 - <H_l>^2) / r) <= target``.

    Terms are treated as independent; missing expectations default to 0
    (the worst case).
    """
    if not target > 0:
        raise ValueError("target must be positive")
    if math.isinf(target):
        return 1
    expectations = expectations or {}
    total = 0.0
    for p, c in _coeffs(h):
        if p.is_identity():
            continue
        e = float(expectations.get(str(p), 0.0))
        total += c * c * max(0.0, 1.0 - e * e)
    return max(1, math.ceil(total / target**2 - 1e-9))
