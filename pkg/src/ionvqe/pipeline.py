"""Multi-geometry workflows shared by the command line and the table generator."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .ansatz import AnsatzSpec
from .estimator import estimate, plan_measurements
from .fermion import (
    TaperingMap,
    bravyi_kitaev,
    jordan_wigner,
    occupation_to_bk,
    taper_qubits,
)
from .pauli import PauliString, PauliSum, conjugate_frame
from .simulator import NoiseModel, run
from .circuit import ansatz_circuit
from .surface import PesPoint, ScanGrid, exact_ground_energy, quad2d_fit, sinusoid_fit
from .tables import CoefficientTable, Geometry, TableError

log = logging.getLogger(__name__)


# --- transformation ---------------------------------------------------------------------


def qubit_reference(occupation: str, mapping: str) -> str:
    """Basis state encoding the occupation bit string under ``mapping``."""
    if mapping == "jw":
        return occupation
    if mapping == "bk":
        return occupation_to_bk(occupation)
    raise ValueError(f"unknown mapping {mapping!r}")


def transform_table(
    table: CoefficientTable,
    mapping: str,
    *,
    occupation: str | None = None,
    taper: bool = False,
) -> tuple[CoefficientTable, TaperingMap | None]:
    """Map a fermionic table to qubits, optionally tapering I/Z-only qubits.

    The tapering map is chosen from the union of all geometries' terms so
    every geometry is reduced identically.
    """
    if not table.is_fermionic:
        raise TableError(f"expected a fermionic table, got mapping {table.mapping!r}")
    occ = occupation or table.reference
    n = table.n_qubits
    if not occ:
        raise TableError("no reference occupation given and the table carries none")
    if len(occ) != n:
        raise TableError(f"occupation {occ!r} does not match {n} modes")
    ref = qubit_reference(occ, mapping)
    fn = jordan_wigner if mapping == "jw" else (lambda s: bravyi_kitaev(s, n))
    ops = [fn(g.operator).real() for g in table.geometries]
    tmap = None
    tag = mapping
    if taper:
        union = PauliSum({p: 1.0 for op in ops for p in op.terms})
        _, tmap, reduced_ref = taper_qubits(union, ref)
        if tmap.is_empty():
            tmap = None
        else:
            ops = [tmap.apply(op) for op in ops]
            ref = reduced_ref
            if mapping != "bk":
                raise TableError("tapered tables are only defined for the bk mapping")
            tag = "bk_tapered"
    geoms = tuple(Geometry(g.R, g.nuclear_repulsion, op) for g, op in zip(table.geometries, ops))
    meta = dict(table.metadata)
    meta["source_mapping"] = "fermionic"
    meta["occupation"] = occ
    if tmap is not None:
        meta["tapering"] = tmap.to_json()
    out = CoefficientTable(table.molecule, table.basis, tag, geoms, len(ref), ref, meta)
    return out, tmap


def frame_rotate(h: PauliSum, spec: AnsatzSpec, frame: PauliString | str):
    """Conjugate ``h`` and the ansatz by a Pauli frame built from X factors.

    The reference is flipped on the frame's X qubits. Generators commuting
    with the frame are unchanged; anticommuting ones flip the sign of their
    scale. Energies of corresponding states are identical.
    """
    from .ansatz import AnsatzEntry
    from .pauli import commutes

    f = PauliString.parse(frame) if isinstance(frame, str) else frame
    if any(a != "X" for _, a in f.ops):
        raise ValueError("frame must consist of X factors")
    bits = list(spec.reference)
    n = len(bits)
    for q in f.qubits:
        bits[n - 1 - q] = "1" if bits[n - 1 - q] == "0" else "0"
    entries = tuple(
        e if commutes(e.generator, f) else AnsatzEntry(e.symbol, e.generator, -e.scale, e.approximate)
        for e in spec.entries
    )
    new_spec = AnsatzSpec(entries, "".join(bits), spec.mapping, dict(spec.metadata))
    return conjugate_frame(h, f), new_spec


# --- scans ------------------------------------------------------------------------------


@dataclass(frozen=True)
class ScanConfig:
    axes: tuple[tuple[float, ...], ...]
    shots: int | None = None
    seed: int = 0
    noise: NoiseModel | None = None
    refocus: bool = False


def grid_axis(lo: float, hi: float, step: float) -> tuple[float, ...]:
    """Inclusive range ``lo, lo+step, ..., hi`` (``hi`` kept when it lies on the grid)."""
    if step <= 0:
        raise ValueError("step must be positive")
    if hi < lo:
        raise ValueError("empty grid axis")
    n = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return tuple(round(lo + k * step, 12) for k in range(n))


def scan(h: PauliSum, spec: AnsatzSpec, cfg: ScanConfig, R: float = math.nan) -> ScanGrid:
    """Energy (and per-term expectations) at every grid point.

    Grid point ``k`` (row-major) draws its shots from random stream ``k``.
    """
    if len(cfg.axes) != spec.n_params:
        raise ValueError(
            f"grid has {len(cfg.axes)} axes but the ansatz has {spec.n_params} parameters"
        )
    if any(len(a) == 0 for a in cfg.axes):
        raise ValueError("grid has an empty axis")
    settings = plan_measurements(h, spec.n_qubits)
    mesh = np.meshgrid(*[np.asarray(a) for a in cfg.axes], indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    energy = np.empty(len(pts))
    std = np.empty(len(pts))
    terms = [str(p) for s in settings for p, _ in s.terms]
    exps = {t: np.empty(len(pts)) for t in terms}
    for k, theta in enumerate(pts):
        state = run(ansatz_circuit(spec, theta, refocus=cfg.refocus), spec.reference, cfg.noise)
        est, _ = estimate(state, h, cfg.shots, cfg.seed, settings=settings, stream=k)
        energy[k] = est.value
        std[k] = est.std
        for t in terms:
            exps[t][k] = est.expectations[t]
    meta = {"shots": cfg.shots, "seed": cfg.seed, "symbols": spec.symbols,
            "noise": None if cfg.noise is None else cfg.noise.to_json()}
    return ScanGrid([np.asarray(a) for a in cfg.axes], energy, std, R, exps, meta)


def fit_scan(grid: ScanGrid, method: str = "auto", *, frequency: float = 2.0, **kw) -> PesPoint:
    """Minimum of a scan as a :class:`PesPoint`.

    ``auto`` picks ``sinusoid`` for 1D and ``quad2d`` for 2D. The quad2d
    default uses the window filter with a half width of one grid step per
    axis, i.e. the 3x3 neighbourhood of the lowest interior grid point.
    """
    from .surface import FitError, gpr_fit

    if method == "auto":
        method = "sinusoid" if grid.dim == 1 else "quad2d"
    std = grid.std.ravel() if np.any(grid.std > 0) else None
    if method == "sinusoid":
        if grid.dim != 1:
            raise FitError("sinusoid fit needs a one-dimensional scan")
        f = sinusoid_fit(grid.axes[0], grid.energy, std, frequency=frequency)
        return PesPoint(grid.R, f.E_min, f.E_err, "sinusoid")
    pts = grid.points()
    if method == "quad2d":
        if grid.dim != 2:
            raise FitError("quad2d fit needs a two-dimensional scan")
        kw.setdefault("filter", "window")
        kw.setdefault("half_width", tuple(_step(a) for a in grid.axes))
        f = quad2d_fit(pts[:, 0], pts[:, 1], grid.energy.ravel(), std, **kw)
        return PesPoint(grid.R, f.m, f.err, "quad2d")
    if method == "gpr":
        box = [(float(a.min()), float(a.max())) for a in grid.axes]
        f = gpr_fit(pts, grid.energy.ravel(), std, box=box, **kw)
        return PesPoint(grid.R, f.E_min, f.E_err, "gpr")
    raise FitError(f"unknown fit method {method!r}")


def _step(axis) -> float:
    a = np.unique(np.asarray(axis, dtype=float))
    return float(np.min(np.diff(a))) if len(a) > 1 else 0.0


def ground_energies(table: CoefficientTable) -> dict[float, float]:
    return {g.R: exact_ground_energy(g.hamiltonian(), table.n_qubits) for g in table.geometries}


def check_compatible(table: CoefficientTable, spec: AnsatzSpec) -> None:
    if table.is_fermionic:
        raise TableError("transform the fermionic table to qubits first")
    if table.n_qubits != spec.n_qubits:
        raise ValueError(
            f"table has {table.n_qubits} qubits but the ansatz has {spec.n_qubits}"
        )


# --- traces and noisy minima ----------------------------------------------------------


def trace_points(trace, phase: str | None = None):
    """``(theta, energy, std)`` arrays of a trace's evaluations (perturbations excluded)."""
    evs = [e for e in trace.evaluations if phase is None or e.phase == phase]
    if not evs:
        raise ValueError("trace has no evaluations" + (f" in phase {phase!r}" if phase else ""))
    theta = np.array([e.theta for e in evs], dtype=float)
    energy = np.array([e.energy for e in evs], dtype=float)
    std = np.array([e.std for e in evs], dtype=float)
    return theta, energy, std


def fit_trace(trace, method: str = "quad2d", R: float = math.nan, *, frequency: float = 2.0,
              half_width=(0.5, 0.5), **kw) -> PesPoint:
    """Fit the energy landscape sampled by an optimizer trace.

    ``quad2d`` uses every evaluation inside a ``half_width`` box around the
    lowest one, then the median rule; ``vqe`` reports the terminal value.
    """
    from .surface import FitError, gpr_fit

    if method == "vqe":
        e = trace.final_evaluation()
        return PesPoint(R, float(e.energy), float(e.std), "vqe")
    theta, energy, std = trace_points(trace)
    s = std if np.all(std > 0) else None
    if method == "sinusoid":
        if theta.shape[1] != 1:
            raise FitError("sinusoid fit needs a one-parameter trace")
        f = sinusoid_fit(theta[:, 0], energy, s, frequency=frequency)
        return PesPoint(R, f.E_min, f.E_err, "vqe+sinusoid")
    if method == "quad2d":
        if theta.shape[1] != 2:
            raise FitError("quad2d fit needs a two-parameter trace")
        kw.setdefault("filter", "window")
        f = quad2d_fit(theta[:, 0], theta[:, 1], energy, s, half_width=half_width, **kw)
        return PesPoint(R, f.m, f.err, "vqe+quad2d")
    if method == "gpr":
        f = gpr_fit(theta, energy, s, **kw)
        return PesPoint(R, f.E_min, f.E_err, "vqe+gpr")
    raise FitError(f"unknown fit method {method!r}")


def fit_location(trace, *, half_width=(0.5, 0.5)) -> tuple[float, float]:
    """Minimum location of the quad2d fit to a two-parameter trace."""
    theta, energy, std = trace_points(trace)
    s = std if np.all(std > 0) else None
    f = quad2d_fit(theta[:, 0], theta[:, 1], energy, s, filter="window", half_width=half_width)
    return f.alpha_min, f.beta_min


def noisy_minimum(h: PauliSum, spec: AnsatzSpec, noise: NoiseModel | None = None, *,
                  refocus: bool = False, n_grid: int = 48) -> tuple[list[float], float]:
    """Lowest exact energy the (noisy) ansatz reaches: grid search over
    ``[0, pi)`` per parameter, then local refinement."""
    from scipy.optimize import minimize, minimize_scalar

    from .estimator import estimate_exact

    def energy(theta) -> float:
        state = run(ansatz_circuit(spec, np.atleast_1d(theta), refocus=refocus),
                    spec.reference, noise)
        return estimate_exact(state, h).value

    k = spec.n_params
    n = n_grid if k == 1 else max(8, int(round(n_grid ** (2 / k) / 2)))
    axis = np.linspace(0.0, math.pi, n, endpoint=False)
    pts = np.stack([m.ravel() for m in np.meshgrid(*([axis] * k), indexing="ij")], axis=1)
    vals = [energy(p) for p in pts]
    x0 = pts[int(np.argmin(vals))]
    step = math.pi / n
    if k == 1:
        r = minimize_scalar(lambda t: energy([t]), bounds=(x0[0] - step, x0[0] + step),
                            method="bounded", options={"xatol": 1e-9})
        return [float(r.x)], float(r.fun)
    r = minimize(energy, x0, method="Nelder-Mead",
                 options={"xatol": 1e-8, "fatol": 1e-12, "initial_simplex":
                          np.vstack([x0, x0 + np.diag(np.full(k, step))])})
    return [float(v) for v in r.x], float(r.fun)
