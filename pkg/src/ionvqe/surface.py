"""Energy-landscape fits and potential energy surfaces.

* :func:`sinusoid_fit`: 1D scans, ``E = C + A sin(w (theta - theta0))``.
* :func:`quad2d_fit`: 2D scans, ``E = m + (c a - a0)^2 + (d b - b0)^2``.
* :func:`gpr_fit`: Gaussian-process surface with per-point noise.
* :func:`assemble_pes`: per-geometry minima to a sorted curve.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .pauli import PauliSum, check_dense, to_matrix

log = logging.getLogger(__name__)

METHODS = ("sinusoid", "quad2d", "gpr", "vqe+sinusoid", "vqe+quad2d", "vqe+gpr", "vqe", "exact")
NORMALIZATIONS = ("absolute", "large_R_offset")


class FitError(ValueError):
    """A fit could not be performed on the supplied data."""


def _weights(std, n: int) -> tuple[np.ndarray, bool]:
    """Inverse-variance weights, or unit weights when no usable errors are given."""
    if std is None:
        return np.ones(n), False
    s = np.asarray(std, dtype=float)
    if s.shape != (n,):
        raise FitError("std must align with the energies")
    if np.any(s <= 0):
        return np.ones(n), False
    return 1.0 / s**2, True


def _wls(design: np.ndarray, y: np.ndarray, w: np.ndarray, known_errors: bool):
    """Weighted least squares; returns coefficients, covariance and chi^2/dof."""
    sw = np.sqrt(w)
    a = design * sw[:, None]
    b = y * sw
    coef, *_ = np.linalg.lstsq(a, b, rcond=None)
    resid = b - a @ coef
    dof = max(len(y) - design.shape[1], 1)
    chi2 = float(resid @ resid) / dof
    try:
        cov = np.linalg.inv(a.T @ a)
    except np.linalg.LinAlgError as exc:
        raise FitError("design matrix is singular") from exc
    if not known_errors:
        cov = cov * chi2
    return coef, cov, chi2


# --- sinusoid -------------------------------------------------------------------------


@dataclass(frozen=True)
class SinusoidFit:
    theta_min: float
    E_min: float
    E_err: float
    C: float
    A: float
    theta0: float
    frequency: float
    chi2_dof: float
    converged: bool

    def __call__(self, theta):
        return self.C + self.A * np.sin(self.frequency * (np.asarray(theta) - self.theta0))


def sinusoid_fit(
    theta: Sequence[float],
    energy: Sequence[float],
    std: Sequence[float] | None = None,
    *,
    frequency: float = 1.0,
    chi2_threshold: float = 5.0,
) -> SinusoidFit:
    """Weighted fit of ``C + A sin(w (theta - theta0))`` with ``A >= 0``.

    Solved linearly as ``C + p cos(w theta) + q sin(w theta)``. The minimum
    ``C - A`` lies at ``theta0 + 3 pi / (2 w)``. ``converged`` is false when
    ``chi^2/dof`` exceeds ``chi2_threshold`` (only meaningful with errors).
    """
    th = np.asarray(theta, dtype=float)
    e = np.asarray(energy, dtype=float)
    if th.ndim != 1 or e.shape != th.shape:
        raise FitError("sinusoid fit needs one-dimensional theta and energies of equal length")
    if len(th) < 4:
        raise FitError("need at least 4 points")
    period = 2 * math.pi / frequency
    if np.ptp(th) < period / 2 - 1e-12:
        raise FitError("points must span at least half a period")
    w, known = _weights(std, len(th))
    x = frequency * th
    design = np.column_stack([np.ones_like(x), np.cos(x), np.sin(x)])
    coef, cov, chi2 = _wls(design, e, w, known)
    c, p, q = (float(v) for v in coef)
    amp = math.hypot(p, q)
    phi0 = math.atan2(-p, q) % (2 * math.pi)
    theta0 = phi0 / frequency
    theta_min = (theta0 + 1.5 * math.pi / frequency) % period
    if amp > 0:
        g = np.array([1.0, -p / amp, -q / amp])
    else:
        g = np.array([1.0, 0.0, 0.0])
    err = math.sqrt(max(float(g @ cov @ g), 0.0))
    converged = (not known) or chi2 <= chi2_threshold
    if not converged:
        log.warning("sinusoid fit chi2/dof = %.3g exceeds %.3g", chi2, chi2_threshold)
    return SinusoidFit(theta_min, c - amp, err, c, amp, theta0, frequency, chi2, converged)


# --- 2D quadratic ---------------------------------------------------------------------


@dataclass(frozen=True)
class Quad2DFit:
    alpha_min: float
    beta_min: float
    m: float
    err: float
    c: float
    d: float
    a: float
    b: float
    chi2_dof: float
    n_used: int
    mask: tuple[bool, ...] = field(repr=False, default=())

    def __call__(self, alpha, beta):
        alpha = np.asarray(alpha)
        beta = np.asarray(beta)
        return self.m + (self.c * alpha - self.a) ** 2 + (self.d * beta - self.b) ** 2


def robust_mask(energy: np.ndarray, n_sigma: float = 4.0) -> np.ndarray:
    """Points within ``n_sigma`` standard deviations of the median energy."""
    med = np.median(energy)
    s = np.std(energy)
    if s == 0:
        return np.ones(len(energy), dtype=bool)
    return np.abs(energy - med) <= n_sigma * s


def window_mask(
    alpha: np.ndarray, beta: np.ndarray, energy: np.ndarray, half_width=(0.3, 0.3)
) -> np.ndarray:
    """Points within a box around the lowest-energy point.

    The centre is the lowest point whose box fits inside the scanned range,
    so a minimum repeated at the grid edge does not truncate the window.
    """
    hw_a, hw_b = half_width
    tol = 1e-9
    inside = (
        (alpha - hw_a >= alpha.min() - tol) & (alpha + hw_a <= alpha.max() + tol)
        & (beta - hw_b >= beta.min() - tol) & (beta + hw_b <= beta.max() + tol)
    )
    pool = np.flatnonzero(inside) if inside.any() else np.arange(len(energy))
    k = int(pool[np.argmin(energy[pool])])
    return (np.abs(alpha - alpha[k]) <= hw_a + tol) & (np.abs(beta - beta[k]) <= hw_b + tol)


def quad2d_fit(
    alpha: Sequence[float],
    beta: Sequence[float],
    energy: Sequence[float],
    std: Sequence[float] | None = None,
    *,
    filter: str = "median4sigma",
    half_width=(0.5, 0.5),
) -> Quad2DFit:
    """Fit ``m + (c alpha - a)^2 + (d beta - b)^2``; minimum ``m`` at ``(a/c, b/d)``.

    ``filter`` selects the points used: ``"median4sigma"`` (within four
    standard deviations of the median energy), ``"window"`` (a box of
    ``half_width`` around the lowest point, then the median rule) or
    ``"none"``. Solved linearly in ``{1, alpha, beta, alpha^2, beta^2}``.
    """
    al = np.asarray(alpha, dtype=float)
    be = np.asarray(beta, dtype=float)
    e = np.asarray(energy, dtype=float)
    if not (al.shape == be.shape == e.shape) or al.ndim != 1:
        raise FitError("alpha, beta and energy must be 1D arrays of equal length")
    s = None if std is None else np.asarray(std, dtype=float)
    if filter == "none":
        mask = np.ones(len(e), dtype=bool)
    elif filter == "median4sigma":
        mask = robust_mask(e)
    elif filter == "window":
        mask = window_mask(al, be, e, half_width)
        idx = np.flatnonzero(mask)
        mask[idx[~robust_mask(e[idx])]] = False
    else:
        raise FitError(f"unknown filter {filter!r}")
    n_used = int(mask.sum())
    if n_used < 6:
        raise FitError(f"need at least 6 points after filtering, have {n_used}")
    al_u, be_u, e_u = al[mask], be[mask], e[mask]
    w, known = _weights(None if s is None else s[mask], n_used)
    design = np.column_stack([np.ones(n_used), al_u, be_u, al_u**2, be_u**2])
    k, cov, chi2 = _wls(design, e_u, w, known)
    k0, k1, k2, k3, k4 = (float(v) for v in k)
    scale = max(1.0, float(np.max(np.abs(e_u))))
    if k3 <= 1e-12 * scale or k4 <= 1e-12 * scale:
        raise FitError(f"degenerate curvature (alpha^2: {k3:.3g}, beta^2: {k4:.3g})")
    a_min = -k1 / (2 * k3)
    b_min = -k2 / (2 * k4)
    m = k0 - k1**2 / (4 * k3) - k2**2 / (4 * k4)
    g = np.array([1.0, -k1 / (2 * k3), -k2 / (2 * k4), k1**2 / (4 * k3**2), k2**2 / (4 * k4**2)])
    err = math.sqrt(max(float(g @ cov @ g), 0.0))
    c, d = math.sqrt(k3), math.sqrt(k4)
    return Quad2DFit(a_min, b_min, m, err, c, d, c * a_min, d * b_min, chi2, n_used,
                     tuple(bool(v) for v in mask))


# --- Gaussian process regression -------------------------------------------------------


@dataclass(frozen=True)
class GPRFit:
    x_min: tuple[float, ...]
    E_min: float
    E_err: float
    predict: Callable = field(repr=False, compare=False)
    kernel: str = ""
    jitter: float = 0.0


def gpr_fit(
    x: Sequence | np.ndarray,
    energy: Sequence[float],
    std: Sequence[float] | None = None,
    *,
    box: Sequence[tuple[float, float]] | None = None,
    n_grid: int | None = None,
    length_scale: float = 1.0,
    n_restarts: int = 4,
    random_state: int = 0,
) -> GPRFit:
    """Squared-exponential GP with per-point noise ``std**2``; minimum by dense evaluation.

    Hyperparameters maximize the marginal likelihood with ``n_restarts``
    restarts. If the kernel matrix is ill-conditioned a growing diagonal
    jitter is added before giving up.
    """
    from sklearn.exceptions import ConvergenceWarning
    from sklearn.gaussian_process import GaussianProcessRegressor
    from sklearn.gaussian_process.kernels import RBF, ConstantKernel

    X = np.asarray(x, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(energy, dtype=float)
    if len(y) < 4:
        raise FitError("need at least 4 points")
    if len(X) != len(y):
        raise FitError("inputs and energies differ in length")
    dim = X.shape[1]
    noise = np.zeros(len(y)) if std is None else np.asarray(std, dtype=float) ** 2
    kernel = ConstantKernel(1.0, (1e-6, 1e6)) * RBF(
        length_scale=np.full(dim, length_scale), length_scale_bounds=(1e-2, 1e3)
    )
    last_exc: Exception | None = None
    gp = None
    used_jitter = 0.0
    for jitter in (1e-10, 1e-8, 1e-6, 1e-4):
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", ConvergenceWarning)
                gp = GaussianProcessRegressor(
                    kernel=kernel,
                    alpha=noise + jitter,
                    normalize_y=True,
                    n_restarts_optimizer=n_restarts,
                    random_state=random_state,
                )
                gp.fit(X, y)
            used_jitter = jitter
            break
        except (np.linalg.LinAlgError, ValueError) as exc:
            last_exc = exc
            gp = None
    if gp is None:
        raise FitError(f"kernel matrix stayed ill-conditioned: {last_exc}")

    if box is None:
        box = [(float(X[:, j].min()), float(X[:, j].max())) for j in range(dim)]
    if n_grid is None:
        n_grid = 401 if dim == 1 else 81
    axes = [np.linspace(lo, hi, n_grid) if hi > lo else np.array([lo]) for lo, hi in box]
    mesh = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)
    mu, sd = gp.predict(mesh, return_std=True)
    k = int(np.argmin(mu))

    def predict(pts, return_std=False):
        p = np.asarray(pts, dtype=float)
        if p.ndim == 1:
            p = p[:, None] if dim == 1 else p[None, :]
        return gp.predict(p, return_std=return_std)

    return GPRFit(tuple(float(v) for v in mesh[k]), float(mu[k]), float(sd[k]), predict,
                  str(gp.kernel_), used_jitter)


# --- exact reference -----------------------------------------------------------------


def exact_ground_energy(h: PauliSum, n_qubits: int | None = None) -> float:
    """Lowest eigenvalue of the dense matrix of ``h``."""
    n = max(h.n_qubits(), 1) if n_qubits is None else n_qubits
    check_dense(n)
    return float(np.linalg.eigvalsh(to_matrix(h, n))[0])


# --- potential energy surfaces ---------------------------------------------------------


@dataclass(frozen=True)
class PesPoint:
    R: float
    E_min: float
    E_err: float = 0.0
    method: str = "exact"

    def __post_init__(self):
        if not self.E_err >= 0:
            raise ValueError("E_err must be non-negative")
        if self.method not in METHODS:
            raise ValueError(f"unknown method tag {self.method!r}")


@dataclass(frozen=True)
class PesTable:
    points: tuple[PesPoint, ...]
    normalization: str = "absolute"
    well_depth: float = math.nan
    R_min: float = math.nan
    non_parallel_error: float | None = None

    def energies(self) -> dict[float, float]:
        return {p.R: p.E_min for p in self.points}

    def to_csv(self, header: Mapping[str, object] | None = None) -> str:
        buf = io.StringIO()
        if header:
            buf.write("# " + json.dumps(dict(header), sort_keys=True) + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["R_angstrom", "E_min_hartree", "E_err_hartree", "method", "normalization"])
        for p in self.points:
            w.writerow([repr(p.R), repr(p.E_min), repr(p.E_err), p.method, self.normalization])
        return buf.getvalue()

    def save_csv(self, path: str | Path, header: Mapping[str, object] | None = None) -> None:
        Path(path).write_text(self.to_csv(header))


def read_pes_csv(path: str | Path) -> list[PesPoint]:
    lines = [l for l in Path(path).read_text().splitlines() if not l.startswith("#")]
    rows = csv.DictReader(lines)
    return [
        PesPoint(float(r["R_angstrom"]), float(r["E_min_hartree"]), float(r["E_err_hartree"]),
                 r["method"])
        for r in rows
    ]


def non_parallel_error(curve: Mapping[float, float], reference: Mapping[float, float]) -> float:
    """``max - min`` over shared ``R`` of ``curve - reference``."""
    common = sorted(set(curve) & set(reference))
    if not common:
        raise ValueError("curves share no R value")
    d = [curve[r] - reference[r] for r in common]
    return max(d) - min(d)


def assemble_pes(
    points: Iterable[PesPoint],
    normalization: str = "absolute",
    reference: Mapping[float, float] | Iterable[PesPoint] | None = None,
) -> PesTable:
    """Sort by ``R``; ``large_R_offset`` subtracts the largest-``R`` energy.

    The well depth is the largest-``R`` energy minus the minimum. A
    reference curve (absolute energies) adds the non-parallel error,
    computed after the same normalization.
    """
    if normalization not in NORMALIZATIONS:
        raise ValueError(f"normalization must be one of {NORMALIZATIONS}")
    pts = sorted(points, key=lambda p: p.R)
    if len({p.R for p in pts}) < 2:
        raise ValueError("need at least two distinct R values")
    offset = pts[-1].E_min if normalization == "large_R_offset" else 0.0
    pts = [PesPoint(p.R, p.E_min - offset, p.E_err, p.method) for p in pts]
    low = min(pts, key=lambda p: p.E_min)
    depth = pts[-1].E_min - low.E_min
    npe = None
    if reference is not None:
        ref = (
            dict(reference)
            if isinstance(reference, Mapping)
            else {p.R: p.E_min for p in reference}
        )
        if normalization == "large_R_offset":
            r_last = max(ref)
            ref = {r: e - ref[r_last] for r, e in ref.items()}
        npe = non_parallel_error({p.R: p.E_min for p in pts}, ref)
    return PesTable(tuple(pts), normalization, depth, low.R, npe)


# --- scan grids -------------------------------------------------------------------------


@dataclass
class ScanGrid:
    """Energies (and optional per-term expectations) on a 1D or 2D parameter grid."""

    axes: list[np.ndarray]
    energy: np.ndarray
    std: np.ndarray
    R: float
    expectations: dict[str, np.ndarray] = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.axes = [np.asarray(a, dtype=float) for a in self.axes]
        shape = tuple(len(a) for a in self.axes)
        if len(shape) not in (1, 2):
            raise ValueError("grids are one- or two-dimensional")
        if any(s == 0 for s in shape):
            raise ValueError("grid has an empty axis")
        self.energy = np.asarray(self.energy, dtype=float).reshape(shape)
        self.std = np.asarray(self.std, dtype=float).reshape(shape)
        if np.any(self.std < 0):
            raise ValueError("stds must be non-negative")
        self.expectations = {k: np.asarray(v, dtype=float).reshape(shape)
                             for k, v in self.expectations.items()}

    @property
    def dim(self) -> int:
        return len(self.axes)

    def points(self) -> np.ndarray:
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def to_json(self) -> dict:
        out = {
            "format": "ionvqe.scan/1",
            "R": self.R,
            "axes": [a.tolist() for a in self.axes],
            "energy": self.energy.tolist(),
            "std": self.std.tolist(),
            "expectations": {k: v.tolist() for k, v in sorted(self.expectations.items())},
        }
        out.update({k: v for k, v in self.metadata.items() if k not in out})
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True) + "\n"

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def from_json(cls, d: dict) -> "ScanGrid":
        known = {"format", "R", "axes", "energy", "std", "expectations"}
        return cls(
            axes=d["axes"],
            energy=d["energy"],
            std=d["std"],
            R=float(d["R"]),
            expectations=d.get("expectations", {}),
            metadata={k: v for k, v in d.items() if k not in known},
        )

    @classmethod
    def load(cls, path: str | Path) -> "ScanGrid":
        return cls.from_json(json.loads(Path(path).read_text()))
