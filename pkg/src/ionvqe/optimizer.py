"""Derivative-free outer loop: Nelder-Mead and its annealed variant, plus the VQE driver.

Every cost evaluation is recorded. Random draws are keyed by the evaluation
index, so evaluation ``k`` of a run can be reproduced from ``(seed, k)``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .simulator import make_rng

PERTURB_INDEX = 1 << 20  # random-draw index reserved for annealing perturbations


@dataclass
class Evaluation:
    index: int
    iteration: int
    theta: list[float]
    energy: float
    std: float
    perturbation: float = 0.0
    phase: str = "search"
    extra: dict = field(default_factory=dict)

    @property
    def value(self) -> float:
        """What the simplex saw: energy plus perturbation."""
        return self.energy + self.perturbation

    def to_json(self) -> dict:
        d = {
            "type": "evaluation",
            "index": self.index,
            "iteration": self.iteration,
            "theta": self.theta,
            "energy": self.energy,
            "std": self.std,
            "perturbation": self.perturbation,
            "phase": self.phase,
        }
        d.update(self.extra)
        return d


@dataclass
class OptimizerTrace:
    evaluations: list[Evaluation] = field(default_factory=list)
    reason: str = ""
    best_theta: list[float] = field(default_factory=list)
    best_value: float = math.nan
    n_iterations: int = 0
    header: dict = field(default_factory=dict)

    @property
    def sampling(self) -> list[Evaluation]:
        return [e for e in self.evaluations if e.phase == "sampling"]

    def final_evaluation(self) -> Evaluation:
        """Latest evaluation at the best vertex (lowest value if none matches)."""
        for e in reversed(self.evaluations):
            if np.allclose(e.theta, self.best_theta):
                return e
        return min(self.evaluations, key=lambda e: e.value)

    def final_energy(self) -> float:
        """Unperturbed energy recorded at the best vertex."""
        return self.final_evaluation().energy

    def to_jsonl(self) -> str:
        lines = [json.dumps({"type": "header", **self.header}, sort_keys=True)]
        lines += [json.dumps(e.to_json(), sort_keys=True) for e in self.evaluations]
        lines.append(
            json.dumps(
                {
                    "type": "result",
                    "reason": self.reason,
                    "best_theta": self.best_theta,
                    "best_theta_wrapped": [t % (2 * math.pi) for t in self.best_theta],
                    "best_value": self.best_value,
                    "n_iterations": self.n_iterations,
                    "n_evaluations": len(self.evaluations),
                },
                sort_keys=True,
            )
        )
        return "\n".join(lines) + "\n"

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_jsonl())

    @classmethod
    def load(cls, path: str | Path) -> "OptimizerTrace":
        tr = cls()
        for line in Path(path).read_text().splitlines():
            d = json.loads(line)
            kind = d.pop("type")
            if kind == "header":
                tr.header = d
            elif kind == "evaluation":
                core = {k: d.pop(k) for k in ("index", "iteration", "theta", "energy", "std",
                                              "perturbation", "phase")}
                tr.evaluations.append(Evaluation(**core, extra=d))
            elif kind == "result":
                tr.reason = d["reason"]
                tr.best_theta = d["best_theta"]
                tr.best_value = d["best_value"]
                tr.n_iterations = d["n_iterations"]
        return tr


@dataclass(frozen=True)
class NelderMeadOptions:
    alpha: float = 1.0
    gamma: float = 2.0
    rho: float = 0.5
    sigma: float = 0.5
    initial_step: float = 0.5
    xatol: float = 1e-6
    fatol: float | None = None  # also require the value spread below this when set
    max_iter: int = 1000


@dataclass(frozen=True)
class AnnealSchedule:
    """Uniform additive perturbation on ``[lo, hi]`` and the stopping rule."""

    lo: float = 0.01
    hi: float = 0.08
    window: int = 5
    extra_iterations: int = 15

    def __post_init__(self):
        if not 0 <= self.lo <= self.hi:
            raise ValueError("need 0 <= lo <= hi")
        if self.window < 2:
            raise ValueError("window must hold at least two energies")

    @property
    def mean(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def to_json(self) -> dict:
        return {"lo": self.lo, "hi": self.hi, "window": self.window,
                "extra_iterations": self.extra_iterations}


Cost = Callable[[np.ndarray], "float | tuple[float, float] | tuple[float, float, dict]"]


class _Recorder:
    """Wraps the cost: adds perturbations and logs every evaluation."""

    def __init__(self, cost: Cost, trace: OptimizerTrace, schedule, seed):
        self.cost = cost
        self.trace = trace
        self.schedule = schedule
        self.seed = seed
        self.iteration = 0
        self.phase = "search"

    def __call__(self, x: np.ndarray) -> float:
        k = len(self.trace.evaluations)
        out = self.cost(np.array(x, dtype=float))
        extra: dict = {}
        if isinstance(out, tuple):
            energy, std = float(out[0]), float(out[1])
            if len(out) > 2:
                extra = dict(out[2])
        else:
            energy, std = float(out), 0.0
        u = 0.0
        if self.schedule is not None and self.schedule.hi > 0:
            u = float(make_rng(self.seed, k, PERTURB_INDEX).uniform(self.schedule.lo, self.schedule.hi))
        ev = Evaluation(k, self.iteration, [float(t) for t in x], energy, std, u, self.phase, extra)
        self.trace.evaluations.append(ev)
        return ev.value


def _nm_loop(f: _Recorder, x0: np.ndarray, opt: NelderMeadOptions, stop_check=None) -> tuple:
    n = len(x0)
    simplex = [x0.copy()]
    for i in range(n):
        v = x0.copy()
        v[i] += opt.initial_step
        simplex.append(v)
    values = [f(v) for v in simplex]
    accepted = list(values)
    reason = "max_iter"
    it = 0
    while it < opt.max_iter:
        order = np.argsort(values, kind="stable")
        simplex = [simplex[i] for i in order]
        values = [values[i] for i in order]
        if stop_check is not None:
            r = stop_check(values, accepted)
            if r:
                reason = r
                break
        size = max(np.max(np.abs(v - simplex[0])) for v in simplex[1:])
        if size <= opt.xatol and (opt.fatol is None or values[-1] - values[0] <= opt.fatol):
            reason = "converged"
            break
        it += 1
        f.iteration = it
        centroid = np.mean(simplex[:-1], axis=0)
        worst = simplex[-1]
        xr = centroid + opt.alpha * (centroid - worst)
        fr = f(xr)
        if values[0] <= fr < values[-2]:
            simplex[-1], values[-1] = xr, fr
            accepted.append(fr)
            continue
        if fr < values[0]:
            xe = centroid + opt.gamma * (xr - centroid)
            fe = f(xe)
            if fe < fr:
                simplex[-1], values[-1] = xe, fe
            else:
                simplex[-1], values[-1] = xr, fr
            accepted.append(values[-1])
            continue
        if fr < values[-1]:
            xc = centroid + opt.rho * (xr - centroid)
            fc = f(xc)
            if fc <= fr:
                simplex[-1], values[-1] = xc, fc
                accepted.append(fc)
                continue
        else:
            xc = centroid + opt.rho * (worst - centroid)
            fc = f(xc)
            if fc < values[-1]:
                simplex[-1], values[-1] = xc, fc
                accepted.append(fc)
                continue
        best = simplex[0]
        for i in range(1, n + 1):
            simplex[i] = best + opt.sigma * (simplex[i] - best)
            values[i] = f(simplex[i])
            accepted.append(values[i])
    k = int(np.argmin(values))
    return simplex[k], values[k], reason, it


def nelder_mead(
    cost: Cost,
    theta0: Sequence[float],
    options: NelderMeadOptions | None = None,
    *,
    header: dict | None = None,
) -> OptimizerTrace:
    """Plain simplex minimization of ``cost``; every evaluation is traced."""
    opt = options or NelderMeadOptions()
    x0 = np.atleast_1d(np.asarray(theta0, dtype=float))
    if x0.size < 1:
        raise ValueError("need at least one parameter")
    trace = OptimizerTrace(header=dict(header or {}))
    f = _Recorder(cost, trace, None, 0)
    x, v, reason, it = _nm_loop(f, x0, opt)
    trace.best_theta = [float(t) for t in x]
    trace.best_value = float(v)
    trace.reason = reason
    trace.n_iterations = it
    return trace


def annealed_nelder_mead(
    cost: Cost,
    theta0: Sequence[float],
    schedule: AnnealSchedule | None = None,
    seed: int = 0,
    options: NelderMeadOptions | None = None,
    *,
    header: dict | None = None,
) -> OptimizerTrace:
    """Nelder-Mead on ``cost + u``, ``u ~ U[lo, hi]`` redrawn for every evaluation.

    Once the standard deviation of the last ``window`` values accepted into
    the simplex (perturbation included) drops to the schedule mean, ``extra_iterations`` more
    iterations run and their evaluations are marked ``"sampling"``.
    """
    sched = schedule or AnnealSchedule()
    opt = options or NelderMeadOptions()
    x0 = np.atleast_1d(np.asarray(theta0, dtype=float))
    trace = OptimizerTrace(header=dict(header or {}))
    f = _Recorder(cost, trace, sched, seed)
    state = {"start": None}
    threshold = max(sched.mean, 1e-12)

    def stop_check(values, accepted):
        if state["start"] is None:
            recent = accepted[-sched.window:]
            if len(recent) == sched.window and float(np.std(recent)) <= threshold:
                state["start"] = f.iteration
                f.phase = "sampling"
        elif f.iteration - state["start"] >= sched.extra_iterations:
            return "sampling_complete"
        return None

    # convergence tolerances must not end the run before the sampling phase
    opt_run = NelderMeadOptions(**{**opt.__dict__, "xatol": -1.0})
    x, v, reason, it = _nm_loop(f, x0, opt_run, stop_check)
    trace.best_theta = [float(t) for t in x]
    trace.best_value = float(v)
    trace.reason = reason
    trace.n_iterations = it
    trace.header.setdefault("schedule", sched.to_json())
    trace.header.setdefault("seed", seed)
    return trace


# --- VQE driver ---------------------------------------------------------------------


class EnergyCost:
    """``theta -> (energy, std, log)`` through circuit compilation, simulation and sampling.

    Evaluation ``k`` draws its shots from random stream ``k`` of ``seed``.
    ``shots=None`` gives exact expectation values.
    """

    def __init__(self, h, spec, noise=None, shots: int | None = None, seed: int = 0,
                 *, refocus: bool = False, log_counts: bool = True):
        from .estimator import plan_measurements

        if h.n_qubits() > spec.n_qubits:
            raise ValueError(
                f"Hamiltonian acts on {h.n_qubits()} qubits, ansatz has {spec.n_qubits}"
            )
        self.h = h
        self.spec = spec
        self.noise = noise
        self.shots = shots
        self.seed = seed
        self.refocus = refocus
        self.log_counts = log_counts
        self.settings = plan_measurements(h, spec.n_qubits)
        self.calls = 0

    def state(self, theta):
        from .circuit import ansatz_circuit
        from .simulator import run

        return run(ansatz_circuit(self.spec, theta, refocus=self.refocus), self.spec.reference,
                   self.noise)

    def __call__(self, theta):
        from .estimator import estimate

        k = self.calls
        self.calls += 1
        try:
            est, counts = estimate(self.state(theta), self.h, self.shots, self.seed,
                                   settings=self.settings, stream=k)
        except Exception as exc:
            raise RuntimeError(f"evaluation {k} at theta={list(theta)}: {exc}") from exc
        extra = {"counts": counts} if (self.log_counts and counts) else {}
        return est.value, est.std, extra


def vqe_run(
    h,
    spec,
    *,
    noise=None,
    shots: int | None = None,
    optimizer: str = "nm",
    seed: int = 0,
    theta0: Sequence[float] | None = None,
    options: NelderMeadOptions | None = None,
    schedule: AnnealSchedule | None = None,
    refocus: bool = False,
    header: dict | None = None,
) -> OptimizerTrace:
    """Minimize ``<H>`` over the ansatz with ``"nm"`` or ``"anneal"``."""
    cost = EnergyCost(h, spec, noise, shots, seed, refocus=refocus)
    x0 = np.zeros(spec.n_params) if theta0 is None else np.asarray(theta0, dtype=float)
    if len(x0) != spec.n_params:
        raise ValueError(f"theta0 has {len(x0)} entries, ansatz has {spec.n_params} parameters")
    hdr = {
        "optimizer": optimizer,
        "seed": seed,
        "shots": shots,
        "theta0": [float(t) for t in x0],
        "noise": None if noise is None else noise.to_json(),
        "symbols": spec.symbols,
    }
    hdr.update(header or {})
    if optimizer == "nm":
        return nelder_mead(cost, x0, options, header=hdr)
    if optimizer == "anneal":
        return annealed_nelder_mead(cost, x0, schedule, seed, options, header=hdr)
    raise ValueError(f"unknown optimizer {optimizer!r}")
