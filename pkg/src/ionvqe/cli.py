"""Command-line front end.

Subcommands::

    ionvqe transform  fermionic table -> qubit table (+ term report)
    ionvqe scan       energy / expectation-value grids per geometry
    ionvqe vqe        optimizer traces (JSONL) and a PES CSV
    ionvqe fit        PES from scan or trace files, one CSV per method
    ionvqe noise-sim  noisy minimum energies versus MS fidelity

Tables and ansatz files may be given as paths or as names of the bundled
data files (``h2_sto3g_bk_tapered``, ``lih_3q_ansatz`` ...). Every output
embeds the config hash and the seed and contains no timestamps, so a
re-run with the same inputs is byte-identical.

Qubit labels: basis strings are written with qubit 0 rightmost and
``|0>`` is the ``Z = +1`` state. On the trapped-ion hardware the
fluorescing (bright) level reads as ``|1>``.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import math
import secrets
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import __version__
from .ansatz import AnsatzSpec
from .estimator import plan_measurements
from .optimizer import OptimizerTrace, vqe_run
from .pauli import PauliString
from .pipeline import (
    ScanConfig,
    check_compatible,
    fit_scan,
    fit_trace,
    frame_rotate,
    grid_axis,
    noisy_minimum,
    scan,
    transform_table,
)
from .simulator import NoiseModel
from .surface import (
    FitError,
    PesPoint,
    ScanGrid,
    assemble_pes,
    exact_ground_energy,
)
from .tables import CoefficientTable, TableError, bundled_path, config_hash

log = logging.getLogger("ionvqe")

FIT_METHODS = ("sinusoid", "quad2d", "gpr")


class CliError(RuntimeError):
    """User-facing failure; printed without a traceback."""


# --- input resolution ------------------------------------------------------------------


def _resolve(name: str, suffix: str = ".json") -> Path:
    p = Path(name)
    if p.exists():
        return p
    cand = bundled_path(name if name.endswith(suffix) else name + suffix)
    if cand.exists():
        return cand
    raise CliError(f"no such file or bundled data: {name}")


def _digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()[:16]


def load_table(name: str) -> tuple[CoefficientTable, Path]:
    path = _resolve(name)
    try:
        return CoefficientTable.load(path), path
    except TableError as exc:
        raise CliError(f"malformed table: {exc}") from exc


def load_ansatz(name: str) -> tuple[AnsatzSpec, Path]:
    path = _resolve(name)
    try:
        return AnsatzSpec.load(path), path
    except (KeyError, ValueError) as exc:
        raise CliError(f"malformed ansatz file {path}: {exc}") from exc


def _rtag(R: float) -> str:
    return f"R{R:.3f}"


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=1) + "\n"


# --- shared configuration ---------------------------------------------------------------


def _seed(args) -> int:
    if args.seed is None:
        args.seed = secrets.randbelow(2**31)
        log.warning("no --seed given; using %d (recorded in the outputs)", args.seed)
    return args.seed


def noise_from_args(args) -> NoiseModel | None:
    if args.noise == "off" and args.ms_fidelity == 1.0:
        return None
    return NoiseModel(T2=args.t2_ms * 1e-3, ms_fidelity=args.ms_fidelity, dephasing=args.noise)


def _dfs_frame(spec: AnsatzSpec) -> PauliString:
    """Frame used for the unprotected variant: ``X`` on the highest qubit."""
    return PauliString({spec.n_qubits - 1: "X"})


def _problem(args):
    """Table, ansatz and the selected geometries, with the DFS frame applied."""
    table, tpath = load_table(args.table)
    spec, apath = load_ansatz(args.ansatz)
    try:
        check_compatible(table, spec)
    except (TableError, ValueError) as exc:
        raise CliError(str(exc)) from exc
    if args.R:
        try:
            table = table.select(args.R)
        except KeyError as exc:
            raise CliError(f"{tpath}: {exc.args[0]}") from exc
    geoms = []
    for g in table.geometries:
        h = g.hamiltonian()
        s = spec
        if args.dfs == "unprotected":
            h, s = frame_rotate(h, spec, _dfs_frame(spec))
        geoms.append((g.R, h, s))
    inputs = {"table": _digest(tpath), "ansatz": _digest(apath)}
    return table, spec, geoms, inputs


def _config(args, inputs: dict, keys: Sequence[str]) -> dict:
    cfg = {k: getattr(args, k) for k in keys}
    cfg["command"] = args.command
    cfg["inputs"] = inputs
    cfg["version"] = __version__
    return cfg


def _stamp(cfg: dict) -> dict:
    return {"config_hash": config_hash(cfg), "seed": cfg.get("seed")}


def _map(fn: Callable, items: list, jobs: int) -> list:
    """``[fn(x) for x in items]``, in a process pool when ``jobs > 1``.

    Exceptions are returned in place of results so one failing geometry
    does not abort the others.
    """
    def safe(x):
        try:
            return fn(x)
        except Exception as exc:  # reported per geometry by the caller
            return exc

    if jobs <= 1 or len(items) <= 1:
        return [safe(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        futures = [pool.submit(fn, x) for x in items]
        out = []
        for f in futures:
            try:
                out.append(f.result())
            except Exception as exc:
                out.append(exc)
        return out


# --- transform -----------------------------------------------------------------------------


def term_report(table: CoefficientTable) -> str:
    """Human-readable term listing: one row per string, one column per geometry."""
    keys = table.structure()
    buf = io.StringIO()
    buf.write(f"# {table.molecule} {table.basis} mapping={table.mapping} "
              f"qubits={table.n_qubits} reference={table.reference} terms={len(keys)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["term"] + [f"R={g.R!r}" for g in table.geometries])
    w.writerow(["nuclear_repulsion"] + [repr(g.nuclear_repulsion) for g in table.geometries])
    for k in keys:
        row = [str(k) or "I"]
        for g in table.geometries:
            c = complex(g.operator.terms.get(k, 0.0))
            row.append(repr(c.real) if c.imag == 0 else repr(c))
        w.writerow(row)
    return buf.getvalue()


def cmd_transform(args) -> int:
    table, path = load_table(args.input)
    if not table.is_fermionic:
        raise CliError(f"{path}: expected a fermionic table, got mapping {table.mapping!r}")
    seed = _seed(args)
    try:
        out, tmap = transform_table(table, args.mapping, occupation=args.reference,
                                    taper=args.taper)
    except TableError as exc:
        raise CliError(str(exc)) from exc
    cfg = _config(args, {"input": _digest(path)}, ["mapping", "taper", "reference", "seed"])
    out.metadata.update(_stamp(cfg))
    out_path = Path(args.out)
    out.save(out_path)
    report = Path(args.report) if args.report else out_path.with_suffix(".terms.csv")
    report.write_text(f"# config_hash={out.metadata['config_hash']} seed={seed}\n"
                      + term_report(out))
    before = table.n_qubits
    print(f"qubits: {before} -> {out.n_qubits}"
          + (f" (tapered {list(tmap.removed)})" if tmap is not None else ""))
    print(f"terms: {len(out.structure())}; reference {out.reference}")
    print(f"wrote {out_path} and {report}")
    return 0


# --- scan ------------------------------------------------------------------------------------


def _parse_grid(text: str) -> tuple[float, ...]:
    try:
        lo, hi, step = (float(v) for v in text.split(":"))
    except ValueError as exc:
        raise CliError(f"grid axis {text!r} must be lo:hi:step") from exc
    try:
        return grid_axis(lo, hi, step)
    except ValueError as exc:
        raise CliError(f"grid axis {text!r}: {exc}") from exc


def _scan_one(job):
    R, h, spec, cfg = job
    return scan(h, spec, cfg, R)


def expectation_csv(grid: ScanGrid, symbols: Sequence[str], stamp: dict) -> str:
    buf = io.StringIO()
    buf.write("# " + json.dumps({**stamp, "R": grid.R}, sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    terms = sorted(grid.expectations)
    w.writerow(list(symbols) + ["energy", "std"] + terms)
    pts = grid.points()
    e, s = grid.energy.ravel(), grid.std.ravel()
    flat = {t: grid.expectations[t].ravel() for t in terms}
    for k, p in enumerate(pts):
        w.writerow([repr(float(v)) for v in p] + [repr(float(e[k])), repr(float(s[k]))]
                   + [repr(float(flat[t][k])) for t in terms])
    return buf.getvalue()


def cmd_scan(args) -> int:
    table, spec, geoms, inputs = _problem(args)
    seed = _seed(args)
    axes = tuple(_parse_grid(g) for g in args.grid)
    if len(axes) != spec.n_params:
        raise CliError(f"{len(axes)} grid axes given but the ansatz has {spec.n_params} parameters")
    noise = noise_from_args(args)
    cfg_run = ScanConfig(axes, args.shots or None, seed, noise, args.refocus)
    cfg = _config(args, inputs, ["grid", "shots", "seed", "noise", "ms_fidelity", "t2_ms",
                                 "dfs", "refocus", "R"])
    stamp = _stamp(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    results = _map(_scan_one, [(R, h, s, cfg_run) for R, h, s in geoms], args.jobs)
    manifest, failed = [], 0
    for (R, _, s), res in zip(geoms, results):
        if isinstance(res, Exception):
            failed += 1
            print(f"R={R}: scan failed: {res}", file=sys.stderr)
            continue
        res.metadata.update(stamp)
        res.metadata["dfs"] = args.dfs
        grid_file = out / f"scan_{_rtag(R)}.json"
        exp_file = out / f"expectations_{_rtag(R)}.csv"
        res.save(grid_file)
        exp_file.write_text(expectation_csv(res, s.symbols, stamp))
        manifest.append({"R": R, "grid": grid_file.name, "expectations": exp_file.name,
                         "points": int(res.energy.size)})
    (out / "scan_manifest.json").write_text(_dump({**stamp, "config": cfg, "files": manifest}))
    print(f"{len(manifest)} geometries scanned, {failed} failed; outputs in {out}")
    return 1 if failed else 0


# --- vqe ------------------------------------------------------------------------------------


def _vqe_one(job):
    R, h, spec, kw, header = job
    return vqe_run(h, spec, header={**header, "R": R}, **kw)


def _auto_fit(trace: OptimizerTrace, R: float, n_params: int, optimizer: str,
              requested: str) -> PesPoint:
    if requested == "none":
        return fit_trace(trace, "vqe", R)
    if requested != "auto":
        return fit_trace(trace, requested, R)
    method = "sinusoid" if n_params == 1 else ("quad2d" if optimizer == "anneal" else "vqe")
    if method == "vqe" or trace.header.get("shots") is None:
        return fit_trace(trace, "vqe", R)
    try:
        return fit_trace(trace, method, R)
    except FitError as exc:
        log.warning("R=%s: %s fit failed (%s); using the terminal energy", R, method, exc)
        return fit_trace(trace, "vqe", R)


def cmd_vqe(args) -> int:
    from .optimizer import AnnealSchedule, NelderMeadOptions

    table, spec, geoms, inputs = _problem(args)
    seed = _seed(args)
    noise = noise_from_args(args)
    cfg = _config(args, inputs, ["optimizer", "shots", "seed", "noise", "ms_fidelity", "t2_ms",
                                 "dfs", "refocus", "R", "theta0", "max_iter", "fit",
                                 "anneal_lo", "anneal_hi", "extra_iterations"])
    stamp = _stamp(cfg)
    theta0 = args.theta0 if args.theta0 else None
    kw = dict(
        noise=noise,
        shots=args.shots or None,
        optimizer=args.optimizer,
        seed=seed,
        theta0=theta0,
        options=NelderMeadOptions(max_iter=args.max_iter),
        schedule=AnnealSchedule(args.anneal_lo, args.anneal_hi,
                                extra_iterations=args.extra_iterations),
        refocus=args.refocus,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    results = _map(_vqe_one, [(R, h, s, kw, {**stamp, "dfs": args.dfs}) for R, h, s in geoms],
                   args.jobs)
    points, failed = [], 0
    for (R, h, s), res in zip(geoms, results):
        if isinstance(res, Exception):
            failed += 1
            print(f"R={R}: vqe failed: {res}", file=sys.stderr)
            continue
        res.save(out / f"trace_{_rtag(R)}.jsonl")
        try:
            p = _auto_fit(res, R, s.n_params, args.optimizer, args.fit)
        except FitError as exc:
            failed += 1
            print(f"R={R}: fit failed: {exc}", file=sys.stderr)
            continue
        points.append(p)
        print(f"R={R}: E={p.E_min:.8f} +/- {p.E_err:.2g} ({p.method}, "
              f"{len(res.evaluations)} evaluations, {res.reason})")
    if len(points) >= 1:
        _write_pes(out / "pes.csv", points, stamp, table_exact=None)
    return 1 if failed else 0


def _write_pes(path: Path, points: list[PesPoint], stamp: dict, table_exact=None) -> None:
    header = dict(stamp)
    if len({p.R for p in points}) >= 2:
        pes = assemble_pes(points, "absolute", table_exact)
        header.update({"well_depth": pes.well_depth, "R_min": pes.R_min})
        if pes.non_parallel_error is not None:
            header["non_parallel_error"] = pes.non_parallel_error
        text = pes.to_csv(header)
    else:
        from .surface import PesTable

        text = PesTable(tuple(points)).to_csv(header)
    path.write_text(text)


# --- fit ------------------------------------------------------------------------------------


def _load_fit_inputs(path: Path) -> list:
    """``(path, kind, object, R)`` for a trace, a scan grid or a scan manifest."""
    if path.suffix == ".jsonl":
        tr = OptimizerTrace.load(path)
        return [(path, "trace", tr, float(tr.header.get("R", math.nan)))]
    d = json.loads(path.read_text())
    if "files" in d and "axes" not in d:
        out = []
        for entry in d["files"]:
            out += _load_fit_inputs(path.parent / entry["grid"])
        return out
    grid = ScanGrid.from_json(d)
    return [(path, "scan", grid, grid.R)]


def cmd_fit(args) -> int:
    methods = list(dict.fromkeys(args.method or ["auto"]))
    paths = [Path(p) for p in args.inputs]
    for p in paths:
        if not p.exists():
            raise CliError(f"no such file: {p}")
    loaded = []
    for p in paths:
        try:
            loaded += _load_fit_inputs(p)
        except (OSError, ValueError, KeyError) as exc:
            raise CliError(f"{p}: cannot parse: {exc}") from exc
    exact = None
    inputs = {p.name: _digest(p) for p, _, _, _ in loaded}
    if args.table:
        table, tpath = load_table(args.table)
        inputs["table"] = _digest(tpath)
        exact = {}
        for _, _, _, R in loaded:
            try:
                exact[R] = exact_ground_energy(table.at(R).hamiltonian(), table.n_qubits)
            except KeyError:
                pass
    seed = _seed(args)
    cfg = _config(args, inputs, ["method", "frequency", "seed", "normalization"])
    stamp = _stamp(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    per_method: dict[str, list[PesPoint]] = {}
    diagnostics: dict[str, dict] = {}
    failures = 0
    for path, kind, obj, R in sorted(loaded, key=lambda t: t[3]):
        for m in methods:
            try:
                if kind == "scan":
                    kw = {"random_state": seed} if m == "gpr" else {}
                    p = fit_scan(obj, m, frequency=args.frequency, **kw)
                else:
                    if m == "auto":
                        m_eff = "sinusoid" if len(obj.evaluations[0].theta) == 1 else "quad2d"
                    else:
                        m_eff = m
                    kw = {"random_state": seed} if m_eff == "gpr" else {}
                    p = fit_trace(obj, m_eff, R, frequency=args.frequency, **kw)
            except (FitError, ValueError) as exc:
                failures += 1
                print(f"{path.name} (R={R}): {m} fit failed: {exc}", file=sys.stderr)
                diagnostics.setdefault(repr(R), {})[m] = {"error": str(exc)}
                continue
            per_method.setdefault(p.method, []).append(p)
            diagnostics.setdefault(repr(R), {})[p.method] = {
                "E_min": p.E_min, "E_err": p.E_err, "source": path.name,
                **({"exact": exact[R], "error": p.E_min - exact[R]}
                   if exact and R in exact else {}),
            }
    summary: dict = {}
    for m, pts in per_method.items():
        pts = _dedupe(pts)
        if len(pts) >= 2:
            pes = assemble_pes(pts, args.normalization, exact)
            header = {**stamp, "method": m, "well_depth": pes.well_depth, "R_min": pes.R_min}
            if pes.non_parallel_error is not None:
                header["non_parallel_error"] = pes.non_parallel_error
            (out / f"pes_{m}.csv").write_text(pes.to_csv(header))
            summary[m] = {k: header[k] for k in header if k not in stamp}
        else:
            from .surface import PesTable

            (out / f"pes_{m}.csv").write_text(PesTable(tuple(pts)).to_csv({**stamp, "method": m}))
    if len(per_method) > 1:
        (out / "comparison.csv").write_text(_comparison(per_method, exact, stamp))
        summary.update(_gpr_offset(per_method))
    (out / "fit_diagnostics.json").write_text(
        _dump({**stamp, "config": cfg, "per_R": diagnostics, "summary": summary}))
    for m, pts in per_method.items():
        print(f"{m}: {len(pts)} points -> {out / f'pes_{m}.csv'}")
    if "gpr_below_quad2d" in summary and summary["gpr_below_quad2d"]:
        print(f"note: GPR minima lie below quad2d minima by "
              f"{-summary['gpr_minus_quad2d_mean']:.3g} Ha on average")
    return 1 if failures else 0


def _dedupe(points: list[PesPoint]) -> list[PesPoint]:
    seen: dict[float, PesPoint] = {}
    for p in points:
        seen.setdefault(p.R, p)
    return [seen[R] for R in sorted(seen)]


def _comparison(per_method: dict, exact, stamp: dict) -> str:
    methods = sorted(per_method)
    table = {m: {p.R: p for p in per_method[m]} for m in methods}
    Rs = sorted({R for m in methods for R in table[m]})
    buf = io.StringIO()
    buf.write("# " + json.dumps(stamp, sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["R_angstrom"] + [c for m in methods for c in (m, f"{m}_err")]
               + (["exact"] if exact else []))
    for R in Rs:
        row = [repr(R)]
        for m in methods:
            p = table[m].get(R)
            row += [repr(p.E_min), repr(p.E_err)] if p else ["", ""]
        if exact:
            row.append(repr(exact[R]) if R in exact else "")
        w.writerow(row)
    return buf.getvalue()


def _gpr_offset(per_method: dict) -> dict:
    g = {p.R: p.E_min for k, v in per_method.items() if k.endswith("gpr") for p in v}
    q = {p.R: p.E_min for k, v in per_method.items() if k.endswith("quad2d") for p in v}
    common = sorted(set(g) & set(q))
    if not common:
        return {}
    d = [g[R] - q[R] for R in common]
    return {"gpr_minus_quad2d_mean": float(np.mean(d)),
            "gpr_below_quad2d": bool(all(x < 0 for x in d))}


# --- noise-sim --------------------------------------------------------------------------------


def _noise_one(job):
    R, h, spec, noise, refocus = job
    theta, e = noisy_minimum(h, spec, noise, refocus=refocus)
    return theta, e


def cmd_noise_sim(args) -> int:
    table, spec, geoms, inputs = _problem(args)
    seed = _seed(args)
    fids = list(dict.fromkeys(args.ms_fidelity_sweep))
    mode = args.noise
    cfg = _config(args, inputs, ["ms_fidelity_sweep", "t2_ms", "noise", "dfs", "refocus", "R",
                                 "seed"])
    stamp = _stamp(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    exact = {R: exact_ground_energy(h, spec.n_qubits) for R, h, _ in geoms}
    models = [None] + [NoiseModel(T2=args.t2_ms * 1e-3, ms_fidelity=F, dephasing=mode)
                       for F in fids]
    jobs = [(R, h, s, m, args.refocus) for m in models for R, h, s in geoms]
    results = _map(_noise_one, jobs, args.jobs)
    failed = sum(isinstance(r, Exception) for r in results)
    for j, r in zip(jobs, results):
        if isinstance(r, Exception):
            print(f"R={j[0]}: simulation failed: {r}", file=sys.stderr)
    n = len(geoms)
    ideal = {geoms[i][0]: results[i] for i in range(n) if not isinstance(results[i], Exception)}
    buf = io.StringIO()
    buf.write("# " + json.dumps(stamp, sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["R_angstrom", "ms_fidelity", "t2_ms", "dephasing", "E_noisy_hartree",
                "E_noiseless_hartree", "E_exact_hartree", "upshift_hartree"])
    summary = []
    for k, (F, m) in enumerate(zip(fids, models[1:])):
        pts = []
        for i, (R, _, _) in enumerate(geoms):
            r = results[(k + 1) * n + i]
            if isinstance(r, Exception) or R not in ideal:
                continue
            e0 = ideal[R][1]
            w.writerow([repr(R), repr(F), repr(args.t2_ms), mode, repr(r[1]), repr(e0),
                        repr(exact[R]), repr(r[1] - e0)])
            pts.append(PesPoint(R, r[1], 0.0, "exact"))
        if len({p.R for p in pts}) >= 2:
            noisy = assemble_pes(pts)
            clean = assemble_pes([PesPoint(R, e[1]) for R, e in ideal.items()])
            summary.append({"ms_fidelity": F, "well_depth": noisy.well_depth,
                            "well_depth_noiseless": clean.well_depth, "R_min": noisy.R_min,
                            "R_min_noiseless": clean.R_min})
    (out / "noise_curves.csv").write_text(buf.getvalue())
    (out / "noise_summary.json").write_text(_dump({**stamp, "config": cfg, "curves": summary}))
    for s in summary:
        print(f"F={s['ms_fidelity']}: well depth {s['well_depth']:.5f} Ha "
              f"(noiseless {s['well_depth_noiseless']:.5f}), R_min {s['R_min']}")
    return 1 if failed else 0


# --- argument parsing ---------------------------------------------------------------------------


def _add_common(p: argparse.ArgumentParser, *, problem: bool = True, noise: str = "off") -> None:
    if problem:
        p.add_argument("--table", required=True, help="qubit coefficient table (path or bundled name)")
        p.add_argument("--ansatz", required=True, help="ansatz file (path or bundled name)")
        p.add_argument("--R", type=float, nargs="+", help="geometries to use (default: all)")
        p.add_argument("--dfs", choices=("protected", "unprotected"), default="protected",
                       help="unprotected conjugates by X on the highest qubit and flips the "
                            "reference, leaving the decoherence-free subspace")
        p.add_argument("--noise", choices=("off", "iid", "collective"), default=noise,
                       help="dephasing channel")
        p.add_argument("--ms-fidelity", type=float, default=1.0, help="MS gate fidelity")
        p.add_argument("--t2-ms", type=float, default=40.0, help="coherence time T2 in ms")
        p.add_argument("--refocus", action="store_true",
                       help="realize subset MS gates by refocusing global MS gates")
        p.add_argument("--jobs", type=int, default=1, help="worker processes across geometries")
    p.add_argument("--seed", type=int, default=None, help="random seed (recorded in outputs)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ionvqe", description=__doc__.split("\n\n")[0])
    ap.add_argument("--version", action="version", version=f"ionvqe {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("transform", help="map a fermionic table to qubits")
    p.add_argument("input", help="fermionic coefficient table")
    p.add_argument("--mapping", choices=("jw", "bk"), required=True)
    p.add_argument("--taper", action="store_true", help="remove qubits fixed by the reference")
    p.add_argument("--reference", help="occupation bit string (default: the table's)")
    p.add_argument("--out", required=True, help="output table (JSON)")
    p.add_argument("--report", help="term report (default: <out>.terms.csv)")
    _add_common(p, problem=False)
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("scan", help="energy grids over the ansatz parameters")
    _add_common(p)
    p.add_argument("--grid", action="append", required=True,
                   help="lo:hi:step for one parameter; repeat per parameter")
    p.add_argument("--shots", type=int, default=0, help="shots per point (0: exact)")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("vqe", help="variational optimization per geometry")
    _add_common(p)
    p.add_argument("--optimizer", choices=("nm", "anneal"), default="nm")
    p.add_argument("--shots", type=int, default=0, help="shots per evaluation (0: exact)")
    p.add_argument("--theta0", type=float, nargs="+", help="initial parameters (default 0)")
    p.add_argument("--max-iter", type=int, default=1000)
    p.add_argument("--anneal-lo", type=float, default=0.01, help="perturbation lower bound, Ha")
    p.add_argument("--anneal-hi", type=float, default=0.08, help="perturbation upper bound, Ha")
    p.add_argument("--extra-iterations", type=int, default=15)
    p.add_argument("--fit", choices=("auto", "none") + FIT_METHODS, default="auto",
                   help="how the PES point is read off the trace")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_vqe)

    p = sub.add_parser("fit", help="PES from scan (.json) or trace (.jsonl) files")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--method", action="append", choices=("auto",) + FIT_METHODS,
                   help="repeat for a comparison table")
    p.add_argument("--frequency", type=float, default=2.0,
                   help="angular frequency of the sinusoid model")
    p.add_argument("--normalization", choices=("absolute", "large_R_offset"), default="absolute")
    p.add_argument("--table", help="table for exact reference energies")
    p.add_argument("--out", required=True, help="output directory")
    _add_common(p, problem=False)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("noise-sim", help="noisy minimum energy versus MS fidelity")
    _add_common(p, noise="iid")
    p.add_argument("--ms-fidelity-sweep", type=float, nargs="+",
                   default=[1.0, 0.99, 0.97, 0.95, 0.93])
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_noise_sim)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return int(args.func(args) or 0)
    except CliError as exc:
        print(f"ionvqe {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
