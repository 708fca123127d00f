"""Command-line front end.

Every subcommand writes its artifacts and a ``manifest.json`` into the
output directory.  Exit codes: 0 success, 2 partial (gaps or inconclusive
scans), 1 contract violation or usage error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import platform
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from importlib import metadata
from pathlib import Path

import numpy as np

from . import annulus, diagnostics
from .anosov_katok import ak_sequence, conjugated_rotation, make_conjugator
from .circle import canonical_boundary_lift, convergents, frac_mul, translation_number
from .config import ExperimentConfig
from .diskmap import PolarGrid, SampledDiskMap, area_defect
from .errors import ContinuationStalled, ContractViolation, PartialFailure
from .floer import (ContinuationOptions, FloerProblem, NewtonOptions, calibrate_resolution, continue_leaf,
                    solve_leaf)
from .foliation import build_foliation, induced_disk_map, leaf_energy_report, verify_periodicity
from .hamiltonian import (ConstantHamiltonian, MappingTorus, RotationHamiltonian, hamiltonian_from_config,
                          time_one_map)

log = logging.getLogger("pseudorot")

EXIT_OK, EXIT_CONTRACT, EXIT_PARTIAL = 0, 1, 2
COMMANDS = ("rotnum", "flow", "ak", "leaf", "foliate", "energy", "converge", "appendix")


class UsageError(ContractViolation):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


class Run:
    """Collects artifacts and gap records for one command."""

    def __init__(self, cfg: ExperimentConfig, out: Path, threads: int):
        self.cfg = cfg
        self.out = out
        self.threads = max(1, int(threads))
        self.artifacts: list[str] = []
        self.gaps: list[dict] = []
        self.inconclusive = False
        out.mkdir(parents=True, exist_ok=True)

    def path(self, name: str) -> Path:
        self.artifacts.append(name)
        return self.out / name

    def write_csv(self, name: str, header, rows) -> None:
        with open(self.path(name), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for r in rows:
                w.writerow([_fmt(v) for v in r])

    def write_json(self, name: str, doc) -> None:
        with open(self.path(name), "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True, default=_jsonable)
            fh.write("\n")

    def gap(self, **record) -> None:
        log.warning("gap: %s", record)
        self.gaps.append(record)

    @property
    def status(self) -> int:
        return EXIT_PARTIAL if (self.gaps or self.inconclusive) else EXIT_OK

    def map_threads(self, fn, items):
        items = list(items)
        if self.threads == 1 or len(items) < 2:
            return [fn(x) for x in items]
        with ThreadPoolExecutor(self.threads) as ex:
            return list(ex.map(fn, items))


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.floating, np.integer, np.bool_)):
        return v.item()
    if isinstance(v, complex):
        return [v.real, v.imag]
    return str(v)


def _versions() -> dict:
    out = {"python": platform.python_version()}
    for pkg in ("pseudorot", "numpy", "scipy", "mpmath"):
        try:
            out[pkg] = metadata.version(pkg)
        except metadata.PackageNotFoundError:
            out[pkg] = "unknown"
    return out


# ---------------------------------------------------------------------------
# helpers

def _field(cfg: ExperimentConfig):
    return hamiltonian_from_config(cfg.hamiltonian_descriptor())


def _grid(cfg: ExperimentConfig) -> PolarGrid:
    return PolarGrid(cfg.solver.grid_nr, cfg.solver.grid_ntheta)


def _newton(cfg: ExperimentConfig) -> NewtonOptions:
    return NewtonOptions(newton_tol=cfg.solver.newton_tol, tol_bc=cfg.solver.tol_bc)


def _is_model(H) -> bool:
    return isinstance(H, (RotationHamiltonian, ConstantHamiltonian))


def _side(cfg: ExperimentConfig, n: int) -> str:
    side = cfg.options.get("side", "plus")
    return diagnostics.auto_side(n, cfg.alpha_value) if side == "auto" else side


def _solve_one(cfg: ExperimentConfig, H, n: int, side: str, theta: float):
    """Leaf at phase theta: direct Newton for the model, continuation otherwise."""
    P = FloerProblem(MappingTorus(n, H), cfg.alpha_value, side, cfg.solver.Ns, cfg.solver.Nt,
                     decay_tol=cfg.solver.decay_tol)
    if _is_model(H):
        return P, solve_leaf(P, theta, opts=_newton(cfg))
    if cfg.solver.Ns is None:
        cal = calibrate_resolution(P, theta, rtol=cfg.solver.calibrate_rtol, opts=_newton(cfg))
        return cal.problem, cal.leaf
    return P, continue_leaf(P, theta, opts=_newton(cfg), copts=ContinuationOptions())


# ---------------------------------------------------------------------------
# commands

def cmd_rotnum(run: Run) -> None:
    cfg = run.cfg
    H = _field(cfg)
    lift = canonical_boundary_lift(H)
    est = translation_number(lift, cfg.solver.iterations)
    run.write_csv("rotnum.csv", ["quantity", "value"], [
        ("translation_number", est.value), ("lower", est.lower), ("upper", est.upper),
        ("rotation_number", est.value % 1.0), ("iterations", est.iterations)])


def cmd_flow(run: Run) -> None:
    cfg = run.cfg
    H = _field(cfg)
    phi = time_one_map(H, _grid(cfg), cfg.solver.steps_per_unit)
    inv = phi.check_invariants()
    g = phi.grid
    rows = ((r, th, phi.values[i, j].real, phi.values[i, j].imag)
            for i, r in enumerate(g.r) for j, th in enumerate(g.theta))
    run.write_csv("flow.csv", ["r", "theta", "re_phi", "im_phi"], rows)
    run.write_json("flow.json", {"invariants": inv, "interp_error": phi.interp_error,
                                 "area_defect": area_defect(phi)})


def cmd_ak(run: Run) -> None:
    cfg = run.cfg
    K = int(cfg.options.get("K", 4))
    table = convergents(cfg.alpha_value, K)
    seq = ak_sequence(table, K, grid=_grid(cfg))
    rows = []
    for k, phi in enumerate(seq.maps):
        d = seq.distances[k - 1] if k > 0 else float("nan")
        rows.append((k + 1, phi.p, phi.q, d, phi.checks["periodicity"], phi.checks["interp_error"]))
    run.write_csv("ak.csv", ["k", "p", "q", "d_c0_prev", "periodicity", "interp_error"], rows)
    if seq.truncated:
        run.gap(stage="ak", k=len(seq.maps) + 1, message=seq.reason)


def cmd_leaf(run: Run) -> None:
    cfg = run.cfg
    H = _field(cfg)
    n = int(cfg.options.get("n", cfg.resolved_depths()[0]))
    side = _side(cfg, n)
    theta = float(cfg.options.get("theta", 0.0))
    try:
        P, L = _solve_one(cfg, H, n, side, theta)
    except ContinuationStalled as exc:
        # no leaf is written: the last accepted sigma is below 1
        run.gap(stage="leaf", n=n, theta=theta, sigma=exc.sigma, message=str(exc))
        return
    except PartialFailure as exc:
        run.gap(stage="leaf", n=n, theta=theta, message=str(exc))
        return
    L.dump(run.path(f"leaf_n{n}_{side}.csv"), run.path(f"leaf_n{n}_{side}.json"),
           {"frac_n_alpha": frac_mul(n, cfg.alpha_value), "e_omega_over_pi": L.e_omega / math.pi,
            "target_over_pi": P.gap, "Ns": P.Ns, "Nt": P.Nt})


def _foliations(run: Run, H, ns, sides):
    cfg = run.cfg

    def build(key):
        n, side = key
        try:
            return key, build_foliation(MappingTorus(n, H), cfg.alpha_value, side, cfg.solver.theta_count,
                                        cfg.solver.Ns, cfg.solver.Nt, opts=_newton(cfg)), None
        except PartialFailure as exc:
            return key, None, str(exc)

    out = {}
    for key, F, err in run.map_threads(build, list(zip(ns, sides))):
        if F is None:
            run.gap(stage="foliate", n=key[0], side=key[1], message=err)
        else:
            out[key] = F
    return out


def cmd_foliate(run: Run) -> None:
    cfg = run.cfg
    H = _field(cfg)
    ns = cfg.resolved_depths()
    fols = _foliations(run, H, ns, [_side(cfg, n) for n in ns])
    summary = []
    for (n, side), F in sorted(fols.items()):
        for th, msg in F.gaps:
            run.gap(stage="foliate", n=n, side=side, theta=th, message=msg)
        rows = [(th, L.e_omega if L else float("nan"), L.residual_norm if L else float("nan"))
                for th, L in zip(F.thetas, F.leaves)]
        run.write_csv(f"foliation_n{n}_{side}.csv", ["theta", "e_omega", "residual_norm"], rows)
        entry = {"n": n, "side": side, "Ns": F.problem.Ns, "Nt": F.problem.Nt, "checks": F.checks,
                 "energy": leaf_energy_report(F) if F.complete else None}
        if F.complete:
            try:
                A = induced_disk_map(F, _grid(cfg))
                rep = verify_periodicity(A)
                A.to_csv(run.path(f"induced_map_n{n}_{side}.csv"))
                entry["induced_map"] = {**A.metadata(), "periodicity_residual": rep.residual,
                                        "periodicity_tolerance": rep.tolerance, "periodicity_passed": rep.passed}
            except PartialFailure as exc:
                run.gap(stage="induced_map", n=n, side=side, message=str(exc))
        summary.append(entry)
    run.write_json("foliate.json", summary)


def cmd_energy(run: Run) -> None:
    cfg = run.cfg
    H = _field(cfg)
    alpha = cfg.alpha_value
    rows = []
    g1 = diagnostics.gamma1_action_identity(H, alpha)
    rows.append(("gamma1", 1, g1.lhs, g1.rhs, g1.difference, g1.passed))
    ns = cfg.resolved_depths()
    theta = float(cfg.options.get("theta", 0.0))

    def one(n):
        side = _side(cfg, n)
        try:
            P, L = _solve_one(cfg, H, n, side, theta)
            return n, side, P, L, None
        except PartialFailure as exc:
            return n, side, None, None, str(exc)

    for n, side, P, L, err in run.map_threads(one, ns):
        for rep in diagnostics.verify_action_scaling(H, n):
            rows.append((f"scaling_{rep.name}", n, rep.lhs, rep.rhs, rep.difference, rep.passed))
        if err is not None:
            run.gap(stage="energy", n=n, side=side, message=err)
            continue
        st = diagnostics.stokes_check(L, P)
        rows.append((f"stokes_quadrature_{side}", n, st.e_quadrature, st.e_formula,
                     abs(st.e_quadrature - st.e_formula), st.passed))
        rows.append((f"stokes_action_{side}", n, st.e_stokes, st.e_formula,
                     abs(st.e_stokes - st.e_formula), st.passed))
        if 0 < frac_mul(n, alpha) < 1:
            sw = diagnostics.action_sandwich(H, alpha, n)
            rows.append(("sandwich_lower_slack", n, sw.middle, sw.lower, sw.lower_slack, sw.holds))
            rows.append(("sandwich_upper_slack", n, sw.upper, sw.middle, sw.upper_slack, sw.holds))
    run.write_csv("energy.csv", ["identity", "n", "lhs", "rhs", "difference", "passed"], rows)


def cmd_converge(run: Run) -> None:
    cfg = run.cfg
    H = _field(cfg)
    ns = cfg.resolved_depths()
    side = cfg.options.get("side", "auto")
    sides = [diagnostics.auto_side(n, cfg.alpha_value) if side == "auto" else side for n in ns]
    fols = _foliations(run, H, ns, sides)
    table = diagnostics.convergence_experiment(H, cfg.alpha_value, ns, cfg.solver.theta_count, side, _grid(cfg),
                                               foliations=dict(fols))
    for n, msg in table.gaps:
        if not any(g.get("n") == n for g in run.gaps):
            run.gap(stage="converge", n=n, message=msg)
    table.to_csv(run.path("converge.csv"))
    run.write_json("converge.json", {"decreasing": table.decreasing, "slack": table.slack,
                                     "distances": table.distances})


def _appendix_map(cfg: ExperimentConfig):
    """(map, alpha) for the appendix checks."""
    desc = cfg.hamiltonian_descriptor()
    rat = cfg.options.get("rational")
    if rat is not None:
        p, q = (int(v) for v in rat)
        C = conjugated_rotation(p, q, make_conjugator(desc.get("conjugator", []), _grid(cfg)))
        return C.exact, p / q, C
    H = _field(cfg)
    alpha = float(cfg.alpha_value)
    if isinstance(H, RotationHamiltonian):
        return SampledDiskMap.rotation(2 * math.pi * alpha, _grid(cfg)), alpha, None
    return time_one_map(H, _grid(cfg), cfg.solver.steps_per_unit), alpha, None


def cmd_appendix(run: Run) -> None:
    cfg = run.cfg
    opt = cfg.options
    f, alpha, _ = _appendix_map(cfg)
    eig = annulus.eigenvalue_check(f, alpha)
    report = {"eigenvalues": [[e.real, e.imag] for e in eig.eigenvalues], "deviation": eig.deviation,
              "det": eig.det, "circle_rotation": eig.circle_rotation, "real_spectrum": eig.real_spectrum}
    try:
        L = annulus.blow_up(f)
        found = annulus.returning_disk_search(L, float(opt.get("u_radius", 0.02)), int(opt.get("max_n", 10)),
                                              int(opt.get("max_k", 5)))
        found.to_jsonl(run.path("returning_disks.jsonl"))
        report["returning_disks"] = {"status": found.status, "implication": found.implication,
                                     "scanned": found.scanned, "blow_up_interp_error": L.interp_error}
        if not found.pair:
            run.inconclusive = True
    except PartialFailure as exc:
        run.gap(stage="blow_up", message=str(exc))
    pts = annulus.periodic_point_scan(f, int(opt.get("max_period", 20)),
                                      float(opt.get("radius_floor", 0.05)))
    run.write_csv("periodic_points.csv", ["re", "im", "period", "residual"],
                  [(p.point.real, p.point.imag, p.period, p.residual) for p in pts])
    report["periods"] = sorted({p.period for p in pts})
    run.write_json("appendix.json", report)


HANDLERS = {"rotnum": cmd_rotnum, "flow": cmd_flow, "ak": cmd_ak, "leaf": cmd_leaf, "foliate": cmd_foliate,
            "energy": cmd_energy, "converge": cmd_converge, "appendix": cmd_appendix}


# ---------------------------------------------------------------------------
# entry point

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="pseudorot", description="Finite-energy foliation experiments on the disk.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="JSON experiment config")
    p.add_argument("--out", default=None, help="output directory (overrides output_dir)")
    p.add_argument("--threads", type=int, default=1, help="worker threads for independent leaves/depths")
    p.add_argument("--verbose", action="store_true")
    return p


def run(command: str, cfg: ExperimentConfig, out=None, threads: int = 1) -> int:
    """Run one subcommand; returns the exit code."""
    if command not in HANDLERS:
        raise UsageError(f"unknown command {command!r}")
    r = Run(cfg, Path(out or cfg.output_dir), threads)
    t0 = time.perf_counter()
    status, error = EXIT_OK, None
    try:
        HANDLERS[command](r)
        status = r.status
    except ContractViolation as exc:
        status, error = EXIT_CONTRACT, str(exc)
    except PartialFailure as exc:
        r.gap(stage=command, message=str(exc))
        status = EXIT_PARTIAL
    if r.gaps:
        with open(r.path("gaps.jsonl"), "w") as fh:
            for g in r.gaps:
                fh.write(json.dumps(g, sort_keys=True, default=_jsonable) + "\n")
    manifest = {"command": command, "config": cfg.to_dict(), "config_hash": cfg.config_hash(),
                "versions": _versions(), "wall_time": time.perf_counter() - t0, "threads": r.threads,
                "exit_code": status, "error": error, "artifacts": sorted(set(r.artifacts)),
                "gaps": len(r.gaps), "inconclusive": r.inconclusive}
    with open(r.out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=_jsonable)
        fh.write("\n")
    return status


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        cfg = ExperimentConfig.load(args.config)
    except (ContractViolation, OSError) as exc:
        print(f"pseudorot: error: {exc}", file=sys.stderr)
        return EXIT_CONTRACT
    code = run(args.command, cfg, args.out, args.threads)
    if code == EXIT_CONTRACT:
        print("pseudorot: contract violation (see manifest.json)", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
