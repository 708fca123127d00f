"""Foliations by half-cylinder leaves and the disk maps they induce.

A leaf with boundary phase theta meets the disk slice ``{t = j}`` in the
curve ``sigma -> z_theta(sigma, j)`` (``sigma = |s|``).  The induced map sends
``z_theta(sigma, 0)`` to ``z_theta(sigma, 1)``.  Both slices are handled
through a chart

    xi(theta, sigma) = e^{i theta} e^{-mu sigma} e^{i omega_k j} P_j(theta, sigma),

where ``mu = |lambda|`` and ``P_j`` is 1 for the rotation model; ``P_j`` is
interpolated by trigonometric series in theta with cubic splines in sigma.
Polar-grid nodes are pulled back through the source chart by Newton's method.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.spatial import cKDTree

from .circle import CircleLift, rotation_number
from .diskmap import PolarGrid, SampledDiskMap, area_defect
from .errors import (ConjugacyNotFound, ContinuationNeeded, ContinuationStalled, ContractViolation,
                     FoliationIntegrityError, PartialFailure, TopologicalFailure)
from .floer import (DECAY_TOL, ContinuationOptions, FloerProblem, LeafSolution, NewtonOptions,
                    calibrate_resolution, continue_leaf, solve_leaf)
from .hamiltonian import ConstantHamiltonian, MappingTorus, RotationHamiltonian

TOL_GEOM = 1e-6
CHART_FLOOR_FACTOR = 100.0


# ---------------------------------------------------------------------------
# foliation

@dataclass(frozen=True, eq=False)
class Foliation:
    n: int
    side: str
    alpha: object
    thetas: np.ndarray
    leaves: tuple  # LeafSolution or None per theta
    problem: FloerProblem
    gaps: tuple = ()  # (theta, message)
    cylinder: bool = True  # the zero leaf is part of every foliation
    checks: dict = field(default_factory=dict)

    @property
    def complete(self) -> bool:
        return not self.gaps

    @property
    def boundary_degree(self) -> int:
        return self.problem.boundary_degree

    @property
    def energies(self) -> np.ndarray:
        return np.array([L.e_omega if L is not None else np.nan for L in self.leaves])

    def stack(self) -> np.ndarray:
        """(theta, s, t) array of leaf values; needs a complete foliation."""
        if not self.complete:
            raise ContractViolation(f"foliation has gaps at theta = {[g[0] for g in self.gaps]}")
        return np.stack([L.z for L in self.leaves])


def _is_rotation_model(H) -> bool:
    return isinstance(H, (RotationHamiltonian, ConstantHamiltonian))


def build_foliation(M: MappingTorus, alpha, side: str = "plus", theta_count: int = 32, Ns: int | None = None,
                    Nt: int = 128, calibrate: bool = True, opts: NewtonOptions | None = None,
                    copts: ContinuationOptions | None = None,
                    progress: Callable[[int, float], None] | None = None) -> Foliation:
    """Leaves at ``theta_count`` uniform phases.

    The first leaf comes from continuation (with the s-resolution calibrated
    by energy refinement when ``Ns`` is None); the others start from the
    previous leaf rotated by the phase step and fall back to continuation.
    Phases that still fail are listed in ``gaps``.
    """
    if theta_count < 4:
        raise ContractViolation("theta_count must be at least 4")
    P = FloerProblem(M, alpha, side, Ns, Nt)
    thetas = 2 * np.pi * np.arange(theta_count) / theta_count
    model = _is_rotation_model(M.field)
    leaves: list = []
    gaps: list = []
    prev = None
    for j, th in enumerate(thetas):
        if progress:
            progress(j, float(th))
        leaf = None
        try:
            if model:
                leaf = solve_leaf(P, th, opts=opts)
            elif prev is None:
                if Ns is None and calibrate:
                    cal = calibrate_resolution(P, th, opts=opts, copts=copts)
                    P, leaf = cal.problem, cal.leaf
                else:
                    leaf = continue_leaf(P, th, opts=opts, copts=copts)
            else:
                init = prev.z * np.exp(1j * (th - prev.theta))
                try:
                    leaf = solve_leaf(P, th, init, opts=opts)
                except (ContinuationNeeded, TopologicalFailure):
                    leaf = continue_leaf(P, th, opts=opts, copts=copts)
        except PartialFailure as exc:
            gaps.append((float(th), str(exc)))
        leaves.append(leaf)
        if leaf is not None:
            prev = leaf
    F = Foliation(M.n, side, alpha, thetas, tuple(leaves), P, tuple(gaps))
    if F.complete:
        object.__setattr__(F, "checks", check_foliation(F))
    return F


def check_foliation(F: Foliation, tol_geom: float = TOL_GEOM) -> dict:
    """Slice ordering, cylinder limit and winding checks."""
    Z = F.stack()
    ratio = Z[np.r_[1:Z.shape[0], 0]] / np.where(Z == 0, 1.0, Z)
    step = np.angle(ratio)
    deep = np.abs(Z).min(axis=0) > tol_geom
    ordered = bool(np.all(step[:, deep] > 0))
    total = step.sum(axis=0)
    winding_ok = bool(np.all(np.abs(total[deep] - 2 * np.pi) < 1e-6))
    tail = float(np.abs(Z[:, -1]).max())
    return {
        "ordered": ordered,
        "slice_winding": winding_ok,
        "min_phase_step": float(step[:, deep].min()) if deep.any() else float("nan"),
        "cylinder_tail": tail,
        "cylinder_ok": tail <= F.problem.decay_tol,
        "ok": ordered and winding_ok and tail <= F.problem.decay_tol,
    }


# ---------------------------------------------------------------------------
# charts

def _slice(L: LeafSolution, t_star: float) -> np.ndarray:
    """Leaf values at time ``t_star`` by trigonometric interpolation in t."""
    Nt = L.z.shape[1]
    ht = L.n / Nt
    f = np.fft.fftfreq(Nt, d=ht)
    Z = np.fft.fft(L.z, axis=1) / Nt
    return Z @ np.exp(2j * np.pi * f * t_star)


class _Chart:
    """Interpolant of ``(theta, sigma) -> leaf slice at t = t_star``."""

    def __init__(self, F: Foliation, t_star: float):
        P = F.problem
        self.mu = abs(P.lam)
        self.omega = P.omega_k * t_star
        self.T = len(F.thetas)
        vals = np.stack([_slice(L, t_star) for L in F.leaves])  # (T, Ns)
        # the last cells carry a tiny Robin boundary layer; stop the chart
        # where the slices drop below 100 decay_tol and fill inside it linearly
        keep = np.abs(vals).min(axis=0) >= CHART_FLOOR_FACTOR * P.decay_tol
        last = max(int(np.nonzero(keep)[0].max()) + 1 if keep.any() else 0, 4)
        vals = vals[:, :last]
        self.sigma = np.abs(P.s)[:last]
        self.values = vals
        norm = np.exp(1j * F.thetas)[:, None] * np.exp(-self.mu * self.sigma)[None, :] * np.exp(1j * self.omega)
        Pv = vals / norm
        self.m = np.fft.fftfreq(self.T, 1.0 / self.T)
        coef = np.fft.fft(Pv, axis=0) / self.T  # (T, Ns)
        self.spline = CubicSpline(self.sigma, coef.T, axis=0)
        self.sigma_max = float(self.sigma[-1])

    def __call__(self, theta, sigma, derivs: bool = False):
        theta = np.asarray(theta, dtype=float)
        sigma = np.asarray(sigma, dtype=float)
        c = self.spline(sigma)  # (..., T)
        e = np.exp(1j * theta[..., None] * self.m)
        Pv = np.sum(c * e, axis=-1)
        base = np.exp(1j * theta - self.mu * sigma + 1j * self.omega)
        val = base * Pv
        if not derivs:
            return val
        c1 = self.spline(sigma, 1)
        P_th = np.sum(c * e * (1j * self.m), axis=-1)
        P_s = np.sum(c1 * e, axis=-1)
        d_th = base * (1j * Pv + P_th)
        d_s = base * (-self.mu * Pv + P_s)
        return val, d_th, d_s

    def pullback(self, targets, tol: float = 1e-13, max_iter: int = 40):
        """(theta, sigma, inside) with chart(theta, sigma) = targets; ``inside``
        is False for targets deeper than the last slice node."""
        flat = np.asarray(targets, dtype=complex).ravel()
        th_seed = np.linspace(0, 2 * np.pi, 4 * self.T, endpoint=False)
        sg_seed = np.linspace(0, self.sigma_max, 8 * len(self.sigma))
        TH, SG = np.meshgrid(th_seed, sg_seed, indexing="ij")
        seeds = self(TH, SG).ravel()
        tree = cKDTree(np.column_stack([seeds.real, seeds.imag]))
        _, idx = tree.query(np.column_stack([flat.real, flat.imag]))
        th, sg = TH.ravel()[idx], SG.ravel()[idx]
        for _ in range(max_iter):
            val, dth, ds = self(th, sg, derivs=True)
            res = val - flat
            if np.max(np.abs(res)) < tol:
                break
            det = dth.real * ds.imag - dth.imag * ds.real
            det = np.where(np.abs(det) < 1e-300, 1e-300, det)
            d_th = (ds.imag * res.real - ds.real * res.imag) / det
            d_s = (-dth.imag * res.real + dth.real * res.imag) / det
            th = th - d_th
            sg = np.clip(sg - d_s, 0.0, self.sigma_max * 1.5)
        edge = np.abs(self(th, np.full_like(sg, self.sigma_max)))
        inside = (sg <= self.sigma_max) & (np.abs(flat) >= edge * (1 - 1e-12))
        return th, sg, inside

    def jacobian_sign(self):
        th = np.linspace(0, 2 * np.pi, 2 * self.T, endpoint=False)
        TH, SG = np.meshgrid(th, self.sigma, indexing="ij")
        _, dth, ds = self(TH, SG, derivs=True)
        return dth.real * ds.imag - dth.imag * ds.real


# ---------------------------------------------------------------------------
# induced maps

@dataclass(frozen=True, eq=False)
class ApproxMap:
    map: SampledDiskMap
    inverse: SampledDiskMap
    n: int
    p: int
    provenance: str = ""
    info: dict = field(default_factory=dict)

    def __call__(self, z):
        return self.map(z)

    def to_csv(self, path) -> None:
        g = self.map.grid
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["r", "theta", "re_phi", "im_phi", "re_phi_inv", "im_phi_inv"])
            for i, r in enumerate(g.r):
                for j, th in enumerate(g.theta):
                    a, b = self.map.values[i, j], self.inverse.values[i, j]
                    w.writerow([f"{r:.17g}", f"{th:.17g}", f"{a.real:.17g}", f"{a.imag:.17g}",
                                f"{b.real:.17g}", f"{b.imag:.17g}"])

    def metadata(self) -> dict:
        return {"n": self.n, "p": self.p, "provenance": self.provenance,
                **{k: v for k, v in self.info.items() if isinstance(v, (int, float, str, bool))}}

    def dump(self, csv_path, json_path, extra: dict | None = None) -> None:
        self.to_csv(csv_path)
        with open(json_path, "w") as fh:
            json.dump({**self.metadata(), **(extra or {})}, fh, indent=2, sort_keys=True)


def _chart_map(src: _Chart, dst: _Chart, linear: complex) -> Callable:
    def fn(z):
        z = np.asarray(z, dtype=complex)
        th, sg, inside = src.pullback(z)
        out = dst(th, np.minimum(sg, src.sigma_max))
        flat = z.ravel()
        out = np.where(inside, out, linear * flat)
        out = np.where(np.abs(flat) == 0.0, 0.0, out)
        return out.reshape(z.shape)
    return fn


def induced_disk_map(F: Foliation, grid: PolarGrid | None = None, slice_index: int = 0) -> ApproxMap:
    """phi_n from the slice pair ``(slice_index, slice_index + 1)``; the inverse
    swaps the two slices."""
    if not F.complete:
        raise ContractViolation("induced_disk_map needs a complete foliation")
    if not 0 <= slice_index < F.n:
        raise ContractViolation("slice_index must lie in [0, n)")
    grid = grid or PolarGrid()
    a = _Chart(F, float(slice_index))
    b = _Chart(F, float(slice_index + 1))
    for ch in (a, b):
        sign = ch.jacobian_sign()
        if not (np.all(sign > 0) or np.all(sign < 0)):
            bad = np.unravel_index(np.argmin(sign * np.sign(np.median(sign))), sign.shape)
            # jacobian_sign samples theta at twice the leaf count
            lo = bad[0] // 2
            hi = (lo + 1) % len(F.thetas) if bad[0] % 2 else lo
            raise FoliationIntegrityError(
                f"slice chart folds near theta={np.pi * bad[0] / len(F.thetas):.6g} (leaves {lo}..{hi}), "
                f"s-node {bad[1]}", leaves=(lo, hi), s_node=int(bad[1]))
    k = F.boundary_degree
    rot = np.exp(2j * np.pi * k / F.n)
    fwd = SampledDiskMap.from_callable(_chart_map(a, b, rot), grid, label=f"phi_{F.n}")
    inv = SampledDiskMap.from_callable(_chart_map(b, a, np.conj(rot)), grid, label=f"phi_{F.n}^-1")
    info = {
        "interp_error": fwd.interp_error,
        "inverse_interp_error": inv.interp_error,
        "area_defect": area_defect(fwd),
        "roundtrip": float(np.max(np.abs(fwd(inv(grid.nodes)) - grid.nodes))),
        "slice_index": slice_index,
    }
    return ApproxMap(fwd, inv, F.n, k % F.n, provenance=f"{F.side}:n={F.n}:T={len(F.thetas)}", info=info)


# ---------------------------------------------------------------------------
# periodicity and conjugacy

@dataclass(frozen=True)
class PeriodicityReport:
    residual: float
    tolerance: float
    passed: bool
    worst_node: tuple
    worst_point: complex


def verify_periodicity(A: ApproxMap, factor: float = 10.0, floor: float = 1e-9) -> PeriodicityReport:
    """max over grid nodes of ``|phi^n(xi) - xi|`` against ``factor`` times the
    interpolation error accumulated over n iterates."""
    m = A.map
    nodes = m.grid.nodes
    err = np.abs(m.iterate_points(nodes, A.n) - nodes)
    idx = np.unravel_index(int(np.argmax(err)), err.shape)
    interp = m.interp_error or 0.0
    tol = max(factor * A.n * interp, floor)
    res = float(err[idx])
    return PeriodicityReport(res, tol, res <= tol, tuple(int(i) for i in idx), complex(nodes[idx]))


def boundary_rotation(m, iterations: int = 2000, N: int = 1024) -> float:
    def circle(x):
        return np.mod(np.angle(m(np.exp(2j * np.pi * np.asarray(x)))) / (2 * np.pi), 1.0)
    return rotation_number(CircleLift.from_circle_map(circle, N=N), iterations)


@dataclass(frozen=True, eq=False)
class Conjugacy:
    g: SampledDiskMap
    p: int
    n: int
    residual: float
    tolerance: float


def extract_conjugacy(A: ApproxMap, factor: float = 10.0, floor: float = 1e-9) -> Conjugacy:
    """Cyclic average of ``R^{-k} phi^k`` over k < n, with ``R = R_{2 pi p/n}``,
    taken in polar form (mean radius, mean angular offset) so boundary points
    stay on the boundary.  Certified by ``|g o phi - R o g| <= tolerance`` at
    grid midpoints."""
    n = A.n
    iterations = 2000
    rot = boundary_rotation(A.map, iterations)
    p = int(round(rot * n)) % n
    if abs(((rot - p / n) + 0.5) % 1.0 - 0.5) > 2.0 / iterations:
        raise ConjugacyNotFound(f"boundary rotation number {rot:.6g} is not close to a multiple of 1/{n}")
    R = np.exp(2j * np.pi * p / n)
    grid = A.map.grid
    pts = grid.nodes
    safe = np.where(pts == 0, 1.0, pts)
    radius = np.zeros(pts.shape)
    offset = np.zeros(pts.shape)
    cur = pts.copy()
    for k in range(n):
        radius += np.abs(cur)
        offset += np.angle(R ** (-k) * cur / safe)
        cur = A.map(cur)
    vals = (radius / n) * np.exp(1j * (np.angle(safe) + offset / n))
    vals = np.where(pts == 0, 0.0, vals)
    g = SampledDiskMap(grid, vals, interp_error=A.map.interp_error, label="g")
    inv = g.check_invariants()
    if not (inv["orientation_preserving"] and inv["in_disk"] and inv["boundary_to_boundary"]):
        raise ConjugacyNotFound(f"cyclic average is not a disk diffeomorphism (min Jacobian {inv['min_jacobian']:.3g}, "
                                f"boundary gap {inv['boundary_gap']:.3g})")
    mid = grid.midpoints
    resid = float(np.max(np.abs(g(A.map(mid)) - R * g(mid))))
    tol = max(factor * n * (A.map.interp_error or 0.0), floor)
    if resid > tol:
        raise ConjugacyNotFound(f"conjugation residual {resid:.3g} exceeds {tol:.3g}")
    return Conjugacy(g, p, n, resid, tol)


def leaf_energy_report(F: Foliation) -> dict:
    target = math.pi * F.problem.gap
    e = F.energies
    rel = np.abs(e - target) / target
    return {"target": target, "max_rel_error": float(np.nanmax(rel)) if e.size else float("nan"),
            "energies": e.tolist(), "decay_tol": DECAY_TOL}
