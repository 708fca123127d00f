"""Blow-up of the fixed point, returning disks and periodic-point scans.

The strip is ``[0, 1] x R`` with coordinates ``(x, y)``: ``x = |z|^2`` and
``y`` the angle in turns, so the deck translation is ``T(x, y) = (x, y + 1)``
and ``dx ^ dy`` is ``(1/pi) dxi ^ deta`` on the disk.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.interpolate import RectBivariateSpline
from scipy.optimize import least_squares

from .circle import CircleLift, translation_number
from .errors import BlowUpFailed, ContractViolation

_PAD = 4


# ---------------------------------------------------------------------------
# lifts on the strip

@dataclass(frozen=True, eq=False)
class AnnulusMapLift:
    """Vectorized ``(x, y) -> (X, Y)`` commuting with ``T``."""

    fn: Callable[[np.ndarray, np.ndarray], tuple]
    interp_error: float = 0.0
    source: str = ""

    def __call__(self, x, y):
        return self.fn(np.asarray(x, dtype=float), np.asarray(y, dtype=float))

    def iterate(self, x, y, m: int):
        for _ in range(m):
            x, y = self(x, y)
        return x, y

    def lipschitz(self, samples: int = 64, h: float = 1e-4) -> float:
        """Finite-difference estimate of the Lipschitz constant on a sample grid."""
        xs = np.linspace(h, 1 - h, samples)
        ys = np.linspace(0, 1, samples, endpoint=False)
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        a = np.array(self(X + h, Y)) - np.array(self(X - h, Y))
        b = np.array(self(X, Y + h)) - np.array(self(X, Y - h))
        J = np.stack([a, b], axis=-1) / (2 * h)  # (2, ..., 2)
        J = np.moveaxis(J, 0, -2)
        return float(np.max(np.linalg.norm(J, ord=2, axis=(-2, -1))))

    def check_invariants(self, tol: float = 1e-6, samples: int = 33) -> dict:
        xs = np.linspace(0, 1, samples)
        ys = np.linspace(0, 1, samples, endpoint=False)
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        a = np.array(self(X, Y))
        b = np.array(self(X, Y + 1.0))
        deck = float(np.max(np.abs(b - a - np.array([0.0, 1.0])[:, None, None])))
        bx0 = float(np.max(np.abs(self(np.zeros(samples), ys)[0])))
        bx1 = float(np.max(np.abs(self(np.ones(samples), ys)[0] - 1.0)))
        return {"deck": deck, "inner": bx0, "outer": bx1, "ok": max(deck, bx0, bx1) <= tol}

    @classmethod
    def twist(cls) -> "AnnulusMapLift":
        """``(x, y) -> (x, y + 2x - 1)``: opposite rotation on the two boundaries."""
        return cls(lambda x, y: (x, y + 2 * x - 1), 0.0, "twist")

    @classmethod
    def rotation(cls, beta: float) -> "AnnulusMapLift":
        beta = float(beta)
        return cls(lambda x, y: (x, y + beta), 0.0, f"rotation({beta:.6g})")

    def boundary_lift(self, x: float) -> CircleLift:
        return CircleLift(lambda y, x=x: self(np.full(np.shape(y), x), np.asarray(y, dtype=float))[1])

    def boundary_rotation_numbers(self, iterations: int = 2000) -> tuple[float, float]:
        """Translation numbers of the lift on the inner and outer circles."""
        return (translation_number(self.boundary_lift(0.0), iterations).value,
                translation_number(self.boundary_lift(1.0), iterations).value)


def jacobian_at_origin(f, h: float = 1e-4) -> np.ndarray:
    """Central-difference Dphi(0) as a real 2x2 matrix."""
    pts = np.array([h, -h, 1j * h, -1j * h], dtype=complex)
    v = np.asarray(f(pts), dtype=complex)
    cx = (v[0] - v[1]) / (2 * h)
    cy = (v[2] - v[3]) / (2 * h)
    return np.array([[cx.real, cy.real], [cx.imag, cy.imag]])


def blow_up(f, nx: int = 65, ny: int = 256, h: float = 1e-4, max_cond: float = 1e6,
            min_det: float = 1e-3) -> AnnulusMapLift:
    """Strip lift of the blow-up of ``f`` at its fixed point 0.

    The inner circle carries ``v -> Dphi(0) v / |Dphi(0) v|``.  The lift is
    fixed by taking the angular displacement at the outer point ``y = 0`` in
    ``[-1/2, 1/2)`` and continuing it along x and y.
    """
    if abs(complex(np.asarray(f(np.array([0j])))[0])) > 1e-9:
        raise BlowUpFailed("map does not fix the origin")
    D = jacobian_at_origin(f, h)
    cond = np.linalg.cond(D)
    if not np.isfinite(cond) or cond > max_cond or np.linalg.det(D) < min_det:
        raise BlowUpFailed(f"linearization at 0 is ill-conditioned (cond {cond:.3g}, det {np.linalg.det(D):.3g})")
    xs = np.linspace(0.0, 1.0, nx)
    ys = np.arange(ny) / ny

    def raw(x, y):
        z = np.sqrt(x) * np.exp(2j * np.pi * y)
        w = np.asarray(f(z), dtype=complex)
        v = np.exp(2j * np.pi * y)
        lin = D @ np.stack([v.real.ravel(), v.imag.ravel()])
        lin = (lin[0] + 1j * lin[1]).reshape(np.shape(v))
        w_dir = np.where(x > 0, w, lin)
        X = np.where(x > 0, np.abs(w) ** 2, 0.0)
        return X, np.angle(w_dir * np.conj(v)) / (2 * np.pi)

    Xg, Yg = np.meshgrid(xs, ys, indexing="ij")
    X, d = raw(Xg, Yg)
    # unwrap the displacement along y on the outer circle, then along x
    d[-1] = np.unwrap(d[-1] * 2 * np.pi) / (2 * np.pi)
    d[-1] -= np.floor(d[-1][0] + 0.5)
    for i in range(nx - 2, -1, -1):
        d[i] = d[i + 1] + (np.mod(d[i] - d[i + 1] + 0.5, 1.0) - 0.5)
    y_ext = np.concatenate([ys[-_PAD:] - 1.0, ys, ys[:_PAD] + 1.0])
    X_ext = np.concatenate([X[:, -_PAD:], X, X[:, :_PAD]], axis=1)
    d_ext = np.concatenate([d[:, -_PAD:], d, d[:, :_PAD]], axis=1)
    sx = RectBivariateSpline(xs, y_ext, X_ext, kx=3, ky=3, s=0)
    sd = RectBivariateSpline(xs, y_ext, d_ext, kx=3, ky=3, s=0)

    def fn(x, y):
        x = np.clip(x, 0.0, 1.0)
        shape = np.broadcast(x, y).shape
        x, y = np.broadcast_to(x, shape), np.broadcast_to(y, shape)
        yr = np.mod(y, 1.0)
        return sx.ev(x, yr), y + sd.ev(x, yr)

    # hold-out error at cell centres against the direct evaluation
    xm = 0.5 * (xs[1:] + xs[:-1])
    ym = ys + 0.5 / ny
    XM, YM = np.meshgrid(xm, ym, indexing="ij")
    Xr, dr = raw(XM, YM)
    Xi, Yi = fn(XM, YM)
    dd = np.mod(Yi - YM - dr + 0.5, 1.0) - 0.5
    err = float(max(np.max(np.abs(Xi - Xr)), np.max(np.abs(dd))))
    return AnnulusMapLift(fn, err, "blow-up")


# ---------------------------------------------------------------------------
# eigenvalues

@dataclass(frozen=True)
class EigenReport:
    jacobian: np.ndarray
    eigenvalues: tuple
    expected: tuple
    deviation: float
    det: float
    circle_rotation: float
    real_spectrum: bool
    negative_real: bool

    def passed(self, tol: float = 1e-4) -> bool:
        return self.deviation <= tol


def linear_circle_map(T: np.ndarray) -> Callable[[np.ndarray], np.ndarray]:
    """``v -> Tv/|Tv|`` in turns."""
    def fn(x):
        v = np.exp(2j * np.pi * np.asarray(x, dtype=float))
        w = T @ np.stack([v.real.ravel(), v.imag.ravel()])
        return (np.angle(w[0] + 1j * w[1]) / (2 * np.pi)).reshape(np.shape(x)) % 1.0
    return fn


def eigenvalue_check(f, alpha, h: float = 1e-4, iterations: int = 4000) -> EigenReport:
    """Spectrum of the finite-difference Dphi(0) against ``e^{+-2 pi i alpha}``,
    plus the rotation number of the projectivized linear map."""
    D = jacobian_at_origin(f, h)
    ev = np.linalg.eigvals(D)
    a = float(alpha)
    exp = np.array([np.exp(2j * np.pi * a), np.exp(-2j * np.pi * a)])
    dev = min(max(abs(ev[0] - exp[0]), abs(ev[1] - exp[1])), max(abs(ev[0] - exp[1]), abs(ev[1] - exp[0])))
    real = bool(np.all(np.abs(ev.imag) < 1e-12))
    lift = CircleLift.from_circle_map(linear_circle_map(D), N=1024)
    rot = translation_number(lift, iterations).value % 1.0
    return EigenReport(D, tuple(complex(e) for e in ev), tuple(complex(e) for e in exp), float(dev),
                       float(np.linalg.det(D)), float(rot), real, bool(real and np.any(ev.real < 0)))


# ---------------------------------------------------------------------------
# returning disks

@dataclass(frozen=True)
class ReturningDisk:
    kind: str  # "positive" or "negative"
    base_point: tuple
    radius: float
    n: int
    k: int
    padding: float

    def to_record(self) -> dict:
        return {"kind": self.kind, "base_point": list(self.base_point), "radius": self.radius, "n": self.n,
                "k": self.k}


@dataclass(frozen=True, eq=False)
class ReturningDiskFindings:
    disks: tuple
    scanned: int
    max_n: int
    max_k: int

    @property
    def positive(self) -> list:
        return [d for d in self.disks if d.kind == "positive"]

    @property
    def negative(self) -> list:
        return [d for d in self.disks if d.kind == "negative"]

    @property
    def pair(self) -> bool:
        return bool(self.positive and self.negative)

    @property
    def status(self) -> str:
        return "pair" if self.pair else "inconclusive"

    @property
    def implication(self) -> str:
        if self.pair:
            return "positively and negatively returning disks found; Franks' lemma implies a fixed point"
        return "no certified pair at this resolution (inconclusive)"

    def to_jsonl(self, path) -> None:
        with open(path, "w") as fh:
            for d in self.disks:
                fh.write(json.dumps(d.to_record(), sort_keys=True) + "\n")


def _disk_samples(cx: float, cy: float, rho: float, rings: int = 6, per_ring: int = 48):
    pts = [(cx, cy)]
    for i in range(1, rings + 1):
        r = rho * i / rings
        m = max(6, int(per_ring * i / rings))
        a = 2 * np.pi * np.arange(m) / m
        pts.extend(zip(cx + r * np.cos(a), cy + r * np.sin(a)))
    p = np.array(pts)
    return p[:, 0], p[:, 1], rho / rings


def returning_disk_search(L: AnnulusMapLift, u_radius: float = 0.02, max_n: int = 10, max_k: int = 5,
                          centers: int = 16, y_centers: int = 4) -> ReturningDiskFindings:
    """Certified returning disks among disks of radius ``u_radius`` centred on a
    grid in ``[u_radius, 1 - u_radius] x [0, 1)``.

    A disk U qualifies when every sample of its closure maps at distance more
    than ``radius + pad`` from its centre (so closure(U) and its image are
    disjoint) and some sample lands strictly inside ``T^k U`` shrunk by the
    interpolation error compounded through the Lipschitz bound.  The first pad
    also covers the sample spacing times the Lipschitz bound.
    """
    if not 0 < u_radius < 0.25:
        raise ContractViolation("u_radius must lie in (0, 1/4)")
    lip = max(L.lipschitz(), 1.0)
    xs = np.linspace(u_radius, 1 - u_radius, centers)
    ys = np.arange(y_centers) / y_centers
    found: list = []
    scanned = 0
    for cx in xs:
        for cy in ys:
            scanned += 1
            px, py, spacing = _disk_samples(cx, cy, u_radius)
            pad1 = L.interp_error + lip * spacing
            X, Y = L(px, py)
            if np.min(np.hypot(X - cx, Y - cy)) <= u_radius + pad1:
                continue  # image may meet the disk
            hits = {}
            x, y = px, py
            reach = 0.0
            for n in range(1, max_n + 1):
                x, y = L(x, y)
                # interpolation error compounds through the Lipschitz bound
                reach = reach * lip + L.interp_error if n > 1 else L.interp_error
                for k in range(-max_k, max_k + 1):
                    if k == 0 or (("pos" if k > 0 else "neg") in hits):
                        continue
                    inside = np.hypot(x - cx, y - (cy + k)) < u_radius - reach
                    if np.any(inside):
                        hits["pos" if k > 0 else "neg"] = (n, k, reach)
                if len(hits) == 2:
                    break
            for key, (n, k, pad) in sorted(hits.items()):
                found.append(ReturningDisk("positive" if key == "pos" else "negative", (float(cx), float(cy)),
                                           float(u_radius), int(n), int(k), float(max(pad1, pad))))
    found.sort(key=lambda d: (d.kind, d.base_point, d.n, d.k))
    return ReturningDiskFindings(tuple(found), scanned, max_n, max_k)


# ---------------------------------------------------------------------------
# periodic points

@dataclass(frozen=True)
class PeriodicPoint:
    point: complex
    period: int
    residual: float


def _iterate(f, z, m):
    for _ in range(m):
        z = np.asarray(f(z), dtype=complex)
    return z


def periodic_point_scan(f, max_period: int = 20, radius_floor: float = 0.05, tol: float | None = None,
                        nr: int = 12, ntheta: int = 48, coarse: float = 0.1,
                        max_refine: int = 16) -> list[PeriodicPoint]:
    """Periodic points off the origin with minimal period ``<= max_period``.

    Grid points where ``|f^m(xi) - xi|`` is at most ``coarse`` and locally
    minimal on the grid are refined by least squares in polar coordinates
    (radius kept above ``radius_floor``).  A point counts when its residual is
    at most ``tol`` (default: 1e-8, or 10 m times the map's interpolation
    error).  Results are deduplicated by orbit.
    """
    rs = np.linspace(radius_floor, 1.0, nr)
    ths = 2 * np.pi * np.arange(ntheta) / ntheta
    pts = (rs[:, None] * np.exp(1j * ths)[None, :]).ravel()
    interp = getattr(f, "interp_error", None) or 0.0
    found: list[PeriodicPoint] = []
    orbit_pts = np.zeros(0, dtype=complex)
    claimed = np.zeros(pts.size, dtype=bool)
    cur = pts.copy()
    for m in range(1, max_period + 1):
        cur = np.asarray(f(cur), dtype=complex)
        tol_m = tol if tol is not None else max(1e-8, 10 * m * interp)
        d = np.abs(cur - pts)
        direct = (~claimed) & (d <= tol_m)
        D = d.reshape(nr, ntheta)
        local = np.ones_like(D, dtype=bool)
        local[1:] &= D[1:] < D[:-1]
        local[:-1] &= D[:-1] <= D[1:]
        local &= (D <= np.roll(D, 1, axis=1)) & (D <= np.roll(D, -1, axis=1))
        cand = np.nonzero((~claimed) & (~direct) & (d <= coarse) & local.ravel())[0]
        zs = list(pts[direct])
        res = list(d[direct])
        for i in cand[np.argsort(d[cand])][:max_refine]:
            z0 = pts[i]

            def resid(v, m=m):
                z = v[0] * np.exp(1j * v[1])
                w = _iterate(f, np.array([z]), m)[0] - z
                return [w.real, w.imag]

            x0 = [min(max(abs(z0), radius_floor), 1.0), np.angle(z0)]
            sol = least_squares(resid, x0, bounds=([radius_floor, -np.inf], [1.0, np.inf]),
                                xtol=1e-14, ftol=1e-14, gtol=1e-14, max_nfev=100)
            r = float(np.hypot(*sol.fun))
            if r <= tol_m:
                zs.append(sol.x[0] * np.exp(1j * sol.x[1]))
                res.append(r)
        claimed |= direct
        if not zs:
            continue
        zs = np.asarray(zs, dtype=complex)
        orbits = [zs]
        for _ in range(m - 1):
            orbits.append(np.asarray(f(orbits[-1]), dtype=complex))
        orbits = np.stack(orbits, axis=1)  # (hits, m)
        dist = np.abs(orbits[:, 1:] - zs[:, None])
        shorter = np.zeros(zs.size, dtype=bool)
        for j in range(1, m):
            if m % j == 0:
                shorter |= dist[:, j - 1] <= tol_m
        same = max(10 * tol_m, 1e-9)
        for z, r, orb, short in zip(zs, res, orbits, shorter):
            if short:
                continue
            if orbit_pts.size and np.min(np.abs(orbit_pts - z)) <= same:
                continue
            found.append(PeriodicPoint(complex(z), m, float(r)))
            orbit_pts = np.concatenate([orbit_pts, orb])
    return found
