"""Disk self-maps sampled on a polar grid.

Points of the disk are complex numbers throughout.  A map ``f`` is stored
through ``q(r, theta) = f(r e^{i theta}) e^{-i theta}``, interpolated by
bicubic splines in ``(r, theta)``; rigid rotations have constant-in-theta,
linear-in-r ``q`` and are therefore reproduced without interpolation error.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import RectBivariateSpline
from scipy.spatial import cKDTree

from .errors import ContractViolation

TOL_GEOM = 1e-6
_PAD = 4


@dataclass(frozen=True)
class PolarGrid:
    nr: int = 64
    ntheta: int = 256

    def __post_init__(self):
        if self.nr < 4 or self.ntheta < 8:
            raise ContractViolation("polar grid too small")

    @property
    def r(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.nr)

    @property
    def theta(self) -> np.ndarray:
        return 2 * np.pi * np.arange(self.ntheta) / self.ntheta

    @property
    def nodes(self) -> np.ndarray:
        return self.r[:, None] * np.exp(1j * self.theta)[None, :]

    @property
    def midpoints(self) -> np.ndarray:
        r = 0.5 * (self.r[1:] + self.r[:-1])
        th = self.theta + np.pi / self.ntheta
        return r[:, None] * np.exp(1j * th)[None, :]

    def refined(self, factor: int = 2) -> "PolarGrid":
        return PolarGrid((self.nr - 1) * factor + 1, self.ntheta * factor)


def _polar(z):
    z = np.asarray(z, dtype=complex)
    r = np.abs(z)
    th = np.mod(np.angle(z), 2 * np.pi)
    return r, th


@dataclass(frozen=True, eq=False)
class SampledDiskMap:
    """A disk map known at the nodes of a :class:`PolarGrid`.

    ``interp_error`` is the measured hold-out error of the interpolant at
    cell midpoints when the map was sampled from an exact evaluator, else
    ``None``.
    """

    grid: PolarGrid
    values: np.ndarray
    interp_error: float | None = None
    label: str = ""
    _splines: tuple = field(default=None, repr=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=complex)
        if vals.shape != (self.grid.nr, self.grid.ntheta):
            raise ContractViolation(f"values shape {vals.shape} does not match grid")
        object.__setattr__(self, "values", vals)
        th = self.grid.theta
        q = vals * np.exp(-1j * th)[None, :]
        dth = 2 * np.pi / self.grid.ntheta
        th_ext = np.concatenate([th[-_PAD:] - 2 * np.pi, th, th[:_PAD] + 2 * np.pi])
        q_ext = np.concatenate([q[:, -_PAD:], q, q[:, :_PAD]], axis=1)
        assert np.allclose(np.diff(th_ext), dth)
        re = RectBivariateSpline(self.grid.r, th_ext, q_ext.real, kx=3, ky=3, s=0)
        im = RectBivariateSpline(self.grid.r, th_ext, q_ext.imag, kx=3, ky=3, s=0)
        object.__setattr__(self, "_splines", (re, im))

    # -- construction -----------------------------------------------------
    @classmethod
    def from_callable(cls, fn: Callable[[np.ndarray], np.ndarray], grid: PolarGrid | None = None,
                      label: str = "", holdout: bool = True) -> "SampledDiskMap":
        grid = grid or PolarGrid()
        out = cls(grid, np.asarray(fn(grid.nodes)), label=label)
        if holdout:
            mid = grid.midpoints
            err = float(np.max(np.abs(out(mid) - np.asarray(fn(mid)))))
            out = cls(grid, out.values, interp_error=err, label=label)
        return out

    @classmethod
    def identity(cls, grid: PolarGrid | None = None) -> "SampledDiskMap":
        grid = grid or PolarGrid()
        return cls(grid, grid.nodes, interp_error=0.0, label="id")

    @classmethod
    def rotation(cls, angle: float, grid: PolarGrid | None = None) -> "SampledDiskMap":
        grid = grid or PolarGrid()
        return cls(grid, grid.nodes * np.exp(1j * angle), interp_error=0.0, label=f"R({angle:.6g})")

    # -- evaluation -------------------------------------------------------
    def _q(self, r, th, dr=0, dth=0):
        re, im = self._splines
        return re.ev(r, th, dx=dr, dy=dth) + 1j * im.ev(r, th, dx=dr, dy=dth)

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        r, th = _polar(z)
        r = np.minimum(r, 1.0)
        return self._q(r, th) * np.exp(1j * th)

    def polar_derivatives(self, z):
        """(w_r, w_theta) at ``z``, where w(r, theta) = f(r e^{i theta})."""
        r, th = _polar(z)
        r = np.minimum(r, 1.0)
        e = np.exp(1j * th)
        q = self._q(r, th)
        wr = self._q(r, th, dr=1) * e
        wt = (self._q(r, th, dth=1) + 1j * q) * e
        return wr, wt

    def jacobian_det(self, z):
        z = np.asarray(z, dtype=complex)
        r = np.maximum(np.abs(z), 1e-12)
        wr, wt = self.polar_derivatives(z)
        return np.imag(np.conj(wr) * wt) / r

    # -- algebra ----------------------------------------------------------
    def compose(self, other) -> "SampledDiskMap":
        """``self o other`` sampled on ``self.grid``."""
        inner = other(self.grid.nodes)
        err = None
        if self.interp_error is not None and getattr(other, "interp_error", 0.0) is not None:
            err = self.interp_error + (getattr(other, "interp_error", 0.0) or 0.0)
        return SampledDiskMap(self.grid, self(inner), interp_error=err, label=f"{self.label}o{getattr(other, 'label', '')}")

    def iterate_points(self, z, m: int):
        z = np.asarray(z, dtype=complex)
        for _ in range(m):
            z = self(z)
        return z

    def power(self, m: int) -> "SampledDiskMap":
        vals = self.iterate_points(self.grid.nodes, m)
        err = None if self.interp_error is None else m * self.interp_error
        return SampledDiskMap(self.grid, vals, interp_error=err, label=f"{self.label}^{m}")

    def inverse(self, grid: PolarGrid | None = None, tol: float = 1e-13, max_iter: int = 50) -> "SampledDiskMap":
        """Numerical inverse by Newton iteration on the interpolant."""
        grid = grid or self.grid
        targets = grid.nodes
        pre = self.solve_preimage(targets, tol=tol, max_iter=max_iter)
        return SampledDiskMap(grid, pre, interp_error=self.interp_error, label=f"{self.label}^-1")

    def solve_preimage(self, targets, tol: float = 1e-13, max_iter: int = 50):
        targets = np.asarray(targets, dtype=complex)
        fine = self.grid.refined(2)
        seeds = fine.nodes.ravel()
        tree = cKDTree(np.column_stack([self(seeds).real, self(seeds).imag]))
        flat = targets.ravel()
        _, idx = tree.query(np.column_stack([flat.real, flat.imag]))
        r, th = _polar(seeds[idx])
        for _ in range(max_iter):
            z = r * np.exp(1j * th)
            w = self(z)
            res = w - flat
            if np.max(np.abs(res)) < tol:
                break
            wr, wt = self.polar_derivatives(z)
            det = wr.real * wt.imag - wr.imag * wt.real
            det = np.where(np.abs(det) < 1e-14, 1e-14, det)
            d_r = (wt.imag * res.real - wt.real * res.imag) / det
            d_t = (-wr.imag * res.real + wr.real * res.imag) / det
            r = np.clip(r - d_r, 0.0, 1.0)
            th = th - d_t
        out = r * np.exp(1j * th)
        if abs(self(np.array([0j]))[0]) < 1e-12:
            out[np.abs(flat) < 1e-15] = 0.0
        return out.reshape(targets.shape)

    # -- contract ---------------------------------------------------------
    def check_invariants(self, tol_geom: float = TOL_GEOM) -> dict:
        vals = self.values
        outside = float(np.max(np.abs(vals)) - 1.0)
        boundary = float(np.max(np.abs(np.abs(vals[-1]) - 1.0)))
        test = self.grid.midpoints
        det = self.jacobian_det(test)
        return {
            "in_disk": outside <= tol_geom,
            "boundary_to_boundary": boundary <= tol_geom,
            "orientation_preserving": bool(np.all(det > 0)),
            "max_radius_excess": outside,
            "boundary_gap": boundary,
            "min_jacobian": float(np.min(det)),
        }


def rotation_map(angle: float) -> Callable[[np.ndarray], np.ndarray]:
    e = np.exp(1j * angle)
    return lambda z: np.asarray(z, dtype=complex) * e


def loop_area(loop: np.ndarray) -> np.ndarray:
    """Signed area ``(1/2) Im int conj(g) g' dt`` of closed curves sampled
    uniformly along the last axis, with spectral derivatives."""
    loop = np.asarray(loop, dtype=complex)
    N = loop.shape[-1]
    k = np.fft.fftfreq(N, 1.0 / N)
    d = np.fft.ifft(2j * np.pi * k * np.fft.fft(loop, axis=-1), axis=-1)
    return 0.5 * np.mean(np.imag(np.conj(loop) * d), axis=-1)


def area_defect(f, disk_radius: float = 0.05, centers: int = 12, boundary_points: int = 256) -> float:
    """Max relative area change of small disks under ``f``.

    Image areas come from the spectral loop-area formula on the image of each
    disk's boundary, independent of any Jacobian computation.
    """
    rc = np.linspace(0.0, 1.0 - 1.5 * disk_radius, centers)
    cs = [0j]
    for r in rc[1:]:
        m = max(4, int(round(2 * np.pi * r / (2 * disk_radius))))
        cs.extend(r * np.exp(2j * np.pi * np.arange(m) / m))
    cs = np.asarray(cs)
    ang = np.exp(2j * np.pi * np.arange(boundary_points) / boundary_points)
    circles = cs[:, None] + disk_radius * ang[None, :]
    ref = loop_area(circles)
    img = loop_area(np.asarray(f(circles)))
    return float(np.max(np.abs(img - ref) / ref))


def c0_distance(f, g, grid: PolarGrid | None = None, refine: int = 2) -> float:
    """sup over a dense polar grid of |f(xi) - g(xi)|."""
    if grid is None:
        grids = [getattr(m, "grid", None) for m in (f, g)]
        grids = [gr for gr in grids if gr is not None]
        base = PolarGrid(max([gr.nr for gr in grids], default=64), max([gr.ntheta for gr in grids], default=256))
        grid = base.refined(refine)
    pts = grid.nodes
    return float(np.max(np.abs(np.asarray(f(pts)) - np.asarray(g(pts)))))
