"""Time-periodic Hamiltonians on the unit disk and their flows.

Conventions: ``omega0 = dx^dy`` and ``omega0(X_H, .) = -dH``, so
``X_H = (-H_y, H_x)``; as a complex number ``X_H = -H_y + i H_x``.  Every
shipped family is constant on the boundary circle for each ``t`` and has a
critical point at the origin for every ``t`` (the constant orbit ``t -> 0``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .diskmap import PolarGrid, SampledDiskMap
from .errors import ContractViolation, IntegrationFailure

TOL_BOUNDARY = 1e-9
DEFAULT_STEPS_PER_UNIT = 128
# energy drift and area error of the midpoint flow at >= 64 steps per unit
TOL_INTEGRATOR = 1e-7
# fourth-order symmetric composition of midpoint steps
_YOSHIDA = (1.0 / (2.0 - 2.0 ** (1.0 / 3.0)), -(2.0 ** (1.0 / 3.0)) / (2.0 - 2.0 ** (1.0 / 3.0)),
            1.0 / (2.0 - 2.0 ** (1.0 / 3.0)))
METHODS = ("yoshida4", "midpoint")


# ---------------------------------------------------------------------------
# bump profile in rho = |z|^2

@dataclass(frozen=True)
class Bump:
    """Smooth bump ``exp(1 - 1/(1-u^2))`` of rho, supported in (r_in^2, r_out^2)."""

    r_in: float = 0.25
    r_out: float = 0.85

    def __post_init__(self):
        if not 0.0 < self.r_in < self.r_out < 1.0:
            raise ContractViolation("bump radii must satisfy 0 < r_in < r_out < 1")

    def __call__(self, rho, order: int = 0):
        a, b = self.r_in ** 2, self.r_out ** 2
        du = 2.0 / (b - a)
        u = (2.0 * rho - a - b) / (b - a)
        inside = np.abs(u) < 1.0
        us = np.where(inside, u, 0.0)
        w = 1.0 - us * us
        g = -1.0 / w
        psi = np.where(inside, np.exp(1.0 + g), 0.0)
        if order == 0:
            return psi
        g1 = -2.0 * us / w ** 2
        if order == 1:
            return psi * g1 * du
        g2 = -2.0 / w ** 2 - 8.0 * us * us / w ** 3
        return psi * (g2 + g1 * g1) * du * du


# ---------------------------------------------------------------------------
# fields

class HamiltonianField:
    """Base class: subclasses provide ``h``, ``grad`` and ``hess``."""

    family = "abstract"

    def h(self, t, x, y):
        raise NotImplementedError

    def grad(self, t, x, y):
        raise NotImplementedError

    def hess(self, t, x, y):
        """(H_xx, H_xy, H_yy)."""
        eps = 1e-5
        gxp = self.grad(t, x + eps, y)
        gxm = self.grad(t, x - eps, y)
        gyp = self.grad(t, x, y + eps)
        gym = self.grad(t, x, y - eps)
        hxx = (gxp[0] - gxm[0]) / (2 * eps)
        hyy = (gyp[1] - gym[1]) / (2 * eps)
        hxy = 0.5 * ((gxp[1] - gxm[1]) + (gyp[0] - gym[0])) / (2 * eps)
        return hxx, hxy, hyy

    def value(self, t, z):
        z = np.asarray(z, dtype=complex)
        return self.h(t, z.real, z.imag)

    def vector_field(self, t, z):
        z = np.asarray(z, dtype=complex)
        hx, hy = self.grad(t, z.real, z.imag)
        return -hy + 1j * hx

    def to_config(self) -> dict:
        raise NotImplementedError

    def check_contract(self, tol: float = TOL_BOUNDARY, samples: int = 64) -> dict:
        ts = np.linspace(0.0, 1.0, 17)
        ang = np.exp(2j * np.pi * np.arange(samples) / samples)
        spread = 0.0
        origin = 0.0
        period = 0.0
        for t in ts:
            hb = self.value(t, ang)
            spread = max(spread, float(np.var(hb)))
            gx, gy = self.grad(t, np.zeros(1), np.zeros(1))
            origin = max(origin, float(np.hypot(gx, gy).max()))
            pts = 0.7 * ang
            period = max(period, float(np.max(np.abs(self.value(t + 1.0, pts) - self.value(t, pts)))))
        return {
            "boundary_variance": spread,
            "origin_gradient": origin,
            "periodicity_gap": period,
            "ok": spread <= tol and origin <= tol and period <= 1e-9,
        }


@dataclass(frozen=True)
class ConstantHamiltonian(HamiltonianField):
    C: float = 0.0
    family = "constant"

    def h(self, t, x, y):
        return np.full(np.broadcast(np.asarray(x), np.asarray(y)).shape, float(self.C))

    def grad(self, t, x, y):
        z = np.zeros(np.broadcast(np.asarray(x), np.asarray(y)).shape)
        return z, z.copy()

    def hess(self, t, x, y):
        z = np.zeros(np.broadcast(np.asarray(x), np.asarray(y)).shape)
        return z, z.copy(), z.copy()

    def to_config(self):
        return {"family": "constant", "C": float(self.C)}


@dataclass(frozen=True)
class RotationHamiltonian(HamiltonianField):
    """``pi*alpha*|z|^2 + C``: time-one map is rotation by ``2*pi*alpha``."""

    alpha: object
    C: float = 0.0
    family = "rotation"

    @property
    def a(self) -> float:
        return float(self.alpha)

    def h(self, t, x, y):
        return math.pi * self.a * (np.asarray(x) ** 2 + np.asarray(y) ** 2) + self.C

    def grad(self, t, x, y):
        c = 2 * math.pi * self.a
        return c * np.asarray(x, dtype=float), c * np.asarray(y, dtype=float)

    def hess(self, t, x, y):
        c = 2 * math.pi * self.a
        shape = np.broadcast(np.asarray(x), np.asarray(y)).shape
        return np.full(shape, c), np.zeros(shape), np.full(shape, c)

    def to_config(self):
        return {"family": "rotation", "alpha": _alpha_cfg(self.alpha), "C": float(self.C)}


@dataclass(frozen=True)
class PerturbedRotation(HamiltonianField):
    """``pi*alpha*|z|^2 + C + eps*b(|z|^2)*sin(2*pi*t + k*theta)``.

    Written as ``f(rho) * Im(P)`` with ``P = e^{2 pi i t} (x+iy)^k`` and
    ``f = eps * b(rho) * rho^(-k/2)``, which is smooth because ``b`` vanishes
    near the origin.
    """

    alpha: object
    epsilon: float = 0.05
    k: int = 1
    C: float = 0.0
    bump: Bump = field(default_factory=Bump)
    family = "perturbed_rotation"

    @property
    def a(self) -> float:
        return float(self.alpha)

    def _f(self, rho):
        k = self.k
        b0, b1, b2 = self.bump(rho), self.bump(rho, 1), self.bump(rho, 2)
        safe = np.where(b0 > 0, rho, 1.0)
        p = safe ** (-0.5 * k)
        f0 = self.epsilon * b0 * p
        f1 = self.epsilon * (b1 * p - 0.5 * k * b0 * p / safe)
        f2 = self.epsilon * (b2 * p - k * b1 * p / safe + 0.5 * k * (0.5 * k + 1) * b0 * p / safe ** 2)
        return f0, f1, f2

    def _P(self, t, x, y):
        k = self.k
        zeta = np.asarray(x, dtype=float) + 1j * np.asarray(y, dtype=float)
        e = np.exp(2j * math.pi * np.asarray(t, dtype=float))
        P = e * zeta ** k
        P1 = k * e * zeta ** (k - 1) if k >= 1 else np.zeros_like(zeta)
        P2 = k * (k - 1) * e * zeta ** (k - 2) if k >= 2 else np.zeros_like(zeta)
        return P, P1, P2

    def h(self, t, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        rho = x * x + y * y
        f0, _, _ = self._f(rho)
        P, _, _ = self._P(t, x, y)
        return math.pi * self.a * rho + self.C + f0 * P.imag

    def grad(self, t, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        rho = x * x + y * y
        f0, f1, _ = self._f(rho)
        P, P1, _ = self._P(t, x, y)
        c = 2 * math.pi * self.a
        # d/dx P = P1, d/dy P = i P1
        hx = c * x + 2 * x * f1 * P.imag + f0 * P1.imag
        hy = c * y + 2 * y * f1 * P.imag + f0 * P1.real
        return hx, hy

    def hess(self, t, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        rho = x * x + y * y
        f0, f1, f2 = self._f(rho)
        P, P1, P2 = self._P(t, x, y)
        c = 2 * math.pi * self.a
        ImP, ImPx, ImPy = P.imag, P1.imag, P1.real
        ImPxx, ImPxy, ImPyy = P2.imag, P2.real, -P2.imag
        hxx = c + 4 * x * x * f2 * ImP + 2 * f1 * ImP + 4 * x * f1 * ImPx + f0 * ImPxx
        hyy = c + 4 * y * y * f2 * ImP + 2 * f1 * ImP + 4 * y * f1 * ImPy + f0 * ImPyy
        hxy = 4 * x * y * f2 * ImP + 2 * x * f1 * ImPy + 2 * y * f1 * ImPx + f0 * ImPxy
        return hxx, hxy, hyy

    def to_config(self):
        return {
            "family": "perturbed_rotation",
            "alpha": _alpha_cfg(self.alpha),
            "C": float(self.C),
            "epsilon": float(self.epsilon),
            "k": int(self.k),
            "bump_params": {"r_in": self.bump.r_in, "r_out": self.bump.r_out},
        }

    def with_epsilon(self, epsilon: float) -> "PerturbedRotation":
        return PerturbedRotation(self.alpha, epsilon, self.k, self.C, self.bump)


@dataclass(frozen=True)
class BlendedHamiltonian(HamiltonianField):
    """``(1 - w) * start + w * end`` for a fixed weight ``w``."""

    start: HamiltonianField
    end: HamiltonianField
    weight: float
    family = "blend"

    def h(self, t, x, y):
        w = self.weight
        return (1 - w) * self.start.h(t, x, y) + w * self.end.h(t, x, y)

    def grad(self, t, x, y):
        w = self.weight
        a, b = self.start.grad(t, x, y), self.end.grad(t, x, y)
        return (1 - w) * a[0] + w * b[0], (1 - w) * a[1] + w * b[1]

    def hess(self, t, x, y):
        w = self.weight
        a, b = self.start.hess(t, x, y), self.end.hess(t, x, y)
        return tuple((1 - w) * u + w * v for u, v in zip(a, b))

    def to_config(self):
        return {"family": "blend", "start": self.start.to_config(), "end": self.end.to_config(),
                "weight": float(self.weight)}


@dataclass(frozen=True)
class ConjugatedRotationHamiltonian(HamiltonianField):
    """``pi*alpha*|g(z)|^2 + C`` for an area-preserving conjugator ``g``.

    Its time-one map is ``g^{-1} o R_{2 pi alpha} o g``.  Derivatives are
    central differences of ``g``.
    """

    alpha: object
    conjugator: Callable = field(compare=False)
    C: float = 0.0
    fd_step: float = 1e-6
    spec: tuple = ()
    family = "ak"

    def h(self, t, x, y):
        z = np.asarray(x, dtype=float) + 1j * np.asarray(y, dtype=float)
        return math.pi * float(self.alpha) * np.abs(self.conjugator(z)) ** 2 + self.C

    def grad(self, t, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        e = self.fd_step
        hx = (self.h(t, x + e, y) - self.h(t, x - e, y)) / (2 * e)
        hy = (self.h(t, x, y + e) - self.h(t, x, y - e)) / (2 * e)
        return hx, hy

    def to_config(self):
        return {"family": "ak", "alpha": _alpha_cfg(self.alpha), "C": float(self.C), "conjugator": list(self.spec)}


def _alpha_cfg(alpha):
    import mpmath
    if isinstance(alpha, mpmath.mpf):
        return mpmath.nstr(alpha, 50)
    return alpha


def hamiltonian_from_config(cfg: dict) -> HamiltonianField:
    from .circle import as_alpha
    fam = cfg.get("family")
    if fam == "constant":
        return ConstantHamiltonian(float(cfg.get("C", 0.0)))
    if fam == "rotation":
        return RotationHamiltonian(as_alpha(cfg["alpha"]), float(cfg.get("C", 0.0)))
    if fam == "perturbed_rotation":
        bp = cfg.get("bump_params") or {}
        return PerturbedRotation(as_alpha(cfg["alpha"]), float(cfg.get("epsilon", 0.05)), int(cfg.get("k", 1)),
                                 float(cfg.get("C", 0.0)), Bump(**bp) if bp else Bump())
    if fam == "ak":
        from .anosov_katok import make_conjugator
        spec = cfg.get("conjugator", [])
        g = make_conjugator(spec)
        return ConjugatedRotationHamiltonian(as_alpha(cfg["alpha"]), g.forward, float(cfg.get("C", 0.0)),
                                             spec=tuple(_freeze(s) for s in spec))
    raise ContractViolation(f"unknown Hamiltonian family {fam!r}")


def _freeze(d):
    return tuple(sorted(d.items())) if isinstance(d, dict) else d


# ---------------------------------------------------------------------------
# flows

@dataclass(frozen=True)
class MappingTorus:
    """Length-``n`` mapping torus of ``field``: R/nZ x D with R_n = d/dtau + X_H."""

    n: int
    field: HamiltonianField

    def __post_init__(self):
        if self.n < 1:
            raise ContractViolation("mapping torus length must be positive")


def hamiltonian_vector_field(H: HamiltonianField, t: float, z):
    return H.vector_field(t, z)


def _midpoint_step(H, t, h, z, tol=1e-15, max_iter=60):
    tm = t + 0.5 * h
    w = z + h * H.vector_field(tm, z)
    for _ in range(max_iter):
        w_new = z + h * H.vector_field(tm, 0.5 * (z + w))
        if np.max(np.abs(w_new - w), initial=0.0) <= tol * (1.0 + np.max(np.abs(w_new), initial=0.0)):
            return w_new, True
        w = w_new
    return w, False


def flow(H: HamiltonianField, t0: float, t1: float, z, steps: int | None = None,
         min_step: float = 1e-9, method: str = "yoshida4"):
    """Approximate flow of ``X_H`` from ``t0`` to ``t1``.

    Each step is the implicit midpoint rule (``method="midpoint"``) or its
    fourth-order symmetric triple-jump composition (``"yoshida4"``).  Both are
    symplectic and symmetric, so ``flow(H, t1, t0, .)`` inverts
    ``flow(H, t0, t1, .)`` to the tolerance of the implicit solve.
    """
    if method not in METHODS:
        raise ContractViolation(f"method must be one of {METHODS}")
    z = np.array(z, dtype=complex, copy=True)
    span = t1 - t0
    if span == 0 or isinstance(H, ConstantHamiltonian):
        return z
    if isinstance(H, RotationHamiltonian):
        # closed form
        return z * np.exp(2j * math.pi * H.a * span)
    if steps is None:
        steps = max(1, int(math.ceil(abs(span) * DEFAULT_STEPS_PER_UNIT)))
    h = span / steps
    weights = _YOSHIDA if method == "yoshida4" else (1.0,)

    def advance(t, h, z):
        z_new, ok = _midpoint_step(H, t, h, z)
        if ok:
            return z_new
        if abs(h) / 2 < min_step:
            raise IntegrationFailure(f"implicit midpoint failed to converge at t={t:.6g}")
        z_half = advance(t, h / 2, z)
        return advance(t + h / 2, h / 2, z_half)

    for i in range(steps):
        t = t0 + i * h
        for w in weights:
            z = advance(t, w * h, z)
            t += w * h
    return z


def time_one_map(H: HamiltonianField, grid: PolarGrid | None = None, steps: int | None = None) -> SampledDiskMap:
    grid = grid or PolarGrid()
    return SampledDiskMap.from_callable(lambda z: flow(H, 0.0, 1.0, z, steps), grid, label=f"phi[{H.family}]")


def time_one_inverse(H: HamiltonianField, grid: PolarGrid | None = None, steps: int | None = None) -> SampledDiskMap:
    grid = grid or PolarGrid()
    return SampledDiskMap.from_callable(lambda z: flow(H, 1.0, 0.0, z, steps), grid, label=f"phi^-1[{H.family}]")


def first_return_map(M: MappingTorus, grid: PolarGrid | None = None, steps_per_unit: int = DEFAULT_STEPS_PER_UNIT) -> SampledDiskMap:
    """First return of R_n to the slice {0} x D, i.e. the n-th iterate of phi."""
    grid = grid or PolarGrid()
    steps = steps_per_unit * M.n
    return SampledDiskMap.from_callable(lambda z: flow(M.field, 0.0, float(M.n), z, steps), grid,
                                        label=f"phi^{M.n}[{M.field.family}]")
