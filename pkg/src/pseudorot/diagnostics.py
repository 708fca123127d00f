"""Action functional, Stokes checks and the convergence experiment.

The primitive is ``lambda0 = (x dy - y dx)/2`` and the action of a loop
``t -> (t, z(t))`` in the length-n mapping torus is

    A_n(z) = int z^* lambda0 - int_0^n H(t, z(t)) dt.

Loops are sampled uniformly with the closing point repeated; line integrals
use spectral derivatives, so ``int lambda0`` over any sampled degree-k loop on
the unit circle is ``k pi`` to rounding.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from .circle import as_alpha, canonical_boundary_lift, ceil_mul, floor_mul, frac_mul, translation_number
from .diskmap import PolarGrid, SampledDiskMap, area_defect, c0_distance
from .errors import ContractViolation, OpenLoopError, PartialFailure, RationalInputError
from .floer import FloerProblem, LeafSolution
from .foliation import Foliation, build_foliation, induced_disk_map, verify_periodicity
from .hamiltonian import HamiltonianField, MappingTorus, RotationHamiltonian, flow

__all__ = ["ActionFunctional", "action", "verify_action_scaling", "gamma1_action_identity", "stokes_check",
           "action_sandwich", "c0_distance", "convergence_experiment", "rotation_distance", "CSV_HEADER"]

TOL_ACTION = 1e-3
TOL_LOOP = 1e-9
QUAD_POINTS = 1024
CSV_HEADER = ("n", "frac_n_alpha", "d_c0", "d_c0_inv", "periodicity_residual", "area_defect")


# ---------------------------------------------------------------------------
# action

def _lambda0_integral(z: np.ndarray, period: float) -> float:
    """int z^* lambda0 over one period of uniformly sampled (open) loop samples."""
    N = z.size
    f = np.fft.fftfreq(N, d=period / N)
    dz = np.fft.ifft(2j * np.pi * f * np.fft.fft(z))
    return float(0.5 * np.mean(np.imag(np.conj(z) * dz)) * period)


@dataclass(frozen=True)
class ActionFunctional:
    n: int
    field: HamiltonianField
    loop_tol: float = TOL_LOOP

    # d(lambda0) = (1/2)(dx^dy - dy^dx) = dx^dy
    primitive = "(x dy - y dx)/2"

    def __post_init__(self):
        if self.n < 1:
            raise ContractViolation("n must be positive")

    def _open(self, loop) -> np.ndarray:
        z = np.asarray(loop, dtype=complex).ravel()
        if z.size < 5:
            raise ContractViolation("loop needs at least 4 segments")
        gap = abs(z[-1] - z[0])
        if gap > self.loop_tol:
            raise OpenLoopError(f"loop endpoint gap {gap:.3g} exceeds {self.loop_tol:g}")
        return z[:-1]

    def action(self, loop, tau: float | None = None) -> float:
        """Action of ``tau -> (tau, loop(tau))`` over [0, n], or, when ``tau`` is
        given, of the loop in the fibre ``{tau} x D`` (no H term)."""
        z = self._open(loop)
        if tau is not None:
            return _lambda0_integral(z, 1.0)
        t = np.arange(z.size) * (self.n / z.size)
        hint = float(np.mean(np.broadcast_to(self.field.value(t, z), z.shape)) * self.n)
        return _lambda0_integral(z, float(self.n)) - hint

    # standard loops -------------------------------------------------------
    def gamma(self, N: int = QUAD_POINTS) -> float:
        """A_n of the constant orbit at the origin."""
        return self.action(np.zeros(N + 1, dtype=complex))

    def base_circle(self, point: complex = 1.0, N: int = QUAD_POINTS) -> float:
        """A_n(1_{R/nZ}): the loop staying at a boundary point."""
        return self.action(np.full(N + 1, complex(point)))

    def fibre_circle(self, tau: float = 0.0, N: int = QUAD_POINTS) -> float:
        """A_n(1_{dD}): the unit circle inside one fibre."""
        z = np.exp(2j * np.pi * np.arange(N + 1) / N)
        return self.action(z, tau=tau)

    def boundary_loop(self, k: int, phase: float = 0.0, N: int = QUAD_POINTS) -> float:
        t = np.arange(N + 1) * (self.n / N)
        return self.action(np.exp(1j * (phase + 2 * np.pi * k * t / self.n)))


def action(AF: ActionFunctional, loop, tau: float | None = None) -> float:
    return AF.action(loop, tau)


def _closed(z: np.ndarray) -> np.ndarray:
    return np.append(z, z[0])


def leaf_boundary_action(AF: ActionFunctional, L: LeafSolution) -> float:
    return AF.action(_closed(L.z[0]))


# ---------------------------------------------------------------------------
# identities

@dataclass(frozen=True)
class IdentityReport:
    name: str
    lhs: float
    rhs: float
    tolerance: float
    details: dict = field(default_factory=dict)

    @property
    def difference(self) -> float:
        return abs(self.lhs - self.rhs)

    @property
    def passed(self) -> bool:
        return self.difference <= self.tolerance


def verify_action_scaling(H: HamiltonianField, n: int, tol: float = TOL_ACTION) -> list[IdentityReport]:
    """A_n(gamma_n) = n A_1(gamma_1), A_n(1_{R/nZ}) = n A_1(1_{R/Z}),
    A_n(1_{dD}) = A_1(1_{dD})."""
    An, A1 = ActionFunctional(n, H), ActionFunctional(1, H)
    return [
        IdentityReport("gamma", An.gamma(QUAD_POINTS * n), n * A1.gamma(), tol),
        IdentityReport("base_circle", An.base_circle(N=QUAD_POINTS * n), n * A1.base_circle(), tol),
        IdentityReport("fibre_circle", An.fibre_circle(), A1.fibre_circle(), tol),
    ]


def boundary_rotation_number(H: HamiltonianField, iterations: int = 2000) -> float:
    """Rot(phi; H) from the canonical boundary lift (unreduced)."""
    return float(translation_number(canonical_boundary_lift(H), iterations).value)


def gamma1_action_identity(H: HamiltonianField, alpha=None, tol: float = TOL_ACTION) -> IdentityReport:
    """A_1(gamma_1) = A_1(1_{R/Z}) + alpha A_1(1_{dD}); ``alpha`` defaults to the
    translation number of the canonical boundary lift."""
    if alpha is None:
        alpha = boundary_rotation_number(H)
    a = float(as_alpha(alpha)) if not isinstance(alpha, float) else alpha
    A1 = ActionFunctional(1, H)
    lhs = A1.gamma()
    base, fibre = A1.base_circle(), A1.fibre_circle()
    return IdentityReport("gamma1", lhs, base + a * fibre, tol, {"alpha": a, "base": base, "fibre": fibre})


@dataclass(frozen=True)
class StokesReport:
    e_quadrature: float
    e_stokes: float
    e_formula: float
    rtol: float

    @property
    def deviations(self) -> dict:
        q, s, f = self.e_quadrature, self.e_stokes, self.e_formula
        return {"quad_stokes": abs(q - s) / f, "quad_formula": abs(q - f) / f, "stokes_formula": abs(s - f) / f}

    @property
    def passed(self) -> bool:
        return max(self.deviations.values()) <= self.rtol


def stokes_check(L: LeafSolution, P: FloerProblem, rtol: float = 0.01) -> StokesReport:
    """Three energies: quadrature, ``+-(A_n(gamma_n) - A_n(boundary loop))`` and
    ``pi |k - n alpha|`` (``{n alpha} pi`` on the plus side)."""
    AF = ActionFunctional(P.n, P.H)
    diff = AF.gamma(QUAD_POINTS * P.n) - leaf_boundary_action(AF, L)
    e_stokes = diff if P.side == "plus" else -diff
    return StokesReport(float(L.e_omega), float(e_stokes), math.pi * P.gap, rtol)


@dataclass(frozen=True)
class SandwichReport:
    lower: float  # A_n(1_{R/nZ}) + floor(n alpha) A_n(1_{dD})
    middle: float  # A_n(gamma_n)
    upper: float  # A_n(1_{R/nZ}) + ceil(n alpha) A_n(1_{dD})
    lower_slack: float
    upper_slack: float

    @property
    def holds(self) -> bool:
        return self.lower_slack >= 0 and self.upper_slack >= 0


def action_sandwich(H: HamiltonianField, alpha, n: int, plus_leaf: LeafSolution | None = None,
                    minus_leaf: LeafSolution | None = None) -> SandwichReport:
    """A_n(1_{R/nZ}) + floor(n alpha) A_n(1_{dD}) <= A_n(gamma_n) <= A_n(1_{R/nZ}) + ceil(n alpha) A_n(1_{dD}).

    The outer terms are the actions of the plus/minus leaf boundary loops when
    leaves are supplied, else of the model boundary loops of those degrees.
    """
    if frac_mul(n, alpha) < 1e-12 or frac_mul(n, alpha) > 1 - 1e-12:
        raise RationalInputError(f"n alpha is an integer for n={n}; no pseudo-rotation sandwich")
    AF = ActionFunctional(n, H)
    kp, km = floor_mul(n, alpha), ceil_mul(n, alpha)
    N = QUAD_POINTS * n
    lower = leaf_boundary_action(AF, plus_leaf) if plus_leaf is not None else AF.boundary_loop(kp, N=N)
    upper = leaf_boundary_action(AF, minus_leaf) if minus_leaf is not None else AF.boundary_loop(km, N=N)
    mid = AF.gamma(N)
    return SandwichReport(lower, mid, upper, mid - lower, upper - mid)


# ---------------------------------------------------------------------------
# convergence

def rotation_distance(a: float, b: float) -> float:
    """C0 distance between the rotations by 2 pi a and 2 pi b."""
    return 2.0 * abs(math.sin(math.pi * (a - b)))


def auto_side(n: int, alpha) -> str:
    """The family whose boundary rotation k/n is nearest to alpha."""
    return "plus" if frac_mul(n, alpha) <= 0.5 else "minus"


@dataclass(frozen=True, eq=False)
class ConvergenceTable:
    rows: tuple  # dicts keyed by CSV_HEADER
    gaps: tuple  # (n, message)
    slack: float = 0.10

    @property
    def distances(self) -> np.ndarray:
        return np.array([r["d_c0"] + r["d_c0_inv"] for r in self.rows])

    @property
    def decreasing(self) -> bool:
        d = self.distances
        return bool(np.all(d[1:] <= (1 + self.slack) * d[:-1]))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_HEADER)
            for r in self.rows:
                w.writerow([r["n"]] + [repr(float(r[k])) for k in CSV_HEADER[1:]])


def convergence_experiment(H: HamiltonianField, alpha, depths: Iterable[int], theta_count: int = 32,
                           side: str = "auto", grid: PolarGrid | None = None,
                           foliations: dict | None = None,
                           build: Callable[..., Foliation] = build_foliation) -> ConvergenceTable:
    """Rows (n, {n alpha}, d(phi_n, phi), d(phi_n^-1, phi^-1), periodicity residual, area defect).

    ``phi`` is the time-one map of ``H`` (exact for the rotation family).
    Prebuilt foliations can be passed as ``{(n, side): Foliation}``.
    """
    grid = grid or PolarGrid()
    if isinstance(H, RotationHamiltonian):
        phi = SampledDiskMap.rotation(2 * math.pi * float(as_alpha(H.alpha)), grid)
        phi_inv = SampledDiskMap.rotation(-2 * math.pi * float(as_alpha(H.alpha)), grid)
    else:
        # evaluate the flow directly so that no interpolation error enters the distances
        phi = lambda z: flow(H, 0.0, 1.0, z)
        phi_inv = lambda z: flow(H, 1.0, 0.0, z)
    foliations = foliations if foliations is not None else {}
    rows, gaps = [], []
    for n in depths:
        sd = auto_side(n, alpha) if side == "auto" else side
        try:
            F = foliations.get((n, sd))
            if F is None:
                F = build(MappingTorus(n, H), alpha, sd, theta_count)
                foliations[(n, sd)] = F
            if not F.complete:
                gaps.append((n, f"foliation gaps at {len(F.gaps)} phases"))
                continue
            A = induced_disk_map(F, grid)
        except PartialFailure as exc:
            gaps.append((n, str(exc)))
            continue
        rows.append({
            "n": int(n),
            "frac_n_alpha": frac_mul(n, alpha),
            "d_c0": c0_distance(A.map, phi),
            "d_c0_inv": c0_distance(A.inverse, phi_inv),
            "periodicity_residual": verify_periodicity(A).residual,
            "area_defect": A.info["area_defect"],
        })
    return ConvergenceTable(tuple(rows), tuple(gaps))
