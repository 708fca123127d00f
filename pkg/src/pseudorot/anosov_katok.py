"""Conjugated rotations ``g^{-1} o R_{2 pi p/q} o g`` and AK-style sequences.

Conjugators are finite compositions of exactly invertible pieces:

* ``twist``: ``(r, theta) -> (r, theta + 2 pi a r^m)``, exactly area-preserving;
* ``sector``: time-one flow of ``K = (a/q) * b(|z|^2) * cos(q theta - phase)``
  with ``b(rho) = (1 - u^2)^4`` a C^3 bump supported in an annulus (``u`` the
  affine coordinate of rho across it); ``K`` is invariant under
  ``R_{2 pi/q}`` so the piece commutes with it.  The 1/q keeps the radial
  displacement independent of q.

Spec entries are dicts, e.g. ``{"type": "twist", "amplitude": 1.0, "power": 2}``
or ``{"type": "sector", "q": 5, "amplitude": 0.05}``.  Pieces apply in list
order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .circle import ConvergentTable
from .diskmap import PolarGrid, SampledDiskMap, c0_distance
from .errors import ConstructionError, ContractViolation, ResolutionError
from .hamiltonian import HamiltonianField, flow

MAX_TWIST = 4.0
MAX_SECTOR = 0.5
SECTOR_STEPS = 64


# ---------------------------------------------------------------------------
# pieces

@dataclass(frozen=True)
class Twist:
    amplitude: float = 1.0
    power: float = 2.0

    def __post_init__(self):
        if abs(self.amplitude) > MAX_TWIST:
            raise ContractViolation(f"twist amplitude must be at most {MAX_TWIST} in size")
        if self.power < 1.0:
            raise ContractViolation("twist power must be >= 1")

    def _w(self, z):
        return 2 * np.pi * self.amplitude * np.abs(z) ** self.power

    def forward(self, z):
        z = np.asarray(z, dtype=complex)
        return z * np.exp(1j * self._w(z))

    def inverse(self, z):
        z = np.asarray(z, dtype=complex)
        return z * np.exp(-1j * self._w(z))

    def to_config(self) -> dict:
        return {"type": "twist", "amplitude": float(self.amplitude), "power": float(self.power)}


@dataclass(frozen=True)
class PolyBump:
    """``(1 - u^2)^4`` in rho, supported in (r_in^2, r_out^2)."""

    r_in: float = 0.3
    r_out: float = 0.9

    def __post_init__(self):
        if not 0.0 < self.r_in < self.r_out < 1.0:
            raise ContractViolation("bump radii must satisfy 0 < r_in < r_out < 1")

    def __call__(self, rho, order: int = 0):
        a, b = self.r_in ** 2, self.r_out ** 2
        u = (2.0 * np.asarray(rho, dtype=float) - a - b) / (b - a)
        v = np.where(np.abs(u) < 1.0, 1.0 - u * u, 0.0)
        if order == 0:
            return v ** 4
        return -8.0 * u * v ** 3 * 2.0 / (b - a)


@dataclass(frozen=True)
class SectorHamiltonian(HamiltonianField):
    """Autonomous ``(a/q) * b(rho) * cos(q theta - phase)``."""

    q: int
    amplitude: float
    bump: PolyBump = PolyBump()
    phase: float = 0.0
    family = "sector"

    @property
    def _c(self) -> float:
        return self.amplitude / self.q

    def h(self, t, x, y):
        x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
        rho = x * x + y * y
        return self._c * self.bump(rho) * np.cos(self.q * np.arctan2(y, x) - self.phase)

    def grad(self, t, x, y):
        x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
        rho = x * x + y * y
        th = self.q * np.arctan2(y, x) - self.phase
        b, b1 = self.bump(rho), self.bump(rho, 1)
        safe = np.where(rho > 0, rho, 1.0)
        c, s = np.cos(th), np.sin(th)
        gx = self._c * (2 * x * b1 * c + b * s * self.q * y / safe)
        gy = self._c * (2 * y * b1 * c - b * s * self.q * x / safe)
        return gx, gy

    def to_config(self) -> dict:
        return {"type": "sector", "q": int(self.q), "amplitude": float(self.amplitude),
                "r_in": self.bump.r_in, "r_out": self.bump.r_out, "phase": float(self.phase)}


@dataclass(frozen=True)
class SectorBump:
    q: int
    amplitude: float = 0.05
    r_in: float = 0.3
    r_out: float = 0.9
    phase: float = 0.0
    steps: int = SECTOR_STEPS

    def __post_init__(self):
        if int(self.q) != self.q or self.q < 1:
            raise ContractViolation("sector symmetry q must be a positive integer")
        if abs(self.amplitude) > MAX_SECTOR:
            raise ContractViolation(f"sector amplitude must be at most {MAX_SECTOR} in size")

    @property
    def field(self) -> SectorHamiltonian:
        return SectorHamiltonian(int(self.q), float(self.amplitude), PolyBump(self.r_in, self.r_out), float(self.phase))

    def forward(self, z):
        return flow(self.field, 0.0, 1.0, z, self.steps, method="midpoint")

    def inverse(self, z):
        return flow(self.field, 1.0, 0.0, z, self.steps, method="midpoint")

    def to_config(self) -> dict:
        return self.field.to_config()


def _piece(entry) -> Twist | SectorBump:
    if isinstance(entry, (Twist, SectorBump)):
        return entry
    kind = entry.get("type")
    if kind == "twist":
        return Twist(float(entry.get("amplitude", 1.0)), float(entry.get("power", 2.0)))
    if kind == "sector":
        return SectorBump(int(entry["q"]), float(entry.get("amplitude", 0.05)), float(entry.get("r_in", 0.3)),
                          float(entry.get("r_out", 0.9)), float(entry.get("phase", 0.0)))
    raise ContractViolation(f"unknown conjugator piece {entry!r}")


@dataclass(frozen=True)
class Conjugator:
    """Exact evaluator for a composition of pieces (first piece applied first)."""

    pieces: tuple = ()

    def forward(self, z):
        z = np.asarray(z, dtype=complex)
        for p in self.pieces:
            z = p.forward(z)
        return z

    def inverse(self, z):
        z = np.asarray(z, dtype=complex)
        for p in reversed(self.pieces):
            z = p.inverse(z)
        return z

    def then(self, other: "Conjugator") -> "Conjugator":
        """``other o self``."""
        return Conjugator(self.pieces + other.pieces)

    @property
    def spec(self) -> list:
        return [p.to_config() for p in self.pieces]


@dataclass(frozen=True, eq=False)
class ConjugatorMap(SampledDiskMap):
    """Sampled conjugator that remembers its exact evaluator."""

    exact: Conjugator | None = None

    def forward(self, z):
        return self.exact.forward(z)

    def exact_inverse(self, grid: PolarGrid | None = None) -> SampledDiskMap:
        return SampledDiskMap.from_callable(self.exact.inverse, grid or self.grid, label=f"{self.label}^-1")


def make_conjugator(spec: Sequence = (), grid: PolarGrid | None = None) -> ConjugatorMap:
    """Sample the composition described by ``spec`` and check it is a valid
    orientation-preserving disk map fixing 0."""
    grid = grid or PolarGrid()
    exact = Conjugator(tuple(_piece(e) for e in spec))
    base = SampledDiskMap.from_callable(exact.forward, grid, label="g")
    g = ConjugatorMap(grid, base.values, base.interp_error, "g", exact=exact)
    _check_conjugator(g)
    return g


def _check_conjugator(g: SampledDiskMap, tol: float = 1e-6) -> None:
    inv = g.check_invariants(tol)
    if not (inv["in_disk"] and inv["boundary_to_boundary"]):
        raise ConstructionError(f"conjugator does not preserve the disk: {inv}")
    if not inv["orientation_preserving"]:
        raise ConstructionError(f"sampled conjugator is not injective (min Jacobian {inv['min_jacobian']:.3g})")
    if abs(g(np.array([0j]))[0]) > tol:
        raise ConstructionError("conjugator moves the origin")


# ---------------------------------------------------------------------------
# conjugated rotations

@dataclass(frozen=True, eq=False)
class ConjugatedRotation:
    p: int
    q: int
    conjugator: SampledDiskMap
    conjugator_inverse: SampledDiskMap
    map: SampledDiskMap
    checks: dict = field(default_factory=dict)

    def __call__(self, z):
        return self.map(z)

    def exact(self, z):
        """Evaluate through the exact conjugator when it is known."""
        ex = getattr(self.conjugator, "exact", None)
        if ex is None:
            return self.map(z)
        return ex.inverse(np.exp(2j * np.pi * self.p / self.q) * ex.forward(z))

    @property
    def rotation_number(self) -> float:
        return (self.p / self.q) % 1.0


def conjugated_rotation(p: int, q: int, g: SampledDiskMap | None = None, grid: PolarGrid | None = None,
                        periodicity_factor: float = 10.0) -> ConjugatedRotation:
    """Realize ``g^{-1} o R_{2 pi p/q} o g`` and check its invariants.

    Raises :class:`ResolutionError` when the sampled map misses
    q-periodicity by more than ``periodicity_factor`` times its measured
    interpolation error.
    """
    if q < 1 or math.gcd(int(p), int(q)) != 1:
        raise ContractViolation("need q >= 1 and gcd(p, q) = 1")
    g = g if g is not None else make_conjugator((), grid)
    grid = grid or g.grid
    rot = np.exp(2j * np.pi * p / q)
    exact = getattr(g, "exact", None)
    if exact is not None:
        g_inv = g.exact_inverse(grid)
        fn = lambda z: exact.inverse(rot * exact.forward(z))
    else:
        g_inv = g.inverse(grid)
        fn = lambda z: g_inv(rot * g(z))
    phi = SampledDiskMap.from_callable(fn, grid, label=f"g^-1 R({p}/{q}) g")
    nodes = grid.nodes
    roundtrip = float(np.max(np.abs(g_inv(g(nodes)) - nodes)))
    period = float(np.max(np.abs(phi.iterate_points(nodes, q) - nodes)))
    interp = max(phi.interp_error or 0.0, 1e-12)
    checks = {
        "origin": float(abs(g(np.array([0j]))[0])),
        "boundary_gap": float(np.max(np.abs(np.abs(g(nodes[-1])) - 1.0))),
        "roundtrip": roundtrip,
        "periodicity": period,
        "interp_error": interp,
    }
    if period > periodicity_factor * interp:
        raise ResolutionError(f"(phi)^{q} misses the identity by {period:.3g} "
                              f"(> {periodicity_factor:g} x interpolation error {interp:.3g}); refine the grid")
    return ConjugatedRotation(int(p), int(q), g, g_inv, phi, checks)


# ---------------------------------------------------------------------------
# sequences

def default_spread(k: int) -> list:
    """Sector bump with the symmetry of the k-th rotation and decaying amplitude."""
    return [{"type": "sector", "amplitude": 0.08 / (k + 1)}]


def zero_spread(k: int) -> list:
    return []


@dataclass(frozen=True, eq=False)
class AKSequence:
    maps: tuple
    distances: tuple  # C0 distance between consecutive maps
    truncated: bool = False
    reason: str = ""

    def __len__(self):
        return len(self.maps)

    def __iter__(self):
        return iter(self.maps)

    def __getitem__(self, i):
        return self.maps[i]


def ak_sequence(alpha_target: ConvergentTable, K: int, spread: Callable[[int], list] = default_spread,
                grid: PolarGrid | None = None) -> AKSequence:
    """phi_k = g_k^{-1} R_{2 pi p_k/q_k} g_k with g_1 = id and g_{k+1} = h_{k+1} applied after g_k.

    ``spread(k)`` lists the pieces of ``h_{k+1}``; sector pieces get the
    symmetry ``q_k`` so that ``h_{k+1}`` commutes with ``R_{2 pi p_k/q_k}``,
    which keeps phi_k = g_{k+1}^{-1} R_k g_{k+1}.
    """
    if K < 1:
        raise ContractViolation("K must be >= 1")
    entries = list(alpha_target.entries[:K])
    if len(entries) < K:
        raise ContractViolation(f"convergent table has only {len(entries)} entries")
    grid = grid or PolarGrid()
    conj = Conjugator()
    maps, dists = [], []
    for k, e in enumerate(entries):
        if k > 0:
            prev_q = entries[k - 1].q
            pieces = []
            for item in spread(k):
                item = dict(item)
                if item.get("type") == "sector":
                    item["q"] = prev_q * int(item.get("multiple", 1))
                    item.pop("multiple", None)
                pieces.append(_piece(item))
            conj = conj.then(Conjugator(tuple(pieces)))
        try:
            base = SampledDiskMap.from_callable(conj.forward, grid, label=f"g{k + 1}")
            g = ConjugatorMap(grid, base.values, base.interp_error, f"g{k + 1}", exact=conj)
            _check_conjugator(g)
            phi = conjugated_rotation(e.p, e.q, g, grid)
        except (ResolutionError, ConstructionError) as exc:
            return AKSequence(tuple(maps), tuple(dists), True, str(exc))
        if maps:
            dists.append(c0_distance(maps[-1].map, phi.map))
        maps.append(phi)
    return AKSequence(tuple(maps), tuple(dists))
