"""Half-cylinder solutions of the Floer equation on the mapping torus.

We solve ``z_s + i (z_t - X_H(t, z)) = 0`` on ``[0, s_max] x R/nZ`` with
``|z(0, t)| = 1``, a phase pin ``arg z(0, 0) = theta`` and a Robin far-field
condition ``z_s = lam z`` at ``s_max``, where ``lam = 2 pi (k/n - alpha)`` is
the decay rate of the rotation model.

Discretisation
--------------
The unknown is the co-rotating field ``w = z e^{-i w_k t}`` with
``w_k = 2 pi k / n``; the rotation model is then independent of ``t`` and the
t-direction is resolved exactly for it.  The equation for ``w`` is

    w_s + i w_t - w_k w - i Y(t, w) = 0,   Y(t, w) = e^{-i w_k t} X_H(t, e^{i w_k t} w),

imposed on every grid cell by the box scheme (averages ``A`` and differences
``D`` in each direction, second order, periodic in ``t``).  The s-grid is
sinh-stretched so cells are small near the boundary where the leaf is large,
with the spacing capped at ``2 / kappa``, ``kappa = 2 pi / n + |lam|``: the box
scheme is not L-stable, and on longer cells the fastest-decaying modes ring
instead of decaying, polluting the far field.
The Robin condition is imposed only on Fourier modes in ``t`` that do not
decay faster than the model; faster modes are free at ``s_max``.  Cell,
boundary, Robin and pin equations then form a square system, solved by
Newton's method with a sparse LU factorisation.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .circle import ceil_mul, floor_mul, frac_mul
from .errors import (CapacityError, ContinuationNeeded, ContinuationStalled, ContractViolation, ResolutionError,
                     TopologicalFailure)
from .hamiltonian import BlendedHamiltonian, HamiltonianField, MappingTorus, RotationHamiltonian

NEWTON_TOL = 1e-10
TOL_BC = 1e-12
DECAY_TOL = 1e-6
MIN_FRAC = 1e-3
SIDES = ("plus", "minus")


def parasitic_rate(n: int, lam: float) -> float:
    """Decay rate of the slowest mode that decays faster than the model."""
    return 2 * math.pi / n + abs(lam)


def s_grid(Ns: int, s_max: float, h_cap: float, stretch: float = 3.0) -> np.ndarray:
    """Nodes on [0, s_max] with spacing proportional to ``min(cosh(stretch*xi), C)``.

    ``C`` is infinite (a plain sinh grid) when that already keeps every cell at
    most ``h_cap``; otherwise the spacing is clipped at ``h_cap`` and the
    scale refitted so the grid still ends at ``s_max``.
    """
    b = stretch
    xi = np.linspace(0.0, 1.0, Ns)
    cells = Ns - 1
    if b <= 0:
        nodes = s_max * xi
        if s_max / cells > h_cap:
            raise ContractViolation(f"Ns={Ns} cannot resolve s_max={s_max:.4g} with spacing <= {h_cap:.3g}")
        return nodes
    nodes = s_max * np.sinh(b * xi) / math.sinh(b)
    if np.max(np.diff(nodes)) <= h_cap:
        return nodes
    if s_max / h_cap >= cells:
        raise ContractViolation(f"Ns={Ns} cannot resolve s_max={s_max:.4g} with spacing <= {h_cap:.3g}")

    def length(A):
        # cells * int_0^1 A min(cosh(b x), C) dx with A*C = h_cap
        C = h_cap / A
        xc = math.acosh(C) / b if C > 1 else 0.0
        if xc >= 1.0:
            return cells * A * math.sinh(b) / b
        return cells * (A * math.sinh(b * xc) / b + h_cap * (1.0 - xc))

    lo, hi = 1e-14 * h_cap, h_cap
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if length(mid) > s_max:
            hi = mid
        else:
            lo = mid
    A = 0.5 * (lo + hi)
    xc = math.acosh(h_cap / A) / b
    out = np.where(xi <= xc, A * np.sinh(b * xi) / b,
                   A * math.sinh(b * xc) / b + h_cap * (xi - xc)) * cells
    out[-1] = s_max
    return out


def auto_ns(s_max: float, h_cap: float, stretch: float = 3.0, h_fine: float | None = None) -> int:
    """Smallest power of two >= 64 whose grid respects the spacing cap and whose
    first cell is at most 1.5 ``h_fine`` (default: that of the 64-node sinh grid)."""
    if h_fine is None:
        h_fine = s_max * math.sinh(stretch / 63) / math.sinh(stretch)
    Ns = 64
    while Ns <= 4096:
        try:
            nodes = s_grid(Ns, s_max, h_cap, stretch)
        except ContractViolation:
            Ns *= 2
            continue
        if nodes[1] <= 1.5 * h_fine:
            return Ns
        Ns *= 2
    raise CapacityError("no affordable s-grid resolves this problem")


@dataclass(frozen=True)
class FloerProblem:
    torus: MappingTorus
    alpha: object
    side: str = "plus"
    Ns: int | None = None
    Nt: int = 256
    s_max: float | None = None
    stretch: float = 3.0
    decay_tol: float = DECAY_TOL

    def __post_init__(self):
        if self.side not in SIDES:
            raise ContractViolation(f"side must be one of {SIDES}")
        if self.Nt < 8 or self.Nt % 2:
            raise ContractViolation("Nt must be even and at least 8")
        if self.gap < MIN_FRAC:
            raise CapacityError(
                f"decay rate 2*pi*{self.gap:.3g}/n is too small to truncate honestly (needs gap >= {MIN_FRAC})")
        if self.s_max is None:
            object.__setattr__(self, "s_max", 1.2 * math.log(1.0 / self.decay_tol) / abs(self.lam))
        if self.s_max * abs(self.lam) < 4.0:
            raise ContractViolation("s_max must cover at least 4 e-folds of model decay")
        if self.Ns is None:
            object.__setattr__(self, "Ns", auto_ns(self.s_max, self.h_cap, self.stretch))
        if self.Ns < 8:
            raise ContractViolation("grid too small")
        s_grid(self.Ns, self.s_max, self.h_cap, self.stretch)

    @property
    def n(self) -> int:
        return self.torus.n

    @property
    def H(self) -> HamiltonianField:
        return self.torus.field

    @property
    def boundary_degree(self) -> int:
        if self.side == "plus":
            return floor_mul(self.n, self.alpha)
        return ceil_mul(self.n, self.alpha)

    @property
    def gap(self) -> float:
        """|k - n alpha|: {n alpha} on the plus side, 1 - {n alpha} on the minus side."""
        f = frac_mul(self.n, self.alpha)
        return f if self.side == "plus" else 1.0 - f

    @property
    def lam(self) -> float:
        """Model decay rate 2 pi (k/n - alpha) (negative on the plus side)."""
        g = 2 * math.pi * self.gap / self.n
        return -g if self.side == "plus" else g

    @property
    def omega_k(self) -> float:
        return 2 * math.pi * self.boundary_degree / self.n

    @property
    def s_sign(self) -> int:
        """+1 for half-cylinders on R+, -1 on R- (the minus family)."""
        return 1 if self.side == "plus" else -1

    @property
    def h_cap(self) -> float:
        return 2.0 / parasitic_rate(self.n, self.lam)

    @cached_property
    def s(self) -> np.ndarray:
        return self.s_sign * s_grid(self.Ns, self.s_max, self.h_cap, self.stretch)

    @cached_property
    def t(self) -> np.ndarray:
        return np.arange(self.Nt) * (self.n / self.Nt)

    @property
    def ht(self) -> float:
        return self.n / self.Nt

    @cached_property
    def ops(self) -> "_Ops":
        return _Ops(self)

    def with_field(self, H: HamiltonianField) -> "FloerProblem":
        return replace(self, torus=MappingTorus(self.n, H))

    def refined(self) -> "FloerProblem":
        """Grid with half the spacing in both directions."""
        return replace(self, Ns=2 * (self.Ns - 1) + 1, Nt=2 * self.Nt)

    def with_ns(self, Ns: int) -> "FloerProblem":
        return replace(self, Ns=Ns)


class _Ops:
    """Sparse box-scheme operators on cells; cell (i, j) spans [s_i, s_i+1] x [t_j, t_j+1]."""

    def __init__(self, P: FloerProblem):
        Ns, Nt = P.Ns, P.Nt
        hs = np.diff(P.s)
        i = np.arange(Ns - 1)
        half = np.full(Ns - 1, 0.5)
        As = sp.csr_matrix((np.r_[half, half], (np.r_[i, i], np.r_[i, i + 1])), shape=(Ns - 1, Ns))
        Ds = sp.csr_matrix((np.r_[-1 / hs, 1 / hs], (np.r_[i, i], np.r_[i, i + 1])), shape=(Ns - 1, Ns))
        j = np.arange(Nt)
        halft = np.full(Nt, 0.5)
        At = sp.csr_matrix((np.r_[halft, halft], (np.r_[j, j], np.r_[j, (j + 1) % Nt])), shape=(Nt, Nt))
        Dt = sp.csr_matrix((np.r_[-halft * 2 / P.ht, halft * 2 / P.ht], (np.r_[j, j], np.r_[j, (j + 1) % Nt])),
                           shape=(Nt, Nt))
        self.hs = hs
        self.avg = sp.kron(As, At).tocsr()
        self.ds = sp.kron(Ds, At).tocsr()
        self.dt = sp.kron(As, Dt).tocsr()
        self.t_cell = P.t + 0.5 * P.ht
        self.s_cell = 0.5 * (P.s[1:] + P.s[:-1])
        self.row_scale = np.repeat(np.abs(hs), Nt)
        # Robin condition on the last cell, imposed on the Fourier modes that do
        # not decay faster than the model (m >= 0 on the plus side, m <= 0 on
        # the minus side); faster modes are left free.  In the linear far
        # field the m = 0 row repeats the last cell equation, so the Newton
        # system omits it and only reports it; the t-Nyquist mode (a box-scheme
        # checkerboard that nothing else sees) gets the one row the boundary
        # condition leaves open.  The system is then square.
        h = hs[-1]
        self.robin_c1 = 1.0 / h - 0.5 * P.lam
        self.robin_c0 = -1.0 / h - 0.5 * P.lam
        self.robin_scale = abs(h)
        sgn = 1 if P.side == "plus" else -1
        self.robin_modes = (sgn * np.arange(Nt // 2 + 1)) % Nt
        jj = np.arange(Nt)
        inner = self.robin_modes[1:-1]
        four = np.exp(-2j * np.pi * np.outer(inner, jj) / Nt) / Nt
        Fr, Fi = four.real, four.imag
        Z = sp.csr_matrix((inner.size, (Ns - 2) * Nt))
        blk_r = sp.hstack([Z, sp.csr_matrix(np.hstack([self.robin_c0 * Fr, self.robin_c1 * Fr]))])
        blk_i = sp.hstack([Z, sp.csr_matrix(np.hstack([self.robin_c0 * Fi, self.robin_c1 * Fi]))])
        # rows: Re r_hat, Im r_hat; columns: (w1, w2)
        self.robin = (sp.bmat([[blk_r, -blk_i], [blk_i, blk_r]]) * self.robin_scale).tocsr()
        self.robin.eliminate_zeros()
        nyq = ((-1.0) ** jj) / Nt
        self.nyquist = sp.hstack([sp.csr_matrix((1, (Ns - 2) * Nt)),
                                  sp.csr_matrix(np.hstack([self.robin_c0 * nyq, self.robin_c1 * nyq])[None, :])]).tocsr()
        self.nyquist = self.nyquist * self.robin_scale

    def robin_residual(self, w_flat: np.ndarray, Nt: int) -> np.ndarray:
        """Robin residual of every imposed mode, m = 0 and Nyquist included."""
        r = self.robin_c1 * w_flat[-Nt:] + self.robin_c0 * w_flat[-2 * Nt:-Nt]
        return np.fft.fft(r)[self.robin_modes] / Nt


# ---------------------------------------------------------------------------
# leaf container

@dataclass(frozen=True, eq=False)
class LeafSolution:
    z: np.ndarray
    s: np.ndarray
    t: np.ndarray
    theta: float
    n: int
    boundary_degree: int
    side: str
    residual_norm: float
    e_omega: float
    e_lambda: float
    a0: float = 0.0
    tau0: float = 0.0
    iterations: int = 0
    sigma: float = 1.0
    history: tuple = ()

    @property
    def boundary_loop(self) -> np.ndarray:
        return self.z[0]

    def winding(self, row: int = 0) -> int:
        return loop_winding(self.z[row])

    def to_csv(self, path) -> None:
        S, T = np.meshgrid(self.s, self.t, indexing="ij")
        with open(path, "w") as fh:
            fh.write("s,t,re_z,im_z\n")
            for a, b, c, d in zip(S.ravel(), T.ravel(), self.z.real.ravel(), self.z.imag.ravel()):
                fh.write(f"{a:.17g},{b:.17g},{c:.17g},{d:.17g}\n")

    def metadata(self) -> dict:
        return {
            "theta": float(self.theta), "n": int(self.n), "boundary_degree": int(self.boundary_degree),
            "side": self.side, "e_omega": float(self.e_omega), "e_lambda": float(self.e_lambda),
            "residual_norm": float(self.residual_norm), "a0": self.a0, "tau0": self.tau0,
            "iterations": int(self.iterations), "grid": [len(self.s), len(self.t)],
        }

    def dump(self, csv_path, json_path, extra: dict | None = None) -> None:
        self.to_csv(csv_path)
        meta = self.metadata()
        if extra:
            meta.update(extra)
        with open(json_path, "w") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)


def loop_winding(loop: np.ndarray) -> int:
    """Winding number about 0 of a closed sampled loop."""
    loop = np.asarray(loop, dtype=complex)
    ratio = np.roll(loop, -1) / loop
    return int(round(np.sum(np.angle(ratio)) / (2 * np.pi)))


# ---------------------------------------------------------------------------
# residuals and energies

def _corotating(P: FloerProblem, z: np.ndarray) -> np.ndarray:
    return z * np.exp(-1j * P.omega_k * P.t)[None, :]


def _Y_and_jac(P: FloerProblem, H: HamiltonianField, w_cell: np.ndarray, with_jac: bool = True):
    """Y = e^{-i w_k t} X_H(t, e^{i w_k t} w) at cell centres and its real 2x2 Jacobian in w."""
    tc = np.broadcast_to(P.ops.t_cell[None, :], (P.Ns - 1, P.Nt)).ravel()
    ph = np.exp(1j * P.omega_k * tc)
    zc = ph * w_cell
    hx, hy = H.grad(tc, zc.real, zc.imag)
    Y = np.conj(ph) * (-hy + 1j * hx)
    if not with_jac:
        return Y, None
    hxx, hxy, hyy = H.hess(tc, zc.real, zc.imag)
    # DX = [[-hxy, -hyy], [hxx, hxy]];  M = R(-phi) DX R(phi)
    c, s = ph.real, ph.imag
    a11, a12, a21, a22 = -hxy, -hyy, hxx, hxy
    # DX R(phi)
    b11 = a11 * c + a12 * s
    b12 = -a11 * s + a12 * c
    b21 = a21 * c + a22 * s
    b22 = -a21 * s + a22 * c
    m11 = c * b11 + s * b21
    m12 = c * b12 + s * b22
    m21 = -s * b11 + c * b21
    m22 = -s * b12 + c * b22
    return Y, (m11, m12, m21, m22)


def _cell_residual_w(P: FloerProblem, H: HamiltonianField, w: np.ndarray) -> np.ndarray:
    o = P.ops
    wf = w.ravel()
    Aw = o.avg @ wf
    Y, _ = _Y_and_jac(P, H, Aw, with_jac=False)
    G = o.ds @ wf + 1j * (o.dt @ wf) - P.omega_k * Aw - 1j * Y
    return G.reshape(P.Ns - 1, P.Nt)


def floer_residual(P: FloerProblem, z: np.ndarray) -> np.ndarray:
    """Cell-centred box-scheme value of ``z_s + i (z_t - X_H(t, z))``.

    Returned on the ``(N_s - 1) x N_t`` cells; each entry is the co-rotating
    residual rotated back to the z-frame.
    """
    z = np.asarray(z, dtype=complex)
    if z.shape != (P.Ns, P.Nt):
        raise ContractViolation(f"grid shape {z.shape} does not match problem {(P.Ns, P.Nt)}")
    G = _cell_residual_w(P, P.H, _corotating(P, z))
    return G * np.exp(1j * P.omega_k * P.ops.t_cell)[None, :]


def _system(P: FloerProblem, H: HamiltonianField, u: np.ndarray, theta: float, with_jac: bool = True):
    """Square Newton system: cell, boundary, Robin (modes strictly between 0 and
    Nyquist, plus one Nyquist row) and pin equations."""
    o = P.ops
    N = P.Ns * P.Nt
    w = u[:N] + 1j * u[N:]
    Aw = o.avg @ w
    Y, M = _Y_and_jac(P, H, Aw, with_jac)
    G = o.ds @ w + 1j * (o.dt @ w) - P.omega_k * Aw - 1j * Y
    G = o.row_scale * G
    w0 = w[:P.Nt]
    bc = np.abs(w0) ** 2 - 1.0
    rhat = o.robin_scale * o.robin_residual(w, P.Nt)
    inner = rhat[1:-1]
    ct, st = math.cos(theta), math.sin(theta)
    nyq = ct * rhat[-1].imag - st * rhat[-1].real
    pin = ct * w0[0].imag - st * w0[0].real
    F = np.concatenate([G.real, G.imag, bc, inner.real, inner.imag, [nyq, pin]])
    if not with_jac:
        return F, rhat
    m11, m12, m21, m22 = M
    base = o.ds - P.omega_k * o.avg
    J11 = base + sp.diags(m21) @ o.avg
    J12 = -o.dt + sp.diags(m22) @ o.avg
    J21 = o.dt - sp.diags(m11) @ o.avg
    J22 = base - sp.diags(m12) @ o.avg
    Dg = sp.diags(o.row_scale)
    top = sp.bmat([[Dg @ J11, Dg @ J12], [Dg @ J21, Dg @ J22]])
    jb = np.arange(P.Nt)
    Bc = sp.csr_matrix((np.r_[2 * w0.real, 2 * w0.imag], (np.r_[jb, jb], np.r_[jb, N + jb])), shape=(P.Nt, 2 * N))
    Nyq = sp.hstack([-st * o.nyquist, ct * o.nyquist])
    Pin = sp.csr_matrix(([-st, ct], ([0, 0], [0, N])), shape=(1, 2 * N))
    J = sp.vstack([top, Bc, o.robin, Nyq, Pin]).tocsc()
    return F, J


def _residual_norm(P: FloerProblem, F: np.ndarray, w: np.ndarray | None = None) -> float:
    """Max of the unscaled cell, boundary and imposed Robin residuals, plus the
    m = 0 Robin residual the cell equations imply."""
    o = P.ops
    C = (P.Ns - 1) * P.Nt
    scale = np.concatenate([o.row_scale, o.row_scale])
    cell = np.abs(F[:2 * C]) / scale
    bc = np.abs(F[2 * C:2 * C + P.Nt])
    out = max(cell.max(initial=0.0), bc.max(initial=0.0), abs(F[-1]), abs(F[-2]) / o.robin_scale)
    if w is not None:
        # the Nyquist mode enters only through its imposed row
        out = max(out, float(np.abs(o.robin_residual(w.ravel(), P.Nt)[:-1]).max()))
    else:
        out = max(out, float(np.abs(F[2 * C + P.Nt:-1]).max(initial=0.0)) / o.robin_scale)
    return float(out)


def omega_energy(L: LeafSolution | np.ndarray, P: FloerProblem) -> float:
    """Midpoint quadrature of 1/2 (|z_s|^2 + |z_t - X_H|^2) plus the Robin tail."""
    z = L.z if isinstance(L, LeafSolution) else np.asarray(L, dtype=complex)
    o = P.ops
    w = _corotating(P, z).ravel()
    Aw = o.avg @ w
    Y, _ = _Y_and_jac(P, P.H, Aw, with_jac=False)
    ws = o.ds @ w
    wt = o.dt @ w + 1j * P.omega_k * Aw - Y
    dens = 0.5 * (np.abs(ws) ** 2 + np.abs(wt) ** 2)
    bulk = float(np.sum(dens * o.row_scale) * P.ht)
    tail = 0.5 * abs(P.lam) * float(np.sum(np.abs(z[-1]) ** 2) * P.ht)
    return bulk + tail


def lambda_energy(L: LeafSolution, P: FloerProblem | None = None) -> float:
    """E_lambda of a leaf of the form u(s, t) = (s + a0, t + tau0, z): exactly n."""
    return float(L.n)


def lambda_energy_quadrature(L: LeafSolution, psi: Callable | None = None) -> float:
    """int psi(a) da ^ dtau over the truncated leaf for one fixed psi.

    The default psi is a bump of unit integral inside the s-range; since
    ``a_s tau_t - a_t tau_s = 1`` the value is ``n * int psi``, at most ``n``.
    """
    s = np.asarray(L.s)
    lo, hi = (s.min(), s.max())
    if psi is None:
        c, w = 0.5 * (lo + hi), 0.4 * (hi - lo)

        def raw(x):
            u = (x - c) / w
            inside = np.abs(u) < 1
            return np.where(inside, np.exp(-1.0 / np.where(inside, 1 - u * u, 1.0)), 0.0)

        fine = np.linspace(lo, hi, 20001)
        norm = np.trapezoid(raw(fine), fine)
        psi = lambda x: raw(x) / norm  # noqa: E731
    fine = np.linspace(lo, hi, 20001)
    return float(L.n * np.trapezoid(psi(fine + L.a0), fine))


def cr4_residual(L: LeafSolution, P: FloerProblem, da: np.ndarray | None = None,
                 dtau: np.ndarray | None = None) -> float:
    """Max norm of the full Cauchy-Riemann residual of u = (a, tau, z).

    ``a = s + a0 + da`` and ``tau = t + tau0 + dtau`` with optional periodic
    perturbations ``da``, ``dtau`` on the node grid.  The residual has the
    components ``a_s - tau_t``, ``a_t + tau_s`` and
    ``a_t X_H(tau, z) + z_s + i (z_t - tau_t X_H(tau, z))``.
    """
    o = P.ops
    shape = (P.Ns, P.Nt)
    da = np.zeros(shape) if da is None else np.asarray(da, dtype=float)
    dtau = np.zeros(shape) if dtau is None else np.asarray(dtau, dtype=float)
    a_s = 1.0 + o.ds @ da.ravel()
    a_t = o.dt @ da.ravel()
    tau_s = o.ds @ dtau.ravel()
    tau_t = 1.0 + o.dt @ dtau.ravel()
    tc = np.broadcast_to(o.t_cell[None, :], (P.Ns - 1, P.Nt)).ravel()
    tau_c = tc + L.tau0 + o.avg @ dtau.ravel()
    w = _corotating(P, L.z).ravel()
    Aw = o.avg @ w
    ph = np.exp(1j * P.omega_k * tc)
    zc = ph * Aw
    hx, hy = P.H.grad(tau_c, zc.real, zc.imag)
    Y = np.conj(ph) * (-hy + 1j * hx)
    zpart = a_t * Y + o.ds @ w + 1j * (o.dt @ w + 1j * P.omega_k * Aw - tau_t * Y)
    comps = np.concatenate([np.abs(a_s - tau_t), np.abs(a_t + tau_s), np.abs(zpart)])
    return float(comps.max())


# ---------------------------------------------------------------------------
# model leaves

def model_leaf(alpha, n: int, z0: complex = 1.0 + 0j, grid: tuple[int, int] = (64, 256), side: str = "plus",
               C: float = 0.0, problem: FloerProblem | None = None) -> LeafSolution:
    """Closed-form leaf ``z0 exp(lam s) exp(2 pi i (k/n) t)`` of the rotation model."""
    if n < 1:
        raise ContractViolation("n must be positive")
    if problem is None:
        problem = FloerProblem(MappingTorus(n, RotationHamiltonian(alpha, C)), alpha, side, grid[0], grid[1])
    P = problem
    z = z0 * np.exp(P.lam * P.s)[:, None] * np.exp(1j * P.omega_k * P.t)[None, :]
    e_omega = math.pi * P.gap * abs(z0) ** 2
    theta = float(np.mod(np.angle(z0), 2 * np.pi))
    return LeafSolution(z, P.s.copy(), P.t.copy(), theta, P.n, P.boundary_degree, P.side,
                        residual_norm=float(np.max(np.abs(floer_residual(P, z)))), e_omega=e_omega,
                        e_lambda=float(P.n))


def model_grid(P: FloerProblem, theta: float) -> np.ndarray:
    return np.exp(1j * theta) * np.exp(P.lam * P.s)[:, None] * np.exp(1j * P.omega_k * P.t)[None, :]


# ---------------------------------------------------------------------------
# Newton

@dataclass(frozen=True)
class NewtonOptions:
    newton_tol: float = NEWTON_TOL
    tol_bc: float = TOL_BC
    max_iter: int = 15
    step_tol: float = 1e-13
    disk_tol: float = 1e-6

    def __post_init__(self):
        for name in ("newton_tol", "tol_bc", "step_tol", "disk_tol"):
            if getattr(self, name) <= 0:
                raise ContractViolation(f"{name} must be positive")


def _newton(P: FloerProblem, H: HamiltonianField, w: np.ndarray, theta: float, opts: NewtonOptions):
    N = P.Ns * P.Nt
    u = np.concatenate([w.real.ravel(), w.imag.ravel()])
    k = P.boundary_degree
    history = []
    F, J = _system(P, H, u, theta)
    res = _residual_norm(P, F, w)
    history.append(res)
    it = 0
    while res > opts.newton_tol and it < opts.max_iter:
        try:
            lu = spla.splu(J, permc_spec="COLAMD")
        except RuntimeError as exc:
            raise ContinuationNeeded(f"singular Newton system: {exc}") from exc
        du = lu.solve(-F)
        if not np.all(np.isfinite(du)):
            raise ContinuationNeeded("non-finite Newton step")
        u = u + du
        it += 1
        w_new = (u[:N] + 1j * u[N:]).reshape(P.Ns, P.Nt)
        if loop_winding(w_new[0]) != 0:
            raise TopologicalFailure(f"boundary winding left {k} during Newton iteration {it}")
        F, J = _system(P, H, u, theta)
        res = _residual_norm(P, F, w_new)
        history.append(res)
        if not np.isfinite(res) or (it >= 3 and res > 10 * history[0]):
            raise ContinuationNeeded(f"Newton diverging (residual {res:.3g} after {it} iterations)")
        if np.max(np.abs(du)) < opts.step_tol and res > opts.newton_tol:
            break
    if res > opts.newton_tol:
        raise ContinuationNeeded(f"Newton stalled at residual {res:.3g} after {it} iterations")
    w = (u[:N] + 1j * u[N:]).reshape(P.Ns, P.Nt)
    return w, res, it, tuple(history)


def _finish(P: FloerProblem, H: HamiltonianField, w: np.ndarray, theta: float, res: float, it: int,
            history: tuple, sigma: float, opts: NewtonOptions) -> LeafSolution:
    z = w * np.exp(1j * P.omega_k * P.t)[None, :]
    bc_err = float(np.max(np.abs(np.abs(z[0]) - 1.0)))
    if bc_err > max(opts.tol_bc, 10 * opts.newton_tol):
        raise ContinuationNeeded(f"boundary condition violated by {bc_err:.3g}")
    if loop_winding(z[0]) != P.boundary_degree:
        raise TopologicalFailure("boundary winding differs from boundary degree")
    if np.max(np.abs(z)) > 1.0 + opts.disk_tol:
        raise TopologicalFailure(f"leaf leaves the disk (max |z| = {np.max(np.abs(z)):.6g})")
    if np.max(np.abs(z[-1])) > P.decay_tol:
        raise TopologicalFailure(f"leaf does not decay (|z(s_max)| = {np.max(np.abs(z[-1])):.3g})")
    Pe = P.with_field(H) if H is not P.H else P
    e = omega_energy(z, Pe)
    return LeafSolution(z, P.s.copy(), P.t.copy(), float(theta), P.n, P.boundary_degree, P.side, res, e,
                        float(P.n), iterations=it, sigma=sigma, history=history)


def solve_leaf(P: FloerProblem, theta: float, init: LeafSolution | np.ndarray | None = None,
               opts: NewtonOptions | None = None) -> LeafSolution:
    """Newton solve of the leaf with boundary phase ``theta`` from ``init``."""
    opts = opts or NewtonOptions()
    z_init = model_grid(P, theta) if init is None else (init.z if isinstance(init, LeafSolution) else init)
    z_init = np.asarray(z_init, dtype=complex)
    if z_init.shape != (P.Ns, P.Nt):
        raise ContractViolation("initial guess does not match the problem grid")
    if loop_winding(z_init[0]) != P.boundary_degree:
        raise ContractViolation("initial guess has the wrong boundary winding")
    w, res, it, hist = _newton(P, P.H, _corotating(P, z_init), theta, opts)
    return _finish(P, P.H, w, theta, res, it, hist, 1.0, opts)


# ---------------------------------------------------------------------------
# continuation

def linear_schedule(sigma: float) -> float:
    return sigma


@dataclass(frozen=True)
class ContinuationOptions:
    initial_step: float = 0.5
    min_step: float = 1.0 / 1024
    max_steps: int = 200
    growth: float = 1.5
    schedule: Callable[[float], float] = linear_schedule


def homotopy(P: FloerProblem, start: HamiltonianField | None = None,
             schedule: Callable[[float], float] = linear_schedule) -> Callable[[float], HamiltonianField]:
    """sigma -> chi(sigma) H + (1 - chi(sigma)) H_model."""
    start = start or RotationHamiltonian(P.alpha, _boundary_constant(P.H, P.alpha))
    target = P.H

    def family(sigma: float) -> HamiltonianField:
        w = float(schedule(sigma))
        if w == 0.0:
            return start
        if w == 1.0:
            return target
        return BlendedHamiltonian(start, target, w)

    return family


def _boundary_constant(H: HamiltonianField, alpha) -> float:
    hb = float(np.mean(H.value(0.0, np.exp(2j * np.pi * np.arange(16) / 16))))
    return hb - math.pi * float(alpha)


def continue_leaf(P: FloerProblem, theta: float, family: Callable[[float], HamiltonianField] | None = None,
                  opts: NewtonOptions | None = None, copts: ContinuationOptions | None = None) -> LeafSolution:
    """Predictor-corrector continuation in sigma from the rotation model to ``P.H``.

    Each accepted step is a converged leaf passing every validity check; a
    failed corrector halves the step.  Raises :class:`ContinuationStalled`
    carrying the last accepted sigma when the step underflows.
    """
    opts = opts or NewtonOptions()
    copts = copts or ContinuationOptions()
    family = family or homotopy(P, schedule=copts.schedule)
    H0 = family(0.0)
    w0, res, it, hist = _newton(P, H0, _corotating(P, model_grid(P, theta)), theta, opts)
    path = [(0.0, w0)]
    sigma, step = 0.0, copts.initial_step
    steps = 0
    total_it = it
    last_err = None
    while sigma < 1.0:
        if steps >= copts.max_steps:
            raise ContinuationStalled(f"step budget exhausted at sigma={sigma:.6g}", sigma=sigma,
                                      last_good=_wrap(P, path[-1][1], theta, sigma, family, opts))
        steps += 1
        target = min(1.0, sigma + step)
        if len(path) >= 2:
            (s0, a), (s1, b) = path[-2], path[-1]
            guess = b + (target - s1) / (s1 - s0) * (b - a)
        else:
            guess = path[-1][1]
        H = family(target)
        try:
            w, res, it, hist = _newton(P, H, guess, theta, opts)
            _finish(P, H, w, theta, res, it, hist, target, opts)
        except (ContinuationNeeded, TopologicalFailure) as exc:
            last_err = exc
            step *= 0.5
            if step < copts.min_step:
                raise ContinuationStalled(
                    f"continuation stalled at sigma={sigma:.6g} (step {step:.3g}): {exc}", sigma=sigma,
                    last_good=_wrap(P, path[-1][1], theta, sigma, family, opts)) from exc
            continue
        total_it += it
        path.append((target, w))
        sigma = target
        if it <= 4:
            step = min(1.0, step * copts.growth)
    H1 = family(1.0)
    leaf = _finish(P, H1, path[-1][1], theta, res, total_it, hist, 1.0, opts)
    return replace(leaf, history=tuple(s for s, _ in path))


def _wrap(P, w, theta, sigma, family, opts):
    try:
        F, _ = _system(P, family(sigma), np.concatenate([w.real.ravel(), w.imag.ravel()]), theta, with_jac=False)
        return _finish(P, family(sigma), w, theta, _residual_norm(P, F, w), 0, (), sigma, opts)
    except (ContinuationNeeded, TopologicalFailure):
        return None


@dataclass(frozen=True)
class Calibration:
    problem: FloerProblem
    leaf: LeafSolution
    energies: tuple  # (Ns, e_omega) per level tried

    @property
    def relative_change(self) -> float:
        (_, a), (_, b) = self.energies[-2:]
        return abs(a - b) / abs(b)


def calibrate_resolution(P: FloerProblem, theta: float = 0.0, rtol: float = 5e-3, max_ns: int = 1024,
                         opts: NewtonOptions | None = None,
                         copts: ContinuationOptions | None = None) -> Calibration:
    """Double ``Ns`` until consecutive leaf energies agree to ``rtol``.

    The finer of the last two grids is returned; with second-order
    convergence its own energy error is about a third of the final change.
    """
    levels = []
    prev = None
    Ns = P.Ns
    while Ns <= max_ns:
        Q = P.with_ns(Ns)
        try:
            leaf = continue_leaf(Q, theta, opts=opts, copts=copts)
        except ContinuationStalled:
            if Ns * 2 > max_ns:
                raise
            prev = None
            Ns *= 2
            continue
        levels.append((Ns, leaf.e_omega))
        if prev is not None and abs(prev - leaf.e_omega) <= rtol * abs(leaf.e_omega):
            return Calibration(Q, leaf, tuple(levels))
        prev = leaf.e_omega
        Ns *= 2
    raise ResolutionError(f"leaf energy not settled to {rtol:g} by Ns={max_ns}: {levels}")
