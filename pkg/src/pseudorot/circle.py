"""Circle maps: lifts, translation/rotation numbers, continued fractions.

Irrational parameters are carried as ``mpmath.mpf`` values built at
``WORK_DPS`` decimal digits, so that fractional parts ``{n alpha}`` stay
exact to far beyond double precision for every ``n`` used here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, NamedTuple

import mpmath
import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import PchipInterpolator

from .errors import ContractViolation, InvalidLiftError, RationalInputError

WORK_DPS = 60  # ~200 bits


# ---------------------------------------------------------------------------
# high precision helpers

def as_alpha(value) -> mpmath.mpf:
    """Coerce a literal, string, Fraction or surd descriptor to an mpf.

    Surds are given as ``{"surd": [a, b, c]}`` or ``{"surd": [a, b, c, d]}``
    meaning ``(a + b*sqrt(c)) / d`` (``d`` defaults to 1).
    """
    with mpmath.workdps(WORK_DPS):
        if isinstance(value, mpmath.mpf):
            return +value
        if isinstance(value, dict):
            if "surd" in value:
                parts = list(value["surd"])
                if len(parts) == 3:
                    parts.append(1)
                a, b, c, d = (mpmath.mpf(int(v)) for v in parts)
                return (a + b * mpmath.sqrt(c)) / d
            if "value" in value:
                return as_alpha(value["value"])
            raise ContractViolation(f"unrecognised alpha descriptor {value!r}")
        if isinstance(value, Fraction):
            return mpmath.mpf(value.numerator) / value.denominator
        if isinstance(value, str):
            if "/" in value:
                return as_alpha(Fraction(value))
            return mpmath.mpf(value)
        return mpmath.mpf(value)


def golden_mean() -> mpmath.mpf:
    return as_alpha({"surd": [-1, 1, 5, 2]})


def frac_mul(n: int, alpha) -> float:
    """{n*alpha} computed at working precision, returned as a float."""
    with mpmath.workdps(WORK_DPS):
        x = n * as_alpha(alpha)
        return float(x - mpmath.floor(x))


def floor_mul(n: int, alpha) -> int:
    with mpmath.workdps(WORK_DPS):
        return int(mpmath.floor(n * as_alpha(alpha)))


def ceil_mul(n: int, alpha) -> int:
    with mpmath.workdps(WORK_DPS):
        return int(mpmath.ceil(n * as_alpha(alpha)))


def nearest_integer_distance(n: int, alpha) -> float:
    f = frac_mul(n, alpha)
    return min(f, 1.0 - f)


# ---------------------------------------------------------------------------
# lifts

def _check_lift(fn: Callable[[np.ndarray], np.ndarray], samples: int = 512, tol: float = 1e-9) -> None:
    x = np.linspace(0.0, 1.0, samples, endpoint=False)
    fx = np.asarray(fn(x), dtype=float)
    period_gap = np.max(np.abs(np.asarray(fn(x + 1.0)) - fx - 1.0))
    if period_gap > tol:
        raise InvalidLiftError(f"lift is not degree one: f(x+1)-f(x)-1 reaches {period_gap:.3g}")
    ext = np.append(fx, fx[0] + 1.0)
    if np.any(np.diff(ext) <= 0):
        raise InvalidLiftError("lift is not strictly increasing on the sample grid")


@dataclass(frozen=True)
class CircleLift:
    """Monotone degree-one lift ``f: R -> R`` with ``f(x+1) = f(x) + 1``.

    Coordinates are in turns: ``x`` and ``x + 1`` are the same circle point.
    """

    eval: Callable[[np.ndarray], np.ndarray]
    degree_shift: int = 1
    samples: np.ndarray | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.degree_shift != 1:
            raise ContractViolation("only degree-one lifts are supported")
        _check_lift(self.eval)

    def __call__(self, x):
        return self.eval(x)

    @classmethod
    def translation(cls, beta: float) -> "CircleLift":
        beta = float(beta)
        return cls(lambda x: np.asarray(x, dtype=float) + beta)

    @classmethod
    def from_samples(cls, values) -> "CircleLift":
        """Monotone cubic (PCHIP) interpolant of ``f(j/N) = values[j]``."""
        values = np.asarray(values, dtype=float)
        N = values.size
        if N < 4:
            raise ContractViolation("need at least 4 samples")
        x = np.arange(N) / N
        xs = np.concatenate([x - 1.0, x, x + 1.0, [2.0]])
        fs = np.concatenate([values - 1.0, values, values + 1.0, [values[0] + 2.0]])
        if np.any(np.diff(fs) <= 0):
            raise InvalidLiftError("sampled lift is not strictly increasing")
        pchip = PchipInterpolator(xs, fs, extrapolate=False)

        def fn(arg):
            arg = np.asarray(arg, dtype=float)
            whole = np.floor(arg)
            return pchip(arg - whole) + whole

        return cls(fn, samples=values)

    @classmethod
    def from_circle_map(cls, angle_map: Callable[[np.ndarray], np.ndarray], N: int = 1024,
                        reference: float | None = None) -> "CircleLift":
        """Lift a circle map given in turns (values taken mod 1).

        The branch is fixed by ``f(0)`` lying in ``[reference, reference+1)``;
        the default picks ``f(0)`` in ``[-1/2, 1/2)``.
        """
        x = np.arange(N) / N
        y = np.asarray(angle_map(x), dtype=float)
        d = np.unwrap((y - x) * 2 * np.pi) / (2 * np.pi)
        lo = -0.5 if reference is None else reference
        d = d - np.floor(d[0] - lo)
        return cls.from_samples(x + d)


class TranslationEstimate(NamedTuple):
    value: float
    lower: float
    upper: float
    iterations: int

    def __float__(self):
        return self.value


def _orbit_endpoint(f: CircleLift, n: int, x0: float = 0.0) -> float:
    whole = math.floor(x0)
    r = x0 - whole
    for _ in range(n):
        y = float(f.eval(np.array([r]))[0])
        w = math.floor(y)
        whole += w
        r = y - w
    return whole + r


def translation_number(f: CircleLift, iterations: int = 1000, tol: float | None = None) -> TranslationEstimate:
    """(f^n(0) - 0)/n with the bracket [(f^n(0)-1)/n, (f^n(0)+1)/n]."""
    if not isinstance(f, CircleLift):
        f = CircleLift(f)
    if iterations < 1:
        raise ContractViolation("iterations must be >= 1")
    n = int(iterations)
    if tol is not None:
        n = max(n, int(math.ceil(1.0 / tol)))
    end = _orbit_endpoint(f, n)
    return TranslationEstimate(end / n, (end - 1.0) / n, (end + 1.0) / n, n)


def rotation_number(f: CircleLift, iterations: int = 1000, tol: float | None = None) -> float:
    est = translation_number(f, iterations, tol)
    r = est.value % 1.0
    return 0.0 if r == 1.0 else r


def circle_distance(a: float, b: float) -> float:
    d = (a - b) % 1.0
    return min(d, 1.0 - d)


def canonical_boundary_lift(H, grid_exp: int = 8, tol_boundary: float = 1e-9) -> CircleLift:
    """Lift of ``phi|dD`` obtained by following the isotopy generated by ``H``.

    The angular velocity on the unit circle is ``x*H_x + y*H_y`` (radians per
    unit time); its time integral is kept unreduced, so the translation number
    of the result is Rot(phi; H) in R.
    """
    N = 2 ** grid_exp
    x0 = np.arange(N) / N
    ts = np.linspace(0.0, 1.0, 65)
    ang = 2 * np.pi * np.linspace(0, 1, 128, endpoint=False)
    cx, cy = np.cos(ang), np.sin(ang)
    for t in ts:
        hx, hy = H.grad(t, cx, cy)
        radial = np.max(np.abs(cx * hy - cy * hx))
        if radial > tol_boundary:
            raise ContractViolation(f"H is not constant on the boundary (radial flow {radial:.3g} at t={t:.3f})")

    def rhs(t, u):
        c, s = np.cos(2 * np.pi * u), np.sin(2 * np.pi * u)
        hx, hy = H.grad(t, c, s)
        return (c * hx + s * hy) / (2 * np.pi)

    sol = solve_ivp(rhs, (0.0, 1.0), x0, method="DOP853", rtol=1e-12, atol=1e-13)
    if not sol.success:
        raise ContractViolation(f"boundary integration failed: {sol.message}")
    return CircleLift.from_samples(sol.y[:, -1])


# ---------------------------------------------------------------------------
# continued fractions

class Convergent(NamedTuple):
    p: int
    q: int
    frac_part: mpmath.mpf

    @property
    def frac(self) -> float:
        return float(self.frac_part)


@dataclass(frozen=True)
class ConvergentTable:
    alpha: mpmath.mpf
    entries: tuple
    truncated: bool = False

    @property
    def denominators(self) -> list[int]:
        return [e.q for e in self.entries]

    def small_fraction_denominators(self) -> list[int]:
        """Denominators with {q alpha} < 1/2, i.e. those with {q alpha} -> 0."""
        return [e.q for e in self.entries if e.frac_part < 0.5]


def convergents(alpha, depth: int) -> ConvergentTable:
    """Continued-fraction convergents p/q of ``alpha`` with their {q alpha}.

    A leading convergent is dropped when the next one has the same
    denominator (this happens when the first partial quotient is 1), so every
    entry is a best approximation of the second kind.
    """
    if depth < 1:
        raise ContractViolation("depth must be positive")
    with mpmath.workdps(WORK_DPS):
        a = as_alpha(alpha)
        eps = mpmath.mpf(10) ** (-(WORK_DPS - 10))
        x = a
        p_prev, q_prev = 1, 0
        quotient = int(mpmath.floor(x))
        p, q = quotient, 1
        raw = [(p, q)]
        truncated = False
        # one extra so the duplicate-denominator rule can look ahead
        while len(raw) < depth + 1:
            rem = x - quotient
            if abs(rem) < eps:
                if q * q < mpmath.mpf(10) ** (WORK_DPS // 2):
                    raise RationalInputError(f"alpha = {mpmath.nstr(a, 20)} is rational (p/q = {p}/{q})")
                truncated = True
                break
            x = 1 / rem
            quotient = int(mpmath.floor(x))
            p, p_prev = quotient * p + p_prev, p
            q, q_prev = quotient * q + q_prev, q
            raw.append((p, q))
            if q * q > mpmath.mpf(10) ** (WORK_DPS - 12):
                truncated = len(raw) < depth + 1
                break
        if not truncated and abs(x - quotient) < eps:
            raise RationalInputError(f"alpha = {mpmath.nstr(a, 20)} is rational (p/q = {p}/{q})")
        kept = [raw[i] for i in range(len(raw)) if not (i + 1 < len(raw) and raw[i + 1][1] == raw[i][1])]
        entries = []
        for p_i, q_i in kept[:depth]:
            v = q_i * a
            entries.append(Convergent(p_i, q_i, v - mpmath.floor(v)))
        if len(entries) < depth:
            truncated = True
        return ConvergentTable(a, tuple(entries), truncated)
