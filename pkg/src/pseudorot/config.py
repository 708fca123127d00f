"""Experiment configuration documents (JSON)."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .circle import as_alpha, convergents
from .errors import ContractViolation


def _pow2(v: int) -> bool:
    return isinstance(v, int) and v > 0 and (v & (v - 1)) == 0


@dataclass(frozen=True)
class SolverConfig:
    newton_tol: float = 1e-10
    tol_bc: float = 1e-12
    decay_tol: float = 1e-6
    calibrate_rtol: float = 5e-3
    Ns: int | None = None  # None: calibrated by energy refinement
    Nt: int = 128
    theta_count: int = 32
    grid_nr: int = 64
    grid_ntheta: int = 256
    steps_per_unit: int = 128
    iterations: int = 2000

    def validate(self) -> None:
        for name in ("newton_tol", "tol_bc", "decay_tol", "calibrate_rtol"):
            if not getattr(self, name) > 0:
                raise ContractViolation(f"solver.{name} must be positive")
        for name in ("Nt", "theta_count", "grid_ntheta", "steps_per_unit"):
            if not _pow2(getattr(self, name)):
                raise ContractViolation(f"solver.{name} must be a power of two")
        if self.Ns is not None and not _pow2(self.Ns):
            raise ContractViolation("solver.Ns must be a power of two or null")
        # radial nodes include both ends, so nr - 1 is the power of two
        if not (_pow2(self.grid_nr) or _pow2(self.grid_nr - 1)):
            raise ContractViolation("solver.grid_nr must be a power of two (or one more)")
        if self.iterations < 1:
            raise ContractViolation("solver.iterations must be positive")


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment: Hamiltonian family, alpha, depths and solver settings.

    ``alpha`` stays in the form given (number, "p/q" string, or
    ``{"surd": [a, b, c, d]}``) so that serialization is lossless.
    ``options`` holds per-command settings such as ``n``, ``side``,
    ``theta`` or ``max_period``.
    """

    hamiltonian: dict
    alpha: object = None
    depths: object = (1,)
    solver: SolverConfig = field(default_factory=SolverConfig)
    output_dir: str = "out"
    seed: int = 0
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if not isinstance(self.hamiltonian, dict) or "family" not in self.hamiltonian:
            raise ContractViolation("hamiltonian must be a descriptor with a 'family' field")
        if isinstance(self.depths, list):
            object.__setattr__(self, "depths", tuple(self.depths))
        self.solver.validate()
        if self.alpha is not None:
            as_alpha(self.alpha)
        self.resolved_depths()

    @property
    def alpha_value(self):
        a = self.alpha if self.alpha is not None else self.hamiltonian.get("alpha")
        if a is None:
            raise ContractViolation("alpha is required")
        return as_alpha(a)

    def hamiltonian_descriptor(self) -> dict:
        d = dict(self.hamiltonian)
        if self.alpha is not None:
            d.setdefault("alpha", self.alpha)
        return d

    def resolved_depths(self) -> list[int]:
        """Explicit list of n, expanding ``"convergents:K"``."""
        d = self.depths
        if isinstance(d, str):
            if not d.startswith("convergents:"):
                raise ContractViolation(f"depths must be a list or 'convergents:K', got {d!r}")
            K = int(d.split(":", 1)[1])
            if K < 1:
                raise ContractViolation("convergents:K needs K >= 1")
            return convergents(self.alpha_value, K).denominators
        out = [int(n) for n in d]
        if not out or any(n < 1 for n in out):
            raise ContractViolation("depths must be positive integers")
        return out

    def to_dict(self) -> dict:
        d = asdict(self)
        d["depths"] = list(self.depths) if not isinstance(self.depths, str) else self.depths
        return d

    def serialize(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ContractViolation("config document must be a JSON object")
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ContractViolation(f"unknown config fields {sorted(extra)}")
        d = dict(d)
        sv = d.pop("solver", None) or {}
        sknown = {f.name for f in fields(SolverConfig)}
        if set(sv) - sknown:
            raise ContractViolation(f"unknown solver fields {sorted(set(sv) - sknown)}")
        if "hamiltonian" not in d:
            raise ContractViolation("config needs a 'hamiltonian' descriptor")
        return cls(solver=SolverConfig(**sv), **d)

    @classmethod
    def parse(cls, text: str) -> "ExperimentConfig":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ContractViolation(f"config is not valid JSON: {exc}") from exc
        return cls.from_dict(doc)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        return cls.parse(Path(path).read_text())

    def config_hash(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()
