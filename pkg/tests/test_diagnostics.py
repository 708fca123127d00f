import math
from functools import partial

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pseudorot.circle import ceil_mul, floor_mul, frac_mul
from pseudorot.diagnostics import (CSV_HEADER, ActionFunctional, action_sandwich, auto_side, convergence_experiment,
                                   gamma1_action_identity, rotation_distance, stokes_check, verify_action_scaling)
from pseudorot.errors import OpenLoopError, RationalInputError
from pseudorot.floer import FloerProblem, continue_leaf, model_leaf, solve_leaf
from pseudorot.foliation import build_foliation
from pseudorot.hamiltonian import MappingTorus, PerturbedRotation, RotationHamiltonian


class TestAction:
    @given(st.integers(1, 6), st.floats(0.05, 3.0), st.floats(-2.0, 2.0))
    def test_rotation_loops(self, n, a, C):
        AF = ActionFunctional(n, RotationHamiltonian(a, C))
        assert AF.gamma(256) == pytest.approx(-n * C, abs=1e-9)
        for k in (-1, 0, 2):
            assert AF.boundary_loop(k, N=256) == pytest.approx(k * math.pi - n * (math.pi * a + C), abs=1e-9)
        assert AF.fibre_circle(N=256) == pytest.approx(math.pi, rel=1e-12)

    def test_fibre_circle_orientation(self):
        AF = ActionFunctional(1, RotationHamiltonian(0.3))
        z = np.exp(-2j * np.pi * np.arange(129) / 128)
        assert AF.action(z, tau=0.0) == pytest.approx(-math.pi)

    def test_open_loop(self):
        AF = ActionFunctional(1, RotationHamiltonian(0.3))
        with pytest.raises(OpenLoopError):
            AF.action(np.exp(1j * np.linspace(0, 6, 50)))

    @pytest.mark.parametrize("n", [1, 2, 5])
    def test_scaling(self, n):
        for rep in verify_action_scaling(PerturbedRotation(0.618, 0.05, 2), n):
            assert rep.passed, rep

    @pytest.mark.parametrize("H,alpha", [(RotationHamiltonian(0.3, 0.7), 0.3),
                                         (PerturbedRotation(0.618, 0.05), 0.618),
                                         (RotationHamiltonian(1.25), 1.25)])
    def test_gamma1(self, H, alpha):
        assert gamma1_action_identity(H, alpha).passed
        # alpha from the boundary lift when not given
        rep = gamma1_action_identity(H)
        assert rep.details["alpha"] == pytest.approx(alpha, abs=1e-3)


class TestStokes:
    @pytest.mark.parametrize("n,side", [(1, "plus"), (2, "plus"), (3, "minus"), (1, "minus")])
    def test_rotation_model(self, n, side):
        P = FloerProblem(MappingTorus(n, RotationHamiltonian(0.6, 0.2)), 0.6, side, 64, 128)
        L = solve_leaf(P, 0.4)
        rep = stokes_check(L, P)
        assert rep.passed and rep.deviations["stokes_formula"] < 1e-9

    def test_perturbed_leaf(self):
        P = FloerProblem(MappingTorus(1, PerturbedRotation(0.618, 0.05)), 0.618, "plus", 64, 128)
        rep = stokes_check(continue_leaf(P, 0.0), P)
        assert rep.passed, rep.deviations

    def test_model_leaf_quadrature(self):
        L = model_leaf(0.6, 2, grid=(64, 128))
        P = FloerProblem(MappingTorus(2, RotationHamiltonian(0.6)), 0.6, "plus", 64, 128)
        assert stokes_check(L, P).deviations["quad_formula"] < 1e-12


class TestSandwich:
    @given(st.integers(1, 8), st.floats(0.05, 2.95), st.floats(-1.0, 1.0))
    def test_rotation_slacks(self, n, a, C):
        f = frac_mul(n, a)
        if f < 1e-6 or f > 1 - 1e-6:
            return
        rep = action_sandwich(RotationHamiltonian(a, C), a, n)
        assert rep.holds
        assert rep.lower_slack == pytest.approx(math.pi * f, abs=1e-8)
        assert rep.upper_slack == pytest.approx(math.pi * (1 - f), abs=1e-8)

    def test_with_leaves(self):
        H = RotationHamiltonian(0.6)
        Pp = FloerProblem(MappingTorus(2, H), 0.6, "plus", 64, 128)
        Pm = FloerProblem(MappingTorus(2, H), 0.6, "minus", 64, 128)
        rep = action_sandwich(H, 0.6, 2, solve_leaf(Pp, 0.0), solve_leaf(Pm, 0.0))
        assert rep.holds
        assert rep.lower_slack == pytest.approx(0.2 * math.pi, abs=1e-9)

    def test_rational(self):
        with pytest.raises(RationalInputError):
            action_sandwich(RotationHamiltonian(0.5), "1/2", 2)


class TestConvergence:
    @given(st.floats(-3, 3), st.floats(-3, 3))
    def test_rotation_distance(self, a, b):
        z = np.exp(2j * np.pi * a) - np.exp(2j * np.pi * b)
        assert rotation_distance(a, b) == pytest.approx(abs(z), abs=1e-12)

    @given(st.integers(1, 50), st.floats(0.01, 0.99))
    def test_auto_side(self, n, a):
        k = floor_mul(n, a) if auto_side(n, a) == "plus" else ceil_mul(n, a)
        assert abs(k / n - a) <= min(abs(floor_mul(n, a) / n - a), abs(ceil_mul(n, a) / n - a)) + 1e-15

    def test_rotation_model(self, tmp_path):
        a = 0.618
        build = partial(build_foliation, Nt=128)
        tab = convergence_experiment(RotationHamiltonian(a), a, [1, 2, 3, 5], theta_count=8, build=build)
        assert not tab.gaps and tab.decreasing
        for row in tab.rows:
            n = row["n"]
            k = floor_mul(n, a) if auto_side(n, a) == "plus" else ceil_mul(n, a)
            assert row["d_c0"] == pytest.approx(rotation_distance(k / n, a), abs=1e-3)
            assert row["periodicity_residual"] < 1e-9
        tab.to_csv(tmp_path / "c.csv")
        assert (tmp_path / "c.csv").read_text().splitlines()[0] == ",".join(CSV_HEADER)
