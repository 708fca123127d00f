import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pseudorot.diskmap import PolarGrid, SampledDiskMap, area_defect
from pseudorot.errors import ContractViolation
from pseudorot.hamiltonian import (TOL_BOUNDARY, TOL_INTEGRATOR, Bump, ConstantHamiltonian, MappingTorus,
                                   PerturbedRotation, RotationHamiltonian, first_return_map, flow,
                                   hamiltonian_from_config, time_one_map)

GRID = PolarGrid(32, 128)


def _fd_grad(H, t, x, y, e=1e-6):
    return ((H.h(t, x + e, y) - H.h(t, x - e, y)) / (2 * e), (H.h(t, x, y + e) - H.h(t, x, y - e)) / (2 * e))


class TestFields:
    def test_rotation_vector_field(self):
        H = RotationHamiltonian(0.3)
        z = np.array([0.2 + 0.5j, -0.7 + 0.1j])
        assert np.allclose(H.vector_field(0.0, z), 2 * math.pi * 0.3 * 1j * z)

    def test_constant_zero_field(self):
        assert np.all(ConstantHamiltonian(4.0).vector_field(0.3, np.array([0.5j])) == 0)

    @given(st.floats(0.0, 1.0), st.floats(-0.99, 0.99), st.floats(-0.99, 0.99), st.integers(1, 3))
    def test_perturbed_gradient(self, t, x, y, k):
        if x * x + y * y >= 0.98:
            return
        H = PerturbedRotation(0.618, 0.05, k)
        gx, gy = H.grad(t, np.array(x), np.array(y))
        fx, fy = _fd_grad(H, t, np.array(x), np.array(y))
        assert abs(gx - fx) < 1e-6 and abs(gy - fy) < 1e-6

    @pytest.mark.parametrize("H", [RotationHamiltonian(0.4, 1.0), PerturbedRotation(0.618, 0.05),
                                   PerturbedRotation(0.618, 0.2, 2)])
    def test_boundary_tangency(self, H):
        th = np.linspace(0, 2 * np.pi, 64, endpoint=False)
        z = np.exp(1j * th)
        for t in (0.0, 0.3, 0.7):
            v = H.vector_field(t, z)
            assert np.max(np.abs(np.real(v * np.conj(z)))) <= TOL_BOUNDARY
        assert H.check_contract()["ok"]

    def test_bump_support(self):
        b = Bump(0.3, 0.8)
        rho = np.array([0.0, 0.05, 0.3 ** 2, 0.8 ** 2, 0.9])
        assert np.all(b(rho)[[0, 1, 2, 3, 4]] == 0)
        assert b(np.array([0.5 * (0.09 + 0.64)]))[0] == pytest.approx(1.0)

    def test_bump_contract(self):
        with pytest.raises(ContractViolation):
            Bump(0.8, 0.3)

    def test_config_round_trip(self):
        H = PerturbedRotation(0.618, 0.05, 2, 0.1, Bump(0.2, 0.7))
        H2 = hamiltonian_from_config(H.to_config())
        z = np.array([0.3 + 0.4j, -0.5j])
        assert np.allclose(H.value(0.2, z), H2.value(0.2, z))

    def test_unknown_family(self):
        with pytest.raises(ContractViolation):
            hamiltonian_from_config({"family": "nope"})


class TestFlow:
    def test_rotation_closed_form(self):
        a = 0.37
        z = 0.6 * np.exp(1j * np.linspace(0, 6, 9))
        w = flow(RotationHamiltonian(a), 0.0, 1.0, z)
        assert np.allclose(w, z * np.exp(2j * math.pi * a), atol=1e-12)

    def test_zero_span(self):
        z = np.array([0.1 + 0.2j])
        assert np.array_equal(flow(PerturbedRotation(0.6), 0.5, 0.5, z), z)

    @given(st.floats(0.0, 0.95), st.floats(0, 2 * math.pi))
    def test_group_law(self, r, th):
        H = PerturbedRotation(0.618, 0.1)
        z = np.array([r * np.exp(1j * th)])
        back = flow(H, 1.0, 0.0, flow(H, 0.0, 1.0, z))
        assert abs(back[0] - z[0]) <= TOL_INTEGRATOR

    def test_energy_drift_autonomous(self):
        H = PerturbedRotation(0.618, 0.0)
        z = np.array([0.5 + 0.1j])
        w = flow(H, 0.0, 1.0, z, steps=64)
        assert abs(H.value(0.0, w)[0] - H.value(0.0, z)[0]) <= TOL_INTEGRATOR


class TestMaps:
    def test_quarter_rotation(self):
        phi = time_one_map(RotationHamiltonian(0.25), GRID)
        ref = SampledDiskMap.rotation(math.pi / 2, GRID)
        assert np.max(np.abs(phi.values - ref.values)) < 1e-12

    def test_constant_identity(self):
        phi = time_one_map(ConstantHamiltonian(1.0), GRID)
        assert np.max(np.abs(phi.values - GRID.nodes)) == 0.0

    def test_area_preserving(self):
        H = PerturbedRotation(0.618, 0.05)
        assert area_defect(lambda z: flow(H, 0.0, 1.0, z), centers=8) <= TOL_INTEGRATOR
        # Jacobian of the bicubic interpolant of an exact rotation
        phi = time_one_map(RotationHamiltonian(0.3), GRID)
        assert np.max(np.abs(phi.jacobian_det(GRID.midpoints) - 1)) < 1e-8

    @pytest.mark.parametrize("steps", [64, 128])
    def test_fourth_order(self, steps):
        H = PerturbedRotation(0.618, 0.05)
        z = np.array([0.5 + 0.3j, 0.77 - 0.31j])
        ref = flow(H, 0.0, 1.0, z, 1024)
        e1 = np.max(np.abs(flow(H, 0.0, 1.0, z, steps) - ref))
        e2 = np.max(np.abs(flow(H, 0.0, 1.0, z, 2 * steps) - ref))
        assert e1 / e2 > 12

    def test_first_return_n1(self):
        H = PerturbedRotation(0.618, 0.05)
        a = first_return_map(MappingTorus(1, H), GRID)
        b = time_one_map(H, GRID)
        assert np.max(np.abs(a.values - b.values)) < 1e-12

    def test_first_return_third(self):
        F = first_return_map(MappingTorus(3, RotationHamiltonian(1 / 3)), GRID)
        assert np.max(np.abs(F.values - GRID.nodes)) < 1e-10

    def test_first_return_semigroup(self):
        H = PerturbedRotation(0.618, 0.05)
        F = first_return_map(MappingTorus(2, H), GRID)
        phi = time_one_map(H, GRID)
        pts = GRID.midpoints
        assert np.max(np.abs(F(pts) - phi(phi(pts)))) < 20 * phi.interp_error + 1e-8

    def test_mapping_torus_contract(self):
        with pytest.raises(ContractViolation):
            MappingTorus(0, RotationHamiltonian(0.3))
