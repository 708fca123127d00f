import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pseudorot.diskmap import PolarGrid, SampledDiskMap, area_defect, c0_distance, loop_area, rotation_map
from pseudorot.errors import ContractViolation

GRID = PolarGrid(32, 128)


def twist(a):
    return lambda z: np.asarray(z) * np.exp(2j * np.pi * a * np.abs(z) ** 2)


def squeeze(z):
    z = np.asarray(z, dtype=complex)
    r = np.abs(z)
    return z * (2 - r)  # radius r -> r (2 - r), still a bijection of the disk


class TestArea:
    def test_loop_area_circle(self):
        c = 0.3 + 0.1j + 0.2 * np.exp(2j * np.pi * np.arange(64) / 64)
        assert loop_area(c) == pytest.approx(math.pi * 0.04, rel=1e-14)

    def test_rotation(self):
        assert area_defect(rotation_map(1.1)) < 1e-13

    @given(st.floats(-1.0, 1.0))
    def test_twist_area_preserving(self, a):
        assert area_defect(twist(a)) < 1e-6

    def test_squeeze_detected(self):
        # Jacobian (2 - r)(2 - 2r) differs from 1 by O(1) near the origin
        assert area_defect(squeeze) > 0.5


class TestSampled:
    def test_shape_contract(self):
        with pytest.raises(ContractViolation):
            SampledDiskMap(GRID, np.zeros((3, 3)))

    def test_rotation_exact(self):
        R = SampledDiskMap.rotation(0.7, GRID)
        z = np.array([0.3 + 0.2j, -0.9j])
        assert np.allclose(R(z), z * np.exp(0.7j), atol=1e-13)

    def test_holdout_measured(self):
        f = SampledDiskMap.from_callable(twist(0.3), GRID)
        z = GRID.refined(3).nodes
        err = np.max(np.abs(f(z) - twist(0.3)(z)))
        assert 0 < f.interp_error
        assert err <= 3 * f.interp_error

    def test_invariants(self):
        inv = SampledDiskMap.from_callable(twist(0.5), GRID).check_invariants()
        assert inv["in_disk"] and inv["boundary_to_boundary"] and inv["orientation_preserving"]

    def test_inverse_roundtrip(self):
        f = SampledDiskMap.from_callable(twist(0.4), GRID)
        g = f.inverse()
        z = GRID.midpoints
        assert np.max(np.abs(f(g(z)) - z)) < 20 * f.interp_error

    def test_power_of_rotation(self):
        R = SampledDiskMap.rotation(2 * math.pi / 5, GRID)
        assert np.max(np.abs(R.power(5).values - GRID.nodes)) < 1e-12

    def test_compose(self):
        A = SampledDiskMap.rotation(0.3, GRID)
        B = SampledDiskMap.rotation(0.4, GRID)
        assert np.allclose(A.compose(B).values, GRID.nodes * np.exp(0.7j), atol=1e-12)


class TestDistance:
    def test_self(self):
        f = SampledDiskMap.from_callable(twist(0.2), GRID)
        assert c0_distance(f, f) == 0.0

    @given(st.floats(-math.pi, math.pi), st.floats(-math.pi, math.pi))
    def test_rotation_chord(self, a, b):
        d = c0_distance(rotation_map(a), rotation_map(b), PolarGrid(16, 256))
        chord = 2 * abs(math.sin((a - b) / 2))
        assert chord - 1e-3 <= d <= chord + 1e-12

    def test_node_perturbation(self):
        delta = 0.01
        f = SampledDiskMap.identity(GRID)
        vals = f.values.copy()
        vals[20, 37] += delta
        g = SampledDiskMap(GRID, vals)
        assert c0_distance(f, g) >= 0.9 * delta
