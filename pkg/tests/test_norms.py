from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fppvar.errors import ConfigurationError
from fppvar.norms import (NormTable, check_norm_axioms, covering_radius, direction_mesh, dual_norm, limit_shape,
                          tabulate)
from fppvar.symmin import AtomicMedium, brute_force_Hbar


def sup_norm_over(c):
    return lambda p: float(np.abs(p).max()) / c


MESH2 = direction_mesh(2, math.pi / 256)
vectors2 = st.lists(st.floats(-5, 5), min_size=2, max_size=2).map(np.array)


def test_direction_meshes():
    assert direction_mesh(1).tolist() == [[1.0], [-1.0]]
    assert np.allclose(np.linalg.norm(MESH2, axis=1), 1.0)
    assert len(MESH2) == 512
    m3 = direction_mesh(3, 0.3)
    assert np.allclose(np.linalg.norm(m3, axis=1), 1.0)
    with pytest.raises(ConfigurationError):
        direction_mesh(4)


def test_covering_radius_of_uniform_circle_mesh():
    for k in (4, 16, 100):
        ang = 2 * np.pi * np.arange(k) / k
        dirs = np.column_stack([np.cos(ang), np.sin(ang)])
        assert covering_radius(dirs) == pytest.approx(2 * math.sin(math.pi / (2 * k)), rel=1e-12)
    assert covering_radius(np.array([[1.0], [-1.0]])) == 0.0
    r3 = covering_radius(direction_mesh(3, 0.2))
    assert 0.0 < r3 < 0.5


def test_axis_table_gives_square_shape():
    dirs = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]])
    shape = limit_shape(NormTable(dirs, np.ones(4), 0.0, "exact"))
    assert len(shape.vertices) == 4 and shape.is_convex()
    assert sorted(map(tuple, np.round(shape.vertices, 12).tolist())) == [(-1, -1), (-1, 1), (1, -1), (1, 1)]
    v = shape.vertices - shape.vertices.mean(axis=0)
    cross = v[:-1, 0] * v[1:, 1] - v[:-1, 1] * v[1:, 0]
    assert np.all(cross > 0)


def test_one_dimensional_dual_and_shape():
    table = NormTable([[1.0], [-1.0]], [2.0 / 3.0, 2.0 / 3.0], 0.0, "exact")
    assert dual_norm(table, [1.0]).value == pytest.approx(1.5)
    assert dual_norm(table, [-2.0]).value == pytest.approx(3.0)
    assert limit_shape(table).vertices.ravel().tolist() == pytest.approx([-2.0 / 3.0, 2.0 / 3.0])


def test_sup_norm_dual_is_scaled_l1():
    c = 2.0
    table = tabulate(sup_norm_over(c), MESH2, 0.0, "exact")
    for x in [(1.0, 0.0), (0.3, -0.7), (-2.0, 1.0)]:
        dv = dual_norm(table, x, a=c, b=c)
        truth = c * np.abs(x).sum()
        assert dv.value <= truth * (1 + 1e-12)
        assert dv.value + dv.slack >= truth
    assert dual_norm(table, (0.0, 0.0)).value == 0.0


@given(vectors2)
def test_mesh_dual_is_a_certified_lower_bound(x):
    c = 1.5
    table = tabulate(sup_norm_over(c), MESH2)
    dv = dual_norm(table, x, a=c, b=c)
    truth = c * np.abs(x).sum()
    assert dv.value <= truth * (1 + 1e-12) + 1e-15
    assert dv.value + dv.slack >= truth - 1e-12


@given(vectors2, vectors2, st.floats(0, 10))
def test_mesh_dual_is_a_seminorm(x, y, lam):
    table = tabulate(sup_norm_over(1.0), direction_mesh(2, 0.2))
    m = lambda v: dual_norm(table, v).value
    assert m(x + y) <= m(x) + m(y) + 1e-12 * (1 + np.abs(x).sum() + np.abs(y).sum())
    assert m(lam * x) == pytest.approx(lam * m(x), rel=1e-12, abs=1e-12)


def test_sup_norm_table_shape_is_the_l1_ball():
    table = tabulate(sup_norm_over(1.0), MESH2)
    shape = limit_shape(table)
    assert shape.is_convex()
    l1 = np.abs(shape.vertices).sum(axis=1)
    r = table.covering_radius
    assert np.all(l1 >= 1.0 - 1e-12) and np.all(l1 <= 1.0 + 2 * r)
    half = limit_shape(table.scaled(2.0))
    assert np.allclose(np.sort(np.abs(half.vertices).sum(axis=1)), 2.0 * np.sort(l1))


def test_three_dimensional_shape():
    table = tabulate(sup_norm_over(1.0), direction_mesh(3, 0.15))
    shape = limit_shape(table)
    assert shape.facets is not None
    assert np.all(np.abs(shape.vertices).sum(axis=1) >= 1.0 - 1e-9)


def test_norm_axioms_for_exact_and_symmetric_values():
    c = 1.0
    table = tabulate(sup_norm_over(c), direction_mesh(2, 2 * math.pi / 16))
    rep = check_norm_axioms(table, sup_norm_over(c), b=c)
    assert rep.ok and rep.homogeneity_error <= 1e-15
    medium = AtomicMedium([[1.0, 2.0], [2.0, 1.0]], [0.5, 0.5])
    ev = lambda p: brute_force_Hbar(medium, p).hbar
    table = tabulate(ev, direction_mesh(2, 2 * math.pi / 16), provenance="brute-force")
    rep = check_norm_axioms(table, ev, b=medium.b, pairs=40)
    assert rep.ok, rep
    assert table.lower_bound_violations(medium.b).size == 0


def test_floor_violation_is_reported():
    table = NormTable([[1.0, 0.0], [0.0, 1.0]], [0.2, 1.0], 0.0, "bad")
    assert table.lower_bound_violations(2.0).tolist() == [0]


def test_norm_table_validation():
    with pytest.raises(ConfigurationError):
        NormTable(np.zeros((0, 2)), [], 0.0, "x")
    with pytest.raises(ConfigurationError):
        NormTable([[1.0, 0.0]], [0.0], 0.0, "x")
    table = NormTable([[1.0, 0.0]], [1.0], 0.0, "x")
    with pytest.raises(ConfigurationError):
        dual_norm(table, [1.0, 2.0, 3.0])
    with pytest.raises(ConfigurationError):
        limit_shape(NormTable(np.eye(4), np.ones(4), 0.0, "x"))
