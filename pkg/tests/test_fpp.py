from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fppvar.environment import (EnvironmentSpec, EnvironmentWindow, WeightDistribution, constant_spec,
                                explicit_spec_from_array, sample_window)
from fppvar.errors import ConfigurationError, DomainTooSmallError
from fppvar.fpp import (Path, estimate_time_constant, estimate_time_constants, first_passage_times,
                        first_passage_times_heap, reachable_set, round_to_lattice)
from fppvar.oracles import enumerate_passage_times

UNIFORM = WeightDistribution.uniform(1.0, 2.0)
TWO_ATOMS = WeightDistribution.atoms([1.0, 2.0], [0.5, 0.5])

weights_strategy = st.floats(1.0, 3.0, allow_nan=False, allow_infinity=False)


def _explicit(box, flat):
    d = len(box)
    w = np.asarray(flat, dtype=float).reshape(*box, 2 * d)
    return sample_window(explicit_spec_from_array(w), box)


@pytest.mark.parametrize("c", [1.0, 2.5])
def test_constant_medium_gives_scaled_l1_distance(c):
    env = sample_window(constant_spec(c, 2), (7, 7), origin=(-3, -3))
    ptm = first_passage_times(env, (0, 0))
    pts = env.points()
    expected = c * np.abs(pts).sum(axis=1).reshape(7, 7)
    assert np.allclose(ptm.times, expected, rtol=0, atol=1e-12)
    assert ptm.time((2, 1)) == 3 * c


def test_one_dimensional_times_are_cumulative_sums():
    env = sample_window(EnvironmentSpec("iid-undirected", 1, TWO_ATOMS, seed=4), 40)
    ptm = first_passage_times(env, (0,))
    forward = np.concatenate([[0.0], np.cumsum(env.weights[:-1, 0])])
    assert np.array_equal(ptm.times, forward)


@given(st.lists(weights_strategy, min_size=16, max_size=16), st.integers(0, 3))
def test_two_by_two_matches_exhaustive_enumeration(flat, s):
    env = _explicit((2, 2), flat)
    src = [(0, 0), (0, 1), (1, 0), (1, 1)][s]
    oracle = enumerate_passage_times(env, src)
    ptm = first_passage_times(env, src)
    for y, t in oracle.items():
        assert math.isclose(ptm.time(y), t, rel_tol=1e-12)


@given(st.lists(weights_strategy, min_size=36, max_size=36))
def test_three_by_three_matches_exhaustive_enumeration(flat):
    env = _explicit((3, 3), flat)
    oracle = enumerate_passage_times(env, (1, 1))
    ptm = first_passage_times(env, (1, 1))
    assert len(oracle) == 9
    for y, t in oracle.items():
        assert math.isclose(ptm.time(y), t, rel_tol=1e-12)


def test_torus_matches_exhaustive_enumeration():
    env = sample_window(EnvironmentSpec("iid-edges", 2, UNIFORM, seed=3), 3, "torus")
    oracle = enumerate_passage_times(env, (0, 0))
    ptm = first_passage_times(env, (0, 0))
    for y, t in oracle.items():
        assert math.isclose(ptm.time(y), t, rel_tol=1e-12)


@pytest.mark.parametrize("kind,topology", [("iid-edges", "open-box"), ("iid-undirected", "torus"),
                                           ("hyperplane-symmetric", "open-box")])
def test_sparse_solver_agrees_with_heap_and_networkx(kind, topology):
    nx = pytest.importorskip("networkx")
    env = sample_window(EnvironmentSpec(kind, 2, UNIFORM, seed=12), (9, 8), topology)
    ptm = first_passage_times(env, (4, 3))
    heap = first_passage_times_heap(env, (4, 3))
    assert np.allclose(ptm.times, heap.times, rtol=1e-13, atol=0)
    g = nx.DiGraph()
    nb = env.neighbor_index()
    w = env.weights.reshape(env.size, -1)
    for u in range(env.size):
        for k in range(nb.shape[1]):
            v = int(nb[u, k])
            if v >= 0 and v != u:
                if not g.has_edge(u, v) or g[u][v]["weight"] > w[u, k]:
                    g.add_edge(u, v, weight=float(w[u, k]))
    src = int(np.ravel_multi_index((4, 3), env.box))
    ref = nx.single_source_dijkstra_path_length(g, src)
    for v, t in ref.items():
        assert math.isclose(ptm.times.flat[v], t, rel_tol=1e-12)


def test_geodesic_paths_realize_passage_times():
    env = sample_window(EnvironmentSpec("iid-edges", 2, UNIFORM, seed=8), (8, 8))
    ptm = first_passage_times(env, (2, 5), with_paths=True)
    for y in [(0, 0), (7, 7), (2, 5), (6, 1)]:
        path = ptm.path_to(y)
        assert path.vertices[0] == (2, 5) and path.vertices[-1] == y
        assert math.isclose(path.passage_time(env), ptm.time(y), rel_tol=1e-12)


def test_path_rejects_jumps():
    with pytest.raises(ConfigurationError):
        Path(((0, 0), (1, 1)))


def test_subadditivity_on_a_common_window():
    env = sample_window(EnvironmentSpec("iid-edges", 2, UNIFORM, seed=5), (31, 31), origin=(-15, -15))
    x = np.array([1.0, 0.6])
    for m, n in [(2, 3), (4, 5), (7, 1)]:
        a = tuple(round_to_lattice(m * x))
        b = tuple(round_to_lattice((m + n) * x))
        lhs = first_passage_times(env, (0, 0)).time(b)
        rhs = first_passage_times(env, (0, 0)).time(a) + first_passage_times(env, a).time(b)
        assert lhs <= rhs + 1e-12


def test_neighbouring_times_differ_by_at_most_b():
    env = sample_window(EnvironmentSpec("iid-undirected", 2, UNIFORM, seed=6), (12, 12))
    t = first_passage_times(env, (5, 5)).times
    assert np.all(np.abs(np.diff(t, axis=0)) <= 2.0 + 1e-12)
    assert np.all(np.abs(np.diff(t, axis=1)) <= 2.0 + 1e-12)


def test_reachable_set_examples():
    env = sample_window(constant_spec(1.0, 2), (11, 11), origin=(-5, -5))
    assert reachable_set(env, (0, 0), 0.0) == {(0, 0)}
    ball = reachable_set(env, (0, 0), 2.5)
    assert ball == {(i, j) for i in range(-2, 3) for j in range(-2, 3) if abs(i) + abs(j) <= 2}
    with pytest.raises(DomainTooSmallError):
        reachable_set(env, (0, 0), 5.0)
    with pytest.raises(ConfigurationError):
        reachable_set(env, (0, 0), -1.0)


@given(st.floats(0, 6), st.floats(0, 6), st.integers(0, 10**6))
def test_reachable_sets_are_monotone_and_between_balls(t1, t2, seed):
    t1, t2 = sorted((t1, t2))
    env = sample_window(EnvironmentSpec("iid-edges", 2, UNIFORM, seed=seed), (15, 15), origin=(-7, -7))
    r1, r2 = reachable_set(env, (0, 0), t1), reachable_set(env, (0, 0), t2)
    assert r1 <= r2
    l1 = lambda y: abs(y[0]) + abs(y[1])
    assert all(l1(y) <= t2 / 1.0 for y in r2)
    inner = {(i, j) for i in range(-7, 8) for j in range(-7, 8) if l1((i, j)) <= t1 / 2.0}
    assert inner <= r1


def test_rounding_examples():
    assert round_to_lattice([1.2, -0.7]).tolist() == [1, -1]
    assert round_to_lattice([-0.5, 2.5]).tolist() == [0, 2]
    assert round_to_lattice([0.5, -1.5, 3.0]).tolist() == [0, -1, 3]


@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=4))
def test_rounding_picks_a_nearest_lattice_point(v):
    r = round_to_lattice(v)
    assert np.all(np.abs(np.asarray(v) - r) <= 0.5)
    assert np.all(np.abs(r) <= np.abs(np.asarray(v)) + 0.5)


def test_constant_medium_time_constant_is_exact():
    est = estimate_time_constant(constant_spec(2.0, 2), (1.0, 0.5), [5, 10], seeds=3)
    assert est.estimate == pytest.approx(3.0, abs=0.2 + 1e-12)
    est = estimate_time_constant(constant_spec(2.0, 2), (1.0, -1.0), [5, 10], seeds=3)
    assert est.estimate == 4.0 and est.half_width == 0.0


def test_time_constant_estimate_bounds():
    spec = EnvironmentSpec("iid-edges", 2, UNIFORM, seed=2)
    for x in [(1.0, 0.0), (0.3, 0.8), (-1.0, 1.0)]:
        est = estimate_time_constant(spec, x, [10, 20], seeds=4)
        scale = np.abs(round_to_lattice(20 * np.asarray(x))).sum() / 20
        assert 1.0 * scale <= est.estimate <= 2.0 * scale
        assert est.scaled_times.shape == (4, 2)


def test_one_dimensional_law_of_large_numbers():
    spec = EnvironmentSpec("iid-undirected", 1, TWO_ATOMS, seed=1)
    est = estimate_time_constant(spec, (1.0,), [100, 2000], seeds=12)
    assert abs(est.estimate - 1.5) <= max(est.half_width, 0.02)


def test_shared_replicas_are_deterministic():
    spec = EnvironmentSpec("iid-edges", 2, UNIFORM, seed=9)
    a = estimate_time_constants(spec, [(1, 0), (0, 1)], [4, 8], seeds=3)
    b = estimate_time_constants(spec, [(1, 0), (0, 1)], [4, 8], seeds=3)
    assert all(np.array_equal(u.scaled_times, v.scaled_times) for u, v in zip(a, b))
    c = estimate_time_constants(spec, [(1, 0), (0, 1)], [4, 8], seeds=3, jobs=2)
    assert all(np.array_equal(u.scaled_times, v.scaled_times) for u, v in zip(a, c))


def test_estimator_configuration_errors():
    spec = EnvironmentSpec("iid-edges", 2, UNIFORM, seed=1)
    with pytest.raises(ConfigurationError):
        estimate_time_constant(spec, (1.0, 0.0), [10], seeds=2, radius=3)
    with pytest.raises(ConfigurationError):
        estimate_time_constant(spec, (0.0, 0.0), [10], seeds=2)
    with pytest.raises(ConfigurationError):
        estimate_time_constant(spec, (1.0, 0.0), [0], seeds=2)
