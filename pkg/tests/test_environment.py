from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from fppvar.environment import (BoundsSpec, DirectionSet, EnvironmentSpec, EnvironmentWindow,
                                WeightDistribution, constant_spec, load_explicit_csv, sample_window,
                                spec_from_config, verify_bounds, weight)
from fppvar.errors import BoundsError, ConfigurationError

UNIFORM = WeightDistribution.uniform(1.0, 2.0)
TWO_ATOMS = WeightDistribution.atoms([1.0, 2.0], [0.5, 0.5])


def test_constant_medium_serves_its_constant():
    env = sample_window(constant_spec(1.0, 2), (4, 5))
    assert np.all(env.weights == 1.0)
    assert weight(env, (1, 1), (1, 0)) == 1.0
    rep = verify_bounds(env)
    assert (rep.min_seen, rep.max_seen, rep.ok) == (1.0, 1.0, True)


def test_hyperplane_medium_depends_only_on_coordinate_sum():
    env = sample_window(EnvironmentSpec("hyperplane-symmetric", 2, UNIFORM, seed=3), (9, 7), origin=(-4, -2))
    pts = env.points()
    sums = pts.sum(axis=1)
    w = env.weights.reshape(-1, 4)
    for z in np.unique(sums):
        rows = w[sums == z]
        assert np.all(rows == rows[0])


def test_vector_atoms_on_hyperplanes_share_one_draw_per_site():
    dist = WeightDistribution.atoms([[1.0, 2.0], [2.0, 1.0]], [0.5, 0.5])
    env = sample_window(EnvironmentSpec("hyperplane-symmetric", 2, dist, seed=1), 6)
    w = env.weights.reshape(-1, 4)
    assert set(map(tuple, w[:, :2].tolist())) <= {(1.0, 2.0), (2.0, 1.0)}


def test_sampling_is_bitwise_deterministic():
    spec = EnvironmentSpec("iid-edges", 2, UNIFORM, seed=7)
    a, b = sample_window(spec, (4, 4)), sample_window(spec, (4, 4))
    assert a.weights.tobytes() == b.weights.tobytes()
    assert a.fingerprint == b.fingerprint
    assert sample_window(spec.with_seed(8), (4, 4)).fingerprint != a.fingerprint


@pytest.mark.parametrize("kind", ["iid-edges", "iid-undirected", "hyperplane-symmetric"])
def test_windows_of_different_size_agree_on_overlap(kind):
    spec = EnvironmentSpec(kind, 2, UNIFORM, seed=11)
    small = sample_window(spec, (3, 4), origin=(2, -1))
    big = sample_window(spec, (10, 10), origin=(-3, -5))
    assert np.array_equal(big.weights[5:8, 4:8], small.weights)


def test_undirected_media_are_symmetric():
    env = sample_window(EnvironmentSpec("iid-undirected", 2, UNIFORM, seed=5), (6, 6))
    dirs = DirectionSet(2)
    for x in env.points():
        for k, step in enumerate(dirs.directions):
            y = x + step
            if env.contains(y):
                assert weight(env, x, step) == weight(env, y, -step)


def test_two_atom_support():
    env = sample_window(EnvironmentSpec("iid-undirected", 1, TWO_ATOMS, seed=2), 200)
    assert set(np.unique(env.weights)) <= {1.0, 2.0}
    assert abs(env.weights[:, 0].mean() - 1.5) < 0.15


def test_uniform_bounds_and_tampering_detected():
    env = sample_window(EnvironmentSpec("iid-edges", 2, UNIFORM, seed=1), (5, 5))
    rep = verify_bounds(env)
    assert rep.ok and rep.min_seen >= 1 and rep.max_seen <= 2
    w = env.weights.copy()
    w[0, 0, 0] = 0.0
    bad = EnvironmentWindow(None, env.box, "open-box", (0, 0), w, env.bounds)
    assert not verify_bounds(bad).ok


def test_windows_are_immutable():
    env = sample_window(constant_spec(1.0, 2), 3)
    with pytest.raises(ValueError):
        env.weights[0, 0, 0] = 5.0


def test_open_box_access_outside_raises():
    env = sample_window(constant_spec(1.0, 2), 3)
    with pytest.raises(BoundsError):
        weight(env, (2, 2), (1, 0))
    with pytest.raises(BoundsError):
        weight(env, (5, 0), (0, 1))


def test_torus_wraps():
    spec = EnvironmentSpec("iid-undirected", 2, UNIFORM, seed=9)
    env = sample_window(spec, 4, "torus")
    assert weight(env, (3, 0), (1, 0)) == weight(env, (0, 0), (-1, 0))
    assert weight(env, (7, -4), (0, 1)) == weight(env, (3, 0), (0, 1))


def test_periodic_torus_is_exactly_translation_invariant():
    spec = EnvironmentSpec("periodic", 2, UNIFORM, seed=4, period=(2, 3))
    env = sample_window(spec, (4, 6), "torus")
    shifted = np.roll(env.weights, shift=(-2, -3), axis=(0, 1))
    assert np.array_equal(shifted, env.weights)
    box = sample_window(spec, (4, 6), origin=(2, 3))
    assert np.array_equal(box.weights, env.weights)


def test_iid_marginals_match_across_translates():
    spec = EnvironmentSpec("iid-edges", 2, UNIFORM, seed=21)
    a = sample_window(spec, (50, 50)).weights[..., 0].ravel()
    b = sample_window(spec, (50, 50), origin=(1000, -700)).weights[..., 0].ravel()
    assert a.size == 2500 and b.size == 2500
    big_a = sample_window(spec, (100, 100)).weights[..., 1].ravel()
    big_b = sample_window(spec, (100, 100), origin=(517, 33)).weights[..., 1].ravel()
    assert stats.ks_2samp(big_a, big_b).statistic < 0.05
    assert stats.kstest(big_a - 1.0, "uniform").statistic < 0.05


def test_torus_constraints():
    with pytest.raises(ConfigurationError):
        sample_window(EnvironmentSpec("hyperplane-symmetric", 2, UNIFORM), (4, 6), "torus")
    with pytest.raises(ConfigurationError):
        sample_window(EnvironmentSpec("periodic", 2, UNIFORM, period=4), (6, 6), "torus")


@pytest.mark.parametrize("bad", [
    lambda: WeightDistribution.atoms([1.0, 2.0], [0.5, 0.6]),
    lambda: WeightDistribution.uniform(2.0, 1.0),
    lambda: WeightDistribution.uniform(1.0, 1.0),
    lambda: WeightDistribution.atoms([0.0, 1.0], [0.5, 0.5]),
    lambda: BoundsSpec(2.0, 1.0),
    lambda: EnvironmentSpec("galaxy", 2, UNIFORM),
    lambda: EnvironmentSpec("periodic", 2, UNIFORM),
    lambda: EnvironmentSpec("explicit", 2),
    lambda: sample_window(constant_spec(1.0, 2), (0, 3)),
])
def test_invalid_configurations_rejected(bad):
    with pytest.raises(ConfigurationError):
        bad()


def test_direction_indices():
    dirs = DirectionSet(3)
    assert len(dirs) == 6
    for k, a in enumerate(dirs.directions):
        assert dirs.index(a) == k
        assert np.array_equal(dirs.directions[dirs.opposite(k)], -a)


def test_explicit_csv_roundtrip(tmp_path):
    path = tmp_path / "medium.csv"
    rows = ["x1,x2,direction,weight"]
    for x in range(2):
        for y in range(2):
            for tok, w in (("+e1", 1.5), ("-e1", 2.0), ("+e2", 1.25), ("-2", 3.0)):
                rows.append(f"{x},{y},{tok},{w}")
    path.write_text("\n".join(rows) + "\n")
    spec = load_explicit_csv(path)
    env = sample_window(spec, (2, 2))
    assert np.all(env.weights[..., 0] == 1.5)
    assert np.all(env.weights[..., 3] == 3.0)
    assert spec.bounds == BoundsSpec(1.25, 3.0)
    with pytest.raises(ConfigurationError):
        sample_window(spec, (3, 3))
    with pytest.raises(ConfigurationError):
        load_explicit_csv(tmp_path / "missing.csv")


def test_spec_from_nested_config():
    spec = spec_from_config({"kind": "iid-undirected", "d": 2, "seed": 3,
                             "distribution": {"kind": "uniform", "lo": 1, "hi": 2}})
    assert spec.bounds == BoundsSpec(1.0, 2.0) and spec.seed == 3
    with pytest.raises(ConfigurationError):
        spec_from_config({"kind": "iid-undirected", "d": 2})


@given(seed=st.integers(0, 2**63 - 1), n=st.integers(1, 6), d=st.integers(1, 3),
       kind=st.sampled_from(["iid-edges", "iid-undirected", "hyperplane-symmetric"]))
def test_weights_always_within_bounds(seed, n, d, kind):
    dist = WeightDistribution.atoms([1.0, 1.7, 3.0], [0.2, 0.3, 0.5])
    env = sample_window(EnvironmentSpec(kind, d, dist, seed=seed), (n,) * d)
    assert verify_bounds(env).ok
    assert set(np.unique(env.weights)) <= {1.0, 1.7, 3.0}
