from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fppvar.distcompare import (MarginalSpec, coupling_gap_bound, coupling_sup_gap, empirical_gap_check,
                                gap_bound_dual, gap_bound_primal, kolmogorov_distance, skorokhod_values)
from fppvar.environment import EnvironmentSpec, WeightDistribution
from fppvar.errors import BoundUnavailableError, ConfigurationError


@st.composite
def marginals(draw):
    kind = draw(st.sampled_from(["uniform", "atoms", "piecewise"]))
    if kind == "uniform":
        lo = draw(st.floats(0.5, 3.0))
        return MarginalSpec.uniform(lo, lo + draw(st.floats(0.1, 2.0)))
    if kind == "atoms":
        vals = draw(st.lists(st.floats(0.5, 4.0), min_size=1, max_size=4, unique=True))
        w = np.array(draw(st.lists(st.floats(0.05, 1.0), min_size=len(vals), max_size=len(vals))))
        return MarginalSpec.atoms(vals, w / w.sum())
    k = draw(st.integers(2, 5))
    steps = draw(st.lists(st.floats(0.1, 1.0), min_size=k - 1, max_size=k - 1))
    xs = draw(st.floats(0.5, 2.0)) + np.concatenate([[0.0], np.cumsum(steps)])
    rises = np.array(draw(st.lists(st.floats(0.05, 1.0), min_size=k - 1, max_size=k - 1)))
    Fs = np.concatenate([[0.0], np.cumsum(rises) / rises.sum()])
    Fs[-1] = 1.0
    return MarginalSpec.piecewise(xs, Fs)


def test_kolmogorov_examples():
    assert kolmogorov_distance(MarginalSpec.uniform(1, 2), MarginalSpec.uniform(1.1, 2.1)) == pytest.approx(0.1)
    assert kolmogorov_distance(MarginalSpec.uniform(1, 2), MarginalSpec.uniform(1, 3)) == pytest.approx(0.5)
    a = MarginalSpec.atoms([1.0, 2.0], [0.5, 0.5])
    b = MarginalSpec.atoms([1.0, 2.0], [0.3, 0.7])
    assert kolmogorov_distance(a, b) == pytest.approx(0.2)
    assert kolmogorov_distance(MarginalSpec.atoms([1.0], [1.0]), MarginalSpec.atoms([2.0], [1.0])) == 1.0


@given(marginals(), marginals(), marginals())
def test_kolmogorov_is_a_metric(f, g, h):
    assert kolmogorov_distance(f, f) == 0.0
    assert kolmogorov_distance(f, g) == kolmogorov_distance(g, f)
    assert kolmogorov_distance(f, h) <= kolmogorov_distance(f, g) + kolmogorov_distance(g, h) + 1e-12
    assert 0.0 <= kolmogorov_distance(f, g) <= 1.0


@given(marginals(), st.lists(st.floats(0.0, 1.0), min_size=2, max_size=20))
def test_quantile_is_a_generalized_inverse(f, us):
    u = np.sort(np.array(us))
    q = f.quantile(u)
    assert np.all(np.diff(q) >= -1e-12)
    lo, hi = f.support
    assert np.all(q >= lo - 1e-12) and np.all(q <= hi + 1e-12)
    assert np.all(f.cdf(q) >= u - 1e-9)
    assert np.all(f.cdf_left(q) <= u + 1e-9)


def test_skorokhod_coupling_examples():
    assert skorokhod_values(MarginalSpec.uniform(1, 2), 0.25) == 1.25
    assert skorokhod_values(MarginalSpec.atoms([1.0, 2.0], [0.5, 0.5]), 0.5) == 1.0
    assert skorokhod_values(MarginalSpec.atoms([1.0, 2.0], [0.5, 0.5]), 0.5000001) == 2.0


def test_quantile_rejects_bad_levels():
    with pytest.raises(ConfigurationError):
        MarginalSpec.uniform(1, 2).quantile(1.5)


def test_shifted_uniform_coupling_bound():
    res = coupling_gap_bound(MarginalSpec.uniform(1, 2), MarginalSpec.uniform(1.1, 2.1))
    assert res.ks_distance == pytest.approx(0.1) and res.density_floor == 1.0
    assert res.measured_gap == pytest.approx(0.1) and res.ok and res.ks_dominates_gap


def test_kolmogorov_alone_does_not_bound_the_quantile_gap():
    res = coupling_gap_bound(MarginalSpec.uniform(1, 2), MarginalSpec.uniform(1, 3))
    assert res.ks_distance == pytest.approx(0.5)
    assert res.measured_gap == pytest.approx(1.0)
    assert res.gap_bound == pytest.approx(1.0) and res.ok
    assert not res.ks_dominates_gap


def test_atoms_have_no_density_floor():
    with pytest.raises(BoundUnavailableError):
        coupling_gap_bound(MarginalSpec.atoms([1.0, 2.0], [0.5, 0.5]), MarginalSpec.uniform(1, 2))


@given(marginals(), marginals())
def test_density_floor_bound_holds_whenever_available(f, g):
    if min(f.density_floor, g.density_floor) <= 0:
        return
    assert coupling_gap_bound(f, g, mesh=2000).ok


def test_gap_bound_examples():
    p = gap_bound_primal(2.0, 1.0, 2.1, 1.1, 0.1)
    assert p.value == pytest.approx(0.2) and p.route == "primal"
    d = gap_bound_dual(2.0, 1.0, 2.1, 1.1, 0.1)
    assert d.value == pytest.approx(0.2 * 4.2 / 1.1)
    assert p.fingerprint != d.fingerprint
    with pytest.raises(ConfigurationError):
        gap_bound_primal(1.0, 2.0, 1.0, 1.0, 0.1)
    with pytest.raises(ConfigurationError):
        gap_bound_dual(2.0, 1.0, 2.0, 1.0, -0.1)


@given(st.floats(0.1, 5), st.floats(1, 4), st.floats(0.1, 5), st.floats(1, 4), st.floats(0, 3))
def test_dual_bound_never_beats_primal(a1, r1, a2, r2, dist):
    p = gap_bound_primal(a1 * r1, a1, a2 * r2, a2, dist)
    d = gap_bound_dual(a1 * r1, a1, a2 * r2, a2, dist)
    assert d.value >= p.value


def test_empirical_gap_of_identical_media_is_zero():
    spec = EnvironmentSpec("iid-edges", 2, WeightDistribution.uniform(1.0, 2.0), seed=4)
    res = empirical_gap_check(spec, spec.with_seed(99), (1.0, 0.0), 20, 3)
    assert res.measured == 0.0 and res.coupling_dist == 0.0 and res.m1 == res.m2


def test_empirical_gap_of_shifted_media_respects_the_primal_bound():
    s1 = EnvironmentSpec("iid-edges", 2, WeightDistribution.uniform(1.0, 2.0), seed=4)
    s2 = EnvironmentSpec("iid-edges", 2, WeightDistribution.uniform(1.1, 2.1), seed=4)
    res = empirical_gap_check(s1, s2, (1.0, 1.0), 30, 4)
    assert res.ok and res.dual_weaker
    assert res.m2 >= res.m1
    assert res.measured == pytest.approx(0.1, abs=0.01)
    zero = empirical_gap_check(s1, s2, (0.0, 0.0), 30, 4)
    assert zero.measured == 0.0


def test_empirical_gap_rejects_structured_media():
    s1 = EnvironmentSpec("hyperplane-symmetric", 2, WeightDistribution.uniform(1.0, 2.0))
    with pytest.raises(ConfigurationError):
        empirical_gap_check(s1, s1, (1.0, 0.0), 5, 2)


def test_disjoint_supports_fall_back_to_the_combined_width():
    res = coupling_gap_bound(MarginalSpec.uniform(1.0, 1.5), MarginalSpec.uniform(2.0, 3.0))
    assert res.ks_distance == 1.0 and res.measured_gap == pytest.approx(1.5)
    assert res.gap_bound == 2.0 and res.ok
