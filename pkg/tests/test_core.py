import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from shiftgen import (ConfigurationError, ConstructionError, ContractError, FieldConfig, PathSample,
                      PointSet, Window, norm_value, shift_points, union_sites)
from shiftgen.core import union_many

finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)
vectors = arrays(np.float64, st.integers(1, 5), elements=finite)


@pytest.mark.parametrize("kind, expected", [("euclidean", 5.0), ("sup", 4.0), ("l1", 7.0)])
def test_norm_examples(kind, expected):
    assert norm_value([3.0, -4.0], kind) == expected


def test_norm_scalar_is_absolute_value():
    assert norm_value(np.array([[-2.5]]), "euclidean") == pytest.approx(2.5)


def test_norm_rejects_nonfinite():
    with pytest.raises(ConstructionError):
        norm_value([1.0, np.nan], "sup")


@pytest.mark.parametrize("kind", ["euclidean", "sup", "l1"])
def test_norm_axioms_on_random_vectors(kind):
    rng = np.random.default_rng(0)
    a = rng.standard_normal((10_000, 3))
    b = rng.standard_normal((10_000, 3))
    c = rng.uniform(0.1, 10.0, 10_000)
    na, nb = norm_value(a, kind), norm_value(b, kind)
    assert np.all(norm_value(a + b, kind) <= na + nb + 1e-12)
    assert np.allclose(norm_value(c[:, None] * a, kind), c * na)
    assert np.all(na >= 0)


@settings(max_examples=200, deadline=None)
@given(vectors, vectors, st.floats(0.0, 1e3), st.sampled_from(["euclidean", "sup", "l1"]))
def test_norm_properties(u, v, c, kind):
    n = min(u.size, v.size)
    u, v = u[:n], v[:n]
    tol = 1e-9 * (1 + norm_value(u, kind) + norm_value(v, kind))
    assert norm_value(u + v, kind) <= norm_value(u, kind) + norm_value(v, kind) + tol
    assert norm_value(c * u, kind) == pytest.approx(c * norm_value(u, kind), rel=1e-9, abs=1e-9)
    assert (norm_value(u, kind) == 0) == bool(np.all(u == 0))


def test_field_config_validation():
    with pytest.raises(ConfigurationError):
        FieldConfig(alpha=0.0)
    with pytest.raises(ConfigurationError):
        FieldConfig(dim_d=0)
    assert FieldConfig(norm_kind="sup").norm_kind.value == "sup"


def test_pointset_basics():
    p = PointSet.of([0.0, 1.0, 2.5])
    assert len(p) == 3 and p.dim_l == 1
    assert p.index_of([2.5]) == 2
    with pytest.raises(ContractError):
        p.index_of([7.0])
    assert PointSet.origin(2).to_list() == [[0.0, 0.0]]
    assert len(PointSet.empty()) == 0


def test_pointset_dedup_and_duplicates():
    p = PointSet.of([1.0, 0.0, 1.0])
    assert p.duplicates() == [2]
    u, inv = p.dedup()
    assert u.to_list() == [[1.0], [0.0]]
    assert inv.tolist() == [0, 1, 0]


def test_shift_points_examples():
    p = PointSet.of([0.0, 1.0])
    assert shift_points(p, [1.0]).to_list() == [[-1.0], [0.0]]
    with pytest.raises(ContractError):
        shift_points(p, [1.0, 2.0])


@settings(max_examples=100, deadline=None)
@given(arrays(np.float64, st.integers(1, 8), elements=st.floats(-100, 100)), st.floats(-50, 50))
def test_shift_inverse(pts, h):
    p = PointSet.of(pts)
    back = shift_points(shift_points(p, [h]), [-h])
    assert np.allclose(back.points, p.points, atol=1e-9)


def test_union_sites_examples():
    a = PointSet.of([0.0, 1.0])
    b = PointSet.of([1.0, 2.0])
    u, ia, ib = union_sites(a, b)
    assert u.to_list() == [[0.0], [1.0], [2.0]]
    assert np.array_equal(u.points[ia], a.points)
    assert np.array_equal(u.points[ib], b.points)
    u2, maps = union_many(a, b, PointSet.origin())
    assert len(u2) == 3 and maps[2].tolist() == [0]


@settings(max_examples=100, deadline=None)
@given(arrays(np.float64, st.integers(0, 6), elements=st.integers(-3, 3).map(float)),
       arrays(np.float64, st.integers(0, 6), elements=st.integers(-3, 3).map(float)))
def test_union_maps_reproduce_inputs(a, b):
    pa, pb = PointSet.of(a), PointSet.of(b)
    u, ia, ib = union_sites(pa, pb)
    assert np.array_equal(u.points[ia], pa.points)
    assert np.array_equal(u.points[ib], pb.points)
    assert not u.duplicates()


def test_union_dimension_mismatch():
    with pytest.raises(ContractError):
        union_sites(PointSet.of([0.0]), PointSet.of([[0.0, 1.0]]))


def test_path_sample_validation():
    p = PointSet.of([0.0, 1.0])
    with pytest.raises(ConstructionError):
        PathSample(p, [1.0])
    with pytest.raises(ConstructionError):
        PathSample(p, [1.0, np.inf])
    path = PathSample(p, [1.0, 2.0])
    assert path.at([1.0]).tolist() == [2.0]
    assert path.scaled(2.0) == PathSample(p, [2.0, 4.0])


def test_window():
    w = Window(2.0, 2)
    assert w.volume == 16.0
    assert w.contains(np.array([[2.0, -2.0], [2.1, 0.0]])).tolist() == [True, False]
    s = w.shifted([1.0, 1.0])
    assert s.contains(np.array([[3.0, 3.0]])).tolist() == [True]
    assert w.doubled().half_width == 4.0
    with pytest.raises(ConfigurationError):
        Window(0.0)
