import numpy as np
import pytest
from shapely.geometry import Point, Polygon

from dereco.config import ConfigError, ContractError
from dereco.env import (
    load_catalog,
    make_object,
    privileged_vector,
    sample_object,
    seen_shapes,
    shapes_by_name,
    unseen_shapes,
)


def test_catalog_contents():
    seen = [s.name for s in seen_shapes()]
    unseen = [s.name for s in unseen_shapes()]
    assert seen == ["bar", "cylinder", "board"]
    assert unseen == [
        "hexagon",
        "triangle",
        "l_bar",
        "thick_bar",
        "octagon",
        "semi_ellipse",
    ]


def test_polygons_simple_and_grasp_points_on_boundary():
    for shape in load_catalog():
        poly = Polygon(shape.vertices)
        assert poly.is_valid and poly.is_simple, shape.name
        for gp in shape.grasp_points:
            assert poly.boundary.distance(Point(gp)) < 1e-9, (shape.name, gp)


def test_bounding_boxes_desk_scale():
    for shape in load_catalog():
        verts = np.asarray(shape.vertices)
        extent = verts.max(axis=0) - verts.min(axis=0)
        assert np.all(extent >= 0.1 - 1e-9) and np.all(extent <= 0.6 + 1e-9), shape.name


def test_singleton_catalog_one_hot():
    catalog = shapes_by_name(["bar"])
    obj = sample_object(np.random.default_rng(0), catalog)
    assert obj.name == "bar"
    np.testing.assert_array_equal(obj.one_hot, [1.0])


def test_sampling_deterministic_per_seed():
    catalog = seen_shapes()
    a = sample_object(np.random.default_rng(123), catalog)
    b = sample_object(np.random.default_rng(123), catalog)
    assert a.name == b.name and a.mass == b.mass and a.friction == b.friction


def test_sample_bounds_and_one_hot_integrity():
    catalog = seen_shapes()
    rng = np.random.default_rng(7)
    for _ in range(500):
        obj = sample_object(rng, catalog)
        assert 0.2 <= obj.mass <= 1.0
        assert 0.5 <= obj.friction <= 1.0
        assert np.count_nonzero(obj.one_hot) == 1
        assert obj.one_hot.sum() == 1.0


def test_mass_mean_monte_carlo():
    # mean of U[0.2, 1.0] is 0.6; std of the mean over 10k draws ~ 0.0023
    catalog = seen_shapes()
    rng = np.random.default_rng(99)
    masses = [sample_object(rng, catalog).mass for _ in range(10000)]
    assert 0.58 <= np.mean(masses) <= 0.62


def test_empty_catalog_rejected():
    with pytest.raises(ConfigError):
        sample_object(np.random.default_rng(0), [])


def test_privileged_vector_layout():
    catalog = seen_shapes()
    obj = make_object(catalog[1], catalog, mass=0.6, friction=0.75)
    vec = privileged_vector(obj, len(catalog))
    assert vec.shape == (5,)
    np.testing.assert_array_equal(vec[:3], [0.0, 1.0, 0.0])
    assert abs(vec[3] - 0.5) < 1e-12
    assert abs(vec[4] - 0.5) < 1e-12


def test_privileged_vector_width_mismatch():
    catalog = seen_shapes()
    obj = make_object(catalog[0], catalog, mass=0.5, friction=0.6)
    with pytest.raises(ContractError):
        privileged_vector(obj, 7)


def test_unseen_object_has_zero_one_hot_over_training_catalog():
    train = seen_shapes()
    unseen = unseen_shapes()[0]
    obj = make_object(unseen, train, mass=0.5, friction=0.8)
    np.testing.assert_array_equal(obj.one_hot, np.zeros(3))
    assert obj.shape_id == -1 and not obj.seen
