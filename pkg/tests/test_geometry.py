import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from taperscat.geometry import (SHAPE_NAMES, BoundaryCurve, GeometryError, closest_point, contains,
                                distance_to_curve, evaluate, sample_nodes, shape_registry)

ALL_CURVES = [c for name in SHAPE_NAMES for c in shape_registry(name)]
IDS = [f"{c.name}@{c.center_offset}" for c in ALL_CURVES]
params = st.floats(0.0, 2 * math.pi, allow_nan=False)


def test_circle_at_zero():
    s = evaluate(shape_registry("circle")[0], 0.0)
    assert np.allclose(s.position, (1, 0), atol=1e-15)
    assert np.allclose(s.normal, (1, 0), atol=1e-15)


def test_kite_at_pi():
    s = evaluate(shape_registry("kite")[0], math.pi)
    assert np.allclose(s.position, (-1, 0), atol=1e-15)


def test_leaf_at_zero():
    s = evaluate(shape_registry("leaf3")[0], 0.0)
    assert np.allclose(s.position, (1.2, 0), atol=1e-15)


def test_peanut_formula():
    s = evaluate(shape_registry("multi")[0], 0.3)
    r = math.sqrt(3 * math.cos(0.3) ** 2 + 1)
    expect = (r * math.cos(0.3 + math.pi / 4) - 2, r * math.sin(0.3 + math.pi / 4) + 2)
    assert np.allclose(s.position, expect, atol=1e-14)


def test_unknown_kind_and_name():
    with pytest.raises(GeometryError):
        BoundaryCurve("ellipse")
    with pytest.raises(GeometryError):
        shape_registry("banana")


def test_circle_four_nodes():
    s = sample_nodes(shape_registry("circle")[0], 4)
    assert np.allclose(s.position, [(1, 0), (0, 1), (-1, 0), (0, -1)], atol=1e-15)


@pytest.mark.parametrize("curve", ALL_CURVES, ids=IDS)
def test_sixteen_nodes_increasing(curve):
    s = sample_nodes(curve, 16)
    assert len(s) == 16
    assert np.all(np.diff(s.t) > 0)


@pytest.mark.parametrize("n", [7, 2, 0, 15.5])
def test_bad_node_counts(n):
    with pytest.raises(GeometryError):
        sample_nodes(shape_registry("kite")[0], n)


def _polygon_length(curve, n):
    p = sample_nodes(curve, n).position
    return np.sum(np.linalg.norm(np.roll(p, -1, 0) - p, axis=1))


def test_kite_length_self_convergence():
    kite = shape_registry("kite")[0]
    assert abs(_polygon_length(kite, 64) / _polygon_length(kite, 1024) - 1) < 0.01


def test_distance_examples():
    c = shape_registry("circle")[0]
    assert distance_to_curve(c, (1, 0)) < 1e-12
    assert abs(distance_to_curve(c, (2, 0)) - 1) < 1e-12
    assert abs(distance_to_curve(c, (0, 0)) - 1) < 1e-12


def test_closest_point_parameter():
    c = shape_registry("circle")[0]
    t, d = closest_point(c, (0.0, 3.0))
    # the distance is flat at its minimum, so t is only resolved to ~sqrt(eps)
    assert abs(t - math.pi / 2) < 1e-6 and abs(d - 2) < 1e-12


def test_contains():
    kite = shape_registry("kite")[0]
    assert contains(kite, (0.0, 0.0))
    assert not contains(kite, (3.0, 0.0))
    assert list(contains(kite, [(0.0, 0.0), (0.0, 2.0)])) == [True, False]


@pytest.mark.parametrize("curve", ALL_CURVES, ids=IDS)
def test_derivatives_match_finite_differences(curve):
    t = np.linspace(0, 2 * math.pi, 37)
    h = 1e-5
    fd = (curve.derivatives(t + h)[0] - curve.derivatives(t - h)[0]) / (2 * h)
    fdd = (curve.derivatives(t + h)[1] - curve.derivatives(t - h)[1]) / (2 * h)
    _, dx, ddx = curve.derivatives(t)
    assert np.max(np.abs(fd - dx)) < 1e-8
    assert np.max(np.abs(fdd - ddx)) < 1e-7


@pytest.mark.parametrize("curve", ALL_CURVES, ids=IDS)
def test_outward_orientation(curve):
    s = sample_nodes(curve, 512)
    c = np.asarray(curve.center_offset)
    assert np.all(np.einsum("ij,ij->i", s.position - c, s.normal) > 0)


@pytest.mark.parametrize("curve", ALL_CURVES, ids=IDS)
def test_periodic_closure(curve):
    a = evaluate(curve, 0.0).position
    for eps in (1e-3, 1e-6, 1e-9):
        assert np.linalg.norm(a - evaluate(curve, 2 * math.pi - eps).position) < 10 * eps


@pytest.mark.parametrize("curve", ALL_CURVES, ids=IDS)
def test_tangent_never_vanishes(curve):
    assert sample_nodes(curve, 4096).jacobian.min() > 0.1


@given(t=params, idx=st.integers(0, len(ALL_CURVES) - 1))
def test_sample_invariants(t, idx):
    s = evaluate(ALL_CURVES[idx], t)
    assert abs(np.dot(s.normal, s.tangent)) <= 1e-12 * max(1.0, s.jacobian)
    assert abs(np.linalg.norm(s.normal) - 1) <= 1e-12
    assert abs(s.jacobian - np.linalg.norm(s.tangent)) <= 1e-14 * s.jacobian


@pytest.mark.parametrize("curve", ALL_CURVES, ids=IDS)
def test_points_on_curve_have_zero_distance(curve):
    t = np.random.default_rng(3).uniform(0, 2 * math.pi, 100)
    pts = evaluate(curve, t).position
    assert np.max(distance_to_curve(curve, pts)) <= 1e-8


@given(t=params, s=st.floats(0.05, 1.0), idx=st.integers(0, len(ALL_CURVES) - 1))
def test_distance_along_normal(t, s, idx):
    curve = ALL_CURVES[idx]
    smp = evaluate(curve, t)
    # a short step outward along the normal: the foot point stays nearby
    p = smp.position + 0.01 * s * smp.normal
    assert abs(distance_to_curve(curve, p) - 0.01 * s) < 1e-9
