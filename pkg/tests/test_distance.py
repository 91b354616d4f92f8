import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import attribute_kinds, loop_importance_distance, loop_naive_distance
from zsl_pose.catalog import encode_definition, expand_importance
from zsl_pose.distance import (
    IMPORTANCE,
    NAIVE,
    ClassModel,
    MetricParams,
    distance_matrix,
    importance_distance,
    importance_from_terms,
    joint_terms,
    naive_distance,
    nearest,
    prototype,
    rc_weights,
)
from zsl_pose.schema import AttributeSpace, JointSpec


def _reg_space(n):
    return AttributeSpace(tuple(JointSpec(f"j{i}") for i in range(n)))


def test_naive_p1_regression_only():
    sp = _reg_space(2)
    assert naive_distance([0.2, 0.9], [0.5, 0.5], sp) == pytest.approx(0.7, abs=1e-12)


def test_naive_p2_regression_only():
    sp = _reg_space(2)
    assert naive_distance([0, 0], [0.6, 0.8], sp, MetricParams(p=2)) == pytest.approx(1.0, abs=1e-12)


def test_importance_toy(toy_space):
    a = np.array([0.2, 0.7, 0.2, 0.1])
    v = np.array([0.5, 0.0, 1.0, 0.0])
    m = ClassModel("x", v, np.ones(4), 2.0)
    assert importance_distance(a, m, toy_space) == pytest.approx(0.6, abs=1e-12)


def test_importance_toy_zero_elbow_weight(toy_space):
    a = np.array([0.2, 0.7, 0.2, 0.1])
    v = np.array([0.5, 0.0, 1.0, 0.0])
    m = ClassModel("x", v, np.array([0.0, 1, 1, 1]), 1.0)
    assert importance_distance(a, m, toy_space) == pytest.approx(0.9, abs=1e-12)


def test_identical_vectors_leave_only_penalty(space, catalog):
    v = encode_definition(space, catalog.definition("Standing"))
    w, W = expand_importance(space, catalog.importance_row("Standing"))
    m = ClassModel("Standing", v, w, W)
    assert importance_distance(v, m, space) == pytest.approx(0.1 / 14, abs=1e-15)
    assert naive_distance(v, v, space) == 0.0


def test_rc_weights(space):
    rc = rc_weights(space)
    assert rc.sum() == pytest.approx(0.5 * 25 + 8)
    assert rc[space.block("elbow_L").start] == 1.0
    assert np.all(rc[space.block("waist")] == 0.5)


def test_prototype():
    np.testing.assert_allclose(prototype([[0, 1], [1, 0], [0.5, 0.5]]), [0.5, 0.5])
    with pytest.raises(ValueError):
        prototype(np.zeros((0, 3)))


def test_bad_params():
    with pytest.raises(ValueError):
        MetricParams(p=0)
    with pytest.raises(ValueError):
        MetricParams(lam=-1)
    with pytest.raises(ValueError):
        ClassModel("x", np.zeros(2), np.zeros(2), 0.0)


def _models(space, catalog):
    out = []
    for pose in catalog.pose_ids:
        w, W = expand_importance(space, catalog.importance_row(pose))
        out.append(ClassModel(pose, encode_definition(space, catalog.definition(pose)), w, W))
    return out


@pytest.mark.parametrize("p", [1.0, 2.0, 3.0])
def test_matrix_matches_oracle(space, catalog, rng, p):
    models = _models(space, catalog)
    kinds = attribute_kinds(space)
    q = rng.uniform(size=(20, space.dim))
    params = MetricParams(p=p)
    d_imp = distance_matrix(q, models, space, IMPORTANCE, params)
    d_naive = distance_matrix(q, models, space, NAIVE, params)
    for n in range(len(q)):
        for c, m in enumerate(models):
            ref = loop_importance_distance(q[n], m.prototype, kinds, m.attr_weights, m.W, p, 0.1)
            assert d_imp[n, c] == pytest.approx(ref, rel=1e-12)
            assert d_naive[n, c] == pytest.approx(loop_naive_distance(q[n], m.prototype, kinds, p), rel=1e-12)


def test_naive_without_rc(space, rng):
    a, v = rng.uniform(size=(2, space.dim))
    kinds = attribute_kinds(space)
    got = naive_distance(a, v, space, MetricParams(use_rc=False))
    assert got == pytest.approx(loop_naive_distance(a, v, kinds, 1.0, use_rc=False), rel=1e-12)


def test_joint_terms_route(space, catalog, rng):
    models = _models(space, catalog)
    q = rng.uniform(size=(15, space.dim))
    table = np.stack([m.attr_weights[[space.block(i).start for i in range(14)]] for m in models])
    for p in (1.0, 2.0):
        params = MetricParams(p=p)
        terms = joint_terms(q, np.stack([m.prototype for m in models]), space, p)
        np.testing.assert_allclose(importance_from_terms(terms, table, params),
                                   distance_matrix(q, models, space, IMPORTANCE, params), rtol=1e-12)


vec = st.lists(st.floats(0, 1), min_size=4, max_size=4)


@given(vec, vec, st.sampled_from([1.0, 2.0, 0.5]))
def test_symmetry_and_nonnegativity(a, v, p):
    sp = AttributeSpace((JointSpec("e"), JointSpec("h", kind="classification", labels=("x", "y", "z"))))
    w = np.array([1.0, 0.0, 0.0, 0.0]) + 0.5
    ma = ClassModel("a", np.array(a), w, 2.0)
    mv = ClassModel("v", np.array(v), w, 2.0)
    params = MetricParams(p=p)
    dav = importance_distance(v, ma, sp, params)
    assert dav == pytest.approx(importance_distance(a, mv, sp, params), rel=1e-12, abs=1e-15)
    assert dav >= params.lam / 2.0
    assert naive_distance(a, v, sp, params) >= 0


@settings(max_examples=50)
@given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1))
def test_triangle_inequality_p1(a, b, c):
    sp = _reg_space(1)
    dab = naive_distance([a], [b], sp)
    assert dab <= naive_distance([a], [c], sp) + naive_distance([c], [b], sp) + 1e-12


def test_nearest_ties_go_to_first(toy_space):
    v = np.array([0.5, 1.0, 0.0, 0.0])
    m1 = ClassModel("first", v.copy(), np.ones(4), 2.0)
    m2 = ClassModel("second", v.copy(), np.ones(4), 2.0)
    assert nearest(v, [m1, m2], toy_space)[0] == "first"
    assert nearest(v, [m2, m1], toy_space)[0] == "second"
    with pytest.raises(ValueError):
        nearest(v, [], toy_space)


def test_penalty_ordering(toy_space):
    # Equal weighted distance; larger W means smaller lam / W.
    v = np.array([0.5, 1.0, 0.0, 0.0])
    small = ClassModel("small", v, np.array([1.0, 0, 0, 0]), 1.0)
    large = ClassModel("large", v, np.array([1.0, 0, 0, 0]), 2.0)
    assert nearest(v, [small, large], toy_space)[0] == "large"
    d = distance_matrix(v, [small, large], toy_space)
    assert d[0, 0] == pytest.approx(0.1) and d[0, 1] == pytest.approx(0.05)
