import numpy as np
import pytest

from zsl_pose.catalog import encode_definition
from zsl_pose.classify import (
    DAP,
    DAP_FLOOR,
    NN_AI,
    NN_NAIVE,
    NN_RANDOM_AI,
    RandomAiConfig,
    build_models,
    class_prototypes,
    dap_score,
    fit,
    predict,
    predict_many,
    random_importance_table,
)
from zsl_pose.distance import ClassModel
from zsl_pose.synthkit import default_variation_spec, synth_dataset


@pytest.fixture(scope="module")
def data(catalog):
    return synth_dataset(catalog, default_variation_spec(sigma=0.05, seed=3), 20)


def test_dap_toy(toy_space):
    defined = ClassModel("grasping", np.array([0.0, 0.0, 1.0, 0.0]), np.ones(4), 2.0)
    sp_hand = type(toy_space)((toy_space.joints[1],))
    model = ClassModel("grasping", np.array([0.0, 1.0, 0.0]), np.ones(3), 1.0)
    assert dap_score(np.array([0.7, 0.2, 0.1]), model, sp_hand) == pytest.approx(0.2, abs=1e-12)
    # Regression factor 1 - |a - v|.
    assert dap_score(np.array([0.2, 0.0, 1.0, 0.0]), defined, toy_space) == pytest.approx(0.8)


def test_dap_floor(toy_space):
    model = ClassModel("x", np.array([0.0, 0.0, 1.0, 0.0]), np.ones(4), 2.0)
    assert dap_score(np.array([1.0, 1.0, 0.0, 0.0]), model, toy_space) == pytest.approx(DAP_FLOOR ** 2)


def test_fit_rejects_unseen_in_training(space, catalog, data):
    x, y = data
    with pytest.raises(ValueError, match="unseen"):
        fit(space, catalog, x, y, "Boxing", NN_AI)


def test_fit_rejects_empty_seen_class(space, catalog, data):
    x, y = data
    keep = (y != "Boxing") & (y != "Skiing")
    with pytest.raises(ValueError, match="Skiing"):
        fit(space, catalog, x[keep], y[keep], "Boxing", NN_AI)


def test_fit_unknown_method(space, catalog, data):
    x, y = data
    keep = y != "Boxing"
    with pytest.raises(ValueError):
        fit(space, catalog, x[keep], y[keep], "Boxing", "svm")


def test_fit_uses_definition_for_unseen(space, catalog, data):
    x, y = data
    keep = y != "Thinking"
    m = fit(space, catalog, x[keep], y[keep], "Thinking", NN_AI)
    by_id = {mm.class_id: mm for mm in m.models}
    np.testing.assert_array_equal(by_id["Thinking"].prototype,
                                  encode_definition(space, catalog.definition("Thinking")))
    np.testing.assert_allclose(by_id["Boxing"].prototype, x[y == "Boxing"].mean(axis=0))
    assert by_id["Thinking"].W == 7


def test_dap_uses_definitions_everywhere(space, catalog, data):
    x, y = data
    keep = y != "Skiing"
    m = fit(space, catalog, x[keep], y[keep], "Skiing", DAP)
    for mm in m.models:
        np.testing.assert_array_equal(mm.prototype, encode_definition(space, catalog.definition(mm.class_id)))


def test_definition_query_maps_to_itself(space, catalog, data):
    x, y = data
    for method in (NN_NAIVE, NN_AI, DAP):
        keep = y != "Boxing"
        m = fit(space, catalog, x[keep], y[keep], "Boxing", method)
        assert predict(m, encode_definition(space, catalog.definition("Boxing"))) == "Boxing"


def test_predict_many_shape(space, catalog, data):
    x, y = data
    keep = y != "Boxing"
    m = fit(space, catalog, x[keep], y[keep], "Boxing", NN_AI)
    out = predict_many(m, x[:7])
    assert out.shape == (7,) and out.dtype.kind == "i"


def test_random_table_deterministic(catalog):
    a = random_importance_table(catalog, np.random.default_rng(5))
    b = random_importance_table(catalog, np.random.default_rng(5))
    np.testing.assert_array_equal(a, b)
    assert a.shape == (22, 14)
    assert set(np.unique(a)) <= {0.0, 1.0}


def test_random_table_row_sums(catalog):
    rng = np.random.default_rng(0)
    sums = np.concatenate([random_importance_table(catalog, rng).sum(axis=1) for _ in range(500)])
    assert sums.min() >= 1
    assert abs(sums.mean() - 7.0) < 0.3


def test_random_models_need_table(catalog):
    protos = {p: encode_definition(catalog.space, catalog.definition(p)) for p in catalog.pose_ids}
    with pytest.raises(ValueError):
        build_models(catalog, protos, NN_RANDOM_AI)
    with pytest.raises(ValueError):
        build_models(catalog, protos, NN_RANDOM_AI, importance=np.ones((3, 14)))
    models = build_models(catalog, protos, NN_RANDOM_AI, importance=np.ones((22, 14)))
    assert all(m.W == 14 for m in models)


def test_class_prototypes_missing_class(data):
    x, y = data
    with pytest.raises(ValueError):
        class_prototypes(x, y, ["Nope"])


def test_random_ai_config():
    with pytest.raises(ValueError):
        RandomAiConfig(trials=0)
