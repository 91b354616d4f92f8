import json

import numpy as np
import pytest

from zsl_pose.catalog import (
    CatalogError,
    ImportanceRow,
    PoseDefinition,
    catalog_to_dict,
    default_catalog,
    encode_definition,
    expand_importance,
    load_catalog,
    save_catalog,
)
from zsl_pose.schema import AttributeSpace, JointSpec, validate_vector

SHIPPED = "src/zsl_pose/data/hdposeds_catalog.json"


def test_counts(catalog):
    assert len(catalog.definitions) == 22
    assert len(catalog.importance) == 22


def test_standing_definition(catalog):
    s = catalog.definition("Standing").status
    assert s["head"] == "front"
    assert s["shoulder_L"] == s["shoulder_R"] == "down"
    assert s["elbow_L"] == s["elbow_R"] == 0.0
    assert s["wrist_L"] == s["wrist_R"] == 0.5
    assert s["hand_L"] == s["hand_R"] == "normal"
    assert s["waist"] == "straight"
    assert all(s[k] == 0.0 for k in ("hip_L", "hip_R", "knee_L", "knee_R"))


def test_thinking_importance(catalog):
    w = catalog.importance_row("Thinking").weights
    ones = {k for k, v in w.items() if v == 1.0}
    assert ones == {"shoulder_L", "shoulder_R", "elbow_R", "hip_L", "hip_R", "knee_L", "knee_R"}


def test_waist_twisting_left_kept_verbatim(catalog):
    # Asymmetric elbows reproduced as printed.
    s = catalog.definition("WaistTwistingL").status
    assert (s["elbow_L"], s["elbow_R"]) == (0.0, 0.5)


def test_encode_standing(space, catalog):
    v = encode_definition(space, catalog.definition("Standing"))
    np.testing.assert_array_equal(v[space.block("head")], [0, 0, 0, 0, 1])
    assert v[space.block("wrist_L")][0] == v[space.block("wrist_R")][0] == 0.5
    np.testing.assert_array_equal(v[space.block("hand_L")], [1, 0, 0])


def test_encode_boxing(space, catalog):
    v = encode_definition(space, catalog.definition("Boxing"))
    np.testing.assert_array_equal(v[space.block("hand_L")], [0, 1, 0])
    np.testing.assert_array_equal(v[space.block("hand_R")], [0, 1, 0])
    assert v[space.block("elbow_L")][0] == v[space.block("elbow_R")][0] == 1.0


def test_encode_single_regression_joint():
    sp = AttributeSpace((JointSpec("knee"),))
    np.testing.assert_array_equal(encode_definition(sp, PoseDefinition("x", {"knee": 0.3})), [0.3])


def test_every_encoded_definition_is_valid(space, catalog):
    for d in catalog.definitions:
        assert validate_vector(space, encode_definition(space, d)) is None


def test_expand_standing(space, catalog):
    w, W = expand_importance(space, catalog.importance_row("Standing"))
    np.testing.assert_array_equal(w, np.ones(33))
    assert W == 14


def test_expand_thinking(space, catalog):
    _, W = expand_importance(space, catalog.importance_row("Thinking"))
    assert W == 7


def test_expand_all_zero_rejected():
    sp = AttributeSpace((JointSpec("knee"),))
    with pytest.raises(CatalogError, match="all-zero"):
        expand_importance(sp, ImportanceRow("x", {"knee": 0.0}))


def test_expand_properties(space, catalog):
    owner = space.attribute_joint_index()
    for row in catalog.importance:
        w, W = expand_importance(space, row)
        assert W == sum(1 for v in row.weights.values() if v != 0)
        for j in range(len(space.joints)):
            assert len(set(w[owner == j])) == 1


def test_continuous_weights(space, catalog):
    row = ImportanceRow("x", {n: 0.25 for n in space.joint_names})
    w, W = expand_importance(space, row)
    assert W == pytest.approx(3.5)
    assert np.all(w == 0.25)


def test_round_trip(catalog, tmp_path):
    path = tmp_path / "cat.json"
    save_catalog(catalog, path)
    assert load_catalog(path) == catalog


def test_shipped_file_matches_builtin(catalog):
    assert load_catalog(SHIPPED) == catalog


def _write(tmp_path, data):
    path = tmp_path / "cat.json"
    path.write_text(json.dumps(data))
    return path


def test_unknown_label(catalog, tmp_path):
    data = catalog_to_dict(catalog)
    data["definitions"]["Standing"]["waist"] = "diagonal"
    with pytest.raises(CatalogError, match="unknown label 'diagonal'"):
        load_catalog(_write(tmp_path, data))


def test_missing_joint(catalog, tmp_path):
    data = catalog_to_dict(catalog)
    del data["definitions"]["Sitting"]["knee_R"]
    with pytest.raises(CatalogError, match="missing joint 'knee_R'"):
        load_catalog(_write(tmp_path, data))


def test_importance_missing_joint(catalog, tmp_path):
    data = catalog_to_dict(catalog)
    del data["importance"]["Boxing"]["knee_L"]
    with pytest.raises(CatalogError, match="importance 'Boxing'.*missing joint 'knee_L'"):
        load_catalog(_write(tmp_path, data))


def test_unknown_joint(catalog, tmp_path):
    data = catalog_to_dict(catalog)
    data["definitions"]["Sitting"]["tail"] = 0.5
    with pytest.raises(CatalogError, match="unknown joint 'tail'"):
        load_catalog(_write(tmp_path, data))


def test_all_zero_importance_rejected_at_load(catalog, tmp_path):
    data = catalog_to_dict(catalog)
    data["importance"]["Boxing"] = dict.fromkeys(data["importance"]["Boxing"], 0)
    with pytest.raises(CatalogError, match="all-zero"):
        load_catalog(_write(tmp_path, data))


def test_parse_error_location(tmp_path):
    path = tmp_path / "cat.json"
    path.write_text('{\n  "format_version": 1,\n  "definitions": {,}\n}')
    with pytest.raises(CatalogError, match=r"cat.json:3:"):
        load_catalog(path)


def test_bad_version(catalog, tmp_path):
    data = catalog_to_dict(catalog)
    data["format_version"] = 99
    with pytest.raises(CatalogError, match="format_version"):
        load_catalog(_write(tmp_path, data))


def test_custom_space_by_reference(tmp_path):
    (tmp_path / "space.json").write_text(json.dumps({"joints": [
        {"name": "knee", "kind": "regression"},
        {"name": "hand", "kind": "classification", "labels": ["open", "fist"]},
    ]}))
    data = {
        "format_version": 1,
        "space_ref": "space.json",
        "definitions": {"kneel": {"knee": 1.0, "hand": "open"}, "punch": {"knee": 0.0, "hand": "fist"}},
        "importance": {"kneel": {"knee": 1, "hand": 0}, "punch": {"knee": 0, "hand": 1}},
    }
    cat = load_catalog(_write(tmp_path, data))
    assert cat.space.dim == 3
    np.testing.assert_array_equal(encode_definition(cat.space, cat.definition("punch")), [0, 0, 1])
    save_catalog(cat, tmp_path / "again.json")
    assert load_catalog(tmp_path / "again.json") == cat


def test_default_catalog_is_fresh_each_call():
    assert default_catalog() == default_catalog()
