"""文件读写与 JSON 文档模型测试"""
import json

import pandas as pd
import pytest
from numpy.testing import assert_allclose

from geometry.ellipse import conic_to_params
from result_storage import (
    ellipse_from_dict,
    read_intrinsics,
    read_point_cloud,
    save_benchmark,
    write_json,
)
from schemas import CalibrationJob, HypothesesDoc, SCHEMAS, dump_document, get_schema, validate_document
from utils.errors import InputError

PLY = """ply
format ascii 1.0
element vertex 3
property float x
property float y
property float z
property float intensity
end_header
1 2 3 0.5
4 5 6 0.1
7 8 9 0.9
"""


def test_read_ascii_ply_ignores_extra_properties(tmp_path):
    path = tmp_path / "cloud.ply"
    path.write_text(PLY, encoding="utf-8")
    assert_allclose(read_point_cloud(str(path)), [[1, 2, 3], [4, 5, 6], [7, 8, 9]])


def test_binary_ply_is_rejected(tmp_path):
    path = tmp_path / "cloud.ply"
    path.write_text(PLY.replace("ascii", "binary_little_endian"), encoding="utf-8")
    with pytest.raises(InputError):
        read_point_cloud(str(path))


def test_csv_requires_xyz_columns(tmp_path):
    path = tmp_path / "cloud.csv"
    path.write_text("a,b,c\n1,2,3\n", encoding="utf-8")
    with pytest.raises(InputError):
        read_point_cloud(str(path))
    path.write_text("x,y,z\n1,2,nan\n", encoding="utf-8")
    with pytest.raises(InputError):
        read_point_cloud(str(path))


def test_geometric_and_conic_ellipse_agree():
    geometric = {"cx": 320.0, "cy": 240.0, "a": 80.0, "b": 40.0, "theta": 0.3}
    conic = ellipse_from_dict(geometric)
    again = ellipse_from_dict(conic.to_dict())
    params = conic_to_params(again)
    assert_allclose([params.cx, params.cy, params.a, params.b, params.theta],
                    [320.0, 240.0, 80.0, 40.0, 0.3], atol=1e-8)
    with pytest.raises(InputError):
        ellipse_from_dict({"cx": 1.0})
    with pytest.raises(InputError):
        ellipse_from_dict({"Q": [[1.0, 0.0], [0.0, 1.0]]})


def test_intrinsics_round_trip(tmp_path):
    path = tmp_path / "k.json"
    write_json({"fx": 600.0, "fy": 610.0, "cx": 640.0, "cy": 480.0}, str(path))
    k = read_intrinsics(str(path))
    assert (k.fx, k.fy, k.cx, k.cy) == (600.0, 610.0, 640.0, 480.0)
    path.write_text(json.dumps({"fx": 600.0}), encoding="utf-8")
    with pytest.raises(InputError):
        read_intrinsics(str(path))


@pytest.mark.parametrize("doc", [
    {"fx": 0.0, "fy": 600.0, "cx": 640.0, "cy": 480.0},
    {"fx": 600.0, "fy": -1.0, "cx": 640.0, "cy": 480.0},
    {"fx": 600.0, "fy": 600.0, "cx": 640.0, "cy": 480.0, "skew": 0.0},
])
def test_intrinsics_document_rules(tmp_path, doc):
    path = tmp_path / "k.json"
    write_json(doc, str(path))
    with pytest.raises(InputError):
        read_intrinsics(str(path))


@pytest.mark.parametrize("doc", [
    {"cx": 320.0, "cy": 240.0, "a": 40.0, "b": 80.0},
    {"cx": 320.0, "cy": 240.0, "a": 80.0, "b": 0.0},
    {"cx": 320.0, "cy": 240.0, "a": 80.0, "b": 40.0, "theta": 0.1, "angle_deg": 5.7},
    {"Q": [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, -1.0]], "cx": 0.0},
])
def test_ellipse_document_rules(doc):
    with pytest.raises(InputError):
        ellipse_from_dict(doc)


def test_write_json_keeps_unicode(tmp_path):
    path = tmp_path / "out" / "doc.json"
    text = write_json({"说明": "圆心"}, str(path))
    assert "圆心" in text
    assert json.loads(path.read_text(encoding="utf-8")) == {"说明": "圆心"}


def test_save_benchmark_files(tmp_path):
    frame = pd.DataFrame({"trial": [0, 1], "method": ["cga", "cga"], "e_center_m": [0.1, 0.2]})
    paths = save_benchmark(frame, {"cga": {"trials": 2}}, str(tmp_path))
    assert pd.read_csv(paths["csv"])["e_center_m"].tolist() == [0.1, 0.2]
    assert json.loads(open(paths["summary"], encoding="utf-8").read()) == {"cga": {"trials": 2}}


def test_hypotheses_document_drops_missing_fields():
    doc = dump_document(HypothesesDoc, {
        "hypotheses": [{"center": [1.0, 2.0], "loss": 0.0, "distance": 3.0}],
        "single": True,
        "ellipse_center": [1.0, 2.0],
        "selected": [1.0, 2.0],
        "selection_rule": "single",
    })
    assert "error" not in doc
    assert doc["selection_rule"] == "single"
    with pytest.raises(InputError):
        dump_document(HypothesesDoc, {"hypotheses": [], "single": True, "ellipse_center": [0.0, 0.0]})


def test_job_requires_four_circles():
    circle = {"points": "p.csv", "ellipse": "e.json", "radius": 0.3}
    with pytest.raises(InputError):
        validate_document(CalibrationJob, {"intrinsics": "k.json", "frames": [{"circles": [circle] * 3}]})
    job = validate_document(CalibrationJob, {"intrinsics": "k.json", "frames": [{"circles": [circle] * 4}]})
    assert job.options.mode == "auto"


def test_every_schema_is_published():
    for name in SCHEMAS:
        assert "properties" in get_schema(name)
    with pytest.raises(InputError):
        get_schema("nope")
