"""
结果存储模块
点云 / 内参 / 椭圆文件的读取，JSON 与 CSV 结果的写入
"""

import json
import os
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

from geometry.core import Intrinsics
from geometry.ellipse import Conic, EllipseParams, params_to_conic
from schemas import ConicEllipseDoc, GeometricEllipseDoc, IntrinsicsDoc, validate_document
from utils.errors import InputError
from utils.logger import get_module_logger

logger = get_module_logger("storage")

BENCH_CSV_NAME = "results.csv"
BENCH_SUMMARY_NAME = "summary.json"


def _require_file(path: str, what: str):
    if not path or not os.path.isfile(path):
        raise InputError(f"{what}文件不存在: {path}")


def _read_json(path: str, what: str) -> Any:
    _require_file(path, what)
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise InputError(f"{what}文件无法解析: {path} ({e})") from e


# ============ 点云 ============

def _read_ply(path: str) -> np.ndarray:
    """ASCII PLY，只读 vertex 元素的 x y z，其余属性（如 intensity）忽略"""
    with open(path, "r", encoding="utf-8") as f:
        lines = f.read().splitlines()
    if not lines or lines[0].strip() != "ply":
        raise InputError(f"不是 PLY 文件: {path}")

    n_vertex = None
    properties: List[str] = []
    in_vertex = False
    body_start = None
    for i, line in enumerate(lines[1:], start=1):
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "format" and parts[1] != "ascii":
            raise InputError(f"只支持 ASCII PLY，实际 {parts[1]}")
        elif parts[0] == "element":
            in_vertex = parts[1] == "vertex"
            if in_vertex:
                n_vertex = int(parts[2])
        elif parts[0] == "property" and in_vertex:
            properties.append(parts[-1])
        elif parts[0] == "end_header":
            body_start = i + 1
            break

    if n_vertex is None or body_start is None:
        raise InputError(f"PLY 头缺少 vertex 元素或 end_header: {path}")
    try:
        cols = [properties.index(axis) for axis in ("x", "y", "z")]
    except ValueError as e:
        raise InputError(f"PLY vertex 缺少 x/y/z 属性: {path}") from e

    rows = [line.split() for line in lines[body_start:body_start + n_vertex]]
    if len(rows) < n_vertex:
        raise InputError(f"PLY 顶点数不足: 声明 {n_vertex}，实际 {len(rows)}")
    try:
        return np.array([[float(r[c]) for c in cols] for r in rows], dtype=float).reshape(-1, 3)
    except (ValueError, IndexError) as e:
        raise InputError(f"PLY 顶点数据无法解析: {path} ({e})") from e


def read_point_cloud(path: str) -> np.ndarray:
    """
    读取点云：带 x,y,z 表头的 CSV 或 ASCII PLY

    Returns:
        (N, 3) 数组

    Raises:
        InputError: 文件不存在、为空或格式不对
    """
    _require_file(path, "点云")
    if path.lower().endswith(".ply"):
        points = _read_ply(path)
    else:
        try:
            df = pd.read_csv(path)
        except pd.errors.EmptyDataError as e:
            raise InputError(f"点云文件为空: {path}") from e
        except (OSError, pd.errors.ParserError) as e:
            raise InputError(f"点云文件无法解析: {path} ({e})") from e
        missing = [c for c in ("x", "y", "z") if c not in df.columns]
        if missing:
            raise InputError(f"点云 CSV 缺少列 {missing}: {path}")
        points = df[["x", "y", "z"]].to_numpy(dtype=float)

    if len(points) == 0:
        raise InputError(f"点云文件没有点: {path}")
    if not np.all(np.isfinite(points)):
        raise InputError(f"点云包含 NaN/Inf: {path}")
    logger.debug(f"读取点云 {path}: {len(points)} 个点")
    return points


# ============ 内参 / 椭圆 ============

def read_intrinsics(path: str) -> Intrinsics:
    doc = validate_document(IntrinsicsDoc, _read_json(path, "内参"))
    return Intrinsics(doc.fx, doc.fy, doc.cx, doc.cy)


def ellipse_from_dict(data: Dict) -> Conic:
    """
    椭圆 JSON：二次曲线形式 {"Q": 3x3} 或几何形式 {cx, cy, a, b, theta}

    两种形式分别按 ConicEllipseDoc / GeometricEllipseDoc 校验，多余字段、a < b、
    非正半轴都报 InputError
    """
    if not isinstance(data, dict):
        raise InputError("椭圆 JSON 必须是对象")
    if "Q" in data:
        doc = validate_document(ConicEllipseDoc, data)
        return Conic(np.asarray(doc.Q, dtype=float))
    doc = validate_document(GeometricEllipseDoc, data)
    return params_to_conic(EllipseParams(cx=doc.cx, cy=doc.cy, a=doc.a, b=doc.b, theta=doc.theta))


def read_ellipse(path: str) -> Conic:
    return ellipse_from_dict(_read_json(path, "椭圆"))


def read_job(path: str) -> Dict:
    return _read_json(path, "标定任务")


# ============ 写出 ============

def write_json(data: Any, path: Optional[str] = None) -> str:
    """
    写 JSON（UTF-8，缩进 2）；path 为空时只返回文本

    Returns:
        JSON 文本
    """
    text = json.dumps(data, ensure_ascii=False, indent=2)
    if path:
        parent = os.path.dirname(os.path.abspath(path))
        os.makedirs(parent, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            f.write(text + "\n")
        logger.info(f"已写入 {path}")
    return text


def write_frame(df: pd.DataFrame, path: str):
    """DataFrame 写 CSV；浮点统一 17 位有效数字，同一输入输出逐字节一致"""
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)
    df.to_csv(path, index=False, encoding="utf-8", float_format="%.17g")
    logger.info(f"已写入 {path} ({len(df)} 行)")


def save_loss_field(loss_field, path: str):
    write_frame(loss_field.to_frame(), path)


def save_benchmark(frame: pd.DataFrame, summary: Dict, out_dir: str) -> Dict[str, str]:
    """
    写基准结果：results.csv（逐试验逐方法）与 summary.json

    Returns:
        {"csv": 路径, "summary": 路径}
    """
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, BENCH_CSV_NAME)
    summary_path = os.path.join(out_dir, BENCH_SUMMARY_NAME)
    write_frame(frame, csv_path)
    write_json(summary, summary_path)
    return {"csv": csv_path, "summary": summary_path}
