"""
JSON 文档模型
CLI 读写的每种 JSON 文档都对应一个 pydantic 模型；model_json_schema() 即对外发布的 schema
"""

from typing import Dict, List, Literal, Optional, Type

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from utils.errors import InputError

Vec2 = List[float]
Vec3 = List[float]
Matrix3 = List[List[float]]
Matrix4 = List[List[float]]


def _check_shape(value, rows: int, cols: Optional[int] = None, name: str = "value"):
    if cols is None:
        if len(value) != rows:
            raise ValueError(f"{name} 长度必须为 {rows}")
        return value
    if len(value) != rows or any(len(row) != cols for row in value):
        raise ValueError(f"{name} 必须是 {rows}x{cols} 矩阵")
    return value


class IntrinsicsDoc(BaseModel):
    model_config = ConfigDict(extra="forbid")

    fx: float = Field(gt=0)
    fy: float = Field(gt=0)
    cx: float
    cy: float


class ConicEllipseDoc(BaseModel):
    model_config = ConfigDict(extra="forbid")

    Q: Matrix3

    @field_validator("Q")
    @classmethod
    def _q_shape(cls, v):
        return _check_shape(v, 3, 3, "Q")


class GeometricEllipseDoc(BaseModel):
    model_config = ConfigDict(extra="forbid")

    cx: float
    cy: float
    a: float = Field(gt=0)
    b: float = Field(gt=0)
    theta: float = 0.0

    @model_validator(mode="after")
    def _axes(self):
        if self.a < self.b:
            raise ValueError("半长轴 a 必须 ≥ 半短轴 b")
        return self


class CircleDoc(BaseModel):
    """fit-circle3d 输出"""
    center: Vec3
    normal: Vec3
    radius: float = Field(gt=0)
    inliers: Optional[List[int]] = None
    inlier_count: Optional[int] = None
    mean_residual: Optional[float] = None
    iterations: Optional[int] = None

    @field_validator("center", "normal")
    @classmethod
    def _vec3(cls, v):
        return _check_shape(v, 3, name="向量")


class HypothesisDoc(BaseModel):
    center: Vec2
    loss: float
    distance: float
    ratio: Optional[float] = None


class HypothesesDoc(BaseModel):
    """refine-center2d 输出"""
    hypotheses: List[HypothesisDoc] = Field(min_length=1, max_length=2)
    single: bool
    ellipse_center: Vec2
    selected: Optional[Vec2] = None
    selection_rule: Optional[Literal["ratio", "loss_rank", "single"]] = None
    physical_ratio: Optional[float] = None
    error: Optional[str] = None


class CorrespondenceReport(BaseModel):
    frame: int
    circle: int
    p3d: Vec3
    q2d: Vec2
    hypotheses: List[Vec2]
    rule: Literal["homography", "paired", "single", "loss_rank"]
    reproj_px: float
    inlier: bool


class ExtrinsicsDoc(BaseModel):
    """calibrate 输出"""
    T: Matrix4
    mean_reproj_px: float
    inliers: List[int]
    mode: Literal["auto", "homography", "paired"]
    correspondences: List[CorrespondenceReport] = Field(default_factory=list)

    @field_validator("T")
    @classmethod
    def _t_shape(cls, v):
        return _check_shape(v, 4, 4, "T")


class CircleEntry(BaseModel):
    model_config = ConfigDict(extra="forbid")

    points: str = Field(description="三维边界点文件（CSV 或 ASCII PLY）")
    ellipse: str = Field(description="椭圆文件（二次曲线或几何形式 JSON）")
    radius: float = Field(gt=0)


class PairEntry(BaseModel):
    """同一帧内两个共面圆的声明；ratio 缺省时取两者半径之比"""
    model_config = ConfigDict(extra="forbid")

    primary: int = Field(ge=0)
    secondary: int = Field(ge=0)
    ratio: Optional[float] = Field(default=None, gt=0)

    @model_validator(mode="after")
    def _distinct(self):
        if self.primary == self.secondary:
            raise ValueError("共面圆对必须是两个不同的圆")
        return self


class FrameEntry(BaseModel):
    model_config = ConfigDict(extra="forbid")

    circles: List[CircleEntry] = Field(min_length=1)
    coplanar_pairs: List[PairEntry] = Field(default_factory=list)

    @model_validator(mode="after")
    def _pair_indices(self):
        for pair in self.coplanar_pairs:
            if max(pair.primary, pair.secondary) >= len(self.circles):
                raise ValueError(f"共面圆对下标越界: ({pair.primary}, {pair.secondary})")
        return self


class SolverOptions(BaseModel):
    model_config = ConfigDict(extra="forbid")

    ransac_iters: int = Field(default=1000, ge=1)
    inlier_thresh: float = Field(default=8.0, gt=0)
    n_dirs: int = Field(default=36, ge=2)
    subpixel: bool = False
    seed: int = 0
    mode: Literal["auto", "homography", "paired"] = "auto"


class CalibrationJob(BaseModel):
    """标定任务：路径相对任务文件所在目录解析"""
    model_config = ConfigDict(extra="forbid")

    intrinsics: str
    frames: List[FrameEntry] = Field(min_length=1)
    options: SolverOptions = Field(default_factory=SolverOptions)

    @model_validator(mode="after")
    def _enough(self):
        total = sum(len(f.circles) for f in self.frames)
        if total < 4:
            raise ValueError(f"至少需要 4 个对应（圆），实际 {total}")
        return self


SCHEMAS: Dict[str, Type[BaseModel]] = {
    "intrinsics": IntrinsicsDoc,
    "ellipse-conic": ConicEllipseDoc,
    "ellipse-geometric": GeometricEllipseDoc,
    "circle": CircleDoc,
    "hypotheses": HypothesesDoc,
    "extrinsics": ExtrinsicsDoc,
    "job": CalibrationJob,
}


def validate_document(model: Type[BaseModel], data) -> BaseModel:
    """按模型校验；失败统一转成 InputError"""
    try:
        return model.model_validate(data)
    except ValidationError as e:
        raise InputError(f"{model.__name__} 校验失败: {e}") from e


def dump_document(model: Type[BaseModel], data) -> Dict:
    """先校验再输出，None 字段省略"""
    return validate_document(model, data).model_dump(exclude_none=True)


def get_schema(name: str) -> Dict:
    if name not in SCHEMAS:
        raise InputError(f"未知的文档类型: {name}，可选: {', '.join(SCHEMAS)}")
    return SCHEMAS[name].model_json_schema()
