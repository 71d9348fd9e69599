"""
命令行入口
fit-circle3d / refine-center2d / calibrate / bench / schema

退出码: 0 成功, 2 输入错误, 3 估计失败, 4 消歧失败
"""

import argparse
import json
import os
import sys
from typing import Dict, List, Optional, Sequence

import numpy as np

from config.estimation import (
    CHORD_N_DIRS,
    CIRCLE_INLIER_THRESHOLD,
    PNP_INLIER_THRESHOLD_PX,
    RANSAC_MAX_ITERATIONS,
    RANSAC_SEED,
    SUBPIXEL_REFINEMENT,
    get_ransac_config,
)
from config.scenarios import SCENARIO_ALIASES, SCENARIO_DEFAULTS
from estimation.center_refine import (
    SearchConfig,
    disambiguate_by_ratio,
    find_center_hypotheses,
    hypothesis_ratios,
    select_by_loss_rank,
)
from estimation.pnp import (
    AmbiguousCorrespondence,
    Correspondence,
    point_errors,
    solve_pnp_paired,
    solve_pnp_ransac,
)
from estimation.robust import ransac_fit_circle
from geometry.cga import fit_circle_cga
from geometry.ellipse import conic_to_params
from result_storage import (
    read_ellipse,
    read_intrinsics,
    read_job,
    read_point_cloud,
    save_loss_field,
    write_json,
)
from schemas import (
    CalibrationJob,
    CircleDoc,
    ExtrinsicsDoc,
    HypothesesDoc,
    SCHEMAS,
    dump_document,
    get_schema,
    validate_document,
)
from synth import ScenarioKind, ScenarioSpec, run_benchmark, run_outlier_sweep, sweep_summary
from utils.errors import CircleCalError, DisambiguationError, InputError
from utils.logger import get_module_logger, set_level

logger = get_module_logger("cli")


def _emit(doc: Dict, out: Optional[str] = None):
    text = write_json(doc, out)
    print(text)


def _search_config(args) -> SearchConfig:
    return SearchConfig(n_dirs=args.n_dirs, subpixel=args.subpixel)


# ============ fit-circle3d ============

def cmd_fit_circle3d(args) -> int:
    points = read_point_cloud(args.input)
    if args.ransac:
        cfg = get_ransac_config(
            "circle",
            max_iterations=args.ransac_iters,
            inlier_threshold=args.inlier_thresh,
            seed=args.seed,
        )
        report = ransac_fit_circle(points, cfg)
        circle = report.best_model.canonical()
        doc = {
            **circle.to_dict(),
            "inliers": np.flatnonzero(report.inlier_mask).tolist(),
            "inlier_count": report.inlier_count,
            "mean_residual": report.mean_residual,
            "iterations": report.iterations_run,
        }
    else:
        result = fit_circle_cga(points)
        doc = {
            **result.circle.canonical().to_dict(),
            "inliers": list(range(len(points))),
            "inlier_count": len(points),
            "mean_residual": result.mean_residual,
        }
    _emit(dump_document(CircleDoc, doc), args.out)
    return 0


# ============ refine-center2d ============

def cmd_refine_center2d(args) -> int:
    k = read_intrinsics(args.intrinsics)
    conic = read_ellipse(args.ellipse)
    if args.radius is not None and not args.radius > 0:
        raise InputError(f"--radius 必须为正，实际 {args.radius}")
    if args.coplanar and (args.second is None or args.ratio is None):
        raise InputError("--coplanar 需要同时给出 --second 与 --ratio")

    pair = find_center_hypotheses(conic, args.radius, k, _search_config(args))
    if args.dump_field:
        save_loss_field(pair.loss_field, args.dump_field)

    second = read_ellipse(args.second) if args.second else None
    ratios: List[Optional[float]] = [None, None]
    if second is not None and not pair.single:
        ratios = hypothesis_ratios(pair, conic, second)

    hypotheses = [
        {"center": pair.c_a.tolist(), "loss": pair.loss_a, "distance": pair.distance_a, "ratio": ratios[0]},
    ]
    if not pair.single:
        hypotheses.append(
            {"center": pair.c_b.tolist(), "loss": pair.loss_b, "distance": pair.distance_b, "ratio": ratios[1]}
        )
    doc = {
        "hypotheses": hypotheses,
        "single": pair.single,
        "ellipse_center": conic_to_params(conic).center.tolist(),
        "physical_ratio": args.ratio,
    }

    exit_code = 0
    if pair.single:
        doc.update(selected=pair.c_a.tolist(), selection_rule="single")
    elif args.coplanar:
        try:
            doc.update(selected=disambiguate_by_ratio(pair, conic, second, args.ratio).tolist(),
                       selection_rule="ratio")
        except DisambiguationError as e:
            # 两个假设照常输出
            logger.error(f"半径比消歧失败: {e}")
            doc["error"] = str(e)
            exit_code = e.exit_code
    _emit(dump_document(HypothesesDoc, doc), args.out)
    return exit_code


# ============ calibrate ============

def _resolve(base_dir: str, path: str) -> str:
    return path if os.path.isabs(path) else os.path.join(base_dir, path)


def _pair_partners(frame) -> Dict[int, tuple]:
    """圆下标 -> (配对圆下标, 本圆/配对圆 的物理半径比)"""
    partners = {}
    for pair in frame.coplanar_pairs:
        r_p = frame.circles[pair.primary].radius
        r_s = frame.circles[pair.secondary].radius
        ratio = pair.ratio if pair.ratio is not None else r_p / r_s
        partners.setdefault(pair.primary, (pair.secondary, ratio))
        partners.setdefault(pair.secondary, (pair.primary, 1.0 / ratio))
    return partners


def run_calibration(job: CalibrationJob, base_dir: str, mode: Optional[str] = None) -> Dict:
    """
    完整标定流程：三维圆拟合 → 椭圆圆心修正 → 消歧 → PnP

    mode:
        auto: 声明了共面配对的圆用半径比消歧，其余保留两个候选交给成对 RANSAC
        homography: 配对圆用半径比消歧，未配对的圆取损失最小的候选，然后标准 PnP-RANSAC
        paired: 全部保留两个候选，成对 RANSAC

    Returns:
        ExtrinsicsDoc 对应的字典
    """
    opts = job.options
    mode = mode or opts.mode
    k = read_intrinsics(_resolve(base_dir, job.intrinsics))
    search_cfg = SearchConfig(n_dirs=opts.n_dirs, subpixel=opts.subpixel)
    circle_cfg = get_ransac_config("circle", max_iterations=opts.ransac_iters, seed=opts.seed)

    labels = []
    ambiguous: List[AmbiguousCorrespondence] = []
    rules = []
    for f_idx, frame in enumerate(job.frames):
        conics = [read_ellipse(_resolve(base_dir, c.ellipse)) for c in frame.circles]
        partners = _pair_partners(frame)
        for c_idx, entry in enumerate(frame.circles):
            points = read_point_cloud(_resolve(base_dir, entry.points))
            center = ransac_fit_circle(points, circle_cfg).best_model.center
            pair = find_center_hypotheses(conics[c_idx], entry.radius, k, search_cfg)

            if pair.single:
                ambiguous.append(AmbiguousCorrespondence.degenerate(center, pair.c_a))
                rule = "single"
            elif mode != "paired" and c_idx in partners:
                other, ratio = partners[c_idx]
                try:
                    chosen = disambiguate_by_ratio(pair, conics[c_idx], conics[other], ratio)
                    ambiguous.append(AmbiguousCorrespondence.degenerate(center, chosen))
                    rule = "homography"
                except DisambiguationError:
                    if mode == "homography":
                        raise
                    logger.warning(f"帧 {f_idx} 圆 {c_idx} 半径比消歧失败，保留两个候选")
                    ambiguous.append(AmbiguousCorrespondence.from_pair(center, pair))
                    rule = "paired"
            elif mode == "homography":
                ambiguous.append(AmbiguousCorrespondence.degenerate(center, select_by_loss_rank(pair)))
                rule = "loss_rank"
            else:
                ambiguous.append(AmbiguousCorrespondence.from_pair(center, pair))
                rule = "paired"
            labels.append((f_idx, c_idx))
            rules.append(rule)

    pnp_cfg = get_ransac_config(
        "pnp",
        max_iterations=opts.ransac_iters,
        inlier_threshold=opts.inlier_thresh,
        seed=opts.seed,
    )
    if mode == "homography":
        estimate = solve_pnp_ransac(
            [Correspondence(a.p3d, a.hypotheses[0]) for a in ambiguous], k, pnp_cfg)
        selection = np.zeros(len(ambiguous), dtype=int)
    else:
        estimate = solve_pnp_paired(ambiguous, k, pnp_cfg)
        selection = estimate.selection

    points = np.array([a.p3d for a in ambiguous])
    chosen = np.array([a.hypotheses[s] for a, s in zip(ambiguous, selection)])
    errors = point_errors(estimate.transform, points, chosen, k)
    report = [
        {
            "frame": f_idx,
            "circle": c_idx,
            "p3d": a.p3d.tolist(),
            "q2d": q.tolist(),
            "hypotheses": a.hypotheses.tolist(),
            "rule": rule,
            "reproj_px": float(err),
            "inlier": bool(inlier),
        }
        for (f_idx, c_idx), a, q, rule, err, inlier
        in zip(labels, ambiguous, chosen, rules, errors, estimate.inlier_mask)
    ]
    logger.info(
        f"标定完成: 模式 {mode}, 内点 {int(estimate.inlier_mask.sum())}/{len(ambiguous)}, "
        f"平均重投影误差 {estimate.mean_reproj_error:.3f} px"
    )
    return {
        **estimate.transform.to_dict(),
        "mean_reproj_px": estimate.mean_reproj_error,
        "inliers": np.flatnonzero(estimate.inlier_mask).tolist(),
        "mode": mode,
        "correspondences": report,
    }


def cmd_calibrate(args) -> int:
    data = read_job(args.job)
    options = data.setdefault("options", {}) if isinstance(data, dict) else {}
    # 命令行参数覆盖任务文件里的求解选项
    for key in ("ransac_iters", "inlier_thresh", "seed", "mode"):
        value = getattr(args, key, None)
        if value is not None:
            options[key] = value
    job = validate_document(CalibrationJob, data)
    doc = run_calibration(job, os.path.dirname(os.path.abspath(args.job)))
    _emit(dump_document(ExtrinsicsDoc, doc), args.out)
    return 0


# ============ bench ============

def cmd_bench(args) -> int:
    extra = {}
    if args.p is not None:
        extra["p"] = args.p
    if args.levels:
        extra["levels"] = tuple(args.levels)
    if args.closed_form:
        extra["robust"] = False
    if args.pairs is not None:
        extra["pairs"] = args.pairs
    spec = ScenarioSpec.from_defaults(
        args.scenario, trials=args.trials, sigma=args.sigma, seed=args.seed, **extra
    )
    # outlier_test 未指定 --p 时扫描全部离群比例
    if spec.config == ScenarioKind.OUTLIER_TEST and args.p is None:
        results = run_outlier_sweep(spec, out_dir=args.out, workers=args.workers)
        print(json.dumps(sweep_summary(results), ensure_ascii=False, indent=2))
        return 0
    result = run_benchmark(spec, out_dir=args.out, workers=args.workers)
    print(json.dumps(result.summary, ensure_ascii=False, indent=2))
    return 0


def cmd_schema(args) -> int:
    print(json.dumps(get_schema(args.name), ensure_ascii=False, indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="LiDAR-相机圆形标定板外参标定工具")
    parser.add_argument("--log-level", default=None,
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
                        help="覆盖 LOG_LEVEL 环境变量")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit-circle3d", help="从三维边界点拟合空间圆")
    p.add_argument("input", help="点云文件（x,y,z 表头的 CSV 或 ASCII PLY）")
    p.add_argument("--ransac", action="store_true", help="使用 CGA-RANSAC（默认直接全部点拟合）")
    p.add_argument("--ransac-iters", type=int, default=RANSAC_MAX_ITERATIONS, help="RANSAC 迭代次数")
    p.add_argument("--inlier-thresh", type=float, default=CIRCLE_INLIER_THRESHOLD,
                   help="内点阈值（点到圆距离平方，m²）")
    p.add_argument("--seed", type=int, default=RANSAC_SEED)
    p.add_argument("--out", default=None, help="输出 JSON 路径")
    p.set_defaults(func=cmd_fit_circle3d)

    p = sub.add_parser("refine-center2d", help="修正投影圆心，输出两个候选")
    p.add_argument("--ellipse", required=True, help="椭圆 JSON（二次曲线或几何形式）")
    p.add_argument("--intrinsics", required=True, help="内参 JSON")
    p.add_argument("--radius", type=float, default=None, help="物理半径（米）；缺省时用归一化损失")
    p.add_argument("--second", default=None, help="共面第二个圆的椭圆 JSON")
    p.add_argument("--ratio", type=float, default=None, help="物理半径比 r1/r2")
    p.add_argument("--coplanar", action="store_true", help="用共面圆对做半径比消歧")
    p.add_argument("--n-dirs", type=int, default=CHORD_N_DIRS, help="弦方向数")
    p.add_argument("--subpixel", action="store_true", default=SUBPIXEL_REFINEMENT, help="亚像素细化")
    p.add_argument("--dump-field", default=None, help="损失场 CSV 输出路径")
    p.add_argument("--out", default=None, help="输出 JSON 路径")
    p.set_defaults(func=cmd_refine_center2d)

    p = sub.add_parser("calibrate", help="执行标定任务")
    p.add_argument("job", help="标定任务 JSON")
    p.add_argument("--mode", choices=["auto", "homography", "paired"], default=None)
    p.add_argument("--ransac-iters", type=int, default=None)
    p.add_argument("--inlier-thresh", type=float, default=None, help=f"像素，默认 {PNP_INLIER_THRESHOLD_PX}")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None, help="输出 JSON 路径")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("bench", help="蒙特卡洛基准")
    p.add_argument("--scenario", required=True,
                   help=f"场景: {', '.join(list(SCENARIO_DEFAULTS) + list(SCENARIO_ALIASES))}")
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--sigma", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--p", type=float, default=None, help="离群点比例（outlier_test）；不给时扫描全部比例")
    p.add_argument("--levels", type=float, nargs="+", default=None, help="扫描的离群比例（outlier_test）")
    p.add_argument("--pairs", type=int, default=None, help="每次试验的共面圆对数（pose_study）")
    p.add_argument("--closed-form", action="store_true", help="配置 A-D 用全部点直接闭式拟合，不跑 RANSAC")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default=None, help="结果目录（results.csv + summary.json；扫描时每个比例一个子目录 + sweep.json）")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("schema", help="打印 JSON 文档的 schema")
    p.add_argument("name", choices=list(SCHEMAS))
    p.set_defaults(func=cmd_schema)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.log_level:
        set_level(args.log_level)
    try:
        return args.func(args)
    except CircleCalError as e:
        logger.error(f"{args.command} 失败: {e}")
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
