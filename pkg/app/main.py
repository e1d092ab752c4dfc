"""
Nilpotent Cone Lab - 命令行入口

退出码: 0 成功, 1 意外错误, 2 领域错误, 3 预算耗尽; 错误以 JSON 写到 stderr。
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

from dotenv import load_dotenv

# 添加项目根目录到路径
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))
load_dotenv(project_root / ".env")

from app import __version__  # noqa: E402
from app.config import settings  # noqa: E402
from app.constants import Command, ExitCode, NormVariant, Verdict  # noqa: E402
from app.logging_config import configure_logging  # noqa: E402
from core.algebra.group import GroupElement  # noqa: E402
from core.algebra.structure import NilpotentAlgebra, resolve_algebra  # noqa: E402
from core.control.estimates import estimate_distance  # noqa: E402
from core.control.extremals import ExtremalState, integrate_extremal, is_abnormal  # noqa: E402
from core.control.nonsingular import abnormal_from_witness, classify  # noqa: E402
from core.convergence.experiment import run_experiment  # noqa: E402
from core.errors import BudgetExceeded, DomainError, InvalidParameter, WitnessNotSingular  # noqa: E402
from core.geometry.horizontal import HorizontalSpace  # noqa: E402
from core.geometry.norms import make_norm, norm_from_spec  # noqa: E402
from core.io.artifacts import dumps, reproducibility_header, write_frame, write_json  # noqa: E402
from core.io.schemas import ExperimentConfig, NormSpec, load_model, parse_model  # noqa: E402
from core.lattice.lattice import Lattice, make_generators, make_lattice  # noqa: E402
from core.lattice.word_metric import BallTable, bfs_ball, growth_degree  # noqa: E402

logger = logging.getLogger("cli")

_NAMED_NORMS = {NormVariant.L1.value, NormVariant.L2.value, NormVariant.LINF.value}


# 参数解析

def parse_vector(text: str) -> List[str]:
    """'0,0,1' -> ['0', '0', '1']; 各分量以字符串保留, 便于精确转换"""
    parts = [p.strip() for p in text.replace(";", ",").split(",") if p.strip()]
    if not parts:
        raise InvalidParameter("empty vector", {"text": text})
    return parts


def parse_floats(text: str) -> List[float]:
    try:
        return [float(p) for p in parse_vector(text)]
    except ValueError as e:
        raise InvalidParameter(f"not a numeric vector: {text!r}") from e


def load_space(algebra: NilpotentAlgebra, norm: str) -> HorizontalSpace:
    """--norm: l1/l2/linf (V = V∞), 范数文件或 JSON 字符串 (可带 basis)"""
    key = norm.strip()
    if key.lower() in _NAMED_NORMS:
        return HorizontalSpace.polarized(algebra, make_norm(key, algebra.p))
    if key.startswith("{"):
        spec = parse_model(json.loads(key), NormSpec)
    else:
        spec = load_model(key, NormSpec)
    q = len(spec.basis[0]) if spec.basis else algebra.p
    return HorizontalSpace(algebra, norm_from_spec(spec, q), spec.basis)


def build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--algebra", help="algebra preset (h3, r_x_h3, h3_x_h3, abelian<d>) or JSON file")
    shared.add_argument("--norm", default="l2", help="l1 | l2 | linf, a norm JSON file or inline JSON")
    shared.add_argument("--seed", type=int, default=None, help=f"random seed (default {settings.seed})")
    shared.add_argument("--threads", type=int, default=None, help="parallelism cap")
    shared.add_argument("--out", default=None, help="output file (directory for converge)")
    shared.add_argument("--format", choices=["json", "csv"], default="json", help="output format")
    shared.add_argument("--log-level", default=None, help="log level override")
    shared.add_argument("--log-format", choices=["text", "json"], default=None, help="log format override")

    parser = argparse.ArgumentParser(
        prog="nilcone",
        description="2-step nilpotent groups: subFinsler geodesics, non-singularity, word-metric convergence",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser(Command.VALIDATE.value, parents=[shared], help="validate an algebra file")

    p = sub.add_parser(Command.NONSINGULAR.value, parents=[shared], help="non-singularity verdict")
    p.add_argument("--samples", type=int, default=None, help="sphere samples")
    p.add_argument("--restarts", type=int, default=None, help="local descent starts")

    p = sub.add_parser(Command.ABNORMAL.value, parents=[shared], help="abnormal extremal from a singular pair")
    p.add_argument("--witness", default=None, help="u*, horizontal vector (default: from the verdict)")
    p.add_argument("--covector", default=None, help="xi*, central covector (default: from the verdict)")
    p.add_argument("--T", type=float, default=1.0, help="duration")
    p.add_argument("--samples", type=int, default=100, help="PMP check sample times")

    p = sub.add_parser(Command.GEODESIC.value, parents=[shared], help="integrate a normal extremal")
    p.add_argument("--covector", required=True, help="initial covector xi(0), n components")
    p.add_argument("--T", type=float, required=True, help="duration")
    p.add_argument("--steps", type=int, default=None, help="sample steps")

    p = sub.add_parser(Command.DISTANCE.value, parents=[shared], help="estimate the distance to a target")
    p.add_argument("--target", required=True, help="target in exponential coordinates, e.g. 0,0,1")
    p.add_argument("--segments", type=int, default=None, help="segments of the optimized path")
    p.add_argument("--restarts", type=int, default=None, help="shooting restarts")
    p.add_argument("--path-restarts", type=int, default=None, help="path optimization restarts")
    p.add_argument("--trajectory", default=None, help="write the witness path/trajectory CSV here")

    p = sub.add_parser(Command.WORDBALL.value, parents=[shared], help="BFS word-length table")
    p.add_argument("--lattice", default="h3z", help="zd | h3z | zxh3z | custom (with --algebra)")
    p.add_argument("--dimension", type=int, default=2, help="d for zd")
    p.add_argument("--gens", default="standard", help="standard | product | skew | JSON list of vectors")
    p.add_argument("--radius", type=int, required=True, help="ball radius")
    p.add_argument("--budget", type=int, default=None, help="element budget")

    p = sub.add_parser(Command.CONVERGE.value, parents=[shared], help="run a convergence experiment")
    p.add_argument("--config", required=True, help="experiment JSON file")
    p.add_argument("--budget", type=int, default=None, help="BFS element budget")

    return parser


# 子命令

def _require_algebra(args: argparse.Namespace) -> NilpotentAlgebra:
    if not args.algebra:
        raise InvalidParameter(f"{args.command} needs --algebra")
    return resolve_algebra(args.algebra)


def cmd_validate(args: argparse.Namespace) -> Dict[str, Any]:
    A = _require_algebra(args)
    return {"valid": True, "n": A.n, "p": A.p, "center": A.m, "abelian": A.is_abelian, "algebra": A.to_spec()}


def cmd_nonsingular(args: argparse.Namespace) -> Dict[str, Any]:
    A = _require_algebra(args)
    report = classify(
        A,
        samples=args.samples or settings.sphere_samples,
        restarts=args.restarts if args.restarts is not None else settings.descent_restarts,
        seed=args.seed,
        threads=args.threads,
        nonsingular_threshold=settings.nonsingular_threshold,
        singular_threshold=settings.singular_threshold,
    )
    return report.to_dict()


def cmd_abnormal(args: argparse.Namespace) -> Dict[str, Any]:
    A = _require_algebra(args)
    H = load_space(A, args.norm).cone_space()
    if args.witness and args.covector:
        u, xi = parse_floats(args.witness), parse_floats(args.covector)
        source = "given"
    else:
        report = classify(A, samples=settings.sphere_samples, seed=args.seed, threads=args.threads)
        if report.verdict is not Verdict.SINGULAR:
            raise WitnessNotSingular(
                "no singular pair: the algebra is not certified singular", {"verdict": report.verdict.value}
            )
        u, xi = report.witness, report.covector
        source = report.method
    extremal = abnormal_from_witness(A, H, u, xi)
    trajectory = extremal.trajectory(args.T, args.samples)
    residuals = extremal.pmp_residuals(args.T, args.samples)
    check = is_abnormal(trajectory, settings.abnormal_tolerance)
    result = {
        "witness": extremal.u.tolist(),
        "covector": extremal.covector.tolist(),
        "source": source,
        "abnormal": check.abnormal,
        "residual": check.residual,
        "pmp": {"ode": residuals.ode, "hamiltonian": residuals.hamiltonian, "momenta": residuals.momenta},
        "endpoint": [float(x) for x in trajectory.endpoint.coords],
    }
    if args.format == "csv":
        result["frame"] = trajectory.to_frame()
    return result


def cmd_geodesic(args: argparse.Namespace) -> Dict[str, Any]:
    A = _require_algebra(args)
    H = load_space(A, args.norm).cone_space()
    xi = parse_floats(args.covector)
    trajectory = integrate_extremal(
        A, H.norm, ExtremalState([0.0] * A.n, xi), args.T, args.steps or settings.integration_steps
    )
    result = {
        "endpoint": [float(x) for x in trajectory.endpoint.coords],
        "duration": trajectory.duration,
        "hamiltonian_drift": trajectory.hamiltonian_drift(),
        "switch_times": trajectory.switch_times,
        "abnormal": is_abnormal(trajectory, settings.abnormal_tolerance).abnormal,
    }
    if args.format == "csv":
        result["frame"] = trajectory.to_frame()
    return result


def cmd_distance(args: argparse.Namespace) -> Dict[str, Any]:
    A = _require_algebra(args)
    H = load_space(A, args.norm)
    target = GroupElement.exact(A, parse_vector(args.target))
    estimate = estimate_distance(
        H,
        target,
        segments=args.segments or settings.path_segments,
        path_restarts=args.path_restarts if args.path_restarts is not None else settings.path_restarts,
        shooting_restarts=args.restarts or settings.shooting_restarts,
        seed=args.seed,
        threads=args.threads,
        tolerance=settings.endpoint_tolerance,
    )
    result = estimate.to_dict()
    frame = None
    if estimate.witness is not None:
        frame = estimate.witness.to_frame()
    elif estimate.trajectory is not None:
        frame = estimate.trajectory.to_frame()
    if args.trajectory and frame is not None:
        write_frame(args.trajectory, frame)
        result["trajectory_file"] = args.trajectory
    if args.format == "csv" and frame is not None:
        result["frame"] = frame
    return result


def _lattice(args: argparse.Namespace) -> Lattice:
    if args.lattice.lower() == "custom":
        return Lattice.from_algebra(_require_algebra(args), name=Path(str(args.algebra)).stem)
    return make_lattice(args.lattice, args.dimension)


def _ball_result(table: BallTable) -> Dict[str, Any]:
    result = table.summary()
    if table.radius >= 3:
        fit = growth_degree(table, max(1, table.radius // 2), table.radius)
        result["growth_degree"] = fit.degree
    result["frame"] = table.to_frame()
    return result


def cmd_wordball(args: argparse.Namespace) -> Dict[str, Any]:
    L = _lattice(args)
    gens = json.loads(args.gens) if args.gens.strip().startswith("[") else args.gens
    S = make_generators(L, gens)
    try:
        table = bfs_ball(L, S, args.radius, args.budget or settings.bfs_budget)
    except BudgetExceeded as e:
        if args.out and e.partial is not None:
            write_frame(args.out, e.partial.to_frame())
            logger.warning(f"partial table written to {args.out}", extra={"radius": e.completed_radius})
        raise
    result = _ball_result(table)
    if args.format == "json":
        result.pop("frame")
    return result


def cmd_converge(args: argparse.Namespace) -> Dict[str, Any]:
    config = load_model(args.config, ExperimentConfig)
    out = Path(args.out or Path(settings.output_dir) / config.name)
    result = run_experiment(config, out, seed=args.seed, threads=args.threads, budget=args.budget)
    return result.to_dict()


HANDLERS: Dict[str, Callable[[argparse.Namespace], Dict[str, Any]]] = {
    Command.VALIDATE.value: cmd_validate,
    Command.NONSINGULAR.value: cmd_nonsingular,
    Command.ABNORMAL.value: cmd_abnormal,
    Command.GEODESIC.value: cmd_geodesic,
    Command.DISTANCE.value: cmd_distance,
    Command.WORDBALL.value: cmd_wordball,
    Command.CONVERGE.value: cmd_converge,
}


# 输出

def _emit(args: argparse.Namespace, result: Dict[str, Any]) -> None:
    frame = result.pop("frame", None)
    if args.command == Command.CONVERGE.value:
        # 实验结果已写入目录, stdout 只给摘要
        sys.stdout.write(dumps(result) + "\n")
        return
    header = reproducibility_header(args.command, args.seed, _run_config(args))
    if args.format == "csv" and frame is not None:
        flat = {"tool": header["tool"], "version": header["version"], "seed": header["seed"],
                "config_digest": header["config_digest"]}
        if args.out:
            write_frame(args.out, frame, flat)
        else:
            frame.to_csv(sys.stdout, index=False, float_format="%.12g")
        return
    payload = {"header": header, "result": result}
    if args.out:
        write_json(args.out, payload)
    else:
        sys.stdout.write(dumps(payload) + "\n")


def _run_config(args: argparse.Namespace) -> Dict[str, Any]:
    """头部摘要用的解析后参数 (不含输出位置与日志选项)"""
    skip = {"out", "log_level", "log_format", "trajectory"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _fail(error: Dict[str, Any], code: ExitCode) -> int:
    sys.stderr.write(json.dumps(error, ensure_ascii=False, sort_keys=True, default=str) + "\n")
    return code.value


def main(argv: Optional[Sequence[str]] = None) -> int:
    """分派子命令, 返回退出码"""
    args = build_parser().parse_args(argv)
    configure_logging(
        level=args.log_level or settings.log_level,
        fmt=args.log_format or settings.log_format,
        log_file=settings.log_file,
    )
    if args.command != Command.CONVERGE.value:
        # converge 未显式给出 --seed 时沿用配置文件中的种子
        args.seed = settings.seed if args.seed is None else args.seed
    args.threads = settings.threads if args.threads is None else args.threads
    if args.threads < 1:
        return _fail(InvalidParameter("--threads must be positive").to_dict(), ExitCode.DOMAIN_ERROR)

    try:
        result = HANDLERS[args.command](args)
        _emit(args, result)
    except BudgetExceeded as e:
        logger.error(f"{args.command}: {e.message}", extra={"code": e.code, "details": e.details})
        return _fail(e.to_dict(), ExitCode.BUDGET_EXHAUSTED)
    except DomainError as e:
        logger.error(f"{args.command}: {e.message}", extra={"code": e.code})
        return _fail(e.to_dict(), ExitCode.DOMAIN_ERROR)
    except Exception as e:
        logger.exception(f"{args.command} failed unexpectedly")
        return _fail(
            {"error": "unexpected", "type": type(e).__name__, "message": str(e), "details": {}},
            ExitCode.UNEXPECTED,
        )
    return ExitCode.OK.value


if __name__ == "__main__":
    sys.exit(main())
