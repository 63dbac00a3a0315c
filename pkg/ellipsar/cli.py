"""命令行入口：ellipsar run | simulate | fit。

退出码：0 成功，1 参数或输入错误，2 严格模式下存在未完成单元。
"""
import argparse
import sys
from typing import List, Optional, Sequence

from ellipsar.errors import EllipsarError, UsageError
from ellipsar.harness import (
    Design,
    ExperimentConfig,
    _RaisingParser,
    add_run_arguments,
    config_from_namespace,
    diagnostics_frame,
    emit,
    fit_series,
    process_spec,
    render_fit,
    run_experiment,
)
from ellipsar.simulate import SeriesSample, simulate
from ellipsar.utils import set_global_level, setup_logger

logger = setup_logger("cli")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INCOMPLETE = 2


def build_parser() -> argparse.ArgumentParser:
    parser = _RaisingParser(prog="ellipsar", description="椭球约束 AR 估计与蒙特卡洛实验")
    parser.add_argument("-v", "--verbose", action="store_true", help="输出 DEBUG 日志")
    subparsers = parser.add_subparsers(dest="command")
    subparsers.required = True

    run_parser = subparsers.add_parser("run", help="运行相对 MSE 实验")
    add_run_arguments(run_parser)

    sim_parser = subparsers.add_parser("simulate", help="模拟一条序列并输出 t,value CSV")
    sim_parser.add_argument("--design", choices=[d.value for d in Design], default=Design.short_memory.value)
    sim_parser.add_argument("--phi-bar", dest="phi_bar", type=float, default=0.75)
    sim_parser.add_argument("--k0", type=int, default=100)
    sim_parser.add_argument("--n", type=int, default=1000)
    sim_parser.add_argument("--K", type=int, default=1)
    sim_parser.add_argument("--warmup", type=int, default=1000)
    sim_parser.add_argument("--seed", type=int, default=0)
    sim_parser.add_argument("--frac-d", dest="frac_d", type=float, default=0.49)
    sim_parser.add_argument("--out", help="输出文件，缺省写到标准输出")

    fit_parser = subparsers.add_parser("fit", help="在 CSV 序列上拟合约束模型")
    fit_parser.add_argument("--input", required=True, help="t,value 格式的 CSV")
    fit_parser.add_argument("--K", type=int, help="滞后阶数，缺省为 2·K_AIC")
    fit_parser.add_argument("--weight-exponent", dest="weight_exponent", type=float, default=0.501)
    fit_parser.add_argument("--tau", type=float, help="固定惩罚参数 τ")
    fit_parser.add_argument("--radius", type=float, help="固定约束半径 B")
    fit_parser.add_argument("--grid-size", dest="grid_size", type=int, default=15)
    fit_parser.add_argument("--p-max", dest="p_max", type=int)
    fit_parser.add_argument("--out", help="输出文件，缺省写到标准输出")
    return parser


def _write(text: str, path: Optional[str]) -> None:
    if path:
        with open(path, "w", encoding="utf-8") as f:
            f.write(text)
        logger.info(f"结果已写入 {path}")
    else:
        sys.stdout.write(text)


def _run(args: argparse.Namespace) -> int:
    cfg: ExperimentConfig = config_from_namespace(args)
    logger.info(f"实验配置: {cfg.model_dump_json()}")
    result = run_experiment(cfg)
    _write(emit(result, args.format), args.out)
    if args.diagnostics:
        diagnostics_frame(result).to_csv(args.diagnostics, index=False, float_format="%.10g", lineterminator="\n")
        logger.info(f"诊断信息已写入 {args.diagnostics}")
    if not result.complete:
        logger.warning(f"{len(result.failures)} 次重复失败，部分单元未完成")
        if args.strict:
            return EXIT_INCOMPLETE
    return EXIT_OK


def _simulate(args: argparse.Namespace) -> int:
    cfg = ExperimentConfig(design=[args.design], phi_bar=[args.phi_bar], k0=[args.k0], frac_d=args.frac_d)
    spec = process_spec(cfg, Design(args.design), args.phi_bar, args.k0)
    sample = simulate(spec, n=args.n, K=args.K, warmup=args.warmup, seed=args.seed)
    _write(sample.to_csv(), args.out)
    return EXIT_OK


def _fit(args: argparse.Namespace) -> int:
    try:
        sample = SeriesSample.read_csv(args.input)
    except OSError as exc:
        raise UsageError(f"无法读取输入文件: {exc}", key="input") from exc
    summary = fit_series(
        sample,
        K=args.K,
        weight_exponent=args.weight_exponent,
        tau=args.tau,
        radius=args.radius,
        grid_size=args.grid_size,
        p_max=args.p_max,
    )
    _write(render_fit(summary), args.out)
    return EXIT_OK


COMMANDS = {"run": _run, "simulate": _simulate, "fit": _fit}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """命令行主函数，返回退出码。"""
    argv: List[str] = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
        if args.verbose:
            set_global_level("DEBUG")
        return COMMANDS[args.command](args)
    except UsageError as exc:
        logger.error(f"参数错误: {exc}")
        return EXIT_USAGE
    except (EllipsarError, ValueError) as exc:
        logger.error(f"执行失败: {exc}")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
