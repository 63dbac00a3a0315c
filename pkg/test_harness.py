"""实验框架与命令行测试脚本。

使用小规模配置检查配置解析、输出格式、失败处理、严格模式退出码，
以及并行度不影响结果的确定性。
"""
import itertools
import json
import math
import os
import tempfile

from ellipsar.cli import EXIT_INCOMPLETE, EXIT_OK, EXIT_USAGE, main
from ellipsar.errors import UsageError
from ellipsar.harness import (
    CSV_COLUMNS,
    HARNESS_AIC_MAX_ORDER,
    CellResult,
    Design,
    ExperimentConfig,
    ExperimentResult,
    emit,
    parse_config,
    run_experiment,
    run_replication_safe,
)

SMALL = dict(
    design=["short_memory"],
    phi_bar=[0.75],
    k0=[5],
    sample_size=200,
    warmup=100,
    test_size=200,
    replications=4,
    lag_multipliers=[2, 4],
)


def _expect_usage_error(argv, key=None):
    try:
        parse_config(argv)
    except UsageError as exc:
        if key is not None:
            assert exc.key == key, (exc.key, key)
        return
    raise AssertionError(f"{argv} 应当抛出 UsageError")


def test_default_config_is_full_grid():
    cfg = parse_config([])
    assert cfg.design == [Design.short_memory, Design.long_memory]
    assert cfg.phi_bar == [0.75, 0.99] and cfg.k0 == [100, 1000]
    assert cfg.sample_size == 1000 and cfg.warmup == 1000 and cfg.test_size == 1000
    assert cfg.lag_multipliers == [2, 4] and cfg.weight_exponent == 0.501
    assert cfg.cell_count == 8


def test_flags_override_config_file():
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "cfg.json")
        with open(path, "w", encoding="utf-8") as f:
            json.dump({"replications": 7, "k0": [10], "base_seed": 3}, f)
        cfg = parse_config(["--config", path, "--seed", "11", "--phi-bar", "0.5,0.9", "--multipliers", "3"])
    assert cfg.replications == 7 and cfg.k0 == [10]
    assert cfg.base_seed == 11
    assert cfg.phi_bar == [0.5, 0.9] and cfg.lag_multipliers == [3]


def test_config_errors_name_the_key():
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "cfg.json")
        with open(path, "w", encoding="utf-8") as f:
            json.dump({"replication": 5}, f)
        _expect_usage_error(["--config", path], key="replication")
    _expect_usage_error(["--replications", "0"], key="replications")
    _expect_usage_error(["--phi-bar", "1.0", "--k0", "10"], key="phi_bar")
    _expect_usage_error(["--weight-exponent", "0.4"], key="weight_exponent")
    _expect_usage_error(["--design", "medium_memory"], key="design")
    _expect_usage_error(["--no-such-flag", "1"])


def test_emit_empty_grid_is_header_only():
    assert emit(ExperimentResult(), "csv") == ",".join(CSV_COLUMNS) + "\n"


def test_emit_marks_incomplete_cells():
    cells = [
        CellResult(design=Design.short_memory, phi_bar=0.75, k0=100, multiplier=2, mean_ratio=0.987654321, stderr=0.001, reps=200),
        CellResult(design=Design.long_memory, phi_bar=0.99, k0=1000, multiplier=4, mean_ratio=math.nan, stderr=math.nan, reps=199, complete=False),
    ]
    result = ExperimentResult(cells=cells, replications=200)
    lines = emit(result, "csv").splitlines()
    assert lines[1] == "short_memory,0.75,100,2,0.987654,0.001000,200"
    assert lines[2] == "long_memory,0.99,1000,4,NA,NA,199"
    table = emit(result, "table")
    assert "2K_AIC" in table and "4K_AIC" in table
    assert "0.99" in table and "NA" in table
    try:
        emit(result, "json")
    except UsageError:
        return
    raise AssertionError("未知格式应当抛出 UsageError")


def test_emit_full_grid_has_sixteen_rows():
    cells = [
        CellResult(design=design, phi_bar=phi_bar, k0=k0, multiplier=m, mean_ratio=0.99, stderr=0.01, reps=200)
        for design, phi_bar, k0, m in itertools.product(Design, (0.75, 0.99), (100, 1000), (2, 4))
    ]
    lines = emit(ExperimentResult(cells=cells, replications=200), "csv").splitlines()
    assert len(lines) == 17
    assert lines[1] == "short_memory,0.75,100,2,0.990000,0.010000,200"
    assert lines[-1] == "long_memory,0.99,1000,4,0.990000,0.010000,200"


def test_small_experiment_is_deterministic_across_parallelism():
    serial = run_experiment(ExperimentConfig(**SMALL, parallelism=1))
    again = run_experiment(ExperimentConfig(**SMALL, parallelism=1))
    pooled = run_experiment(ExperimentConfig(**SMALL, parallelism=2))
    assert serial.complete and len(serial.cells) == 2
    for cell in serial.cells:
        assert cell.reps == 4 and 0.0 < cell.mean_ratio < 2.0 and cell.stderr >= 0.0
    assert emit(serial) == emit(again) == emit(pooled)
    assert len(serial.diagnostics) == 4 * 2
    row = serial.diagnostics[0]
    assert row["seed"] == 0 and row["K"] == row["multiplier"] * row["k_aic"]


def test_aic_horizon_defaults_to_five_and_is_overridable():
    assert parse_config([]).p_max == HARNESS_AIC_MAX_ORDER == 5
    assert parse_config(["--p-max", "30"]).p_max == 30
    _expect_usage_error(["--p-max", "0"], key="p_max")


def test_long_memory_larger_model_beats_aic_benchmark():
    cfg = ExperimentConfig(design=["long_memory"], k0=[100], replications=40, parallelism=2)
    result = run_experiment(cfg)
    assert result.complete
    assert all(row["k_aic"] <= HARNESS_AIC_MAX_ORDER for row in result.diagnostics)
    means = {(c.phi_bar, c.multiplier): c.mean_ratio for c in result.cells}
    for phi_bar in (0.75, 0.99):
        m2, m4 = means[(phi_bar, 2)], means[(phi_bar, 4)]
        assert m2 < 0.98, (phi_bar, m2)
        assert m4 < m2, (phi_bar, m2, m4)


def test_failed_replications_mark_cells_incomplete():
    cfg = ExperimentConfig(**{**SMALL, "test_size": 2, "replications": 2})
    outcome = run_replication_safe((cfg, Design.short_memory, 0.75, 5, 1))
    assert outcome.error is not None and "seed=1" in outcome.error
    result = run_experiment(cfg)
    assert not result.complete
    assert len(result.failures) == 2
    assert all(line.endswith("NA,NA,0") for line in emit(result).splitlines()[1:])


def test_cli_exit_codes():
    with tempfile.TemporaryDirectory() as tmp:
        series = os.path.join(tmp, "series.csv")
        assert main(["simulate", "--n", "120", "--K", "1", "--k0", "3", "--warmup", "50", "--seed", "4", "--out", series]) == EXIT_OK
        with open(series, encoding="utf-8") as f:
            assert f.readline().strip() == "t,value"

        report = os.path.join(tmp, "fit.txt")
        assert main(["fit", "--input", series, "--out", report]) == EXIT_OK
        with open(report, encoding="utf-8") as f:
            text = f.read()
        assert "AIC order" in text and "B-grid trace" in text
        assert main(["fit", "--input", series, "--tau", "0.01", "--K", "4", "--out", report]) == EXIT_OK
        assert main(["fit", "--input", os.path.join(tmp, "missing.csv")]) == EXIT_USAGE

        out = os.path.join(tmp, "table1.csv")
        diagnostics = os.path.join(tmp, "diag.csv")
        small_flags = ["--design", "short_memory", "--phi-bar", "0.75", "--k0", "5", "--sample-size", "200",
                       "--warmup", "100", "--replications", "2", "--out", out]
        assert main(["run", *small_flags, "--test-size", "200", "--diagnostics", diagnostics]) == EXIT_OK
        with open(diagnostics, encoding="utf-8") as f:
            assert f.readline().startswith("design,phi_bar,K0,replication,seed,k_aic")
        assert main(["run", *small_flags, "--test-size", "2"]) == EXIT_OK
        assert main(["run", *small_flags, "--test-size", "2", "--strict"]) == EXIT_INCOMPLETE
    assert main(["run", "--replications", "0"]) == EXIT_USAGE
    assert main(["bogus"]) == EXIT_USAGE


def run_test():
    """依次执行本文件中的全部测试。"""
    for name, func in sorted(globals().items()):
        if name.startswith("test_") and callable(func):
            func()
            print(f"{name} 通过")
    print("test_harness 全部通过!")


if __name__ == "__main__":
    run_test()
