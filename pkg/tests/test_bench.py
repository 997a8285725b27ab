from pathlib import Path

import numpy as np
import pytest

from bicausal_ot.core.bench import (
    CSV_HEADER,
    ConfigError,
    ExperimentReport,
    ReportRow,
    ReportWriteError,
    dumps_csv,
    loads_csv,
    parse_config,
    read_csv,
    run_experiment,
    run_repetition,
    write_csv,
)
from bicausal_ot.core.oracle import exact_value

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"
ORACLE_ACTUALS = [1.25, 2.75, 4.5, 6.5, 8.75, 11.25, 14.0, 17.0, 20.25, 23.75, 27.5]


def _row(**overrides):
    values = dict(
        method="oracle",
        horizon=1,
        dimension=1,
        actual=1.25,
        est_mean=1.25,
        est_sd=0.0,
        avg_runtime_s=0.0,
        reps=1,
        seed=0,
    )
    values.update(overrides)
    return ReportRow(**values)


def test_minimal_config_uses_defaults():
    config = parse_config("method=oracle T=1 d=1 sigma_x=1.0 sigma_y=0.25 x0=1 y0=2")
    assert config.reps == 10
    assert config.horizons == (1,)
    assert config.T == 1
    np.testing.assert_array_equal(config.sigma_x, [[1.0]])


def test_multiline_config_with_comments_and_lists():
    config = parse_config(
        """
        # 注释
        method = tree-lp
        horizons = 1-3, 5
        epsilon_by_T = 1:0.1, 3:0.5
        reps = 4
        """
    )
    assert config.horizons == (1, 2, 3, 5)
    assert config.reps == 4
    assert config.epsilon_for(2) == pytest.approx(0.1)
    assert config.epsilon_for(5) == pytest.approx(0.5)


def test_tree_methods_reject_multidimensional_models():
    with pytest.raises(ConfigError, match="tree methods require d=1") as excinfo:
        parse_config("method=tree-lp d=2 sigma_x=1 sigma_y=1 x0=0 y0=0")
    assert excinfo.value.key == "d"


def test_multidimensional_fvi_config_is_accepted():
    config = parse_config("method=fvi d=5 T=5 N=4000 B=300 G=400 clip=off sigma_x=1.21 sigma_y=0.01")
    assert config.clip is False
    np.testing.assert_allclose(config.sigma_x, 1.21 * np.eye(5))
    np.testing.assert_array_equal(config.x0, np.ones(5))
    params = config.describe(5)
    for fragment in ("N=4000", "B=300", "G=400", "clip=off", "target=exact"):
        assert fragment in params
    fvi = config.fvi_config(5, seed=3)
    assert (fvi.N, fvi.B, fvi.G, fvi.clip) == (4000, 300, 400, False)


def test_clip_auto_follows_dimension():
    assert parse_config("method=fvi").clip is True
    assert parse_config("method=fvi d=2").clip is False


@pytest.mark.parametrize(
    "text, key",
    [
        ("colour=blue", "colour"),
        ("method=magic", "method"),
        ("T=zero", "T"),
        ("T=0", "T"),
        ("N=10 batch=20", "N"),
        ("lr=-0.1", "lr"),
        ("sigma_x=1,0;1,1", "sigma_x"),
        ("d=2 x0=1,2,3", "x0"),
        ("method=tree-lp T=14", "T"),
        ("method=tree-lp horizons=1-20", "horizons"),
        ("method=fvi target=entropic", "target_epsilon"),
        ("clip=maybe", "clip"),
        ("G_by_T=1:0", "G_by_T"),
        ("branching=3", "partition"),
    ],
)
def test_invalid_values_name_their_key(text, key):
    with pytest.raises(ConfigError) as excinfo:
        parse_config(text)
    assert excinfo.value.key == key
    assert key in str(excinfo.value)


def test_malformed_text_is_rejected():
    with pytest.raises(ConfigError, match="第 2 行"):
        parse_config("method=oracle\njust-a-word\n")


def test_overrides_take_precedence():
    config = parse_config("method=oracle R=3 seed=1", {"R": "7", "seed": 9, "reps": None})
    assert config.reps == 7
    assert config.seed == 9


@pytest.mark.parametrize("name", ["tree_lp_1d.conf", "adapted_sinkhorn_1d.conf", "fvi_1d.conf", "fvi_multi.conf"])
def test_shipped_configs_parse(name):
    config = parse_config((CONFIG_DIR / name).read_text(encoding="utf-8"))
    assert config.horizons


def test_shipped_fvi_schedule():
    config = parse_config((CONFIG_DIR / "fvi_1d.conf").read_text(encoding="utf-8"))
    assert [config.gradient_steps_for(T) for T in (1, 5, 6, 7, 8, 20, 40)] == [50, 50, 40, 30, 20, 20, 20]


def test_oracle_rows_match_closed_form():
    report = run_experiment(parse_config("method=oracle horizons=1-11"))
    assert [row.actual for row in report] == pytest.approx(ORACLE_ACTUALS, abs=1e-9)
    for row in report:
        assert row.est_mean == row.actual
        assert row.est_sd == 0.0
        assert row.reps == 1
        assert row.relative_error == 0.0


def test_empty_report_is_header_only():
    assert dumps_csv(ExperimentReport()) == CSV_HEADER + "\n"


def test_single_oracle_row_csv():
    report = ExperimentReport([_row()])
    lines = dumps_csv(report).splitlines()
    assert lines[0] == CSV_HEADER
    assert len(lines) == 2
    assert lines[1].split(",")[3] == "1.25"


def test_csv_reads_back(tmp_path):
    report = ExperimentReport(
        [
            _row(),
            _row(method="fvi", horizon=3, actual=4.5, est_mean=4.1, est_sd=0.3, reps=5, params="B=50;N=2000"),
        ]
    )
    target = write_csv(report, tmp_path / "out" / "report.csv")
    restored = read_csv(target)
    assert len(restored) == 2
    assert restored.rows[1].params == "B=50;N=2000"
    assert restored.rows[1].est_sd == pytest.approx(0.3)
    assert loads_csv(dumps_csv(restored)).rows == restored.rows


def test_csv_header_is_checked():
    with pytest.raises(ValueError, match="表头"):
        loads_csv("a,b,c\n")


def test_write_failure_names_path(tmp_path):
    blocker = tmp_path / "blocker"
    blocker.write_text("x", encoding="utf-8")
    with pytest.raises(ReportWriteError) as excinfo:
        write_csv(ExperimentReport(), blocker / "report.csv")
    assert excinfo.value.path == blocker / "report.csv"


def test_report_row_validation():
    with pytest.raises(ValueError, match="reps"):
        _row(reps=0)
    with pytest.raises(ValueError, match="est_sd"):
        _row(est_sd=-1.0)
    assert _row(actual=None).relative_error is None


def test_tree_lp_run_is_deterministic():
    config = parse_config("method=tree-lp horizons=1,2 S=20 R=3 seed=4")
    first = run_experiment(config)
    second = run_experiment(config)
    for a, b in zip(first, second):
        assert (a.est_mean, a.est_sd, a.params) == (b.est_mean, b.est_sd, b.params)
    assert [row.horizon for row in first] == [1, 2]
    assert first.rows[0].actual == pytest.approx(1.25)
    assert first.rows[0].params == "S=20;branching=2;partition=mean"


def test_worker_count_does_not_change_results():
    text = "method=adapted-sinkhorn T=2 S=20 R=4 seed=2 epsilon=0.5"
    serial = run_experiment(parse_config(text, {"workers": 1}))
    parallel = run_experiment(parse_config(text, {"workers": 4}))
    assert serial.rows[0].est_mean == parallel.rows[0].est_mean
    assert serial.rows[0].est_sd == parallel.rows[0].est_sd
    assert "linear_mean=" in serial.rows[0].params


def test_fvi_run_is_deterministic():
    config = parse_config("method=fvi T=1 N=16 B=4 G=3 batch=8 R=1 seed=11")
    first = run_experiment(config).rows[0]
    second = run_experiment(config).rows[0]
    assert first.est_mean == second.est_mean
    assert first.est_sd == 0.0
    assert "clamp=max0" in first.params and "clamped=" in first.params


def test_repetitions_use_distinct_streams():
    config = parse_config("method=tree-lp T=2 S=20")
    assert run_repetition(config, 2, 0).estimate != run_repetition(config, 2, 1).estimate


def test_runner_matches_oracle_for_actual_column():
    config = parse_config("method=tree-lp T=3 S=10 R=2")
    row = run_experiment(config).rows[0]
    assert row.actual == pytest.approx(exact_value(1.0, 2.0, 1.0, 0.25, 3))
    assert row.reps == 2


def _runtime(text):
    return run_experiment(parse_config(text)).rows[0].avg_runtime_s


@pytest.mark.slow
def test_fvi_runtime_grows_linearly_with_horizon():
    base = "method=fvi N=400 B=30 G=20 batch=64 R=1 seed=3"
    short = _runtime(f"{base} T=10")
    long = _runtime(f"{base} T=20")
    assert long < 4.0 * short


@pytest.mark.slow
def test_tree_lp_runtime_explodes_with_horizon():
    base = "method=tree-lp S=100 R=1 seed=3"
    short = _runtime(f"{base} T=8")
    try:
        long = _runtime(f"{base} T=12")
    except ConfigError as exc:
        assert exc.key == "T"
    else:
        assert long > 10.0 * short
