import pytest

from bicausal_ot.core.bench import CSV_HEADER, read_csv
from bicausal_ot.main import EXIT_FAILURE, EXIT_INVALID, EXIT_OK, build_parser, main


def test_oracle_writes_csv(tmp_path):
    out = tmp_path / "oracle.csv"
    assert main(["oracle", "--horizons", "1-3", "--out", str(out)]) == EXIT_OK
    report = read_csv(out)
    assert [row.actual for row in report] == pytest.approx([1.25, 2.75, 4.5])


def test_csv_goes_to_stdout_without_out(capsys):
    assert main(["oracle", "--set", "T=2"]) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == CSV_HEADER
    assert lines[1].startswith("oracle,2,1,2.75,2.75,0,")


def test_bench_reads_method_from_config(tmp_path, capsys):
    config = tmp_path / "run.conf"
    config.write_text("method = tree-lp\nT = 1\nS = 10\n", encoding="utf-8")
    assert main(["bench", "--config", str(config), "--reps", "2", "--seed", "5"]) == EXIT_OK
    row = capsys.readouterr().out.splitlines()[1].split(",")
    assert row[0] == "tree-lp"
    assert row[7] == "2"
    assert row[8] == "5"


def test_subcommand_overrides_config_method(tmp_path, capsys):
    config = tmp_path / "run.conf"
    config.write_text("method = fvi\nT = 1\n", encoding="utf-8")
    assert main(["oracle", "--config", str(config)]) == EXIT_OK
    assert capsys.readouterr().out.splitlines()[1].startswith("oracle,")


def test_invalid_config_exits_with_usage_code():
    assert main(["tree-lp", "--set", "d=2"]) == EXIT_INVALID
    assert main(["oracle", "--set", "colour=blue"]) == EXIT_INVALID


def test_missing_config_file_is_a_failure(tmp_path):
    assert main(["oracle", "--config", str(tmp_path / "absent.conf")]) == EXIT_FAILURE


def test_set_requires_assignment():
    with pytest.raises(SystemExit):
        build_parser().parse_args(["oracle", "--set", "novalue"])
