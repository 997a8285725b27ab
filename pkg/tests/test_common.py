import numpy as np
import pytest

from bicausal_ot.common.rng import make_rng, repetition_seed, seed_sequence
from bicausal_ot.common.storage import StorageError, atomic_write_text, read_text
from bicausal_ot.common.text_tools import (
    TextFormatError,
    format_params,
    lookup_schedule,
    parse_int_list,
    parse_matrix,
    parse_schedule,
    split_key_values,
    to_bool,
)


def test_split_key_values_accepts_mixed_layouts():
    pairs = split_key_values("a = 1  b=2 # 注释\n\nhorizons = 1, 2 ,3\n")
    assert pairs == [("a", "1", 1), ("b", "2", 1), ("horizons", "1,2,3", 3)]


def test_split_key_values_reports_line():
    with pytest.raises(TextFormatError) as excinfo:
        split_key_values("a=1\n=2\n")
    assert excinfo.value.line_no == 2


def test_int_list_ranges():
    assert parse_int_list("1-3,5") == [1, 2, 3, 5]
    with pytest.raises(ValueError, match="上界"):
        parse_int_list("5-3")


def test_schedule_lookup():
    schedule = parse_schedule("6:40,1:50,8:20")
    assert schedule == [(1, 50.0), (6, 40.0), (8, 20.0)]
    assert lookup_schedule(schedule, 7) == 40.0
    assert lookup_schedule(schedule, 100) == 20.0
    assert lookup_schedule(parse_schedule("3:1"), 2) is None
    with pytest.raises(ValueError, match="重复"):
        parse_schedule("1:2,1:3")


def test_matrix_and_bool_parsing():
    assert parse_matrix("1,0;0,2") == [[1.0, 0.0], [0.0, 2.0]]
    with pytest.raises(ValueError, match="长度不一致"):
        parse_matrix("1,0;2")
    assert to_bool("off") is False and to_bool("开启") is True
    with pytest.raises(ValueError):
        to_bool("maybe")


def test_format_params_sorts_keys():
    assert format_params({"lr": 0.01, "B": 50, "clip": "on"}) == "B=50;clip=on;lr=0.01"


def test_streams_are_reproducible_and_distinct():
    a = make_rng(7, 1, 2).random(4)
    np.testing.assert_array_equal(a, make_rng(7, 1, 2).random(4))
    assert not np.array_equal(a, make_rng(7, 1, 3).random(4))
    nested = make_rng(seed_sequence(7, 1), 2).random(4)
    np.testing.assert_array_equal(nested, a)
    assert not np.array_equal(
        make_rng(repetition_seed(0, 0)).random(3), make_rng(repetition_seed(0, 1)).random(3)
    )


def test_atomic_write_and_read(tmp_path):
    target = atomic_write_text(tmp_path / "nested" / "file.txt", "第一行\n")
    assert read_text(target) == "第一行\n"
    assert not (tmp_path / "nested" / "file.txt.tmp").exists()
    with pytest.raises(StorageError) as excinfo:
        read_text(tmp_path / "missing.txt")
    assert excinfo.value.path == tmp_path / "missing.txt"
