"""Tests for the output module."""

# Standard Python Libraries
import enum
import json
from pathlib import Path

# Third-Party Libraries
import numpy as np
import pytest

# cisagov Libraries
from lowrank_syk import SCHEMA_VERSION
from lowrank_syk.errors import DomainError, OutputError
from lowrank_syk.models import LowRankSykConfig
from lowrank_syk.output import dumps, open_run, read_csv, to_jsonable


class Colour(enum.Enum):
    """A throwaway enum."""

    RED = "r"


def test_to_jsonable():
    """Test numpy values, enums, paths and non-finite floats are converted."""
    document = {
        1: np.int64(3),
        "array": np.array([1.5, np.nan]),
        "complex": 1.0 - 2.0j,
        "enum": Colour.RED,
        "flag": np.bool_(True),
        "inf": float("inf"),
        "path": Path("a/b"),
        "tuple": (np.float32(0.5),),
    }
    assert to_jsonable(document) == {
        "1": 3,
        "array": [1.5, None],
        "complex": {"re": 1.0, "im": -2.0},
        "enum": "r",
        "flag": True,
        "inf": None,
        "path": str(Path("a/b")),
        "tuple": [0.5],
    }


def test_dumps_is_sorted():
    """Test keys are sorted and the document ends in a newline."""
    text = dumps({"b": 1, "a": 2})
    assert text.endswith("}\n")
    assert text.index('"a"') < text.index('"b"')
    assert json.loads(text) == {"a": 2, "b": 1}


def test_run_directory_lifecycle(run_config):
    """Test open writes the config and finish writes summary and sidecar."""
    run = open_run(run_config, "levels")
    assert run.path == Path(run_config.run.output_dir) / "levels"
    run.write_csv(
        "table.csv",
        {"index": [0, 1, 2], "value": np.array([0.5, 1.5, 2.5])},
        integer_columns=["index"],
    )
    lines = (run.path / "table.csv").read_text(encoding="utf-8").splitlines()
    assert lines[0] == "index,value"
    assert lines[1] == "0,5.000000000000e-01"
    run.finish({"answer": np.float64(42.0)})
    summary = json.loads((run.path / "summary.json").read_text(encoding="utf-8"))
    assert summary["schema_version"] == SCHEMA_VERSION
    assert summary["command"] == "levels"
    assert summary["seed"] == 7
    assert summary["artifacts"] == ["config.json", "table.csv"]
    assert summary["results"] == {"answer": 42.0}
    sidecar = json.loads((run.path / "run.json").read_text(encoding="utf-8"))
    assert sidecar["command"] == "levels"
    assert "finished" in sidecar
    assert "finished" not in summary


def test_record_helper_files(run_config):
    """Test files written by helpers are listed and foreign paths refused."""
    run = open_run(run_config, "speckle")
    (run.path / "field_0000.json").write_text("{}", encoding="utf-8")
    assert run.record(run.path / "field_0000.json") == run.path / "field_0000.json"
    run.record(run.path / "field_0000.json")
    assert run.artifacts == ["config.json", "field_0000.json"]
    with pytest.raises(OutputError):
        run.record(run.path.parent / "elsewhere.json")


def test_unequal_columns_are_rejected(run_config):
    """Test columns of different lengths cannot form a table."""
    run = open_run(run_config, "sff")
    with pytest.raises(DomainError):
        run.write_csv("bad.csv", {"a": [1.0, 2.0], "b": [1.0]})


def test_unwritable_output_dir(tmp_path):
    """Test an output_dir that is a regular file raises OutputError."""
    blocker = tmp_path / "blocker"
    blocker.write_text("", encoding="utf-8")
    config = LowRankSykConfig.model_validate({"run": {"output_dir": str(blocker)}})
    with pytest.raises(OutputError):
        open_run(config, "sample")


def test_read_csv_single_row(run_config):
    """Test a one-row table still reads back as one-element columns."""
    run = open_run(run_config, "otoc")
    path = run.write_csv("one.csv", {"time": [0.25], "otoc": [-1.0]})
    table = read_csv(path)
    assert table["time"].tolist() == [0.25]
    assert table["otoc"].tolist() == [-1.0]


def test_read_csv_missing_file(tmp_path):
    """Test a missing table raises OutputError."""
    with pytest.raises(OutputError):
        read_csv(tmp_path / "missing.csv")
