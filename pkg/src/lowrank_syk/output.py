"""Run directories and the CSV/JSON artifacts written into them."""

# Standard Python Libraries
from datetime import datetime, timezone
from enum import Enum
import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping

# Third-Party Libraries
from cyhy_logging import CYHY_ROOT_LOGGER
import numpy as np

from . import SCHEMA_VERSION
from ._version import __version__
from .errors import DomainError, OutputError
from .models import LowRankSykConfig

FLOAT_FORMAT = "%.12e"
INTEGER_FORMAT = "%d"

logger = logging.getLogger(f"{CYHY_ROOT_LOGGER}.{__name__}")


def to_jsonable(value: Any) -> Any:
    """
    Convert numpy scalars, arrays, enums and paths into plain JSON values.

    Non-finite floats become None so that every document is strict JSON.
    """
    if isinstance(value, Mapping):
        return {str(key): to_jsonable(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(item) for item in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, Enum):
        return to_jsonable(value.value)
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    if isinstance(value, (complex, np.complexfloating)):
        return {"re": to_jsonable(value.real), "im": to_jsonable(value.imag)}
    return value


def dumps(document: Any) -> str:
    """Serialize a document with sorted keys and a trailing newline."""
    return json.dumps(to_jsonable(document), indent=2, sort_keys=True) + "\n"


class RunDirectory:
    """
    The directory <output_dir>/<command>/ holding one run's artifacts.

    config.json is written on open, data files as the command produces them,
    and summary.json plus the run.json sidecar on finish. Only run.json
    carries a timestamp.
    """

    def __init__(self, config: LowRankSykConfig, command: str):
        """Remember the configuration and the target directory."""
        self.config = config
        self.command = command
        self.path = Path(config.run.output_dir) / command
        self.artifacts: List[str] = []

    def open(self) -> "RunDirectory":
        """
        Create the directory and write the configuration snapshot.

        Raises:
            OutputError: If the directory cannot be created or written.
        """
        try:
            self.path.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise OutputError(f"Cannot create run directory {self.path}: {e}") from e
        self.write_json("config.json", self.config.model_dump(mode="json"))
        logger.info("Writing %s run to %s", self.command, self.path)
        return self

    def file(self, name: str) -> Path:
        """Return the path of an artifact and record it."""
        if name not in self.artifacts:
            self.artifacts.append(name)
        return self.path / name

    def record(self, path: Path) -> Path:
        """Record a file a helper wrote into the run directory."""
        path = Path(path)
        if path.parent != self.path:
            raise OutputError(f"{path} is outside the run directory {self.path}")
        return self.file(path.name)

    def _write_text(self, name: str, text: str) -> Path:
        path = self.file(name)
        try:
            path.write_text(text, encoding="utf-8")
        except OSError as e:
            raise OutputError(f"Cannot write {path}: {e}") from e
        logger.debug("Wrote %s", path)
        return path

    def write_json(self, name: str, document: Any) -> Path:
        """Write a JSON document with sorted keys."""
        return self._write_text(name, dumps(document))

    def write_csv(
        self,
        name: str,
        columns: Mapping[str, Iterable[float]],
        integer_columns: Iterable[str] = (),
    ) -> Path:
        """
        Write equally long columns as a comma-separated table.

        Floats use %.12e; columns named in integer_columns are written as
        integers.

        Raises:
            DomainError: If the columns differ in length.
            OutputError: If the file cannot be written.
        """
        integer_columns = set(integer_columns)
        names = list(columns)
        arrays = [np.asarray(columns[column]) for column in names]
        lengths = {array.shape[0] for array in arrays}
        if len(lengths) != 1:
            raise DomainError(f"Columns of {name} differ in length: {sorted(lengths)}")
        formats = [
            INTEGER_FORMAT if column in integer_columns else FLOAT_FORMAT
            for column in names
        ]
        table = np.column_stack(
            [
                array.astype(np.int64) if column in integer_columns else array.real
                for column, array in zip(names, arrays)
            ]
        ).astype(object)
        path = self.file(name)
        try:
            with open(path, "w", encoding="utf-8", newline="\n") as stream:
                np.savetxt(
                    stream,
                    table,
                    fmt=formats,
                    delimiter=",",
                    header=",".join(names),
                    comments="",
                )
        except OSError as e:
            raise OutputError(f"Cannot write {path}: {e}") from e
        logger.info("Wrote %d rows to %s", table.shape[0], path)
        return path

    def finish(self, results: Dict[str, Any]) -> Path:
        """
        Write summary.json and the run.json sidecar.

        Returns:
            Path: The summary file.
        """
        summary = {
            "schema_version": SCHEMA_VERSION,
            "command": self.command,
            "seed": self.config.run.seed,
            "config": self.config.model_dump(mode="json"),
            "artifacts": sorted(self.artifacts),
            "results": results,
        }
        path = self.write_json("summary.json", summary)
        sidecar = {
            "command": self.command,
            "finished": datetime.now(timezone.utc).isoformat(),
            "version": __version__,
        }
        try:
            (self.path / "run.json").write_text(dumps(sidecar), encoding="utf-8")
        except OSError as e:
            raise OutputError(f"Cannot write {self.path / 'run.json'}: {e}") from e
        logger.info("Finished %s run in %s", self.command, self.path)
        return path


def open_run(config: LowRankSykConfig, command: str) -> RunDirectory:
    """Create the run directory of a command."""
    return RunDirectory(config, command).open()


def read_csv(path: Path) -> Dict[str, np.ndarray]:
    """
    Read a table written by RunDirectory.write_csv back into columns.

    Raises:
        OutputError: If the file cannot be read.
    """
    try:
        table = np.genfromtxt(path, delimiter=",", names=True, dtype=np.float64)
    except OSError as e:
        raise OutputError(f"Cannot read {path}: {e}") from e
    table = np.atleast_1d(table)
    return {name: np.asarray(table[name]) for name in table.dtype.names}
