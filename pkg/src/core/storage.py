"""
Local artifact storage for experiment runs.

Every writer here is deterministic: identical inputs give byte-identical
files, which is what makes reruns comparable with a plain diff.
"""

import csv
import hashlib
import io
import json
import logging
import os
import tempfile
from pathlib import Path
from typing import Any, Iterable, Sequence

from src.core.errors import StorageError

logger = logging.getLogger(__name__)


def build_features_path(out_dir: Path) -> Path:
    return Path(out_dir) / "features.csv"


def build_edges_path(out_dir: Path) -> Path:
    return Path(out_dir) / "edges.csv"


def build_checkpoint_path(out_dir: Path) -> Path:
    return Path(out_dir) / "checkpoint.json"


def build_history_path(out_dir: Path) -> Path:
    return Path(out_dir) / "history.csv"


def build_report_path(out_dir: Path) -> Path:
    return Path(out_dir) / "report.json"


def build_confusion_path(out_dir: Path) -> Path:
    return Path(out_dir) / "confusion.csv"


def build_scores_path(out_dir: Path) -> Path:
    return Path(out_dir) / "scores.csv"


def build_sweep_path(out_dir: Path) -> Path:
    return Path(out_dir) / "sweep.csv"


def build_eigenvalues_path(out_dir: Path) -> Path:
    return Path(out_dir) / "eigenvalues.csv"


def build_eigenvectors_path(out_dir: Path) -> Path:
    return Path(out_dir) / "eigenvectors.csv"


def build_manifest_path(out_dir: Path) -> Path:
    return Path(out_dir) / "manifest.json"


def format_float(value: float) -> str:
    """Shortest repr that parses back to the identical float."""
    return repr(float(value))


def write_bytes_atomic(path: Path, data: bytes) -> None:
    """Write to a sibling temp file and rename over the target; OS failures raise StorageError."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    except OSError as exc:
        raise StorageError(path, exc) from exc
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp_name, path)
    except BaseException as exc:
        Path(tmp_name).unlink(missing_ok=True)
        if isinstance(exc, OSError):
            raise StorageError(path, exc) from exc
        raise
    logger.debug(f"Wrote {len(data)} bytes to {path}")


def write_text_atomic(path: Path, text: str) -> None:
    write_bytes_atomic(path, text.encode("utf-8"))


def write_json(path: Path, payload: Any) -> None:
    write_text_atomic(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def render_csv(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    """RFC-4180 CSV text with '\\n' line endings; floats rendered with repr."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_float(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    write_text_atomic(path, render_csv(header, rows))


def read_csv_rows(path: Path) -> tuple[list[str], list[list[str]]]:
    """Return (header, rows) of a UTF-8 CSV file."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            return [], []
        return header, [row for row in reader if row]


def content_hash(paths: Iterable[Path]) -> str:
    """SHA-256 over the bytes of the given files, in sorted path order."""
    digest = hashlib.sha256()
    for path in sorted(Path(p) for p in paths):
        digest.update(path.name.encode("utf-8"))
        digest.update(b"\0")
        digest.update(path.read_bytes())
    return digest.hexdigest()
