"""
Logging setup for experiment runs.

Console logging uses one root format for every command. A per-run log file
can be attached to the output directory; it only receives run-tagged
milestones (training progress, sweep jobs) and errors, so it stays short
enough to read next to the result CSVs.

Pipeline messages open with a bracketed run tag naming the command and its
fields, e.g. "[train variant=v seed=7] Epoch 10/250: ...".

Environment variables:
  CFGNN_LOG_LEVEL - root log level (default: INFO)
  CFGNN_RUN_LOG   - set to "true" to write <out>/run.log for each command
"""

import logging
import os
import re
from pathlib import Path
from typing import NamedTuple, Optional

from src.core.errors import StorageError

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
RUN_LOG_FORMAT = "%(asctime)s - %(levelname)s - run=%(run_id)s variant=%(variant)s seed=%(seed)s - %(message)s"
RUN_LOG_NAME = "run.log"

_RUN_TAG = re.compile(r"^\[(?P<command>generate|train|evaluate|sweep|spectra)(?P<fields>[^\]]*)\]")
_TAG_FIELD = re.compile(r"(\w+)=(\S+)")


class RunTag(NamedTuple):
    run_id: str
    variant: Optional[str]
    seed: Optional[str]


def parse_run_tag(message: str) -> Optional[RunTag]:
    match = _RUN_TAG.match(message)
    if match is None:
        return None
    fields = dict(_TAG_FIELD.findall(match["fields"]))
    return RunTag(run_id=match["command"], variant=fields.get("variant"), seed=fields.get("seed"))


class RunTagFilter(logging.Filter):
    """Pass INFO+ records carrying a run tag, and ERROR+ from anywhere; stamps run_id/variant/seed."""

    def filter(self, record: logging.LogRecord) -> bool:
        if record.levelno < logging.INFO:
            return False
        tag = parse_run_tag(record.getMessage())
        if tag is None and record.levelno < logging.ERROR:
            return False
        record.run_id = tag.run_id if tag else "-"
        record.variant = (tag.variant if tag else None) or "-"
        record.seed = (tag.seed if tag else None) or "-"
        return True


def configure_logging(level: Optional[str] = None) -> None:
    """Apply the root console format; level falls back to CFGNN_LOG_LEVEL."""
    level_name = (level or os.getenv("CFGNN_LOG_LEVEL", "INFO")).upper()
    logging.basicConfig(
        level=getattr(logging, level_name, logging.INFO),
        format=LOG_FORMAT,
        datefmt="%Y-%m-%d %H:%M:%S",
    )


def attach_run_log(out_dir: Path) -> Optional[logging.Handler]:
    """
    Attach a filtered file handler writing <out_dir>/run.log.

    Returns the handler, or None when CFGNN_RUN_LOG is not enabled.
    """
    if os.getenv("CFGNN_RUN_LOG", "").lower() != "true":
        return None

    path = Path(out_dir) / RUN_LOG_NAME
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        handler = logging.FileHandler(path, encoding="utf-8")
    except OSError as exc:
        raise StorageError(path, exc) from exc
    handler.setLevel(logging.INFO)
    handler.addFilter(RunTagFilter())
    handler.setFormatter(logging.Formatter(RUN_LOG_FORMAT))
    logging.getLogger().addHandler(handler)
    logger.info(f"Run log enabled: {path}")
    return handler


def detach_run_log(handler: Optional[logging.Handler]) -> None:
    """Flush and close a handler returned by attach_run_log."""
    if handler is None:
        return
    handler.flush()
    handler.close()
    logging.getLogger().removeHandler(handler)
