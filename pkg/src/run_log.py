"""Per-invocation run log, one JSON object per line, rotated daily."""
import json
import logging
import sys
from datetime import datetime
from logging.handlers import TimedRotatingFileHandler
from pathlib import Path
from typing import Any, Dict, Optional

run_logger = logging.getLogger("runs")
run_logger.setLevel(logging.INFO)
# Keep run records out of the console handler
run_logger.propagate = False


def setup_run_log(log_dir: str) -> None:
    """Attach the rotating file handler once; later calls are no-ops."""
    if run_logger.handlers:
        return
    try:
        path = Path(log_dir)
        path.mkdir(parents=True, exist_ok=True)
        handler = TimedRotatingFileHandler(
            path / "runs.log",
            when="midnight",
            interval=1,
            backupCount=7,
            encoding="utf-8",
        )
    except OSError as e:
        print(f"warning: run log disabled: {e}", file=sys.stderr)
        run_logger.addHandler(logging.NullHandler())
        return
    handler.setFormatter(logging.Formatter("%(message)s"))
    run_logger.addHandler(handler)


def setup_console_logging(verbose: bool = False) -> None:
    """Diagnostics go to stderr; stdout stays machine-parseable."""
    root = logging.getLogger()
    if not any(getattr(h, "_pnretrieve", False) for h in root.handlers):
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
        handler._pnretrieve = True
        root.addHandler(handler)
    root.setLevel(logging.DEBUG if verbose else logging.WARNING)


def log_run(
    command: str,
    params: Dict[str, Any],
    status: str,
    error: Optional[BaseException] = None,
    **extra: Any,
) -> None:
    """Record one CLI invocation."""
    try:
        entry = {
            "timestamp": datetime.now().strftime("%Y-%m-%d %H:%M:%S"),
            "command": command,
            "params": params,
            "status": status,
        }
        entry.update(extra)
        if error is not None:
            entry["error"] = str(error)
        run_logger.info(json.dumps(entry, default=str))
    except Exception as e:
        print(f"warning: could not write run log: {e}", file=sys.stderr)
