"""
ViscoFrac Run Logger
====================

Session log for simulation runs: solver events and check outcomes are
appended as JSON lists inside the run's output directory.
"""

import json
import logging
import os
from datetime import datetime
from typing import Any, Dict, List, Optional

log = logging.getLogger(__name__)


def _jsonable(value: Any) -> Any:
    """Convert numpy scalars/arrays (and nested containers) to plain JSON types."""
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if hasattr(value, "tolist"):
        return value.tolist()
    if isinstance(value, float) and value != value:
        return None
    return value


class SimulationLogger:
    def __init__(self, output_dir: str):
        self.session_id = datetime.now().strftime("%Y%m%d_%H%M%S")
        self.start_time = datetime.now()
        self.output_dir = output_dir
        self.events_file = os.path.join(output_dir, "events.json")
        self.checks_file = os.path.join(output_dir, "checks.json")
        self.failed_checks: List[str] = []

        os.makedirs(output_dir, exist_ok=True)
        log.debug("Run logger initialized in %s", output_dir)

    def log_event(self, message: str, data: Dict[str, Any] = None):
        """Log a solver or I/O event"""
        entry = {
            "session_id": self.session_id,
            "timestamp": datetime.now().isoformat(),
            "message": message,
            "data": _jsonable(data or {}),
            "uptime_seconds": (datetime.now() - self.start_time).total_seconds()
        }
        self._append_to_file(self.events_file, entry)

    def log_check(self, name: str, passed: bool, value: Optional[float] = None,
                  tolerance: Optional[float] = None, details: Dict[str, Any] = None):
        """Log the outcome of one enabled check"""
        entry = {
            "session_id": self.session_id,
            "timestamp": datetime.now().isoformat(),
            "check": name,
            "passed": bool(passed),
            "value": _jsonable(value),
            "tolerance": _jsonable(tolerance),
            "details": _jsonable(details or {})
        }
        if not passed:
            self.failed_checks.append(name)
            log.warning("Check '%s' failed (value=%s, tolerance=%s)", name, value, tolerance)
        self._append_to_file(self.checks_file, entry)

    def log_error(self, message: str, error_data: Dict[str, Any] = None):
        """Log an error that aborted the run"""
        log.error(message)
        self.log_event(f"error: {message}", error_data)

    def get_session_summary(self) -> Dict[str, Any]:
        """Get summary of current session"""
        return {
            "session_id": self.session_id,
            "start_time": self.start_time.isoformat(),
            "duration_seconds": (datetime.now() - self.start_time).total_seconds(),
            "failed_checks": list(self.failed_checks)
        }

    def _append_to_file(self, filepath: str, data: Dict[str, Any]):
        """Append data to JSON list file"""
        try:
            if os.path.exists(filepath):
                with open(filepath, 'r') as f:
                    existing = json.load(f)
            else:
                existing = []
            existing.append(data)
            with open(filepath, 'w') as f:
                json.dump(existing, f, indent=2)
        except (OSError, ValueError) as e:
            log.error("Error writing to %s: %s", filepath, e)
