"""Per-solve operation log for a run directory."""
import json
import logging
from datetime import datetime
from pathlib import Path
from typing import Dict, List, Optional, Union

logger = logging.getLogger(__name__)


class RunLogger:
    """Logger for tracking the solves of a pipeline run."""

    def __init__(self, log_dir: Union[str, Path], max_log_size: int = 10 * 1024 * 1024):
        """Initialize the run logger.

        Args:
            log_dir: Directory to store log files, usually the run output directory.
            max_log_size: Size in bytes at which the JSONL log is rotated.
        """
        self.log_dir = Path(log_dir)
        self.log_dir.mkdir(parents=True, exist_ok=True)
        self.log_file = self.log_dir / "solves.log"
        self.json_log_file = self.log_dir / "solves.jsonl"
        self.max_log_size = max_log_size
        self._seq = 0

        if not self.json_log_file.exists():
            self.json_log_file.touch()

    def log_solve(
        self,
        phase: str,
        window: int,
        length: int,
        status: str,
        objective: Optional[float] = None,
        runtime: Optional[float] = None,
        mip_gap: Optional[float] = None,
        details: Optional[Dict] = None,
    ) -> None:
        """Log one solve.

        Args:
            phase: Problem type (bd, bi, dd, di).
            window: Global index of the window's first period.
            length: Window length in periods.
            status: Solver status, or the error class name on failure.
            objective: Recomputed objective value.
            runtime: Wall-clock seconds spent in the backend.
            mip_gap: Relative MIP gap at termination.
            details: Additional details about the solve.
        """
        timestamp = datetime.now().isoformat()
        self._seq += 1
        entry = {
            "seq": self._seq,
            "timestamp": timestamp,
            "phase": phase,
            "window": window,
            "length": length,
            "status": status,
            "objective": objective,
            "runtime": runtime,
            "mip_gap": mip_gap,
            "success": status in ("optimal", "feasible"),
            "details": details or {},
        }

        with open(self.log_file, "a") as f:
            outcome = "OK" if entry["success"] else "FAILED"
            objective_info = f" objective={objective:.6f}" if objective is not None else ""
            f.write(f"{timestamp} - {phase.upper()}@{window} {outcome} ({status}){objective_info}\n")
            if details:
                f.write(f"  Details: {json.dumps(details, sort_keys=True)}\n")

        try:
            if self.json_log_file.exists() and self.json_log_file.stat().st_size > self.max_log_size:
                self._rotate_log()
            with open(self.json_log_file, "a") as f:
                f.write(json.dumps(entry, sort_keys=True) + "\n")
        except OSError as e:
            logger.error(f"Error writing to JSON log: {e}")

    def _rotate_log(self):
        try:
            old_log = self.log_dir / "solves.old.jsonl"
            if old_log.exists():
                old_log.unlink()
            self.json_log_file.rename(old_log)
            self.json_log_file.touch()
            logger.info(f"Rotated solve log. Old log saved to {old_log}")
        except OSError as e:
            logger.error(f"Error rotating log file: {e}")

    def _read(self) -> List[Dict]:
        entries = []
        if self.json_log_file.exists():
            with open(self.json_log_file, "r") as f:
                for line in f:
                    line = line.strip()
                    if line:
                        try:
                            entries.append(json.loads(line))
                        except json.JSONDecodeError:
                            continue
        return entries

    def get_recent_operations(self, limit: int = 50) -> List[Dict]:
        """Most recent solves, newest first."""
        try:
            entries = sorted(self._read(), key=lambda x: (x.get("timestamp", ""), x.get("seq", 0)), reverse=True)
            return entries[:limit]
        except OSError as e:
            logger.error(f"Error reading JSON log: {e}")
            return []

    def get_operations_for_phase(self, phase: str) -> List[Dict]:
        """All solves of one phase, newest first."""
        try:
            entries = [op for op in self._read() if op.get("phase") == phase]
            return sorted(entries, key=lambda x: (x.get("timestamp", ""), x.get("seq", 0)), reverse=True)
        except OSError as e:
            logger.error(f"Error reading JSON log: {e}")
            return []
