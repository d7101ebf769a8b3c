import time
import json
import logging
import threading
from pathlib import Path
from typing import Dict, Any, List, Optional
from datetime import datetime

from src.config import AUDIT_LOG_DIR
from src.utils.persistence import serialize_payload

logger = logging.getLogger(__name__)


class RunMonitor:
    """Tracks benchmark stages: log lines, an event list, per-stage wall time
    and, when an audit directory is configured, one JSON file per event."""

    def __init__(self, audit_dir: Optional[str] = AUDIT_LOG_DIR):
        self.audit_dir = Path(audit_dir) if audit_dir else None
        if self.audit_dir is not None:
            self.audit_dir.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self._sequence = 0
        self.events: List[Dict[str, Any]] = []
        self.timings: Dict[str, float] = {}

    def reset(self):
        with self._lock:
            self.events = []
            self.timings = {}

    def on_stage_start(self, stage_name: str, inputs: Dict[str, Any]) -> Dict[str, Any]:
        context = {
            'stage_name': stage_name,
            'start_time': time.perf_counter(),
            'execution_id': f"{stage_name}_{int(time.time() * 1000)}"
        }

        logger.info(f"[START] {stage_name} | {self._describe(inputs)}")
        self._record({
            'execution_id': context['execution_id'],
            'stage_name': stage_name,
            'event': 'start',
            'inputs': self._summarize(inputs)
        })
        return context

    def on_stage_end(self, context: Dict[str, Any], outputs: Dict[str, Any]):
        elapsed = self._finish(context)
        logger.info(f"[END] {context['stage_name']} | {elapsed:.3f}s | {self._describe(outputs)}")
        self._record({
            'execution_id': context['execution_id'],
            'stage_name': context['stage_name'],
            'event': 'end',
            'elapsed_s': elapsed,
            'outputs': self._summarize(outputs)
        })

    def on_stage_error(self, context: Dict[str, Any], error: Exception):
        elapsed = self._finish(context)
        logger.error(f"[ERROR] {context['stage_name']} | {elapsed:.3f}s | {type(error).__name__}: {error}")
        self._record({
            'execution_id': context['execution_id'],
            'stage_name': context['stage_name'],
            'event': 'error',
            'elapsed_s': elapsed,
            'error_message': str(error),
            'error_type': type(error).__name__
        })

    def log_intermediate(self, stage_name: str, step: str, data: Any):
        logger.info(f"[INTERMEDIATE] {stage_name} | {step}: {data}")
        self._record({
            'stage_name': stage_name,
            'event': 'intermediate',
            'step': step,
            'data_summary': str(data)[:200]
        })

    def stage_timings(self) -> Dict[str, float]:
        """Seconds spent in each finished stage, in completion order."""
        with self._lock:
            return dict(self.timings)

    def _finish(self, context: Dict[str, Any]) -> float:
        elapsed = time.perf_counter() - context['start_time']
        with self._lock:
            self.timings[context['stage_name']] = self.timings.get(context['stage_name'], 0.0) + elapsed
        return elapsed

    @staticmethod
    def _describe(values: Dict[str, Any]) -> str:
        return ", ".join(f"{k}={v}" for k, v in values.items())

    @staticmethod
    def _summarize(values: Dict[str, Any]) -> Dict[str, str]:
        return {k: str(v)[:100] for k, v in values.items()}

    def _record(self, payload: Dict[str, Any]):
        with self._lock:
            self.events.append(payload)
            self._sequence += 1
            sequence = self._sequence
        if self.audit_dir is not None:
            self._write_local_log(payload, sequence)

    def _write_local_log(self, payload: Dict[str, Any], sequence: int):
        try:
            timestamp = datetime.now()
            stage = str(payload.get('stage_name', 'stage')).replace(' ', '_').lower()
            path = self.audit_dir / f"{timestamp.strftime('%Y%m%dT%H%M%S')}_{sequence:05d}_{stage}.json"
            entry = serialize_payload({**payload, 'logged_at': timestamp.isoformat()})
            with path.open('w', encoding='utf-8') as handle:
                json.dump(entry, handle, indent=2)
        except OSError as exc:
            logger.debug(f"Audit log write skipped: {exc}")


# Global monitor shared by the benchmark stages
monitor = RunMonitor()
