"""Progress tracking for long-running pipeline stages."""

import threading
import time
from dataclasses import dataclass, field


@dataclass
class TrainingProgress:
    """Track progress of one training, collection or evaluation stage."""

    stage: str = ""
    active: bool = False
    step: int = 0
    total_steps: int = 0
    started_at: float = 0.0
    metrics: dict[str, float] = field(default_factory=dict)

    def start(self, total_steps: int):
        self.active = True
        self.step = 0
        self.total_steps = total_steps
        self.started_at = time.time()
        self.metrics = {}

    def update(self, step: int, **metrics: float):
        self.step = step
        self.metrics.update(metrics)

    def finish(self):
        self.active = False
        self.step = 0
        self.total_steps = 0

    def to_dict(self):
        if not self.active:
            return {"stage": self.stage, "active": False}
        return {
            "stage": self.stage,
            "active": True,
            "step": self.step,
            "total_steps": self.total_steps,
            "percent": round(self.step / self.total_steps * 100) if self.total_steps > 0 else 0,
            "elapsed": round(time.time() - self.started_at, 1),
            "metrics": {k: round(v, 4) for k, v in self.metrics.items()},
        }


class ProgressBoard:
    """Thread-safe collection of per-stage progress trackers."""

    def __init__(self):
        self._lock = threading.Lock()
        self._trackers: dict[str, TrainingProgress] = {}

    def tracker(self, key: str) -> TrainingProgress:
        with self._lock:
            if key not in self._trackers:
                self._trackers[key] = TrainingProgress(stage=key)
            return self._trackers[key]

    def discard(self, key: str):
        with self._lock:
            self._trackers.pop(key, None)

    def to_dict(self):
        with self._lock:
            return {key: t.to_dict() for key, t in self._trackers.items() if t.active}


# Global progress board
board = ProgressBoard()
