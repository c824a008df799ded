import threading
from datetime import datetime, timezone
from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, Field

EventType = Literal["step", "epoch_end", "task_exhausted"]


class TrainingEvent(BaseModel):
    id: int = 0
    timestamp: datetime = Field(default_factory=lambda: datetime.now(timezone.utc))
    event_type: EventType = "step"

    step: int
    epoch: int
    task: Optional[str] = None
    loss: Optional[float] = None
    snr_db: Optional[float] = None
    channel: Optional[str] = None

    details: Dict[str, Any] = Field(default_factory=dict)


class EventStore:
    """In-memory event log; safe to append from worker threads."""

    def __init__(self) -> None:
        self._events: List[TrainingEvent] = []
        self._lock = threading.Lock()
        self._next_id = 1

    def add_event(self, event: TrainingEvent) -> TrainingEvent:
        with self._lock:
            event.id = self._next_id
            self._next_id += 1
            self._events.append(event)
        return event

    def list_events(
        self,
        limit: Optional[int] = None,
        task: Optional[str] = None,
        event_type: Optional[EventType] = None,
    ) -> List[TrainingEvent]:
        with self._lock:
            events = list(self._events)

        if task:
            events = [e for e in events if e.task == task]
        if event_type:
            events = [e for e in events if e.event_type == event_type]

        return events if limit is None else events[-limit:]

    def get_event(self, event_id: int) -> Optional[TrainingEvent]:
        with self._lock:
            for e in self._events:
                if e.id == event_id:
                    return e
        return None

    def __len__(self) -> int:
        return len(self._events)
