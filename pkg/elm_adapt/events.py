#!/usr/bin/env python3
"""
Event Log - Record of adaptive decisions taken during a run

Enables:
- Per-step reject / accept / grow records
- Mesh refine and coarsen records
- Subscriber callbacks (the CLI logs events as they happen)
- events.log export, one JSON object per line
"""

import json
import logging
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

logger = logging.getLogger(__name__)


class EventType(Enum):
    """Kinds of adaptive events."""
    ACCEPT = "step.accept"
    REJECT = "step.reject"
    GROW = "step.grow"
    REFINE = "mesh.refine"
    COARSEN = "mesh.coarsen"
    REFINE_CAP = "refine.cap"


@dataclass
class Event:
    """One adaptive decision."""
    event_type: EventType
    n: int
    t: float
    k: float
    data: Dict[str, Any] = field(default_factory=dict)
    timestamp: str = field(default_factory=lambda: datetime.now().isoformat())

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary for serialization."""
        return {
            'event': self.event_type.value,
            'n': self.n,
            't': self.t,
            'k': self.k,
            'data': self.data,
            'timestamp': self.timestamp,
        }

    def to_json(self) -> str:
        """Convert to JSON string."""
        return json.dumps(self.to_dict(), sort_keys=True)


class EventLog:
    """
    Ordered event history with subscribers.

    Usage:
        log = EventLog()
        log.subscribe(EventType.GROW, on_grow)
        log.publish(EventType.GROW, n=3, t=0.2, k=0.1, new_k=0.2)
    """

    def __init__(self):
        self.history: List[Event] = []
        self._subscribers: Dict[Optional[EventType], List[Callable[[Event], None]]] = {}

    def subscribe(self, event_type: Optional[EventType], handler: Callable[[Event], None]):
        """Register a handler; ``None`` subscribes to every event type."""
        self._subscribers.setdefault(event_type, []).append(handler)

    def publish(self, event_type: EventType, n: int, t: float, k: float, **data) -> Event:
        """Record an event and notify subscribers."""
        event = Event(event_type=event_type, n=n, t=float(t), k=float(k), data=data)
        self.history.append(event)
        for handler in self._subscribers.get(event_type, []) + self._subscribers.get(None, []):
            handler(event)
        return event

    def count(self, event_type: EventType) -> int:
        return sum(1 for e in self.history if e.event_type is event_type)

    def of_type(self, event_type: EventType) -> List[Event]:
        return [e for e in self.history if e.event_type is event_type]

    def write(self, path: Path):
        """Write the history as JSON lines."""
        path = Path(path)
        with open(path, 'w') as f:
            for event in self.history:
                f.write(event.to_json() + "\n")
        logger.debug("wrote %d events to %s", len(self.history), path)
