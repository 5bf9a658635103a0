#!/usr/bin/env python3
"""
Run Monitor - Tracks where a run spends its time
Times the solver phases (solve, estimate, adapt) and collects the
counters reported in summary.txt (solves, clamped_feet).
"""

import time
from collections import defaultdict
from contextlib import contextmanager
from dataclasses import dataclass
from datetime import datetime
from typing import Dict, Iterator, List, Optional

# Optional psutil for resource monitoring
try:
    import psutil
    PSUTIL_AVAILABLE = True
except ImportError:
    PSUTIL_AVAILABLE = False

BYTES_PER_MB = 1024 * 1024


@dataclass
class PhaseMetric:
    """A single timed phase."""
    phase: str
    seconds: float
    timestamp: str


class RunMonitor:
    """
    Collects phase timings and run counters.

    Features:
    - Context-manager timer per phase
    - Totals, counts and averages per phase
    - Free-form counters (steps, dof-steps, rejections)
    """

    def __init__(self, history_size: int = 10000):
        self.history: List[PhaseMetric] = []
        self.history_size = history_size
        self.totals: Dict[str, float] = defaultdict(float)
        self.counts: Dict[str, int] = defaultdict(int)
        self.counters: Dict[str, float] = defaultdict(float)
        self.start_time = time.perf_counter()

    @contextmanager
    def timer(self, phase: str) -> Iterator[None]:
        start = time.perf_counter()
        try:
            yield
        finally:
            self.record(phase, time.perf_counter() - start)

    def record(self, phase: str, seconds: float):
        self.totals[phase] += seconds
        self.counts[phase] += 1
        if len(self.history) < self.history_size:
            self.history.append(PhaseMetric(phase, seconds, datetime.now().isoformat()))

    def increment(self, name: str, amount: float = 1):
        self.counters[name] += amount

    def average(self, phase: str) -> Optional[float]:
        if not self.counts.get(phase):
            return None
        return self.totals[phase] / self.counts[phase]

    def memory_mb(self) -> Optional[float]:
        """Resident set size of this process, None without psutil."""
        if not PSUTIL_AVAILABLE:
            return None
        return psutil.Process().memory_info().rss / BYTES_PER_MB

    @property
    def elapsed(self) -> float:
        return time.perf_counter() - self.start_time

    def summary(self) -> Dict[str, Dict[str, float]]:
        """Per-phase totals, counts and averages."""
        return {
            phase: {
                'total_seconds': self.totals[phase],
                'count': self.counts[phase],
                'average_seconds': self.totals[phase] / self.counts[phase],
            }
            for phase in sorted(self.totals)
        }
