"""
Enumeration Budget
Trips when an operation enumerates more words or runs longer than allowed.

Every exhaustive operation (word tables, census, Monte Carlo trials) charges
the guard before doing the work, so a too-deep request fails fast instead of
exhausting memory.
"""
import logging
import threading
import time
from dataclasses import dataclass
from enum import Enum
from typing import Optional

from config import settings

logger = logging.getLogger(__name__)


class BudgetState(Enum):
    OPEN = "open"          # Work allowed
    TRIPPED = "tripped"    # Last charge crossed the limit; the next charge that fits re-opens


class BudgetExceeded(RuntimeError):
    """Raised when a charge crosses the configured budget."""

    def __init__(self, name: str, used: int, limit: int):
        super().__init__(f"Budget '{name}' exceeded: {used} > {limit} units")
        self.name = name
        self.used = used
        self.limit = limit


@dataclass
class BudgetConfig:
    """Configuration for an enumeration budget"""
    max_words: int = 5_000_000
    max_seconds: Optional[float] = None


class EnumerationBudget:
    """
    Work guard shared by the enumerating operations.

    A single charge larger than ``max_words`` trips the guard and is refused;
    the next charge that fits re-opens it. The time limit is measured from
    the last reset.
    """

    def __init__(self, name: str = "default", config: BudgetConfig = None):
        self.name = name
        self.config = config or BudgetConfig(max_words=settings.MAX_WORDS)

        self._state = BudgetState.OPEN
        self._largest_charge = 0
        self._total = 0
        self._started = time.monotonic()
        self._lock = threading.RLock()

    @property
    def state(self) -> BudgetState:
        with self._lock:
            return self._state

    @property
    def total(self) -> int:
        """Units charged since the last reset"""
        with self._lock:
            return self._total

    def allows(self, units: int) -> bool:
        """Check whether a charge of ``units`` would pass without tripping"""
        return units <= self.config.max_words

    def charge(self, units: int) -> None:
        """
        Record ``units`` of work.

        Raises:
            BudgetExceeded: if the guard is tripped or the charge crosses a limit
        """
        with self._lock:
            if units > self.config.max_words:
                self._trip(f"charge of {units} units over limit {self.config.max_words}")
                raise BudgetExceeded(self.name, units, self.config.max_words)

            if self.config.max_seconds is not None:
                elapsed = time.monotonic() - self._started
                if elapsed > self.config.max_seconds:
                    self._trip(f"{elapsed:.1f}s elapsed, limit {self.config.max_seconds}s")
                    raise BudgetExceeded(self.name, int(elapsed), int(self.config.max_seconds))

            if self._state == BudgetState.TRIPPED:
                # a charge that fits re-arms the guard
                self._state = BudgetState.OPEN
                logger.info("Budget '%s' OPEN - accepted %d units", self.name, units)

            self._total += units
            self._largest_charge = max(self._largest_charge, units)

    def _trip(self, reason: str) -> None:
        if self._state != BudgetState.TRIPPED:
            self._state = BudgetState.TRIPPED
            logger.warning("Budget '%s' TRIPPED - %s", self.name, reason)

    def reset(self) -> None:
        """Re-arm the guard"""
        with self._lock:
            self._state = BudgetState.OPEN
            self._largest_charge = 0
            self._total = 0
            self._started = time.monotonic()

    def get_stats(self) -> dict:
        with self._lock:
            return {
                "name": self.name,
                "state": self._state.value,
                "total": self._total,
                "largest_charge": self._largest_charge,
                "max_words": self.config.max_words,
            }


# Global budget instance
enumeration_budget = EnumerationBudget(name="enumeration")
