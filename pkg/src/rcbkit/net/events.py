"""
Event dispatch, the software counterpart of an interrupt controller.

Producers (the simulator's completion logic) ``post`` event IDs into a
single-producer single-consumer queue; the consumer drains it with
``dispatch_pending`` or blocks on one ID with ``wait_for``. Every event is
delivered to exactly one handler exactly once. Events without a handler are
counted, never dropped silently.
"""

import queue
from collections.abc import Callable
from dataclasses import dataclass

from .._logging import get_logger

logger = get_logger(__name__)


@dataclass(frozen=True)
class Event:
    event_id: int
    payload: object = None


class EventDispatcher:
    """Maps event IDs to handlers and queues posted events."""

    def __init__(self):
        self._handlers: dict[int, Callable] = {}
        self._queue: queue.SimpleQueue = queue.SimpleQueue()
        self.unknown = 0
        self.delivered = 0

    def __repr__(self) -> str:
        return (
            f"EventDispatcher(handlers={len(self._handlers)}, delivered={self.delivered}, "
            f"unknown={self.unknown})"
        )

    def register_handler(self, event_id: int, handler: Callable) -> None:
        """Register ``handler`` for ``event_id``, replacing any previous one."""
        self._handlers[event_id] = handler

    def unregister_handler(self, event_id: int) -> None:
        self._handlers.pop(event_id, None)

    def dispatch_event(self, event) -> bool:
        """
        Deliver one event now.

        Parameters
        ----------
        event : Event or int
            The event, or a bare event ID.

        Returns
        -------
        bool
            True if a handler ran, False if the event was unknown.
        """
        if not isinstance(event, Event):
            event = Event(int(event))
        handler = self._handlers.get(event.event_id)
        if handler is None:
            self.unknown += 1
            logger.debug("no handler for event %#x", event.event_id)
            return False
        self.delivered += 1
        handler(event)
        return True

    def post(self, event) -> None:
        """Queue an event for later delivery; safe to call from another thread."""
        self._queue.put(event if isinstance(event, Event) else Event(int(event)))

    def pending(self) -> int:
        return self._queue.qsize()

    def dispatch_pending(self) -> int:
        """Deliver every queued event; returns how many were taken off the queue."""
        count = 0
        while True:
            try:
                event = self._queue.get_nowait()
            except queue.Empty:
                return count
            self.dispatch_event(event)
            count += 1

    def wait_for(self, event_id: int, idle: Callable[[], bool] | None = None) -> bool:
        """
        Deliver queued events until ``event_id`` has been seen.

        Parameters
        ----------
        event_id : int
            The event to wait for.
        idle : callable, optional
            Called when the queue is empty to let the producer make progress;
            returns False once it has nothing left to produce.

        Returns
        -------
        bool
            True once the event was delivered, False if it can no longer arrive.
        """
        while True:
            try:
                event = self._queue.get_nowait()
            except queue.Empty:
                if idle is None or not idle():
                    return False
                continue
            self.dispatch_event(event)
            if event.event_id == event_id:
                return True
