import threading
from unittest.mock import Mock

from rcbkit.net.events import Event, EventDispatcher
from rcbkit.net.telemetry import Telemetry


def test_registered_handler_runs_once():
    events = EventDispatcher()
    handler = Mock()
    events.register_handler(5, handler)
    assert events.dispatch_event(5)
    handler.assert_called_once_with(Event(5))


def test_unknown_event_is_counted():
    events = EventDispatcher()
    assert not events.dispatch_event(99)
    assert events.unknown == 1


def test_two_dispatches():
    events = EventDispatcher()
    handler = Mock()
    events.register_handler(5, handler)
    events.post(5)
    events.post(Event(5, payload="x"))
    assert events.pending() == 2
    assert events.dispatch_pending() == 2
    assert handler.call_count == 2
    assert events.delivered == 2


def test_unregister():
    events = EventDispatcher()
    handler = Mock()
    events.register_handler(5, handler)
    events.unregister_handler(5)
    events.dispatch_event(5)
    handler.assert_not_called()
    assert events.unknown == 1


def test_wait_for_drives_idle():
    """Test wait_for keeps calling idle until the awaited event is posted"""
    events = EventDispatcher()
    calls = []

    def idle():
        calls.append(1)
        if len(calls) == 3:
            events.post(7)
        return len(calls) < 5

    events.register_handler(7, Mock())
    assert events.wait_for(7, idle)
    assert len(calls) == 3
    assert not events.wait_for(8, idle)
    assert not events.wait_for(8)


def test_posts_from_another_thread():
    events = EventDispatcher()
    seen = []
    events.register_handler(1, seen.append)
    threads = [threading.Thread(target=lambda: [events.post(1) for _ in range(100)]) for _ in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    events.dispatch_pending()
    assert len(seen) == 400


def test_telemetry_payload():
    telemetry = Telemetry()
    telemetry.record_run({"input": 10, "compute": 5, "output": 3})
    telemetry.record_error(7)
    decoded = Telemetry.unpack(telemetry.pack())
    assert decoded == telemetry
    assert decoded.inferences == 1
    assert len(telemetry.pack()) == 52
