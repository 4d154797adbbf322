import io

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rcbkit.net import frame as frame_module
from rcbkit.net.frame import (
    HEADER_SIZE,
    MAX_PAYLOAD,
    ErrorCode,
    Frame,
    FrameError,
    IntegrityError,
    MsgType,
    ack,
    decode_frame,
    encode_frame,
    nack,
    read_frame,
    write_frame,
)

frames = st.builds(
    Frame,
    st.sampled_from(MsgType),
    st.binary(max_size=512),
    st.integers(0, 0xFFFF),
)


def test_ack_is_16_bytes():
    data = encode_frame(ack())
    assert len(data) == 16
    assert HEADER_SIZE == 12
    assert decode_frame(data) == ack()


def test_nack_carries_code():
    frame = decode_frame(encode_frame(nack(ErrorCode.NOT_PROVISIONED)))
    assert frame.msg_type is MsgType.NACK
    assert frame.error_code == ErrorCode.NOT_PROVISIONED
    assert ack().error_code is None


@settings(max_examples=1000, deadline=None)
@given(frames, st.data())
def test_single_byte_corruption_is_detected(frame, data):
    """Test any flipped byte after the magic is rejected"""
    buf = bytearray(encode_frame(frame))
    assert decode_frame(bytes(buf)) == frame
    pos = data.draw(st.integers(4, len(buf) - 1))
    buf[pos] ^= data.draw(st.integers(1, 255))
    with pytest.raises(FrameError):
        decode_frame(bytes(buf))


def test_payload_corruption_is_integrity_error():
    buf = bytearray(encode_frame(Frame(MsgType.RUN, b"abcdefgh")))
    buf[HEADER_SIZE + 3] ^= 0x40
    with pytest.raises(IntegrityError) as exc:
        decode_frame(bytes(buf))
    assert exc.value.msg_type == MsgType.RUN


def test_decode_errors():
    good = encode_frame(Frame(MsgType.RUN, b"xyz"))
    with pytest.raises(FrameError) as exc:
        decode_frame(good[:-1])
    assert exc.value.kind == "Truncated"
    with pytest.raises(FrameError) as exc:
        decode_frame(b"\0" + good[1:])
    assert exc.value.kind == "Magic"
    with pytest.raises(FrameError) as exc:
        encode_frame(Frame(MsgType.RUN, bytes(MAX_PAYLOAD + 1)))
    assert exc.value.kind == "TooLarge"


def test_unknown_type_with_valid_crc():
    with pytest.raises(FrameError) as exc:
        decode_frame(encode_frame(Frame(99)))
    assert exc.value.kind == "Type"
    assert not isinstance(exc.value, IntegrityError)


def test_stream_resynchronises():
    """Test a reader skips garbage before the next magic"""
    stream = io.BytesIO()
    stream.write(b"junk!")
    write_frame(stream, Frame(MsgType.RUN, b"one"))
    write_frame(stream, Frame(MsgType.RUN, b"two"))
    stream.seek(0)
    first, skipped = read_frame(stream)
    assert (first.payload, skipped) == (b"one", 5)
    second, skipped = read_frame(stream)
    assert (second.payload, skipped) == (b"two", 0)
    with pytest.raises(EOFError):
        read_frame(stream)


def test_stream_consumes_corrupt_frame():
    stream = io.BytesIO()
    bad = bytearray(encode_frame(Frame(MsgType.RUN, b"payload")))
    bad[-1] ^= 0xFF
    stream.write(bytes(bad))
    write_frame(stream, Frame(MsgType.TELEMETRY_REQ))
    stream.seek(0)
    with pytest.raises(IntegrityError):
        read_frame(stream)
    frame, _ = read_frame(stream)
    assert frame.msg_type is MsgType.TELEMETRY_REQ


def test_stream_skips_oversized_frame(monkeypatch):
    """Test a frame above the payload limit is consumed whole so the next one is read"""
    stream = io.BytesIO()
    write_frame(stream, Frame(MsgType.RUN, bytes(range(64))))
    write_frame(stream, Frame(MsgType.TELEMETRY_REQ))
    stream.seek(0)
    monkeypatch.setattr(frame_module, "MAX_PAYLOAD", 16)
    with pytest.raises(FrameError) as exc:
        read_frame(stream)
    assert exc.value.kind == "TooLarge"
    frame, skipped = read_frame(stream)
    assert (frame.msg_type, skipped) == (MsgType.TELEMETRY_REQ, 0)
    with pytest.raises(EOFError):
        read_frame(stream)


def test_oversized_frame_cut_short(monkeypatch):
    data = encode_frame(Frame(MsgType.RUN, bytes(64)))
    monkeypatch.setattr(frame_module, "MAX_PAYLOAD", 16)
    with pytest.raises(EOFError):
        read_frame(io.BytesIO(data[:40]))
