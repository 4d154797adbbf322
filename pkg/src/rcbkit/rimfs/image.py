"""
Read-only flat-memory file system images.

An image is a 16-byte header, a table of ``(file_id, offset, size)`` entries
and the payloads, each padded to the image alignment. A mounted image never
copies payload bytes: ``lookup`` returns device addresses and ``view`` returns
slices of the mounted buffer.

Classes
-------
RimfsImage: A mounted image.
BuildError, MountError, NotFound: Errors.

Functions
---------
build_image: Serialise a list of files into an image.
mount: Mount an image buffer at a base address.
lookup: Address and size of a file in a mounted image.
"""

import struct

from .._errors import RcbkitError

RIMFS_MAGIC = 0x53464D52  # "RMFS"
RIMFS_VERSION = 1
DEFAULT_ALIGNMENT = 64

_HEADER = struct.Struct("<IHHII")
_ENTRY = struct.Struct("<III")


class BuildError(RcbkitError):
    pass


class MountError(RcbkitError):
    pass


class NotFound(RcbkitError):
    def __init__(self, file_id: int):
        self.file_id = file_id
        super().__init__(f"file {file_id} is not in the image")


def _align(n: int, a: int) -> int:
    return (n + a - 1) // a * a


def _is_pow2(n: int) -> bool:
    return n > 0 and n & (n - 1) == 0


def build_image(files, alignment: int = DEFAULT_ALIGNMENT) -> bytes:
    """
    Build an image from ``(file_id, payload)`` pairs, keeping their order.

    Parameters
    ----------
    files : iterable of (int, bytes)
        File IDs and payloads. Empty payloads are allowed.
    alignment : int
        Power-of-two alignment of the table region and of every payload.

    Returns
    -------
    bytes
        The image.

    Raises
    ------
    BuildError
        On a duplicate or out-of-range ID, a bad alignment, or an image above 4 GiB.
    """
    files = [(int(fid), bytes(data)) for fid, data in files]
    if not _is_pow2(alignment):
        raise BuildError(f"alignment must be a power of two, got {alignment}")
    seen = set()
    for fid, _ in files:
        if not 0 <= fid <= 0xFFFF_FFFF:
            raise BuildError(f"file id {fid} does not fit 32 bits")
        if fid in seen:
            raise BuildError(f"duplicate file id {fid}")
        seen.add(fid)

    offset = _align(_HEADER.size + _ENTRY.size * len(files), alignment)
    entries = []
    for fid, data in files:
        entries.append((fid, offset, len(data)))
        offset += _align(len(data), alignment)
    if offset > 0xFFFF_FFFF:
        raise BuildError(f"image of {offset} bytes exceeds 32-bit offsets")

    out = bytearray(offset)
    _HEADER.pack_into(out, 0, RIMFS_MAGIC, RIMFS_VERSION, 0, len(files), alignment)
    for i, (entry, (_, data)) in enumerate(zip(entries, files)):
        _ENTRY.pack_into(out, _HEADER.size + i * _ENTRY.size, *entry)
        out[entry[1] : entry[1] + len(data)] = data
    return bytes(out)


class RimfsImage:
    """
    A mounted, immutable image.

    Parameters
    ----------
    buf : bytes-like
        The image bytes; kept by reference, never copied.
    base : int
        Device address at which ``buf`` lives.

    Attributes
    ----------
    bytes_copied : int
        Payload bytes duplicated so far; only ``read`` increments it.
    """

    def __init__(self, buf, base: int = 0):
        view = memoryview(buf).cast("B").toreadonly()
        if len(view) < _HEADER.size:
            raise MountError(f"image of {len(view)} bytes is shorter than its header")
        magic, version, _, count, alignment = _HEADER.unpack_from(view, 0)
        if magic != RIMFS_MAGIC:
            raise MountError(f"bad magic {magic:#010x}")
        if version != RIMFS_VERSION:
            raise MountError(f"unsupported version {version}")
        if not _is_pow2(alignment):
            raise MountError(f"alignment {alignment} is not a power of two")
        table_end = _HEADER.size + _ENTRY.size * count
        if table_end > len(view):
            raise MountError(f"file table of {count} entries is truncated")

        self.base = base
        self.alignment = alignment
        self.bytes_copied = 0
        self._view = view
        self._entries: dict[int, tuple[int, int]] = {}
        for fid, offset, size in _ENTRY.iter_unpack(view[_HEADER.size : table_end]):
            if fid in self._entries:
                raise MountError(f"duplicate file id {fid}")
            if offset % alignment or offset < table_end or offset + size > len(view):
                raise MountError(f"entry {fid} has invalid extent {offset}+{size}")
            self._entries[fid] = (offset, size)

        spans = sorted(self._entries.values())
        for (a_off, a_size), (b_off, _) in zip(spans, spans[1:]):
            if a_off + a_size > b_off:
                raise MountError(f"overlapping entries at offset {b_off}")

    def __repr__(self) -> str:
        return (
            f"RimfsImage(base={self.base:#x}, files={len(self._entries)}, "
            f"size={len(self._view)}, alignment={self.alignment})"
        )

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, file_id) -> bool:
        return file_id in self._entries

    @property
    def file_ids(self) -> list[int]:
        return list(self._entries)

    @property
    def size(self) -> int:
        return len(self._view)

    def _entry(self, file_id: int) -> tuple[int, int]:
        try:
            return self._entries[file_id]
        except KeyError:
            raise NotFound(file_id) from None

    def lookup(self, file_id: int) -> tuple[int, int]:
        """Return ``(device address, size)`` of a file, usable as a DMA source."""
        offset, size = self._entry(file_id)
        return self.base + offset, size

    def view(self, file_id: int) -> memoryview:
        """Zero-copy read-only view of a payload."""
        offset, size = self._entry(file_id)
        return self._view[offset : offset + size]

    def read(self, file_id: int) -> bytes:
        """Copy of a payload; counted in ``bytes_copied``."""
        data = self.view(file_id).tobytes()
        self.bytes_copied += len(data)
        return data


def mount(buf, base: int = 0) -> RimfsImage:
    return RimfsImage(buf, base)


def lookup(img: RimfsImage, file_id: int) -> tuple[int, int]:
    return img.lookup(file_id)
