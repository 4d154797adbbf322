"""
CRC-32 (IEEE 802.3): polynomial 0x04C11DB7 processed reflected (0xEDB88320),
initial value 0xFFFFFFFF, final XOR 0xFFFFFFFF. Check value for ``b"123456789"``
is 0xCBF43926.
"""

POLY_REFLECTED = 0xEDB88320
CHECK_VALUE = 0xCBF43926
# crc32(data + crc32(data).to_bytes(4, "little")) for any data
RESIDUE = 0x2144DF1C


def crc32_bitwise(data: bytes, crc: int = 0) -> int:
    """Bit-at-a-time reference implementation."""
    crc ^= 0xFFFF_FFFF
    for byte in bytes(data):
        crc ^= byte
        for _ in range(8):
            crc = (crc >> 1) ^ (POLY_REFLECTED if crc & 1 else 0)
    return crc ^ 0xFFFF_FFFF


def _make_table() -> list[int]:
    table = []
    for n in range(256):
        c = n
        for _ in range(8):
            c = (c >> 1) ^ (POLY_REFLECTED if c & 1 else 0)
        table.append(c)
    return table


TABLE = _make_table()


def crc32(data: bytes, crc: int = 0) -> int:
    """
    Table-driven CRC-32.

    Parameters
    ----------
    data : bytes-like
        Input bytes.
    crc : int
        Running value from a previous call, for incremental use.

    Returns
    -------
    int
        The 32-bit checksum.
    """
    table = TABLE
    crc ^= 0xFFFF_FFFF
    for byte in bytes(data):
        crc = table[(crc ^ byte) & 0xFF] ^ (crc >> 8)
    return crc ^ 0xFFFF_FFFF


def verify(data: bytes, checksum: int) -> bool:
    """True if ``checksum`` is the CRC-32 of ``data``."""
    return crc32(data + (checksum & 0xFFFF_FFFF).to_bytes(4, "little")) == RESIDUE
