"""
Mediated control path.

``CrossingDriver`` wraps any HalDriver and charges a fixed penalty for every
primitive that issues a command, the cost a privilege crossing adds when the
control path runs through an operating-system driver instead of directly.
"""

from .driver import DmaDescriptor, HalDriver


class CrossingDriver(HalDriver):
    """
    A HalDriver whose command-issuing primitives each cost ``penalty`` extra ticks.

    ``read32`` and ``wait_dma`` are not charged. Attributes the wrapped driver
    offers beyond the primitives (host memory access, configuration) are
    forwarded unchanged.
    """

    def __init__(self, inner: HalDriver, penalty: int):
        if penalty < 0:
            raise ValueError(f"crossing penalty must be >= 0, got {penalty}")
        self.inner = inner
        self.penalty = penalty
        self.crossings = 0

    def __repr__(self) -> str:
        return f"CrossingDriver({self.inner!r}, penalty={self.penalty}, crossings={self.crossings})"

    def __getattr__(self, name):
        return getattr(self.inner, name)

    def _cross(self):
        self.crossings += 1

    def write32(self, addr, value):
        self._cross()
        self.inner.write32(addr, value)

    def read32(self, addr):
        return self.inner.read32(addr)

    def write_block(self, addr, data):
        self._cross()
        self.inner.write_block(addr, data)

    def initiate_dma(self, desc: DmaDescriptor):
        self._cross()
        return self.inner.initiate_dma(desc)

    def wait_dma(self, handle):
        self.inner.wait_dma(handle)

    def poll_register_masked(self, addr, mask, expected, timeout_us):
        self._cross()
        return self.inner.poll_register_masked(addr, mask, expected, timeout_us)

    def flush_cache(self, addr, length):
        self._cross()
        self.inner.flush_cache(addr, length)

    def invalidate_cache(self, addr, length):
        self._cross()
        self.inner.invalidate_cache(addr, length)

    def now(self) -> int:
        return self.inner.now() + self.crossings * self.penalty

    def idle(self) -> bool:
        return self.inner.idle()
