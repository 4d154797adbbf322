"""
Latency statistics over virtual-clock samples.
"""

from dataclasses import asdict, dataclass

import numpy as np

from .._errors import RcbkitError


class StatsError(RcbkitError):
    pass


@dataclass(frozen=True)
class LatencyStats:
    """
    Summary of one latency series.

    ``std`` is the population standard deviation and ``cv`` is ``std / mean``
    (0 when the mean is 0).
    """

    count: int
    mean: float
    std: float
    p50: float
    p99: float
    max: float
    cv: float

    def to_dict(self) -> dict:
        return asdict(self)


def compute_stats(samples, warmup: int = 0) -> LatencyStats:
    """
    Statistics over ``samples[warmup:]``.

    Parameters
    ----------
    samples : array-like of numbers
        Latencies in ticks.
    warmup : int
        Leading samples to discard.

    Raises
    ------
    StatsError
        If no sample is left after the warm-up or ``warmup`` is negative.
    """
    if warmup < 0:
        raise StatsError(f"warmup must be >= 0, got {warmup}")
    values = np.asarray(samples, dtype=np.float64)[warmup:]
    if values.size == 0:
        raise StatsError(f"{len(samples)} samples leave nothing after {warmup} warm-up iterations")
    mean = float(values.mean())
    std = float(values.std(ddof=0))
    p50, p99 = (float(v) for v in np.percentile(values, [50, 99]))
    return LatencyStats(
        count=int(values.size),
        mean=mean,
        std=std,
        p50=p50,
        p99=p99,
        max=float(values.max()),
        cv=std / mean if mean != 0 else 0.0,
    )
